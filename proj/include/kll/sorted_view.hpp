/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

#ifndef KLL_SORTED_VIEW_HPP_
#define KLL_SORTED_VIEW_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace kll {

struct RankEstimate {
  std::uint64_t value = 0;  // weight of stored items < q
  std::uint64_t n = 0;      // total weight
  double normalized() const { return n == 0 ? 0.0 : static_cast<double>(value) / static_cast<double>(n); }
};

inline void check_phi(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must lie in [0, 1]");
}

// Stored items with their weights, sorted, plus inclusive cumulative weights.
template <class T>
class SortedView {
 public:
  struct Entry {
    T item;
    std::uint64_t weight;
  };

  explicit SortedView(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const Entry& a, const Entry& b) { return a.item < b.item; });
    cum_.reserve(entries_.size());
    std::uint64_t acc = 0;
    for (const auto& e : entries_) cum_.push_back(acc += e.weight);
  }

  std::uint64_t total_weight() const { return cum_.empty() ? 0 : cum_.back(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::uint64_t rank(const T& q) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), q,
                               [](const Entry& e, const T& v) { return e.item < v; });
    const auto i = static_cast<std::size_t>(it - entries_.begin());
    return i == 0 ? 0 : cum_[i - 1];
  }

  // Smallest stored item whose cumulative weight reaches ceil(phi W).
  const T& quantile(double phi) const {
    check_phi(phi);
    if (entries_.empty()) throw std::runtime_error("quantile of an empty sketch");
    const long double target = std::ceil(static_cast<long double>(phi) * total_weight());
    const auto t = static_cast<std::uint64_t>(target);
    auto it = std::lower_bound(cum_.begin(), cum_.end(), t);
    if (it == cum_.end()) --it;
    return entries_[static_cast<std::size_t>(it - cum_.begin())].item;
  }

  // rank / W for ascending queries, in one merge pass.
  std::vector<double> cdf(std::span<const T> queries) const {
    if (!std::is_sorted(queries.begin(), queries.end())) throw std::invalid_argument("cdf queries must be sorted");
    std::vector<double> out;
    out.reserve(queries.size());
    const double w = static_cast<double>(total_weight());
    std::size_t i = 0;
    for (const T& q : queries) {
      while (i < entries_.size() && entries_[i].item < q) ++i;
      const std::uint64_t r = i == 0 ? 0 : cum_[i - 1];
      out.push_back(w == 0 ? 0.0 : static_cast<double>(r) / w);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> cum_;
};

}  // namespace kll

#endif  // KLL_SORTED_VIEW_HPP_
