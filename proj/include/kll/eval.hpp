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

#ifndef KLL_EVAL_HPP_
#define KLL_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kll/params.hpp"

namespace kll {

enum class StreamKind { Sorted, Shuffled, Trending, Brownian, File };

StreamKind parse_stream_kind(std::string_view s);
std::string_view to_string(StreamKind k);

struct StreamSpec {
  StreamKind kind = StreamKind::Shuffled;
  std::uint64_t n = 1000;
  std::uint64_t seed = 0;
  double noise = 1.0;  // A, trending
  double trend = 1.0;  // B, trending
  double step = 1.0;   // brownian
  std::string path;    // file
};

// Sorted: 1..n. Shuffled: a permutation of 1..n. Trending: B t/n + A u_t.
// Brownian: running sum of step u_t. u_t is uniform on [-1/2, 1/2].
// File: one number per line (or "<weight>\t<item>", weight ignored here).
std::vector<double> gen_stream(const StreamSpec& spec);

// Uniform integer weights in [1, max_weight].
std::vector<std::uint64_t> gen_weights(std::uint64_t n, std::uint64_t max_weight, std::uint64_t seed);

// Exact ranks of a retained (optionally weighted) stream.
template <class T>
class ExactRanks {
 public:
  explicit ExactRanks(std::vector<T> items) : ExactRanks(std::move(items), {}) {}

  ExactRanks(std::vector<T> items, const std::vector<std::uint64_t>& weights) {
    if (!weights.empty() && weights.size() != items.size()) throw std::invalid_argument("weights/items size mismatch");
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return items[a] < items[b]; });
    sorted_.reserve(items.size());
    cum_.reserve(items.size());
    std::uint64_t acc = 0;
    for (std::size_t i : order) {
      sorted_.push_back(items[i]);
      cum_.push_back(acc += weights.empty() ? 1 : weights[i]);
    }
  }

  std::uint64_t total() const { return cum_.empty() ? 0 : cum_.back(); }
  const std::vector<T>& sorted() const { return sorted_; }

  // weight strictly below q
  std::uint64_t rank(const T& q) const {
    const auto i = static_cast<std::size_t>(std::lower_bound(sorted_.begin(), sorted_.end(), q) - sorted_.begin());
    return i == 0 ? 0 : cum_[i - 1];
  }

  // Items at evenly spaced weighted positions (j + 1/2) W / q_count.
  std::vector<T> query_points(std::size_t q_count) const {
    if (q_count < 1) throw std::invalid_argument("q_count must be at least 1");
    std::vector<T> out;
    if (sorted_.empty()) return out;
    out.reserve(q_count);
    const long double w = static_cast<long double>(total());
    for (std::size_t j = 0; j < q_count; ++j) {
      const auto target = static_cast<std::uint64_t>(std::floor((j + 0.5L) * w / q_count));
      auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
      if (it == cum_.end()) --it;
      out.push_back(sorted_[static_cast<std::size_t>(it - cum_.begin())]);
    }
    return out;
  }

 private:
  std::vector<T> sorted_;
  std::vector<std::uint64_t> cum_;
};

// max over q_count quantile points of |estimated rank - exact rank| / W.
template <class Sketch, class T>
double max_quantile_error(const Sketch& s, const ExactRanks<T>& oracle, std::size_t q_count = 1000) {
  if (q_count < 1) throw std::invalid_argument("q_count must be at least 1");
  if (oracle.total() == 0) return 0.0;
  const auto queries = oracle.query_points(q_count);
  double worst = 0.0;
  auto consider = [&](const T& q, std::uint64_t est) {
    const double diff = std::abs(static_cast<double>(est) - static_cast<double>(oracle.rank(q)));
    worst = std::max(worst, diff);
  };
  if constexpr (requires { s.sorted_view(); }) {
    const auto view = s.sorted_view();
    for (const T& q : queries) consider(q, view.rank(q));
  } else {
    for (const T& q : queries) consider(q, s.rank(q).value);
  }
  return worst / static_cast<double>(oracle.total());
}

enum class Backend { List, Packed };
Backend parse_backend(std::string_view s);

struct VariantSpec {
  VariantFlags flags;
  WeightedMode mode = WeightedMode::None;
  std::string label() const;
};

struct ExperimentMatrix {
  std::vector<VariantSpec> variants;
  std::vector<std::uint32_t> budgets;
  std::vector<StreamSpec> streams;
  std::uint32_t trials = 50;
  std::uint64_t master_seed = 1;
  double c = kDefaultDecay;
  Backend backend = Backend::Packed;
  std::uint64_t max_weight = 1;  // > 1 gives weighted streams
  std::size_t q_count = 1000;
  unsigned threads = 1;
};

struct EvalRecord {
  std::string variant;
  std::uint32_t budget = 0;
  StreamKind kind = StreamKind::Shuffled;
  std::uint64_t n = 0;
  std::uint32_t trials = 0;
  double mean_max_err = 0;
  double p95_max_err = 0;
  double compactions = 0;       // mean per trial
  double discarded_weight = 0;  // mean per trial
};

struct TrialResult {
  double max_err = 0;
  std::uint64_t compactions = 0;
  std::uint64_t discarded = 0;
};

// Feeds one stream into a fresh sketch and measures it. Unweighted variants
// receive weighted items expanded into unit copies.
TrialResult run_trial(const VariantSpec& v, std::uint32_t budget, double c, Backend backend, std::uint64_t seed,
                      const std::vector<double>& items, const std::vector<std::uint64_t>& weights,
                      const ExactRanks<double>& oracle, std::size_t q_count);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const EvalRecord& r);

// Runs every (variant, budget, stream) cell for the given number of trials.
// Each trial's stream is shared by all cells of that stream. Rows are
// written to csv (if given) as each stream completes.
std::vector<EvalRecord> run_experiment(const ExperimentMatrix& m, std::ostream* csv = nullptr);

}  // namespace kll

#endif  // KLL_EVAL_HPP_
