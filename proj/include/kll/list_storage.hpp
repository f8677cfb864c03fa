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

#ifndef KLL_LIST_STORAGE_HPP_
#define KLL_LIST_STORAGE_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "kll/compactor.hpp"

namespace kll {

// One vector per level. Index 0 is the lowest retained level.
template <class T>
class ListStorage {
 public:
  static constexpr const char* kName = "list";

  explicit ListStorage(std::size_t /*slots_hint*/ = 0) { levels_.emplace_back(); }

  std::size_t num_levels() const { return levels_.size(); }
  std::span<const T> level(std::size_t i) const { return levels_.at(i).buffer; }
  std::size_t level_size(std::size_t i) const { return levels_.at(i).buffer.size(); }
  bool level_sorted(std::size_t i) const { return levels_.at(i).sorted; }
  LevelState<T>& state(std::size_t i) { return levels_.at(i).state; }
  const LevelState<T>& state(std::size_t i) const { return levels_.at(i).state; }
  const Compactor<T>& compactor(std::size_t i) const { return levels_.at(i); }

  void insert(std::size_t i, const T& x, std::size_t copies = 1) {
    auto& c = levels_.at(i);
    if (i == 0) {
      for (std::size_t j = 0; j < copies; ++j) c.append(x);
      return;
    }
    auto at = std::upper_bound(c.buffer.begin(), c.buffer.end(), x);
    c.buffer.insert(at, copies, x);
  }

  void insert_run(std::size_t i, std::span<const T> run) {
    auto& c = levels_.at(i);
    if (i == 0) {
      for (const T& x : run) c.append(x);
      return;
    }
    const auto old = static_cast<std::ptrdiff_t>(c.buffer.size());
    c.buffer.insert(c.buffer.end(), run.begin(), run.end());
    std::inplace_merge(c.buffer.begin(), c.buffer.begin() + old, c.buffer.end());
  }

  void sort_level(std::size_t i) { levels_.at(i).sort(); }

  void compact_range(std::size_t i, IndexRange r, KeepParity p) {
    if (i + 1 >= levels_.size()) throw std::logic_error("no level above");
    std::vector<T> promoted = compact_full(levels_[i], p, r);
    auto& up = levels_[i + 1].buffer;
    std::vector<T> merged;
    merged.reserve(up.size() + promoted.size());
    std::merge(std::make_move_iterator(up.begin()), std::make_move_iterator(up.end()),
               std::make_move_iterator(promoted.begin()), std::make_move_iterator(promoted.end()),
               std::back_inserter(merged));
    up = std::move(merged);
  }

  void compact_pair(std::size_t i, std::size_t idx, bool keep_larger) {
    if (i + 1 >= levels_.size()) throw std::logic_error("no level above");
    auto& buf = levels_[i].buffer;
    T kept = std::move(buf[idx + (keep_larger ? 1 : 0)]);
    const auto at = buf.begin() + static_cast<std::ptrdiff_t>(idx);
    buf.erase(at, at + 2);
    auto& up = levels_[i + 1].buffer;
    up.insert(std::upper_bound(up.begin(), up.end(), kept), std::move(kept));
  }

  void push_top() {
    Compactor<T> c;
    c.height = levels_.back().height + 1;
    levels_.push_back(std::move(c));
  }

  std::vector<T> pop_bottom() {
    if (levels_.size() < 2) throw std::logic_error("cannot drop the only level");
    std::vector<T> out = std::move(levels_.front().buffer);
    levels_.erase(levels_.begin());
    return out;
  }

  void restore(std::uint32_t lowest_height, std::vector<std::vector<T>> items,
               std::vector<LevelState<T>> states) {
    if (items.empty() || items.size() != states.size()) throw std::runtime_error("bad level layout");
    levels_.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
      Compactor<T> c;
      c.height = lowest_height + static_cast<std::uint32_t>(i);
      c.buffer = std::move(items[i]);
      c.sorted = std::is_sorted(c.buffer.begin(), c.buffer.end());
      if (i > 0 && !c.sorted) throw std::runtime_error("unsorted level in sketch data");
      c.state = std::move(states[i]);
      levels_.push_back(std::move(c));
    }
  }

 private:
  std::vector<Compactor<T>> levels_;
};

}  // namespace kll

#endif  // KLL_LIST_STORAGE_HPP_
