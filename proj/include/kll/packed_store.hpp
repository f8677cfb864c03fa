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

#ifndef KLL_PACKED_STORE_HPP_
#define KLL_PACKED_STORE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kll/compactor.hpp"

namespace kll {

/**
 * All levels in one gapless array. Regions are laid out left to right from
 * level 0; free space is only at the extreme left and level 0 grows into it.
 * Level 0 is unsorted until it is compacted; every other level is sorted.
 *
 *   [ free | level 0 | level 1 | ... | top ]
 *          ^starts_[0] ^starts_[1]        ^starts_.back() == slots_.size()
 */
template <class T>
class PackedStore {
 public:
  static constexpr const char* kName = "packed";

  explicit PackedStore(std::size_t slots = 0) : slots_(slots), starts_{slots, slots}, states_(1) {}

  std::size_t capacity() const { return slots_.size(); }
  std::size_t free_space() const { return starts_[0]; }
  std::size_t num_levels() const { return starts_.size() - 1; }
  std::size_t level_size(std::size_t i) const { return starts_.at(i + 1) - starts_[i]; }
  std::span<const T> level(std::size_t i) const {
    return {slots_.data() + starts_.at(i), level_size(i)};
  }
  bool level_sorted(std::size_t i) const { return i > 0 || level0_sorted_; }
  LevelState<T>& state(std::size_t i) { return states_.at(i); }
  const LevelState<T>& state(std::size_t i) const { return states_.at(i); }

  std::vector<std::span<const T>> levels_view() const {
    std::vector<std::span<const T>> out;
    for (std::size_t i = 0; i < num_levels(); ++i) out.push_back(level(i));
    return out;
  }

  // Places x at the left edge of level 0. True once free space is exhausted.
  bool insert(const T& x) {
    reserve_left(1);
    if (level0_sorted_ && level_size(0) > 0 && slots_[starts_[0]] < x) level0_sorted_ = false;
    slots_[--starts_[0]] = x;
    return starts_[0] == 0;
  }

  void insert(std::size_t i, const T& x, std::size_t copies = 1) {
    if (i == 0) {
      for (std::size_t j = 0; j < copies; ++j) insert(x);
      return;
    }
    reserve_left(copies);
    const std::size_t q = static_cast<std::size_t>(
        std::upper_bound(slots_.begin() + starts_[i], slots_.begin() + starts_[i + 1], x) - slots_.begin());
    shift_left(starts_[0], q, copies);
    std::fill(slots_.begin() + (q - copies), slots_.begin() + q, x);
    for (std::size_t j = 0; j <= i; ++j) starts_[j] -= copies;
  }

  void insert_run(std::size_t i, std::span<const T> run) {
    if (i == 0) {
      for (const T& x : run) insert(x);
      return;
    }
    const std::size_t m = run.size();
    if (m == 0) return;
    reserve_left(m);
    const std::size_t s = starts_[i];
    shift_left(starts_[0], s, m);
    std::copy(run.begin(), run.end(), slots_.begin() + (s - m));
    for (std::size_t j = 0; j <= i; ++j) starts_[j] -= m;
    std::inplace_merge(slots_.begin() + starts_[i], slots_.begin() + s, slots_.begin() + starts_[i + 1]);
  }

  void sort_level(std::size_t i) {
    if (i == 0 && !level0_sorted_) {
      std::sort(slots_.begin() + starts_[0], slots_.begin() + starts_[1]);
      level0_sorted_ = true;
    }
  }

  // Halve the range of level i in place, merge the survivors into level i+1
  // and shift all lower levels right by the number of slots released.
  void compact_range(std::size_t i, IndexRange r, KeepParity p) {
    if (i + 1 >= num_levels()) throw std::logic_error("no level above");
    sort_level(i);
    const std::size_t s = starts_[i], e = starts_[i + 1], e1 = starts_[i + 2];
    const std::size_t len = e - s;
    check_range(r, len);
    const std::size_t half = r.size() / 2;
    const std::size_t off = keeps_larger(p) ? 1 : 0;

    std::optional<T> leftover;
    if (r.lo == 1) {
      leftover = std::move(slots_[s]);
    } else if (r.hi < len) {
      leftover = std::move(slots_[s + len - 1]);
    }
    const std::size_t a0 = s + r.lo;
    for (std::size_t j = 0; j < half; ++j) move_slot(a0 + 2 * j + off, a0 + j);

    std::size_t a = a0, b = e, out = e - half;
    const std::size_t a_end = a0 + half;
    while (a < a_end) {
      if (b < e1 && !(slots_[a] < slots_[b])) {
        move_slot(b++, out++);
      } else {
        move_slot(a++, out++);
      }
    }

    const std::size_t nl = leftover ? 1 : 0;
    if (leftover) slots_[e - half - 1] = std::move(*leftover);
    std::move_backward(slots_.begin() + starts_[0], slots_.begin() + s, slots_.begin() + s + half);
    starts_[i + 1] = e - half;
    starts_[i] = e - half - nl;
    for (std::size_t j = 0; j < i; ++j) starts_[j] += half;
  }

  // Remove the pair (idx, idx+1) of level i and sorted-insert one of them
  // into level i+1.
  void compact_pair(std::size_t i, std::size_t idx, bool keep_larger) {
    if (i + 1 >= num_levels()) throw std::logic_error("no level above");
    const std::size_t p = starts_[i] + idx;
    T kept = std::move(slots_[p + (keep_larger ? 1 : 0)]);
    std::move_backward(slots_.begin() + starts_[0], slots_.begin() + p, slots_.begin() + p + 2);
    for (std::size_t j = 0; j <= i; ++j) starts_[j] += 2;
    const std::size_t q = static_cast<std::size_t>(
        std::upper_bound(slots_.begin() + starts_[i + 1], slots_.begin() + starts_[i + 2], kept) -
        slots_.begin());
    shift_left(starts_[0], q, 1);
    slots_[q - 1] = std::move(kept);
    for (std::size_t j = 0; j <= i + 1; ++j) starts_[j] -= 1;
  }

  void push_top() {
    starts_.push_back(slots_.size());
    states_.emplace_back();
  }

  std::vector<T> pop_bottom() {
    if (num_levels() < 2) throw std::logic_error("cannot drop the only level");
    std::vector<T> out(std::make_move_iterator(slots_.begin() + starts_[0]),
                       std::make_move_iterator(slots_.begin() + starts_[1]));
    starts_.erase(starts_.begin());
    states_.erase(states_.begin());
    level0_sorted_ = true;
    return out;
  }

  void restore(std::uint32_t /*lowest_height*/, std::vector<std::vector<T>> items,
               std::vector<LevelState<T>> states) {
    if (items.empty() || items.size() != states.size()) throw std::runtime_error("bad level layout");
    std::size_t total = 0;
    for (const auto& v : items) total += v.size();
    const std::size_t cap = std::max(slots_.size(), total);
    std::vector<T> slots(cap);
    std::vector<std::size_t> starts(items.size() + 1);
    starts.back() = cap;
    for (std::size_t i = items.size(); i-- > 0;) {
      starts[i] = starts[i + 1] - items[i].size();
      std::move(items[i].begin(), items[i].end(), slots.begin() + starts[i]);
      if (i > 0 && !std::is_sorted(items[i].begin(), items[i].end())) {
        throw std::runtime_error("unsorted level in sketch data");
      }
    }
    slots_ = std::move(slots);
    starts_ = std::move(starts);
    states_ = std::move(states);
    level0_sorted_ = std::is_sorted(slots_.begin() + starts_[0], slots_.begin() + starts_[1]);
  }

  // Test hook: regions tile [free_space(), capacity()) and levels >= 1 are sorted.
  bool well_formed() const {
    if (starts_.back() != slots_.size()) return false;
    for (std::size_t i = 0; i + 1 < starts_.size(); ++i) {
      if (starts_[i] > starts_[i + 1]) return false;
      if (i > 0 && !std::is_sorted(slots_.begin() + starts_[i], slots_.begin() + starts_[i + 1])) return false;
    }
    return true;
  }

 private:
  void move_slot(std::size_t from, std::size_t to) {
    if (from != to) slots_[to] = std::move(slots_[from]);
  }

  // Move [from, to) left by m slots.
  void shift_left(std::size_t from, std::size_t to, std::size_t m) {
    std::move(slots_.begin() + from, slots_.begin() + to, slots_.begin() + (from - m));
  }

  // Re-pack into a larger array when fewer than m slots are free.
  void reserve_left(std::size_t m) {
    if (starts_[0] >= m) return;
    const std::size_t used = slots_.size() - starts_[0];
    const std::size_t cap = std::max(used + m, slots_.size() + slots_.size() / 2);
    const std::size_t delta = cap - slots_.size();
    std::vector<T> bigger(cap);
    std::move(slots_.begin() + starts_[0], slots_.end(), bigger.begin() + (starts_[0] + delta));
    slots_ = std::move(bigger);
    for (auto& s : starts_) s += delta;
  }

  std::vector<T> slots_;
  std::vector<std::size_t> starts_;
  std::vector<LevelState<T>> states_;
  bool level0_sorted_ = true;
};

}  // namespace kll

#endif  // KLL_PACKED_STORE_HPP_
