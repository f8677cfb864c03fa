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

#ifndef KLL_COMPACTOR_HPP_
#define KLL_COMPACTOR_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kll {

// Which sorted positions survive a compaction. KeepOdd keeps the 1st, 3rd,
// ... items (0-based even indices, i.e. the smaller item of each pair);
// KeepEven keeps the 2nd, 4th, ... (the larger item of each pair).
enum class KeepParity : std::uint8_t { KeepEven = 0, KeepOdd = 1 };

inline KeepParity opposite(KeepParity p) {
  return p == KeepParity::KeepEven ? KeepParity::KeepOdd : KeepParity::KeepEven;
}

inline bool keeps_larger(KeepParity p) { return p == KeepParity::KeepEven; }

struct DirectionState {
  std::optional<KeepParity> pending;
  friend bool operator==(const DirectionState&, const DirectionState&) = default;
};

template <class T>
struct SweepState {
  enum class Mark : std::uint8_t { Null = 0, BelowAll = 1, Value = 2 };

  Mark mark = Mark::Null;
  T theta{};  // meaningful only when mark == Value
  KeepParity parity = KeepParity::KeepEven;

  bool active() const { return mark != Mark::Null; }
  bool admits(const T& x) const {
    return mark == Mark::BelowAll || (mark == Mark::Value && theta < x);
  }
  void reset() {
    mark = Mark::Null;
    theta = T{};
  }

  friend bool operator==(const SweepState& a, const SweepState& b) {
    if (a.mark != b.mark || a.parity != b.parity) return false;
    return a.mark != Mark::Value || !(a.theta < b.theta || b.theta < a.theta);
  }
};

// Per-level decision state shared by both storage backends.
template <class T>
struct LevelState {
  DirectionState direction;
  SweepState<T> sweep;
  std::uint64_t sweeps_started = 0;
  friend bool operator==(const LevelState&, const LevelState&) = default;
};

template <class Coins>
KeepParity draw_parity(Coins& coins) {
  return coins.coin() ? KeepParity::KeepOdd : KeepParity::KeepEven;
}

template <class Coins>
KeepParity decide_parity(DirectionState& d, Coins& coins) {
  if (d.pending) {
    const KeepParity p = *d.pending;
    d.pending.reset();
    return p;
  }
  const KeepParity drawn = draw_parity(coins);
  d.pending = opposite(drawn);
  return drawn;
}

struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

template <class Coins>
IndexRange select_range(std::size_t len, bool spreading, Coins& coins) {
  if (len < 2) throw std::invalid_argument("nothing to compact");
  if (len % 2 == 0) return {0, len};
  if (spreading && coins.coin()) return {1, len};
  return {0, len - 1};
}

inline void check_range(IndexRange r, std::size_t len) {
  if (r.size() == 0 || r.hi > len || r.lo > r.hi) throw std::invalid_argument("empty compaction range");
  if (r.size() % 2 != 0) throw std::invalid_argument("compaction range must have even length");
}

// Standalone level, used directly by the list backend.
template <class T>
struct Compactor {
  std::uint32_t height = 0;
  std::vector<T> buffer;
  bool sorted = true;
  LevelState<T> state;

  void append(const T& x) {
    if (sorted && !buffer.empty() && x < buffer.back()) sorted = false;
    buffer.push_back(x);
  }
  void sort() {
    if (!sorted) {
      std::sort(buffer.begin(), buffer.end());
      sorted = true;
    }
  }
};

// Removes the range from c.buffer and returns the surviving half.
template <class T>
std::vector<T> compact_full(Compactor<T>& c, KeepParity parity, IndexRange r) {
  check_range(r, c.buffer.size());
  c.sort();
  const std::size_t off = keeps_larger(parity) ? 1 : 0;
  std::vector<T> promoted;
  promoted.reserve(r.size() / 2);
  for (std::size_t j = r.lo + off; j < r.hi; j += 2) promoted.push_back(std::move(c.buffer[j]));
  c.buffer.erase(c.buffer.begin() + static_cast<std::ptrdiff_t>(r.lo),
                 c.buffer.begin() + static_cast<std::ptrdiff_t>(r.hi));
  return promoted;
}

struct SweepOptions {
  bool spreading = false;
  bool anti_correlated = false;
  bool draw_parity = true;  // weight-aware levels pick by weight instead
};

struct SweepPick {
  std::size_t index = 0;  // pair is (index, index + 1)
  bool keep_larger = false;
  bool new_sweep = false;
};

// Chooses the next sweep pair over a sorted sequence and advances theta.
// A new sweep draws the spreading coin first, then the parity.
template <class T, class Seq, class Proj, class Coins>
SweepPick plan_sweep_pair(const Seq& sorted, Proj proj, LevelState<T>& st, const SweepOptions& opt,
                          Coins& coins) {
  using Mark = typename SweepState<T>::Mark;
  const std::size_t n = std::size(sorted);
  if (n < 2) throw std::invalid_argument("sweep needs at least two items");
  bool fresh = false;
  auto begin_sweep = [&] {
    fresh = true;
    ++st.sweeps_started;
    if (opt.spreading && coins.coin()) {
      st.sweep.mark = Mark::Value;
      st.sweep.theta = std::invoke(proj, sorted[0]);
    } else {
      st.sweep.mark = Mark::BelowAll;
      st.sweep.theta = T{};
    }
    if (opt.draw_parity) {
      st.sweep.parity = opt.anti_correlated ? decide_parity(st.direction, coins) : draw_parity(coins);
    }
  };
  auto first_above = [&]() -> std::size_t {
    if (st.sweep.mark == Mark::BelowAll) return 0;
    auto it = std::upper_bound(std::begin(sorted), std::end(sorted), st.sweep.theta,
                               [&](const T& t, const auto& e) { return t < std::invoke(proj, e); });
    return static_cast<std::size_t>(it - std::begin(sorted));
  };
  if (!st.sweep.active()) begin_sweep();
  std::size_t i = first_above();
  if (i + 1 >= n) {
    if (!fresh) {
      begin_sweep();
      i = first_above();
    }
    if (i + 1 >= n) i = 0;
  }
  st.sweep.mark = Mark::Value;
  st.sweep.theta = std::invoke(proj, sorted[i + 1]);
  return {i, keeps_larger(st.sweep.parity), fresh};
}

template <class T, class Coins>
T sweep_compact_pair(Compactor<T>& c, const SweepOptions& opt, Coins& coins) {
  if (c.buffer.size() < 2) throw std::invalid_argument("sweep needs at least two items");
  c.sort();
  const SweepPick pick = plan_sweep_pair(c.buffer, std::identity{}, c.state, opt, coins);
  T kept = std::move(c.buffer[pick.index + (pick.keep_larger ? 1 : 0)]);
  const auto at = c.buffer.begin() + static_cast<std::ptrdiff_t>(pick.index);
  c.buffer.erase(at, at + 2);
  return kept;
}

}  // namespace kll

#endif  // KLL_COMPACTOR_HPP_
