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

#ifndef KLL_KLL_SKETCH_HPP_
#define KLL_KLL_SKETCH_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "kll/compactor.hpp"
#include "kll/item_codec.hpp"
#include "kll/list_storage.hpp"
#include "kll/packed_store.hpp"
#include "kll/params.hpp"
#include "kll/rng.hpp"
#include "kll/sampler.hpp"
#include "kll/serde.hpp"
#include "kll/sorted_view.hpp"

namespace kll {

struct CompactionEvent {
  std::uint32_t height = 0;
  std::size_t level_size = 0;  // before the compaction
  bool pair = false;           // sweep step rather than a full compaction
  IndexRange range;
  bool keep_larger = false;
  bool new_sweep = false;
};

/**
 * KLL quantiles sketch over a totally ordered item type.
 *
 * Level heights are weight exponents: an item at height h stands for 2^h
 * stream items. The lowest retained level sits at height H_s and is fed by a
 * sampler that emits items of weight 2^H_s; the top level is at height H.
 * Storage is either ListStorage (vector per level) or PackedStore (one
 * shared array); both see the same sequence of decisions, so for a given
 * seed they hold the same items.
 *
 * RNG draw order: sampler chunks as they occur; per full compaction the
 * spreading coin (odd lengths only) then the parity coin; per new sweep the
 * spreading coin then the parity coin.
 */
template <class T, class Storage = ListStorage<T>>
class KllSketch {
 public:
  using item_type = T;
  using storage_type = Storage;
  using Observer = std::function<void(const CompactionEvent&)>;

  explicit KllSketch(std::uint32_t budget = 200, double c = kDefaultDecay,
                     VariantFlags flags = VariantFlags::all(), std::uint64_t seed = 0,
                     WeightedMode mode = WeightedMode::None)
      : k_(k_from_budget(budget, c)),
        budget_(budget),
        c_(c),
        flags_(flags),
        mode_(mode),
        storage_(static_cast<std::size_t>(budget) + 1),
        rng_(seed) {
    if (budget < 8) throw std::invalid_argument("budget must be at least 8");
    if (mode == WeightedMode::WeightAware) throw std::invalid_argument("use WeightAwareSketch");
    refresh_caps();
  }

  void update(const T& item) {
    const auto& v = ItemTraits<T>::canonical(item);
    add_weight(1);
    grow_to_fit(n_total_);
    offer_to_sampler(v, 1);
    settle();
  }

  RankEstimate rank(const T& q) const {
    const auto& v = ItemTraits<T>::canonical(q);
    std::uint64_t r = 0;
    for (std::size_t i = 0; i < storage_.num_levels(); ++i) {
      const auto lv = storage_.level(i);
      std::uint64_t below;
      if (storage_.level_sorted(i)) {
        below = static_cast<std::uint64_t>(std::lower_bound(lv.begin(), lv.end(), v) - lv.begin());
      } else {
        below = static_cast<std::uint64_t>(std::count_if(lv.begin(), lv.end(), [&](const T& x) { return x < v; }));
      }
      r += below << (H_s_ + i);
    }
    if (sampler_.accum() > 0 && *sampler_.candidate() < v) r += sampler_.accum();
    return {r, n_total_};
  }

  SortedView<T> sorted_view() const {
    std::vector<typename SortedView<T>::Entry> entries;
    entries.reserve(items_n_ + 1);
    for (std::size_t i = 0; i < storage_.num_levels(); ++i) {
      const std::uint64_t w = std::uint64_t{1} << (H_s_ + i);
      for (const T& x : storage_.level(i)) entries.push_back({x, w});
    }
    if (sampler_.accum() > 0) entries.push_back({*sampler_.candidate(), sampler_.accum()});
    return SortedView<T>(std::move(entries));
  }

  T quantile(double phi) const {
    check_phi(phi);
    if (n_total_ == 0) throw std::runtime_error("quantile of an empty sketch");
    return sorted_view().quantile(phi);
  }

  std::vector<double> cdf(std::span<const T> queries) const { return sorted_view().cdf(queries); }

  static KllSketch merge(const KllSketch& a, const KllSketch& b) {
    if (a.c_ != b.c_) throw std::invalid_argument("cannot merge: decay rate c differs");
    if (a.flags_ != b.flags_) throw std::invalid_argument("cannot merge: variant flags differ");
    if (a.mode_ != b.mode_) throw std::invalid_argument("cannot merge: weighted mode differs");
    const bool a_base = a.H_ > b.H_ || (a.H_ == b.H_ && a.n_total_ >= b.n_total_);
    KllSketch out = a_base ? a : b;
    const KllSketch& other = a_base ? b : a;
    if (other.k_ > out.k_ || other.budget_ > out.budget_) {
      out.k_ = std::max(out.k_, other.k_);
      out.budget_ = std::max(out.budget_, other.budget_);
      out.refresh_caps();
    }
    out.add_weight(other.n_total_);
    out.grow_to_fit(out.n_total_);
    for (std::size_t i = 0; i < other.storage_.num_levels(); ++i) {
      const std::uint32_t h = other.H_s_ + static_cast<std::uint32_t>(i);
      std::vector<T> items(other.storage_.level(i).begin(), other.storage_.level(i).end());
      std::sort(items.begin(), items.end());
      if (h < out.H_s_) {
        for (const T& x : items) out.offer_to_sampler(x, std::uint64_t{1} << h);
      } else {
        out.storage_.insert_run(h - out.H_s_, items);
        out.items_n_ += items.size();
      }
    }
    if (other.sampler_.accum() > 0) out.offer_to_sampler(*other.sampler_.candidate(), other.sampler_.accum());
    out.compactions_ += other.compactions_;
    out.settle_fully();
    return out;
  }

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    SketchHeader h;
    h.flags = flags_;
    h.mode = mode_;
    h.codec = ItemTraits<T>::codec;
    h.k = k_;
    h.budget = budget_;
    h.H = H_;
    h.H_s = H_s_;
    h.c = c_;
    h.n_total = n_total_;
    h.items_n = items_n_;
    write_header(w, h);
    w.u64(sampler_.accum());
    if (sampler_.accum() > 0) ItemTraits<T>::encode(*sampler_.candidate(), w);
    w.u32(static_cast<std::uint32_t>(storage_.num_levels()));
    for (std::size_t i = 0; i < storage_.num_levels(); ++i) {
      const auto lv = storage_.level(i);
      w.u32(H_s_ + static_cast<std::uint32_t>(i));
      w.u32(static_cast<std::uint32_t>(lv.size()));
      write_level_state(w, storage_.state(i));
      if (storage_.level_sorted(i)) {
        for (const T& x : lv) ItemTraits<T>::encode(x, w);
      } else {
        std::vector<T> sorted(lv.begin(), lv.end());
        std::sort(sorted.begin(), sorted.end());
        for (const T& x : sorted) ItemTraits<T>::encode(x, w);
      }
    }
    write_trailer(w, {rng_.seed(), rng_.draws(), compactions_, 0});
    return w.take();
  }

  static KllSketch deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const SketchHeader h = read_header(r);
    if (h.codec != ItemTraits<T>::codec) throw std::runtime_error("item codec mismatch");
    if (h.mode == WeightedMode::WeightAware) throw std::runtime_error("weight-aware sketch data");
    if (h.budget < 8) throw std::runtime_error("budget out of range");
    KllSketch s(h.budget, h.c, h.flags, 0, h.mode);
    s.k_ = h.k;
    s.H_ = h.H;
    s.H_s_ = h.H_s;
    s.n_total_ = h.n_total;
    s.items_n_ = h.items_n;
    const std::uint64_t accum = r.u64();
    std::optional<T> cand;
    if (accum > 0) cand = ItemTraits<T>::decode(r);
    s.sampler_.restore(h.H_s, accum, std::move(cand));
    const std::uint32_t levels = r.u32();
    if (levels != h.H - h.H_s + 1) throw std::runtime_error("level count does not match heights");
    std::vector<std::vector<T>> items(levels);
    std::vector<LevelState<T>> states;
    std::uint64_t count = 0;
    unsigned __int128 weight = accum;
    for (std::uint32_t i = 0; i < levels; ++i) {
      if (r.u32() != h.H_s + i) throw std::runtime_error("level heights out of order");
      const std::uint32_t m = r.u32();
      if (m > r.remaining()) throw std::runtime_error("truncated sketch data");
      states.push_back(read_level_state<T>(r));
      items[i].reserve(m);
      for (std::uint32_t j = 0; j < m; ++j) items[i].push_back(ItemTraits<T>::decode(r));
      if (!std::is_sorted(items[i].begin(), items[i].end())) throw std::runtime_error("unsorted level in sketch data");
      count += m;
      weight += static_cast<unsigned __int128>(m) << (h.H_s + i);
    }
    const SketchTrailer t = read_trailer(r);
    if (count != h.items_n) throw std::runtime_error("item count mismatch");
    if (weight != h.n_total) throw std::runtime_error("stored weight does not add up to n");
    s.storage_.restore(h.H_s, std::move(items), std::move(states));
    s.rng_ = Rng::at_position(t.seed, t.draws);
    s.compactions_ = t.compactions;
    s.refresh_caps();
    return s;
  }

  // Building blocks for weighted adapters and merge.

  void add_weight(std::uint64_t w) {
    if (w > std::numeric_limits<std::uint64_t>::max() - n_total_) throw std::overflow_error("total weight overflow");
    n_total_ += w;
  }

  // Add top levels until total <= k 2^H.
  void grow_to_fit(std::uint64_t total) {
    while (exceeds_capacity(total, k_, H_)) {
      push_top_level();
      drain_low_levels();
    }
  }

  void offer_to_sampler(const T& item, std::uint64_t w) {
    sampler_.offer(item, w, rng_, [this](const T& e) {
      storage_.insert(std::size_t{0}, e);
      ++items_n_;
    });
  }

  // Stores copies of item at height h; heights below H_s go through the sampler.
  void push_at_height(std::uint32_t h, const T& item, std::uint64_t copies = 1) {
    if (copies == 0) return;
    if (h < H_s_) {
      offer_to_sampler(item, copies << h);
      return;
    }
    if (h > H_) throw std::logic_error("push above the top level");
    storage_.insert(h - H_s_, item, copies);
    items_n_ += copies;
  }

  // One compaction check: lazy compacts at most one level when over budget,
  // vanilla compacts every level at or above its capacity.
  void settle() {
    if (flags_.lazy) {
      if (items_n_ > budget_) compact_lazy_once();
    } else {
      compact_vanilla();
    }
  }

  std::uint32_t k() const { return k_; }
  std::uint32_t budget() const { return budget_; }
  double c() const { return c_; }
  const VariantFlags& flags() const { return flags_; }
  WeightedMode mode() const { return mode_; }
  std::uint32_t height() const { return H_; }
  std::uint32_t sampler_height() const { return H_s_; }
  std::uint64_t n_total() const { return n_total_; }
  std::uint64_t items_n() const { return items_n_; }
  std::uint64_t compactions() const { return compactions_; }
  std::uint64_t discarded_weight() const { return 0; }
  bool empty() const { return n_total_ == 0; }
  const Sampler<T>& sampler() const { return sampler_; }
  const Storage& storage() const { return storage_; }
  const Rng& rng() const { return rng_; }
  std::size_t num_levels() const { return storage_.num_levels(); }
  std::span<const T> level(std::size_t i) const { return storage_.level(i); }
  std::uint32_t capacity(std::size_t i) const { return caps_.at(i); }
  const LevelState<T>& level_state(std::size_t i) const { return storage_.state(i); }

  // Stored weight across levels plus sampler accum.
  std::uint64_t accounted_weight() const {
    std::uint64_t w = sampler_.accum();
    for (std::size_t i = 0; i < storage_.num_levels(); ++i) w += storage_.level_size(i) << (H_s_ + i);
    return w;
  }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

 private:
  void refresh_caps() {
    caps_.resize(H_ - H_s_ + 1);
    for (std::uint32_t h = H_s_; h <= H_; ++h) caps_[h - H_s_] = capacity_at(k_, c_, H_, h);
  }

  void push_top_level() {
    if (H_ >= Sampler<T>::kMaxRateExp) throw std::overflow_error("sketch height limit reached");
    storage_.push_top();
    ++H_;
    refresh_caps();
  }

  // Levels (other than the top) whose capacity has fallen to 2 are replaced
  // by the sampler.
  void drain_low_levels() {
    while (storage_.num_levels() > 1 && caps_[0] <= 2) {
      std::vector<T> items = storage_.pop_bottom();
      items_n_ -= items.size();
      const std::uint64_t w = std::uint64_t{1} << H_s_;
      ++H_s_;
      sampler_.raise_rate(H_s_);
      refresh_caps();
      std::sort(items.begin(), items.end());
      for (const T& x : items) offer_to_sampler(x, w);
    }
  }

  bool compact_lazy_once() {
    const std::size_t n = storage_.num_levels();
    for (std::size_t i = 0; i < n; ++i) {
      if (storage_.level_size(i) >= caps_[i]) {
        compact_level(i);
        return true;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (storage_.level_size(i) >= 2) {
        compact_level(i);
        return true;
      }
    }
    return false;
  }

  void compact_vanilla() {
    bool again = true;
    while (again) {
      again = false;
      for (std::uint32_t h = H_s_; h <= H_; ++h) {
        while (h >= H_s_ && storage_.level_size(h - H_s_) >= caps_[h - H_s_]) {
          compact_level(h - H_s_);
          again = true;
        }
      }
    }
  }

  void settle_fully() {
    if (flags_.lazy) {
      while (items_n_ > budget_ && compact_lazy_once()) {
      }
    } else {
      compact_vanilla();
    }
  }

  void compact_level(std::size_t idx) {
    if (idx + 1 == storage_.num_levels()) push_top_level();
    storage_.sort_level(idx);
    LevelState<T>& st = storage_.state(idx);
    CompactionEvent ev;
    ev.height = H_s_ + static_cast<std::uint32_t>(idx);
    ev.level_size = storage_.level_size(idx);
    if (flags_.sweep) {
      const SweepOptions opt{flags_.spreading, flags_.anti_correlated, true};
      const SweepPick pick = plan_sweep_pair(storage_.level(idx), std::identity{}, st, opt, rng_);
      ev.pair = true;
      ev.range = {pick.index, pick.index + 2};
      ev.keep_larger = pick.keep_larger;
      ev.new_sweep = pick.new_sweep;
      if (observer_) observer_(ev);
      storage_.compact_pair(idx, pick.index, pick.keep_larger);
      items_n_ -= 1;
    } else {
      const IndexRange range = select_range(storage_.level_size(idx), flags_.spreading, rng_);
      const KeepParity parity =
          flags_.anti_correlated ? decide_parity(st.direction, rng_) : draw_parity(rng_);
      ev.range = range;
      ev.keep_larger = keeps_larger(parity);
      if (observer_) observer_(ev);
      storage_.compact_range(idx, range, parity);
      items_n_ -= range.size() / 2;
    }
    ++compactions_;
    drain_low_levels();
  }

  std::uint32_t k_;
  std::uint32_t budget_;
  double c_;
  VariantFlags flags_;
  WeightedMode mode_;
  std::uint32_t H_ = 0;
  std::uint32_t H_s_ = 0;
  std::uint64_t n_total_ = 0;
  std::uint64_t items_n_ = 0;
  std::uint64_t compactions_ = 0;
  std::vector<std::uint32_t> caps_;
  Storage storage_;
  Sampler<T> sampler_;
  Rng rng_;
  Observer observer_;
};

template <class T>
using PackedKllSketch = KllSketch<T, PackedStore<T>>;

}  // namespace kll

#endif  // KLL_KLL_SKETCH_HPP_
