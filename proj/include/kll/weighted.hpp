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

#ifndef KLL_WEIGHTED_HPP_
#define KLL_WEIGHTED_HPP_

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "kll/compactor.hpp"
#include "kll/item_codec.hpp"
#include "kll/kll_sketch.hpp"
#include "kll/params.hpp"
#include "kll/rng.hpp"
#include "kll/sampler.hpp"
#include "kll/serde.hpp"
#include "kll/sorted_view.hpp"

namespace kll {

template <class T>
struct WeightedItem {
  T item;
  std::uint64_t weight = 1;
};

/**
 * w = sampler_weight + sum_h bit(h) 2^h + top_copies 2^top.
 *
 * sampler_level is the level the sampler stands in for; the lowest
 * compactor is at sampler_level + 1, so bits at or below sampler_level go
 * to the sampler. A sketch whose sampler emits weight 2^H_s passes H_s - 1.
 */
struct Base2Decomposition {
  int sampler_level = -1;
  std::uint32_t top = 0;
  std::uint64_t sampler_weight = 0;
  std::vector<std::uint8_t> bits;  // bits[j] is the coefficient of level sampler_level + 1 + j, below top
  std::uint64_t top_copies = 0;

  std::uint64_t coefficient(std::uint32_t h) const {
    if (h == top) return top_copies;
    if (static_cast<int>(h) <= sampler_level || h > top) return 0;
    return bits[h - static_cast<std::uint32_t>(sampler_level + 1)];
  }
};

inline Base2Decomposition base2_decompose(std::uint64_t w, int sampler_level, std::uint32_t H, std::uint32_t k) {
  if (sampler_level < -1 || sampler_level >= static_cast<int>(H)) {
    throw std::invalid_argument("sampler level must lie below the top");
  }
  if (H >= 63) throw std::invalid_argument("height too large");
  if (exceeds_capacity(w + 1, k, H)) throw std::invalid_argument("grow first: weight >= k 2^H");
  Base2Decomposition d;
  d.sampler_level = sampler_level;
  d.top = H;
  d.top_copies = w >> H;
  const std::uint64_t low_mask = sampler_level < 0 ? 0 : (std::uint64_t{2} << sampler_level) - 1;
  d.sampler_weight = w & low_mask;
  for (std::uint32_t h = static_cast<std::uint32_t>(sampler_level + 1); h < H; ++h) {
    d.bits.push_back(static_cast<std::uint8_t>((w >> h) & 1));
  }
  return d;
}

struct Base2UpdateStats {
  std::uint32_t sampler_offers = 0;
  std::uint32_t level_pushes = 0;
  std::uint64_t top_copies = 0;
};

// Weighted update on a plain KLL sketch by binary decomposition of w.
template <class T, class Storage>
Base2UpdateStats base2_update(KllSketch<T, Storage>& s, const WeightedItem<T>& u) {
  if (u.weight < 1) throw std::invalid_argument("weight must be at least 1");
  const auto& item = ItemTraits<T>::canonical(u.item);
  const std::uint64_t w = u.weight;
  if (w > std::numeric_limits<std::uint64_t>::max() - s.n_total() - 1) throw std::overflow_error("total weight overflow");
  s.grow_to_fit(std::max(s.n_total() + w, w + 1));
  s.add_weight(w);
  const std::uint32_t H = s.height();
  const Base2Decomposition d = base2_decompose(w, static_cast<int>(s.sampler_height()) - 1, H, s.k());
  Base2UpdateStats stats;
  if (d.sampler_weight > 0) {
    s.offer_to_sampler(item, d.sampler_weight);
    s.settle();
    stats.sampler_offers = 1;
  }
  for (std::size_t j = 0; j < d.bits.size(); ++j) {
    if (!d.bits[j]) continue;
    s.push_at_height(static_cast<std::uint32_t>(d.sampler_level + 1) + static_cast<std::uint32_t>(j), item);
    s.settle();
    ++stats.level_pushes;
  }
  if (d.top_copies > 0) {
    s.push_at_height(H, item, d.top_copies);
    for (std::uint64_t j = 0; j < d.top_copies; ++j) s.settle();
    stats.top_copies = d.top_copies;
  }
  return stats;
}

template <class T>
struct WeightedCompactor {
  std::uint32_t height = 0;
  std::vector<WeightedItem<T>> buffer;
  bool sorted = true;
  LevelState<T> state;

  void sort() {
    if (!sorted) {
      std::stable_sort(buffer.begin(), buffer.end(),
                       [](const WeightedItem<T>& a, const WeightedItem<T>& b) { return a.item < b.item; });
      sorted = true;
    }
  }
  void append(WeightedItem<T> x) {
    if (sorted && !buffer.empty() && x.item < buffer.back().item) sorted = false;
    buffer.push_back(std::move(x));
  }
  void insert_sorted(WeightedItem<T> x) {
    auto at = std::upper_bound(buffer.begin(), buffer.end(), x.item,
                               [](const T& v, const WeightedItem<T>& e) { return v < e.item; });
    buffer.insert(at, std::move(x));
  }
};

// Keep one of a pair with probability proportional to its weight.
template <class T, class Gen>
WeightedItem<T> weighted_choice(WeightedItem<T>& a, WeightedItem<T>& b, Gen& rng) {
  const std::uint64_t sum = a.weight + b.weight;
  if (rng.below(sum) < a.weight) return {std::move(a.item), sum};
  return {std::move(b.item), sum};
}

template <class T, class Gen>
WeightedItem<T> wa_compact_pair(WeightedCompactor<T>& c, const SweepOptions& opt, Gen& rng) {
  if (c.buffer.size() < 2) throw std::invalid_argument("sweep needs at least two items");
  c.sort();
  SweepOptions o = opt;
  o.draw_parity = false;
  const SweepPick pick = plan_sweep_pair(c.buffer, &WeightedItem<T>::item, c.state, o, rng);
  WeightedItem<T> kept = weighted_choice(c.buffer[pick.index], c.buffer[pick.index + 1], rng);
  const auto at = c.buffer.begin() + static_cast<std::ptrdiff_t>(pick.index);
  c.buffer.erase(at, at + 2);
  return kept;
}

/**
 * Sketch built from weight-aware compactors: level h holds items whose
 * weights lie in [2^h, 2^(h+1)), and a compacted pair keeps each member with
 * probability proportional to its weight. A single item heavier than the
 * whole capacity raises H directly and drops the bottom levels; the weight
 * thrown away is tracked in discarded_weight().
 */
template <class T>
class WeightAwareSketch {
 public:
  using item_type = T;

  explicit WeightAwareSketch(std::uint32_t budget = 200, double c = kDefaultDecay,
                             VariantFlags flags = VariantFlags::all(), std::uint64_t seed = 0)
      : k_(k_from_budget(budget, c)), budget_(budget), c_(c), flags_(flags), rng_(seed) {
    if (budget < 8) throw std::invalid_argument("budget must be at least 8");
    levels_.emplace_back();
    refresh_caps();
  }

  void update(const T& item, std::uint64_t weight = 1) {
    if (weight < 1) throw std::invalid_argument("weight must be at least 1");
    const auto& v = ItemTraits<T>::canonical(item);
    if (weight > std::numeric_limits<std::uint64_t>::max() - W_) throw std::overflow_error("total weight overflow");
    std::uint32_t h_new = H_;
    while (exceeds_capacity(weight + 1, k_, h_new)) ++h_new;  // smallest h with k 2^h > w
    if (h_new > H_) jump(h_new - H_);
    W_ += weight;
    while (exceeds_capacity(W_ - discarded_, k_, H_)) {
      push_top_level();
      drain_low_levels();
    }
    // one check per stored entry, and at least one (growth may shrink capacities)
    const std::uint64_t entries = std::max<std::uint64_t>(1, route(v, weight));
    for (std::uint64_t j = 0; j < entries; ++j) settle();
  }

  void update(const WeightedItem<T>& u) { update(u.item, u.weight); }

  RankEstimate rank(const T& q) const {
    const auto& v = ItemTraits<T>::canonical(q);
    std::uint64_t r = 0;
    for (const auto& lv : levels_) {
      for (const auto& e : lv.buffer) {
        if (e.item < v) r += e.weight;
      }
    }
    if (sampler_.accum() > 0 && *sampler_.candidate() < v) r += sampler_.accum();
    return {r, W_};
  }

  SortedView<T> sorted_view() const {
    std::vector<typename SortedView<T>::Entry> entries;
    entries.reserve(items_n_ + 1);
    for (const auto& lv : levels_) {
      for (const auto& e : lv.buffer) entries.push_back({e.item, e.weight});
    }
    if (sampler_.accum() > 0) entries.push_back({*sampler_.candidate(), sampler_.accum()});
    return SortedView<T>(std::move(entries));
  }

  T quantile(double phi) const {
    check_phi(phi);
    if (W_ == 0) throw std::runtime_error("quantile of an empty sketch");
    return sorted_view().quantile(phi);
  }

  std::vector<double> cdf(std::span<const T> queries) const {
    auto out = sorted_view().cdf(queries);
    // normalise by W, which includes discarded weight
    const double stored = static_cast<double>(W_ - discarded_);
    if (W_ > 0) {
      for (auto& x : out) x = x * stored / static_cast<double>(W_);
    }
    return out;
  }

  static WeightAwareSketch merge(const WeightAwareSketch& a, const WeightAwareSketch& b) {
    if (a.c_ != b.c_) throw std::invalid_argument("cannot merge: decay rate c differs");
    if (a.flags_ != b.flags_) throw std::invalid_argument("cannot merge: variant flags differ");
    const bool a_base = a.H_ > b.H_ || (a.H_ == b.H_ && a.W_ >= b.W_);
    WeightAwareSketch out = a_base ? a : b;
    const WeightAwareSketch& other = a_base ? b : a;
    if (other.k_ > out.k_ || other.budget_ > out.budget_) {
      out.k_ = std::max(out.k_, other.k_);
      out.budget_ = std::max(out.budget_, other.budget_);
      out.refresh_caps();
    }
    if (other.W_ > std::numeric_limits<std::uint64_t>::max() - out.W_) throw std::overflow_error("total weight overflow");
    out.W_ += other.W_;
    out.discarded_ += other.discarded_;
    while (exceeds_capacity(out.W_ - out.discarded_, out.k_, out.H_)) {
      out.push_top_level();
      out.drain_low_levels();
    }
    for (const auto& lv : other.levels_) {
      for (const auto& e : lv.buffer) {
        if (lv.height < out.H_s_) {
          out.offer_to_sampler(e.item, e.weight);
        } else {
          out.place(lv.height - out.H_s_, e);
        }
      }
    }
    if (other.sampler_.accum() > 0) out.offer_to_sampler(*other.sampler_.candidate(), other.sampler_.accum());
    out.compactions_ += other.compactions_;
    if (out.flags_.lazy) {
      while (out.items_n_ > out.budget_ && out.compact_lazy_once()) {
      }
    } else {
      out.compact_vanilla();
    }
    return out;
  }

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    SketchHeader h;
    h.flags = flags_;
    h.mode = WeightedMode::WeightAware;
    h.codec = ItemTraits<T>::codec;
    h.k = k_;
    h.budget = budget_;
    h.H = H_;
    h.H_s = H_s_;
    h.c = c_;
    h.n_total = W_;
    h.items_n = items_n_;
    write_header(w, h);
    w.u64(sampler_.accum());
    if (sampler_.accum() > 0) ItemTraits<T>::encode(*sampler_.candidate(), w);
    w.u32(static_cast<std::uint32_t>(levels_.size()));
    for (const auto& lv : levels_) {
      w.u32(lv.height);
      w.u32(static_cast<std::uint32_t>(lv.buffer.size()));
      write_level_state(w, lv.state);
      auto items = lv.buffer;
      std::stable_sort(items.begin(), items.end(), [](const WeightedItem<T>& a, const WeightedItem<T>& b) {
        return a.item < b.item || (!(b.item < a.item) && a.weight < b.weight);
      });
      for (const auto& e : items) {
        ItemTraits<T>::encode(e.item, w);
        w.u64(e.weight);
      }
    }
    write_trailer(w, {rng_.seed(), rng_.draws(), compactions_, discarded_});
    return w.take();
  }

  static WeightAwareSketch deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const SketchHeader h = read_header(r);
    if (h.codec != ItemTraits<T>::codec) throw std::runtime_error("item codec mismatch");
    if (h.mode != WeightedMode::WeightAware) throw std::runtime_error("not a weight-aware sketch");
    if (h.budget < 8) throw std::runtime_error("budget out of range");
    WeightAwareSketch s(h.budget, h.c, h.flags, 0);
    s.k_ = h.k;
    s.H_ = h.H;
    s.H_s_ = h.H_s;
    s.W_ = h.n_total;
    s.items_n_ = h.items_n;
    const std::uint64_t accum = r.u64();
    std::optional<T> cand;
    if (accum > 0) cand = ItemTraits<T>::decode(r);
    s.sampler_.restore(h.H_s, accum, std::move(cand));
    const std::uint32_t levels = r.u32();
    if (levels != h.H - h.H_s + 1) throw std::runtime_error("level count does not match heights");
    s.levels_.clear();
    std::uint64_t count = 0;
    unsigned __int128 weight = accum;
    for (std::uint32_t i = 0; i < levels; ++i) {
      WeightedCompactor<T> lv;
      lv.height = r.u32();
      if (lv.height != h.H_s + i) throw std::runtime_error("level heights out of order");
      const std::uint32_t m = r.u32();
      if (m > r.remaining()) throw std::runtime_error("truncated sketch data");
      lv.state = read_level_state<T>(r);
      for (std::uint32_t j = 0; j < m; ++j) {
        WeightedItem<T> e{ItemTraits<T>::decode(r), 0};
        e.weight = r.u64();
        if (e.weight < (std::uint64_t{1} << lv.height) || (lv.height < 62 && e.weight >= (std::uint64_t{2} << lv.height))) {
          throw std::runtime_error("item weight outside its level range");
        }
        weight += e.weight;
        lv.buffer.push_back(std::move(e));
      }
      count += m;
      s.levels_.push_back(std::move(lv));
    }
    const SketchTrailer t = read_trailer(r);
    if (count != h.items_n) throw std::runtime_error("item count mismatch");
    if (weight + t.discarded != h.n_total) throw std::runtime_error("stored weight does not add up to W");
    s.discarded_ = t.discarded;
    s.rng_ = Rng::at_position(t.seed, t.draws);
    s.compactions_ = t.compactions;
    s.refresh_caps();
    return s;
  }

  std::uint32_t k() const { return k_; }
  std::uint32_t budget() const { return budget_; }
  double c() const { return c_; }
  const VariantFlags& flags() const { return flags_; }
  WeightedMode mode() const { return WeightedMode::WeightAware; }
  std::uint32_t height() const { return H_; }
  std::uint32_t sampler_height() const { return H_s_; }
  std::uint64_t n_total() const { return W_; }
  std::uint64_t items_n() const { return items_n_; }
  std::uint64_t compactions() const { return compactions_; }
  std::uint64_t discarded_weight() const { return discarded_; }
  bool empty() const { return W_ == 0; }
  const Sampler<T>& sampler() const { return sampler_; }
  const std::vector<WeightedCompactor<T>>& levels() const { return levels_; }
  std::size_t num_levels() const { return levels_.size(); }
  std::uint32_t capacity(std::size_t i) const { return caps_.at(i); }

  std::uint64_t accounted_weight() const {
    std::uint64_t w = sampler_.accum() + discarded_;
    for (const auto& lv : levels_) {
      for (const auto& e : lv.buffer) w += e.weight;
    }
    return w;
  }

 private:
  void refresh_caps() {
    caps_.resize(H_ - H_s_ + 1);
    for (std::uint32_t h = H_s_; h <= H_; ++h) caps_[h - H_s_] = capacity_at(k_, c_, H_, h);
  }

  void push_top_level() {
    if (H_ >= Sampler<T>::kMaxRateExp) throw std::overflow_error("sketch height limit reached");
    WeightedCompactor<T> lv;
    lv.height = ++H_;
    levels_.push_back(std::move(lv));
    refresh_caps();
  }

  // Raise H by d and drop the d lowest levels. When the levels span the whole
  // capacity schedule (a level below the bottom one would be drained) the
  // dropped ones are light and their weight is discarded. A shallower sketch
  // may hold most of the stream in them, so their items are re-offered to
  // the sampler instead.
  void jump(std::uint32_t d) {
    const bool discard = capacity_at(k_, c_, H_ - H_s_ + 1, 0) <= 2;
    for (std::uint32_t i = 0; i < d; ++i) {
      if (H_ >= Sampler<T>::kMaxRateExp) throw std::overflow_error("sketch height limit reached");
      WeightedCompactor<T> lv;
      lv.height = ++H_;
      levels_.push_back(std::move(lv));
    }
    std::vector<WeightedItem<T>> kept;
    for (std::uint32_t i = 0; i < d; ++i) {
      auto& buf = levels_.front().buffer;
      if (discard) {
        for (const auto& e : buf) discarded_ += e.weight;
      } else {
        kept.insert(kept.end(), buf.begin(), buf.end());
      }
      items_n_ -= buf.size();
      levels_.erase(levels_.begin());
    }
    H_s_ += d;
    sampler_.raise_rate(H_s_);
    refresh_caps();
    std::stable_sort(kept.begin(), kept.end(),
                     [](const WeightedItem<T>& a, const WeightedItem<T>& b) { return a.item < b.item; });
    for (const auto& e : kept) offer_to_sampler(e.item, e.weight);
    drain_low_levels();
  }

  void drain_low_levels() {
    while (levels_.size() > 1 && caps_[0] <= 2) {
      std::vector<WeightedItem<T>> items = std::move(levels_.front().buffer);
      levels_.erase(levels_.begin());
      items_n_ -= items.size();
      ++H_s_;
      sampler_.raise_rate(H_s_);
      refresh_caps();
      std::stable_sort(items.begin(), items.end(),
                       [](const WeightedItem<T>& a, const WeightedItem<T>& b) { return a.item < b.item; });
      for (const auto& e : items) offer_to_sampler(e.item, e.weight);
    }
  }

  void offer_to_sampler(const T& item, std::uint64_t w) {
    const std::uint64_t m = std::uint64_t{1} << H_s_;
    sampler_.offer(item, w, rng_, [&](const T& e) {
      levels_.front().append({e, m});
      ++items_n_;
    });
  }

  void place(std::size_t idx, WeightedItem<T> e) {
    if (idx == 0) {
      levels_[0].append(std::move(e));
    } else {
      levels_[idx].insert_sorted(std::move(e));
    }
    ++items_n_;
  }

  // Returns the number of entries stored (sampler emissions included).
  std::uint64_t route(const T& item, std::uint64_t w) {
    if (w < (std::uint64_t{1} << H_s_)) {
      const std::uint64_t before = items_n_;
      offer_to_sampler(item, w);
      return items_n_ - before;
    }
    const std::uint32_t lvl = static_cast<std::uint32_t>(std::bit_width(w) - 1);
    if (lvl <= H_) {
      place(lvl - H_s_, {item, w});
      return 1;
    }
    const std::uint64_t copies = w >> H_;
    const std::uint64_t rest = w - (copies << H_);
    for (std::uint64_t j = 0; j < copies; ++j) place(levels_.size() - 1, {item, std::uint64_t{1} << H_});
    return copies + (rest > 0 ? route(item, rest) : 0);
  }

  void settle() {
    if (flags_.lazy) {
      if (items_n_ > budget_) compact_lazy_once();
    } else {
      compact_vanilla();
    }
  }

  bool compact_lazy_once() {
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i].buffer.size() >= caps_[i]) {
        compact_level(i);
        return true;
      }
    }
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i].buffer.size() >= 2) {
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
        while (h >= H_s_ && levels_[h - H_s_].buffer.size() >= caps_[h - H_s_]) {
          compact_level(h - H_s_);
          again = true;
        }
      }
    }
  }

  void compact_level(std::size_t idx) {
    if (idx + 1 == levels_.size()) push_top_level();
    auto& lv = levels_[idx];
    if (flags_.sweep) {
      const SweepOptions opt{flags_.spreading, flags_.anti_correlated, false};
      WeightedItem<T> kept = wa_compact_pair(lv, opt, rng_);
      levels_[idx + 1].insert_sorted(std::move(kept));
      items_n_ -= 1;
    } else {
      lv.sort();
      const IndexRange r = select_range(lv.buffer.size(), flags_.spreading, rng_);
      std::vector<WeightedItem<T>> promoted;
      for (std::size_t j = r.lo; j < r.hi; j += 2) {
        promoted.push_back(weighted_choice(lv.buffer[j], lv.buffer[j + 1], rng_));
      }
      lv.buffer.erase(lv.buffer.begin() + static_cast<std::ptrdiff_t>(r.lo),
                      lv.buffer.begin() + static_cast<std::ptrdiff_t>(r.hi));
      auto& up = levels_[idx + 1];
      for (auto& e : promoted) up.insert_sorted(std::move(e));
      items_n_ -= r.size() / 2;
    }
    ++compactions_;
    drain_low_levels();
  }

  std::uint32_t k_;
  std::uint32_t budget_;
  double c_;
  VariantFlags flags_;
  std::uint32_t H_ = 0;
  std::uint32_t H_s_ = 0;
  std::uint64_t W_ = 0;
  std::uint64_t items_n_ = 0;
  std::uint64_t compactions_ = 0;
  std::uint64_t discarded_ = 0;
  std::vector<std::uint32_t> caps_;
  std::vector<WeightedCompactor<T>> levels_;
  Sampler<T> sampler_;
  Rng rng_;
};

}  // namespace kll

#endif  // KLL_WEIGHTED_HPP_
