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

#ifndef KLL_SERDE_HPP_
#define KLL_SERDE_HPP_

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>

#include "kll/compactor.hpp"
#include "kll/item_codec.hpp"
#include "kll/params.hpp"

namespace kll {

/*
 * Byte layout (all integers little-endian):
 *
 *   "KLL1"
 *   u8   flags: bit0 lazy, bit1 anti-correlated, bit2 spreading, bit3 sweep,
 *              bits4-5 weighted mode (0 none, 1 base2, 2 weight-aware)
 *   u8   item codec (0 f64, 1 utf-8)
 *   u32  k, budget, H, H_s
 *   f64  c
 *   u64  n_total, items_n
 *   u64  sampler accum, then the candidate payload iff accum > 0
 *   u32  level count
 *   per level, bottom first:
 *     u32 h, u32 item count,
 *     u8 theta marker (0 null, 1 below-all, 2 value + payload),
 *     u8 sweep parity, u8 pending direction (0 none, 1 even, 2 odd),
 *     u64 sweeps started,
 *     items ascending, each a u32-length-prefixed payload
 *     (weight-aware: followed by its u64 weight)
 *   u64  rng seed, rng draws, compactions, discarded weight
 */
struct SketchHeader {
  VariantFlags flags;
  WeightedMode mode = WeightedMode::None;
  std::uint8_t codec = 0;
  std::uint32_t k = 0;
  std::uint32_t budget = 0;
  std::uint32_t H = 0;
  std::uint32_t H_s = 0;
  double c = 0;
  std::uint64_t n_total = 0;
  std::uint64_t items_n = 0;
};

inline constexpr char kMagic[4] = {'K', 'L', 'L', '1'};

inline void write_header(ByteWriter& w, const SketchHeader& h) {
  w.bytes(kMagic, 4);
  w.u8(static_cast<std::uint8_t>(h.flags.bits() | (static_cast<std::uint8_t>(h.mode) << 4)));
  w.u8(h.codec);
  w.u32(h.k);
  w.u32(h.budget);
  w.u32(h.H);
  w.u32(h.H_s);
  w.f64(h.c);
  w.u64(h.n_total);
  w.u64(h.items_n);
}

inline SketchHeader read_header(ByteReader& r) {
  auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw std::runtime_error("not a sketch file (bad magic/version)");
  SketchHeader h;
  const std::uint8_t f = r.u8();
  if ((f & 0xC0) != 0) throw std::runtime_error("unknown flag bits");
  h.flags = VariantFlags::from_bits(f & 0x0F);
  const std::uint8_t mode = (f >> 4) & 0x3;
  if (mode > 2) throw std::runtime_error("unknown weighted mode");
  h.mode = static_cast<WeightedMode>(mode);
  h.codec = r.u8();
  if (h.codec > 1) throw std::runtime_error("unknown item codec");
  h.k = r.u32();
  h.budget = r.u32();
  h.H = r.u32();
  h.H_s = r.u32();
  h.c = r.f64();
  h.n_total = r.u64();
  h.items_n = r.u64();
  if (!(h.c > 0.5 && h.c < 1.0)) throw std::runtime_error("decay rate out of range");
  if (h.k < 2 || h.H_s > h.H || h.H > 62) throw std::runtime_error("inconsistent sketch parameters");
  return h;
}

inline SketchHeader peek_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return read_header(r);
}

template <class T>
void write_level_state(ByteWriter& w, const LevelState<T>& st) {
  using Mark = typename SweepState<T>::Mark;
  w.u8(static_cast<std::uint8_t>(st.sweep.mark));
  if (st.sweep.mark == Mark::Value) ItemTraits<T>::encode(st.sweep.theta, w);
  w.u8(static_cast<std::uint8_t>(st.sweep.parity));
  w.u8(!st.direction.pending ? 0 : (*st.direction.pending == KeepParity::KeepEven ? 1 : 2));
  w.u64(st.sweeps_started);
}

template <class T>
LevelState<T> read_level_state(ByteReader& r) {
  using Mark = typename SweepState<T>::Mark;
  LevelState<T> st;
  const std::uint8_t mark = r.u8();
  if (mark > 2) throw std::runtime_error("bad theta marker");
  st.sweep.mark = static_cast<Mark>(mark);
  if (st.sweep.mark == Mark::Value) st.sweep.theta = ItemTraits<T>::decode(r);
  const std::uint8_t parity = r.u8();
  if (parity > 1) throw std::runtime_error("bad sweep parity");
  st.sweep.parity = static_cast<KeepParity>(parity);
  const std::uint8_t pending = r.u8();
  if (pending > 2) throw std::runtime_error("bad direction state");
  if (pending == 1) st.direction.pending = KeepParity::KeepEven;
  if (pending == 2) st.direction.pending = KeepParity::KeepOdd;
  st.sweeps_started = r.u64();
  return st;
}

struct SketchTrailer {
  std::uint64_t seed = 0;
  std::uint64_t draws = 0;
  std::uint64_t compactions = 0;
  std::uint64_t discarded = 0;
};

inline void write_trailer(ByteWriter& w, const SketchTrailer& t) {
  w.u64(t.seed);
  w.u64(t.draws);
  w.u64(t.compactions);
  w.u64(t.discarded);
}

inline SketchTrailer read_trailer(ByteReader& r) {
  SketchTrailer t;
  t.seed = r.u64();
  t.draws = r.u64();
  t.compactions = r.u64();
  t.discarded = r.u64();
  if (!r.done()) throw std::runtime_error("trailing bytes after sketch data");
  return t;
}

}  // namespace kll

#endif  // KLL_SERDE_HPP_
