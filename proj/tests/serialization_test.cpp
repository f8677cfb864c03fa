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

#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <string>

#include "kll/kll_sketch.hpp"
#include "kll/serde.hpp"
#include "kll/weighted.hpp"

namespace kll {
namespace {

using Bytes = std::vector<std::uint8_t>;

template <class Sketch>
Sketch filled(std::uint32_t budget, VariantFlags flags, std::uint64_t seed, std::uint64_t n) {
  Sketch s(budget, kDefaultDecay, flags, seed);
  std::mt19937_64 g(seed);
  for (std::uint64_t i = 0; i < n; ++i) s.update(static_cast<double>(g() % 10007) / 7.0);
  return s;
}

TEST(SerializationTest, RoundTripAllVariantsAndBackends) {
  for (std::uint8_t b = 0; b < 16; ++b) {
    const auto flags = VariantFlags::from_bits(b);
    for (std::uint64_t n : {0u, 1u, 37u, 5000u}) {
      const auto list = filled<KllSketch<double>>(24, flags, b + 1, n);
      const auto packed = filled<PackedKllSketch<double>>(24, flags, b + 1, n);
      const Bytes bytes = list.serialize();
      EXPECT_EQ(packed.serialize(), bytes) << flags.digits() << " n=" << n;
      EXPECT_EQ(KllSketch<double>::deserialize(bytes).serialize(), bytes);
      EXPECT_EQ(PackedKllSketch<double>::deserialize(bytes).serialize(), bytes);
    }
  }
}

TEST(SerializationTest, ResumeAfterRoundTrip) {
  for (std::uint8_t b = 0; b < 16; ++b) {
    const auto flags = VariantFlags::from_bits(b);
    auto a = filled<KllSketch<double>>(30, flags, 7, 3000);
    auto c = KllSketch<double>::deserialize(a.serialize());
    auto p = PackedKllSketch<double>::deserialize(a.serialize());
    for (int i = 0; i < 4000; ++i) {
      const double x = (i * 131) % 977;
      a.update(x);
      c.update(x);
      p.update(x);
    }
    EXPECT_EQ(c.serialize(), a.serialize()) << flags.digits();
    EXPECT_EQ(p.serialize(), a.serialize()) << flags.digits();
  }
}

TEST(SerializationTest, StringCodec) {
  KllSketch<std::string> s(16, kDefaultDecay, VariantFlags::all(), 3);
  for (int i = 0; i < 2000; ++i) s.update(std::string(i % 7, 'x') + std::to_string(i * 31 % 1000));
  s.update("");
  s.update("caf\xc3\xa9");
  const Bytes bytes = s.serialize();
  const auto r = KllSketch<std::string>::deserialize(bytes);
  EXPECT_EQ(r.serialize(), bytes);
  EXPECT_EQ(r.rank("m").value, s.rank("m").value);
  EXPECT_EQ(peek_header(bytes).codec, 1);
  EXPECT_THROW(KllSketch<double>::deserialize(bytes), std::runtime_error);
  EXPECT_THROW(KllSketch<std::string>::deserialize(KllSketch<double>().serialize()), std::runtime_error);
}

TEST(SerializationTest, EveryTruncationFails) {
  auto s = filled<KllSketch<double>>(16, VariantFlags::all(), 1, 200);
  const Bytes bytes = s.serialize();
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    const std::span<const std::uint8_t> prefix(bytes.data(), len);
    EXPECT_THROW(KllSketch<double>::deserialize(prefix), std::runtime_error) << "length " << len;
  }
  Bytes longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(KllSketch<double>::deserialize(longer), std::runtime_error);
}

TEST(SerializationTest, CorruptHeaders) {
  auto s = filled<KllSketch<double>>(16, VariantFlags::all(), 1, 200);
  const Bytes bytes = s.serialize();
  auto corrupt = [&](std::size_t at, std::uint8_t v) {
    Bytes b = bytes;
    b[at] = v;
    return b;
  };
  EXPECT_THROW(KllSketch<double>::deserialize(corrupt(0, 'X')), std::runtime_error);
  EXPECT_THROW(KllSketch<double>::deserialize(corrupt(3, '2')), std::runtime_error);
  EXPECT_THROW(KllSketch<double>::deserialize(corrupt(4, 0xc0)), std::runtime_error);  // reserved bits
  EXPECT_THROW(KllSketch<double>::deserialize(corrupt(5, 7)), std::runtime_error);     // unknown codec
  // c = 2.0
  Bytes bad_c = bytes;
  const double two = 2.0;
  std::memcpy(bad_c.data() + 22, &two, 8);
  EXPECT_THROW(KllSketch<double>::deserialize(bad_c), std::runtime_error);
  // n_total off by one
  Bytes bad_n = bytes;
  ++bad_n[30];
  EXPECT_THROW(KllSketch<double>::deserialize(bad_n), std::runtime_error);
}

TEST(SerializationTest, EmptySketchIsMinimal) {
  const KllSketch<double> s(64);
  const Bytes bytes = s.serialize();
  // header 46, accum 8, level count 4, one empty level 19, trailer 32
  EXPECT_EQ(bytes.size(), 109u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "KLL1");
  const auto r = KllSketch<double>::deserialize(bytes);
  EXPECT_TRUE(r.empty());
  EXPECT_EQ(r.serialize(), bytes);
}

TEST(SerializationTest, HeaderFields) {
  auto s = filled<KllSketch<double>>(100, VariantFlags::parse("1010"), 5, 10000);
  const auto h = peek_header(s.serialize());
  EXPECT_EQ(h.flags, VariantFlags::parse("1010"));
  EXPECT_EQ(h.mode, WeightedMode::None);
  EXPECT_EQ(h.k, s.k());
  EXPECT_EQ(h.budget, 100u);
  EXPECT_EQ(h.H, s.height());
  EXPECT_EQ(h.H_s, s.sampler_height());
  EXPECT_EQ(h.c, kDefaultDecay);
  EXPECT_EQ(h.n_total, 10000u);
  EXPECT_EQ(h.items_n, s.items_n());
}

TEST(SerializationTest, NegativeZeroIsCanonical) {
  KllSketch<double> a, b;
  a.update(-0.0);
  b.update(0.0);
  EXPECT_EQ(a.serialize(), b.serialize());
}

TEST(SerializationTest, WeightAwareRoundTrip) {
  std::mt19937_64 g(12);
  for (std::uint8_t bits = 0; bits < 16; ++bits) {
    WeightAwareSketch<double> s(20, kDefaultDecay, VariantFlags::from_bits(bits), bits);
    for (int i = 0; i < 3000; ++i) s.update(static_cast<double>(g() % 1000), 1 + g() % 300);
    s.update(1.5, std::uint64_t{1} << 40);  // forces a jump
    const Bytes bytes = s.serialize();
    EXPECT_EQ(peek_header(bytes).mode, WeightedMode::WeightAware);
    const auto r = WeightAwareSketch<double>::deserialize(bytes);
    EXPECT_EQ(r.serialize(), bytes);
    EXPECT_EQ(r.discarded_weight(), s.discarded_weight());
    EXPECT_THROW(KllSketch<double>::deserialize(bytes), std::runtime_error);
    EXPECT_THROW(WeightAwareSketch<double>::deserialize(KllSketch<double>().serialize()), std::runtime_error);
    for (std::size_t len = 0; len < bytes.size(); len += 7) {
      EXPECT_THROW(WeightAwareSketch<double>::deserialize(std::span<const std::uint8_t>(bytes.data(), len)),
                   std::runtime_error);
    }
  }
}

TEST(SerializationTest, Base2ModeRoundTrip) {
  KllSketch<double> s(32, kDefaultDecay, VariantFlags::all(), 4, WeightedMode::Base2);
  std::mt19937_64 g(4);
  for (int i = 0; i < 2000; ++i) base2_update(s, WeightedItem<double>{static_cast<double>(g() % 100), 1 + g() % 1000});
  const Bytes bytes = s.serialize();
  EXPECT_EQ(peek_header(bytes).mode, WeightedMode::Base2);
  const auto r = KllSketch<double>::deserialize(bytes);
  EXPECT_EQ(r.mode(), WeightedMode::Base2);
  EXPECT_EQ(r.serialize(), bytes);
}

}  // namespace
}  // namespace kll
