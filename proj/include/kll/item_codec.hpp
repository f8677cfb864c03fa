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

#ifndef KLL_ITEM_CODEC_HPP_
#define KLL_ITEM_CODEC_HPP_

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kll {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  const std::vector<std::uint8_t>& data() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw std::runtime_error("truncated sketch data");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

template <class T>
struct ItemTraits;

template <>
struct ItemTraits<double> {
  static constexpr std::uint8_t codec = 0;
  static constexpr std::string_view name = "f64";

  // NaN has no place in a total order; -0.0 is folded into +0.0 so equal
  // items always encode to equal bytes.
  static double canonical(double v) {
    if (std::isnan(v)) throw std::invalid_argument("NaN items are not ordered");
    return v == 0.0 ? 0.0 : v;
  }
  static void encode(double v, ByteWriter& w) {
    w.u32(8);
    w.f64(v);
  }
  static double decode(ByteReader& r) {
    if (r.u32() != 8) throw std::runtime_error("bad f64 payload length");
    return canonical(r.f64());
  }
  static double parse(std::string_view s) {
    double v = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || b == e) {
      throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    }
    return canonical(v);
  }
  static std::string format(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }
};

template <>
struct ItemTraits<std::string> {
  static constexpr std::uint8_t codec = 1;
  static constexpr std::string_view name = "string";

  static const std::string& canonical(const std::string& v) { return v; }
  static void encode(const std::string& v, ByteWriter& w) {
    if (v.size() > 0xffffffffu) throw std::length_error("item too long");
    w.u32(static_cast<std::uint32_t>(v.size()));
    w.bytes(v.data(), v.size());
  }
  static std::string decode(ByteReader& r) {
    const auto n = r.u32();
    auto b = r.bytes(n);
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  }
  static std::string parse(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return std::string(s);
  }
  static const std::string& format(const std::string& v) { return v; }
};

}  // namespace kll

#endif  // KLL_ITEM_CODEC_HPP_
