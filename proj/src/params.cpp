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

#include "kll/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kll {

namespace {
// c^2 at c = 1/sqrt(2) lands a hair above 0.5; without slack the ceiling
// would round 50.000000000000007 up to 51.
constexpr double kCeilSlack = 1e-9;
}  // namespace

VariantFlags VariantFlags::parse(std::string_view d) {
  if (d.size() != 4) throw std::invalid_argument("variant must be four 0/1 digits");
  for (char ch : d) {
    if (ch != '0' && ch != '1') throw std::invalid_argument("variant must be four 0/1 digits");
  }
  return {d[0] == '1', d[1] == '1', d[2] == '1', d[3] == '1'};
}

std::string VariantFlags::digits() const {
  std::string s(4, '0');
  if (lazy) s[0] = '1';
  if (anti_correlated) s[1] = '1';
  if (spreading) s[2] = '1';
  if (sweep) s[3] = '1';
  return s;
}

std::uint8_t VariantFlags::bits() const {
  return static_cast<std::uint8_t>((lazy ? 1 : 0) | (anti_correlated ? 2 : 0) | (spreading ? 4 : 0) |
                                   (sweep ? 8 : 0));
}

VariantFlags VariantFlags::from_bits(std::uint8_t b) {
  return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
}

WeightedMode parse_weighted_mode(std::string_view s) {
  if (s == "none") return WeightedMode::None;
  if (s == "base2") return WeightedMode::Base2;
  if (s == "weight-aware") return WeightedMode::WeightAware;
  throw std::invalid_argument("unknown weighted mode: " + std::string(s));
}

std::string_view to_string(WeightedMode m) {
  switch (m) {
    case WeightedMode::None: return "none";
    case WeightedMode::Base2: return "base2";
    case WeightedMode::WeightAware: return "weight-aware";
  }
  return "?";
}

void validate_decay(double c) {
  if (!(c > 0.5 && c < 1.0)) throw std::invalid_argument("decay rate c must lie in (0.5, 1)");
}

std::uint32_t k_from_budget(std::uint32_t budget, double c) {
  validate_decay(c);
  const double k = std::ceil(static_cast<double>(budget) * (1.0 - c) - kCeilSlack);
  return std::max<std::uint32_t>(2, static_cast<std::uint32_t>(k));
}

std::uint32_t capacity_at(std::uint32_t k, double c, std::uint32_t H, std::uint32_t h) {
  if (h > H) throw std::invalid_argument("level above the top");
  const double cap = std::ceil(static_cast<double>(k) * std::pow(c, static_cast<double>(H - h)) - kCeilSlack);
  return std::max<std::uint32_t>(2, static_cast<std::uint32_t>(cap));
}

double hoeffding_constant(double c) {
  validate_decay(c);
  return c * c * c * (2.0 * c - 1.0) / 2.0;
}

double failure_probability(double eps, std::uint32_t k, double c) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  const double kk = static_cast<double>(k);
  return std::min(1.0, 2.0 * std::exp(-hoeffding_constant(c) * eps * eps * kk * kk));
}

double epsilon_for(double delta, std::uint32_t k, double c) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  return std::sqrt(std::log(2.0 / delta) / hoeffding_constant(c)) / static_cast<double>(k);
}

bool exceeds_capacity(std::uint64_t total, std::uint32_t k, std::uint32_t H) {
  if (H >= 64) return false;
  if (k > (~std::uint64_t{0} >> H)) return false;
  return total > (static_cast<std::uint64_t>(k) << H);
}

}  // namespace kll
