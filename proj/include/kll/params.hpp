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

#ifndef KLL_PARAMS_HPP_
#define KLL_PARAMS_HPP_

#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

namespace kll {

inline constexpr double kDefaultDecay = 1.0 / std::numbers::sqrt2;

// Four switches named by the digits "lazy anti spread sweep", e.g. "1111".
struct VariantFlags {
  bool lazy = true;
  bool anti_correlated = true;
  bool spreading = true;
  bool sweep = true;

  static VariantFlags all() { return {true, true, true, true}; }
  static VariantFlags vanilla() { return {false, false, false, false}; }
  static VariantFlags parse(std::string_view digits);
  std::string digits() const;
  std::uint8_t bits() const;
  static VariantFlags from_bits(std::uint8_t b);

  friend bool operator==(const VariantFlags&, const VariantFlags&) = default;
};

enum class WeightedMode : std::uint8_t { None = 0, Base2 = 1, WeightAware = 2 };

WeightedMode parse_weighted_mode(std::string_view s);
std::string_view to_string(WeightedMode m);

// Throws unless 0.5 < c < 1.
void validate_decay(double c);

// k = max(2, ceil(budget (1 - c))), the top capacity for a given item budget.
std::uint32_t k_from_budget(std::uint32_t budget, double c);

// max(2, ceil(k c^(H - h))).
std::uint32_t capacity_at(std::uint32_t k, double c, std::uint32_t H, std::uint32_t h);

// C = c^3 (2c - 1) / 2.
double hoeffding_constant(double c);

// min(1, 2 exp(-C eps^2 k^2)): bound on P(|rank error| > eps n) for one query.
double failure_probability(double eps, std::uint32_t k, double c);

// The eps at which failure_probability equals delta.
double epsilon_for(double delta, std::uint32_t k, double c);

// True when total > k 2^H (without overflowing).
bool exceeds_capacity(std::uint64_t total, std::uint32_t k, std::uint32_t H);

}  // namespace kll

#endif  // KLL_PARAMS_HPP_
