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

#ifndef KLL_SAMPLER_HPP_
#define KLL_SAMPLER_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kll {

/**
 * Single-slot weighted reservoir. Takes items of any positive weight and
 * emits items of weight exactly M = 2^rate_exp. Weight is processed in
 * chunks that fill the reservoir to M, so offered weight always equals
 * emitted weight plus accum.
 */
template <class T>
class Sampler {
 public:
  static constexpr std::uint32_t kMaxRateExp = 62;

  explicit Sampler(std::uint32_t rate_exp = 0) {
    if (rate_exp > kMaxRateExp) throw std::invalid_argument("sampler rate too large");
    rate_exp_ = rate_exp;
  }

  std::uint32_t rate_exp() const { return rate_exp_; }
  std::uint64_t rate() const { return std::uint64_t{1} << rate_exp_; }
  std::uint64_t accum() const { return accum_; }
  const std::optional<T>& candidate() const { return candidate_; }

  // emit(const T&) is called once per emitted item of weight rate().
  template <class Gen, class Emit>
  void offer(const T& item, std::uint64_t weight, Gen& rng, Emit&& emit) {
    if (weight == 0) throw std::invalid_argument("sampler weight must be positive");
    const std::uint64_t m = rate();
    while (weight > 0) {
      const std::uint64_t take = std::min(weight, m - accum_);
      weight -= take;
      if (accum_ + take == m) {
        // full chunk: the candidate wins with probability accum / M
        if (accum_ > 0 && rng.below(m) < accum_) {
          emit(*candidate_);
        } else {
          emit(item);
        }
        accum_ = 0;
        candidate_.reset();
      } else {
        if (accum_ == 0 || rng.below(accum_ + take) < take) candidate_ = item;
        accum_ += take;
      }
    }
  }

  template <class Gen>
  std::vector<T> offer(const T& item, std::uint64_t weight, Gen& rng) {
    std::vector<T> out;
    offer(item, weight, rng, [&](const T& e) { out.push_back(e); });
    return out;
  }

  void raise_rate(std::uint32_t new_exp) {
    if (new_exp < rate_exp_) throw std::invalid_argument("rate may only grow");
    if (new_exp > kMaxRateExp) throw std::overflow_error("sampler rate too large");
    rate_exp_ = new_exp;
  }

  void restore(std::uint32_t rate_exp, std::uint64_t accum, std::optional<T> candidate) {
    if (rate_exp > kMaxRateExp) throw std::runtime_error("sampler rate too large");
    if (accum >= (std::uint64_t{1} << rate_exp)) throw std::runtime_error("sampler accum out of range");
    if ((accum > 0) != candidate.has_value()) throw std::runtime_error("sampler candidate mismatch");
    rate_exp_ = rate_exp;
    accum_ = accum;
    candidate_ = std::move(candidate);
  }

 private:
  std::uint32_t rate_exp_ = 0;
  std::uint64_t accum_ = 0;
  std::optional<T> candidate_;
};

}  // namespace kll

#endif  // KLL_SAMPLER_HPP_
