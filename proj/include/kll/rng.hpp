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

#ifndef KLL_RNG_HPP_
#define KLL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

namespace kll {

/**
 * mt19937_64 that counts the words it has produced. A sketch persists the
 * pair (seed, draws) and resumes the stream with discard().
 */
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  // The seed is expanded through seed_seq: raw consecutive seeds give
  // visibly correlated first outputs.
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(expand(seed)) {}

  static Rng at_position(std::uint64_t seed, std::uint64_t draws) {
    Rng r(seed);
    r.engine_.discard(draws);
    r.draws_ = draws;
    return r;
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  result_type operator()() {
    ++draws_;
    return engine_();
  }

  bool coin() { return ((*this)() >> 63) != 0; }

  // uniform in [0, bound)
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below(0)");
    std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
    return dist(*this);
  }

  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(*this); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.draws_ == b.draws_;
  }

 private:
  static std::mt19937_64 expand(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

// Deterministic 64-bit seed from a list of integers.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace kll

#endif  // KLL_RNG_HPP_
