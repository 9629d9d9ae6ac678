// Copyright 2026 The K-SENSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KSENSE_RNG_HPP_
#define KSENSE_RNG_HPP_

// Pinned pseudo-random generators. Every stochastic step in the library
// (fixture synthesis, splits, batch order, dropout masks, initialisation,
// bootstrap resampling) draws from these so that results are reproducible
// bit-for-bit across platforms and language ports.
//
//   splitmix64  (Steele, Lea, Flood 2014)
//     state += 0x9E3779B97F4A7C15
//     z = state
//     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//     return z ^ (z >> 31)
//
//   xoshiro256** (Blackman, Vigna 2018), state seeded with four successive
//   splitmix64 outputs.
//     result = rotl(s1 * 5, 7) * 9
//     t = s1 << 17
//     s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//
// Derived quantities:
//   uniform()  = (next() >> 11) * 2^-53                     in [0, 1)
//   below(n)   = floor(uniform() * n)                       in [0, n)
//   gaussian() = Box-Muller, cos branch only:
//                sqrt(-2 ln(1 - u1)) * cos(2 pi u2)

#include <array>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace ksense {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_;
};

// Hashes an ordered list of integers into one seed by chaining splitmix64.
// Used to derive independent sub-streams, e.g. a dropout mask seed from
// (run seed, epoch, batch, index, pass).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace ksense

#endif  // KSENSE_RNG_HPP_
