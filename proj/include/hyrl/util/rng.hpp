// Copyright 2026 The hyrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HYRL_UTIL_RNG_HPP_
#define HYRL_UTIL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace hyrl::util {

// Deterministic 64-bit generator (splitmix64 core). Distribution sampling is
// implemented here rather than with <random> adaptors so that sequences are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int64_t randint(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::randint: n must be positive");
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller; one cached value.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Index sampled from an (unnormalized, nonnegative) weight vector.
  int64_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: zero mass");
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return static_cast<int64_t>(i);
    }
    return static_cast<int64_t>(w.size()) - 1;
  }

  // Decorrelated child stream; stable under call order.
  Rng fork(uint64_t stream) const {
    Rng child(state_ ^ (0xd1342543de82ef95ULL * (stream + 1)));
    return child;
  }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hyrl::util

#endif  // HYRL_UTIL_RNG_HPP_
