// Copyright 2026 The vinp Authors.
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

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vinp {

// Counter-based random numbers. Every draw is a pure function of a key
// tuple (seed, stream, counter...), hashed with the SplitMix64 finaliser,
// so draws do not depend on evaluation order or thread count.
namespace rng {

constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t key(std::uint64_t a) { return mix(a); }

template <typename... Rest>
constexpr std::uint64_t key(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return key(mix(a) ^ (b + 0x632be59bd9b4e019ULL), static_cast<std::uint64_t>(rest)...);
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) (multiply-shift reduction).
inline std::uint64_t below(std::uint64_t h, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(h) * n) >> 64);
}

// Sequential stream over a fixed key, for inner loops that need many draws.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return unit(next()); }

  // Standard normal pair by the Box-Muller transform.
  void normal_pair(double& a, double& b) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    a = r * std::cos(angle);
    b = r * std::sin(angle);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rng
}  // namespace vinp
