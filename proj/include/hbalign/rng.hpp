// SPDX-License-Identifier: Apache-2.0
//
// hbalign - learned hierarchical beam alignment for mmWave arrays
// Copyright (C) 2026 hbalign contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace hbalign {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministically derives a sub-stream seed from a base seed and up to
// three stream coordinates (e.g. sample index, epoch, purpose tag).  Every
// randomized stage seeds its own Rng through this helper so that re-runs and
// parallel schedules see identical draws.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

// Stream purpose tags (arbitrary distinct constants).
namespace stream {
inline constexpr std::uint64_t channel = 0x6368616eULL;    // per-sample synthesis
inline constexpr std::uint64_t split = 0x73706c74ULL;      // dataset split shuffle
inline constexpr std::uint64_t init = 0x696e6974ULL;       // parameter init
inline constexpr std::uint64_t shuffle = 0x73687566ULL;    // minibatch shuffle
inline constexpr std::uint64_t noise = 0x6e6f6973ULL;      // probing noise (train)
inline constexpr std::uint64_t valnoise = 0x766e6f69ULL;   // probing noise (val)
inline constexpr std::uint64_t evalnoise = 0x65766c6eULL;  // probing noise (eval)
inline constexpr std::uint64_t cluster = 0x636c7573ULL;    // k-means seeding
inline constexpr std::uint64_t widebeam = 0x77626561ULL;   // wide-beam synthesis
inline constexpr std::uint64_t fdcheck = 0x66646368ULL;    // finite-diff sampling
inline constexpr std::uint64_t stage = 0x73746167ULL;      // staged (sequential) alignment
}  // namespace stream

// Thin deterministic RNG.  All distributions are hand-expanded from raw
// 64-bit draws so the value sequence depends only on the seed, not on the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform01_open_zero() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform01() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller (no cached second value, so each call
  // consumes exactly two raw draws).
  double normal() {
    const double u1 = uniform01_open_zero();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Circularly-symmetric complex normal with E|x|^2 = variance.
  std::complex<double> cnormal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = s * normal();
    const double im = s * normal();
    return {re, im};
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace hbalign
