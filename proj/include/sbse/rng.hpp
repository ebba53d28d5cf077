// Copyright 2026 The SBSE Authors
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

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>

namespace sbse {

// All randomness in this library goes through the generator below so that
// every sampled quantity is a pure function of (parameters, seed) and is
// bit-for-bit reproducible at fp64 on a given platform. The algorithm stack
// is fixed and documented here:
//
//   * seeding / fan-out : splitmix64 (Steele, Lea, Flood 2014)
//   * uniform stream    : xoshiro256++ (Blackman, Vigna 2019)
//   * gaussians         : Box-Muller over the uniform stream
//
// std::normal_distribution is deliberately avoided: its output sequence is
// implementation-defined and would break cross-toolchain reproducibility.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic seed fan-out: one master seed expands into independent named
// streams, optionally indexed. Distinct (stream, index) pairs yield distinct
// seeds for a fixed master because the final splitmix64 step is a bijection
// of its state. This is the hash referred to wherever per-record / per-step /
// per-clip seeds are derived from the run's master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
  // FNV-1a over the stream tag.
  std::uint64_t tag = 0xcbf29ce484222325ull;
  for (unsigned char c : stream) {
    tag ^= c;
    tag *= 0x100000001b3ull;
  }
  std::uint64_t a = master;
  std::uint64_t b = tag;
  std::uint64_t mixed = splitmix64(a) ^ splitmix64(b);
  std::uint64_t state = mixed + index;
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // Recommended xoshiro seeding: expand the seed through splitmix64.
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire multiply-shift; bias <= n / 2^64.
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex normal with unit total variance: real and
  // imaginary parts are i.i.d. N(0, 1/2). This is the library-wide convention
  // for complex noise; every variance identity in the bridge module assumes
  // it.
  std::complex<double> gaussian_complex() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * kInvSqrt2, im * kInvSqrt2};
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  static constexpr double kInvSqrt2 = 0.70710678118654752440;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace sbse
