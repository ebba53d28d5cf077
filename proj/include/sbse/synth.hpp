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

#include <cmath>
#include <cstdint>
#include <utility>

#include "sbse/audio.hpp"
#include "sbse/error.hpp"
#include "sbse/rng.hpp"

namespace sbse {

constexpr double kTwoPi = 6.28318530717958647692;

// Speech-like surrogate signal: a seeded fundamental in 80..300 Hz plus 4..8
// harmonics with seeded amplitudes and phases, gated by a slow (2..8 Hz)
// amplitude envelope whose negative lobes produce silent gaps. Peak level is
// normalized to 0.5. Deterministic in (duration_s, seed).
inline AudioClip synth_clean(double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0)) {
    throw DomainError("synth_clean: duration_s must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRateHz));

  Rng rng(derive_seed(seed, "synth-clean"));
  const double f0 = rng.uniform(80.0, 300.0);
  const auto n_harmonics = static_cast<int>(4 + rng.below(5));  // 4..8

  // Component 1 is the fundamental; harmonics roll off roughly as 1/k.
  const int n_components = 1 + n_harmonics;
  std::vector<double> amp(n_components), phase(n_components);
  amp[0] = 1.0;
  phase[0] = rng.uniform(0.0, kTwoPi);
  for (int k = 1; k < n_components; ++k) {
    amp[k] = rng.uniform(0.2, 0.9) / static_cast<double>(k + 1);
    phase[k] = rng.uniform(0.0, kTwoPi);
  }

  const double env_hz = rng.uniform(2.0, 8.0);
  const double env_phase = rng.uniform(0.0, kTwoPi);
  const double env_bias = rng.uniform(-0.35, 0.25);  // < 1, so gaps always occur

  AudioClip clip;
  clip.samples.resize(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    const double env =
        std::max(0.0, std::sin(kTwoPi * env_hz * t + env_phase) + env_bias);
    double s = 0.0;
    for (int k = 0; k < n_components; ++k) {
      s += amp[k] * std::sin(kTwoPi * f0 * (k + 1) * t + phase[k]);
    }
    clip.samples[i] = env * s;
    peak = std::max(peak, std::abs(clip.samples[i]));
  }
  if (peak > 0.0) {
    const double g = 0.5 / peak;
    for (double& s : clip.samples) s *= g;
  }
  return clip;
}

enum class NoiseKind { white, pink };

inline const char* to_string(NoiseKind kind) {
  return kind == NoiseKind::white ? "white" : "pink";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  throw ConfigError("unknown noise kind '" + s + "'");
}

// White: i.i.d. Gaussian samples. Pink: the same stream shaped toward a 1/f
// power spectral density with Kellet's three-pole filter. Both are
// RMS-normalized to 0.1 and deterministic in (duration_s, kind, seed).
inline AudioClip synth_noise(double duration_s, NoiseKind kind,
                             std::uint64_t seed) {
  if (!(duration_s > 0.0)) {
    throw DomainError("synth_noise: duration_s must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRateHz));

  Rng rng(derive_seed(seed, "synth-noise"));
  AudioClip clip;
  clip.samples.resize(n);

  if (kind == NoiseKind::white) {
    for (double& s : clip.samples) s = rng.gaussian();
  } else {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (double& s : clip.samples) {
      const double w = rng.gaussian();
      b0 = 0.99765 * b0 + w * 0.0990460;
      b1 = 0.96300 * b1 + w * 0.2965164;
      b2 = 0.57000 * b2 + w * 1.0526913;
      s = b0 + b1 + b2 + w * 0.1848;
    }
  }

  const double r = rms(clip);
  if (r <= 0.0) throw NumericError("synth_noise: degenerate zero-RMS output");
  const double g = 0.1 / r;
  for (double& s : clip.samples) s *= g;
  return clip;
}

// Scales `noise` so that 10*log10(P_clean / P_scaled_noise) equals snr_db
// exactly, and returns (clean + scaled_noise, scaled_noise).
inline std::pair<AudioClip, AudioClip> mix_at_snr(const AudioClip& clean,
                                                  const AudioClip& noise,
                                                  double snr_db) {
  if (clean.samples.size() != noise.samples.size()) {
    throw ShapeError("mix_at_snr: length mismatch (" +
                     std::to_string(clean.samples.size()) + " vs " +
                     std::to_string(noise.samples.size()) + ")");
  }
  if (clean.sample_rate_hz != noise.sample_rate_hz) {
    throw ShapeError("mix_at_snr: sample rate mismatch");
  }
  const double p_clean = mean_power(clean);
  const double p_noise = mean_power(noise);
  if (p_clean <= 0.0) {
    throw DegenerateInputError("mix_at_snr: clean signal has zero power");
  }
  if (p_noise <= 0.0) {
    throw DegenerateInputError("mix_at_snr: noise signal has zero power");
  }

  const double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  AudioClip scaled = noise;
  for (double& s : scaled.samples) s *= g;
  AudioClip noisy = clean;
  for (std::size_t i = 0; i < noisy.samples.size(); ++i) {
    noisy.samples[i] += scaled.samples[i];
  }
  return {std::move(noisy), std::move(scaled)};
}

}  // namespace sbse
