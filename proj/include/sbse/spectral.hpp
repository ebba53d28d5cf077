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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "sbse/audio.hpp"
#include "sbse/error.hpp"
#include "sbse/grid.hpp"
#include "sbse/synth.hpp"

namespace sbse {

// STFT analysis/synthesis parameters plus the power-law amplitude compression
// applied to complex spectrograms before any bridge processing.
// Defaults: 32 ms Hann window, 8 ms hop (75% overlap) at 16 kHz;
// compression |c| -> a * |c|^alpha with alpha = 0.5, a = 0.15.
struct SpectralParams {
  std::size_t window_len = 512;
  std::size_t hop = 128;
  std::size_t fft_size = 512;  // must equal window_len
  double compress_exponent = 0.5;  // alpha in (0, 1]
  double compress_scale = 0.15;    // a > 0

  std::size_t bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (window_len == 0 || hop == 0) {
      throw ConfigError("SpectralParams: window_len and hop must be positive");
    }
    if (fft_size != window_len) {
      throw ConfigError("SpectralParams: fft_size must equal window_len");
    }
    if ((fft_size & (fft_size - 1)) != 0) {
      throw ConfigError("SpectralParams: fft_size must be a power of two, got " +
                        std::to_string(fft_size));
    }
    if (window_len % hop != 0) {
      throw ConfigError("SpectralParams: hop must divide window_len");
    }
    if (!(compress_exponent > 0.0) || compress_exponent > 1.0) {
      throw ConfigError("SpectralParams: compress_exponent must be in (0, 1]");
    }
    if (!(compress_scale > 0.0)) {
      throw ConfigError("SpectralParams: compress_scale must be positive");
    }
  }
};

struct ComplexSpectrogram {
  ComplexGrid values;  // bins x frames
  SpectralParams params;

  std::size_t bins() const { return values.rows(); }
  std::size_t frames() const { return values.cols(); }
};

// Periodic Hann window; satisfies the constant-overlap-add property of its
// square at any hop dividing the length.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

// Max relative deviation of sum_k w^2[j + k*hop] over one hop period, i.e.
// how far the squared window is from exact COLA at this overlap.
inline double cola_squared_deviation(const SpectralParams& params) {
  params.validate();
  const auto w = hann_window(params.window_len);
  const std::size_t k_max = params.window_len / params.hop;
  std::vector<double> s(params.hop, 0.0);
  for (std::size_t j = 0; j < params.hop; ++j) {
    for (std::size_t k = 0; k < k_max; ++k) {
      const double v = w[j + k * params.hop];
      s[j] += v * v;
    }
  }
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double dev = 0.0;
  for (double v : s) dev = std::max(dev, std::abs(v - mean));
  return mean > 0.0 ? dev / mean : HUGE_VAL;
}

// In-place iterative radix-2 FFT (inverse applies the 1/N scale).
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ConfigError("fft_inplace: size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

namespace spectral_detail {

// Reflection about the edge sample, edge excluded ("reflect" padding).
inline std::size_t reflect_index(long long i, std::size_t len) {
  const auto n = static_cast<long long>(len);
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace spectral_detail

// One-sided STFT with centered frames: the signal is reflection-padded by
// window_len/2 on both ends, so frames = floor(len / hop) + 1.
inline ComplexSpectrogram stft(const AudioClip& clip, const SpectralParams& params) {
  params.validate();
  const std::size_t len = clip.samples.size();
  if (len < params.window_len) {
    throw ShapeError("stft: clip of " + std::to_string(len) +
                     " samples is shorter than the window (" +
                     std::to_string(params.window_len) + ")");
  }

  const std::size_t w_len = params.window_len;
  const std::size_t pad = w_len / 2;
  const std::size_t frames = len / params.hop + 1;
  const std::size_t bins = params.bins();
  const auto window = hann_window(w_len);

  ComplexSpectrogram spec;
  spec.params = params;
  spec.values = ComplexGrid(bins, frames);

  std::vector<std::complex<double>> buf(params.fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const long long start = static_cast<long long>(f * params.hop) -
                            static_cast<long long>(pad);
    for (std::size_t i = 0; i < w_len; ++i) {
      const std::size_t src =
          spectral_detail::reflect_index(start + static_cast<long long>(i), len);
      buf[i] = window[i] * clip.samples[src];
    }
    fft_inplace(buf, false);
    for (std::size_t k = 0; k < bins; ++k) spec.values.at(k, f) = buf[k];
  }
  return spec;
}

// Least-squares overlap-add inverse with window-squared normalization.
// By default the output has (frames - 1) * hop samples; pass out_len to
// recover an exact original length (any remainder < hop is still covered by
// the final frames).
inline AudioClip istft(const ComplexSpectrogram& spec, std::size_t out_len = 0) {
  spec.params.validate();
  const std::size_t frames = spec.frames();
  if (frames == 0) throw ShapeError("istft: spectrogram has zero frames");
  if (spec.bins() != spec.params.bins()) {
    throw ShapeError("istft: bin count does not match params");
  }

  const std::size_t w_len = spec.params.window_len;
  const std::size_t hop = spec.params.hop;
  const std::size_t pad = w_len / 2;
  const std::size_t n_fft = spec.params.fft_size;
  if (out_len == 0) out_len = (frames - 1) * hop;
  if (out_len > (frames - 1) * hop + pad) {
    throw ShapeError("istft: requested length not covered by the given frames");
  }
  const auto window = hann_window(w_len);

  const std::size_t padded_len = (frames - 1) * hop + w_len;
  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> den(padded_len, 0.0);

  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t f = 0; f < frames; ++f) {
    buf[0] = spec.values.at(0, f);
    for (std::size_t k = 1; k < n_fft / 2; ++k) {
      buf[k] = spec.values.at(k, f);
      buf[n_fft - k] = std::conj(buf[k]);
    }
    buf[n_fft / 2] = spec.values.at(n_fft / 2, f);
    fft_inplace(buf, true);
    const std::size_t base = f * hop;
    for (std::size_t i = 0; i < w_len; ++i) {
      acc[base + i] += window[i] * buf[i].real();
      den[base + i] += window[i] * window[i];
    }
  }

  AudioClip out;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double d = den[i + pad];
    out.samples[i] = d > 1e-12 ? acc[i + pad] / d : 0.0;
  }
  return out;
}

// |c| -> a * |c|^alpha, phase untouched; zero maps to zero.
inline ComplexSpectrogram compress(const ComplexSpectrogram& spec) {
  if (!all_finite(spec.values)) throw NumericError("compress: non-finite input");
  const double alpha = spec.params.compress_exponent;
  const double a = spec.params.compress_scale;
  ComplexSpectrogram out = spec;
  for (auto& c : out.values) {
    const double mag = std::abs(c);
    c = mag > 0.0 ? c * (a * std::pow(mag, alpha) / mag) : std::complex<double>(0.0);
  }
  return out;
}

// Exact inverse of compress on finite inputs.
inline ComplexSpectrogram decompress(const ComplexSpectrogram& spec) {
  if (!all_finite(spec.values)) throw NumericError("decompress: non-finite input");
  const double alpha = spec.params.compress_exponent;
  const double a = spec.params.compress_scale;
  ComplexSpectrogram out = spec;
  for (auto& c : out.values) {
    const double mag = std::abs(c);
    c = mag > 0.0 ? c * (std::pow(mag / a, 1.0 / alpha) / mag)
                  : std::complex<double>(0.0);
  }
  return out;
}

inline RealGrid magnitude(const ComplexGrid& values) {
  RealGrid out(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) out.data()[i] = std::abs(values.data()[i]);
  return out;
}

inline RealGrid magnitude(const ComplexSpectrogram& spec) {
  return magnitude(spec.values);
}

// Fixed-length frame crop for training: frames [start, start + target) are
// copied; anything past the input's frame count is zero (right zero-padding
// for short inputs).
inline ComplexGrid crop_frames(const ComplexGrid& values, std::size_t start,
                               std::size_t target_frames) {
  ComplexGrid out(values.rows(), target_frames);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < target_frames; ++c) {
      const std::size_t src = start + c;
      out.at(r, c) = src < values.cols() ? values.at(r, src) : std::complex<double>(0.0);
    }
  }
  return out;
}

}  // namespace sbse
