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
#include <cstddef>
#include <vector>

#include "sbse/error.hpp"
#include "sbse/grid.hpp"
#include "sbse/rng.hpp"

namespace sbse {

// Minimal fp64 convolutional stack with hand-written reverse-mode gradients.
// Topology (fixed): conv(in -> hidden) + GELU, a residual block
// h2 = h1 + GELU(conv(hidden -> hidden)), conv(hidden -> out). All convs are
// 'same'-padded k x k (k odd), stride 1. Gradients are exact; the test suite
// checks them against central finite differences.

struct FeatureMap {
  std::size_t ch = 0, h = 0, w = 0;
  std::vector<double> v;

  FeatureMap() = default;
  FeatureMap(std::size_t ch_, std::size_t h_, std::size_t w_)
      : ch(ch_), h(h_), w(w_), v(ch_ * h_ * w_, 0.0) {}

  double* plane(std::size_t c) { return v.data() + c * h * w; }
  const double* plane(std::size_t c) const { return v.data() + c * h * w; }
  std::size_t plane_size() const { return h * w; }
};

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
}

inline double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x * 0.70710678118654752440)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace net_detail {

// Row update dst[x] += w0*src[x-1] + w1*src[x] + w2*src[x+1] with zero
// padding at both ends. The fused form is the hot loop of every forward and
// backward pass.
inline void row_tap3(double* dst, const double* src, std::size_t w, double w0,
                     double w1, double w2) {
  if (w == 1) {
    dst[0] += w1 * src[0];
    return;
  }
  dst[0] += w1 * src[0] + w2 * src[1];
  for (std::size_t x = 1; x + 1 < w; ++x) {
    dst[x] += w0 * src[x - 1] + w1 * src[x] + w2 * src[x + 1];
  }
  dst[w - 1] += w0 * src[w - 2] + w1 * src[w - 1];
}

// out[oc] = bias[oc] + sum_ic W[oc][ic] * in[ic]  (same padding)
inline void conv2d_forward(const FeatureMap& in, const double* weights,
                           const double* bias, std::size_t out_ch, std::size_t k,
                           FeatureMap& out) {
  const std::size_t h = in.h, w = in.w, in_ch = in.ch;
  const long long p = static_cast<long long>(k / 2);
  out.ch = out_ch;
  out.h = h;
  out.w = w;
  out.v.assign(out_ch * h * w, 0.0);

  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    double* out_plane = out.plane(oc);
    const double b = bias[oc];
    for (std::size_t i = 0; i < h * w; ++i) out_plane[i] = b;
    for (std::size_t ic = 0; ic < in_ch; ++ic) {
      const double* in_plane = in.plane(ic);
      const double* wk = weights + ((oc * in_ch + ic) * k) * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long long dy = static_cast<long long>(ky) - p;
        const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
        const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
        if (k == 3) {
          const double w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src =
                in_plane +
                static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
            row_tap3(out_plane + y * w, src, w, w0, w1, w2);
          }
          continue;
        }
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long long dx = static_cast<long long>(kx) - p;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
          const double wv = wk[ky * k + kx];
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src =
                in_plane + static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
            double* dst = out_plane + y * w;
            for (std::size_t x = x0; x < x1; ++x) {
              dst[x] += wv * src[static_cast<long long>(x) + dx];
            }
          }
        }
      }
    }
  }
}

// Accumulates gradients w.r.t. weights/bias and (optionally) the input.
inline void conv2d_backward(const FeatureMap& in, const double* weights,
                            std::size_t out_ch, std::size_t k,
                            const FeatureMap& grad_out, double* grad_weights,
                            double* grad_bias, FeatureMap* grad_in) {
  const std::size_t h = in.h, w = in.w, in_ch = in.ch;
  const long long p = static_cast<long long>(k / 2);

  if (grad_in != nullptr) {
    grad_in->ch = in_ch;
    grad_in->h = h;
    grad_in->w = w;
    grad_in->v.assign(in_ch * h * w, 0.0);
  }

  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    const double* g_plane = grad_out.plane(oc);
    double acc_b = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) acc_b += g_plane[i];
    grad_bias[oc] += acc_b;

    for (std::size_t ic = 0; ic < in_ch; ++ic) {
      const double* in_plane = in.plane(ic);
      const double* wk = weights + ((oc * in_ch + ic) * k) * k;
      double* gwk = grad_weights + ((oc * in_ch + ic) * k) * k;
      double* gi_plane = grad_in != nullptr ? grad_in->plane(ic) : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long long dy = static_cast<long long>(ky) - p;
        const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
        const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
        if (k == 3) {
          // Weight gradient: three accumulators in one pass per row.
          double a0 = 0.0, a1 = 0.0, a2 = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src =
                in_plane +
                static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
            const double* g_row = g_plane + y * w;
            a1 += g_row[0] * src[0];
            if (w > 1) a2 += g_row[0] * src[1];
            for (std::size_t x = 1; x + 1 < w; ++x) {
              const double g = g_row[x];
              a0 += g * src[x - 1];
              a1 += g * src[x];
              a2 += g * src[x + 1];
            }
            if (w > 1) {
              const double g = g_row[w - 1];
              a0 += g * src[w - 2];
              a1 += g * src[w - 1];
            }
          }
          gwk[ky * 3] += a0;
          gwk[ky * 3 + 1] += a1;
          gwk[ky * 3 + 2] += a2;
          if (gi_plane != nullptr) {
            // Input gradient: the adjoint pass applies the spatially
            // reversed taps, gi[u] += w2*g[u-1] + w1*g[u] + w0*g[u+1].
            for (std::size_t y = y0; y < y1; ++y) {
              double* gi_row =
                  gi_plane +
                  static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
              const double* g_row = g_plane + y * w;
              row_tap3(gi_row, g_row, w, wk[ky * 3 + 2], wk[ky * 3 + 1], wk[ky * 3]);
            }
          }
          continue;
        }
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long long dx = static_cast<long long>(kx) - p;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
          double acc_w = 0.0;
          const double wv = wk[ky * k + kx];
          for (std::size_t y = y0; y < y1; ++y) {
            const std::size_t row =
                static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
            const double* src = in_plane + row;
            const double* g_row = g_plane + y * w;
            for (std::size_t x = x0; x < x1; ++x) {
              acc_w += g_row[x] * src[static_cast<long long>(x) + dx];
            }
            if (gi_plane != nullptr) {
              double* gi_row = gi_plane + row;
              for (std::size_t x = x0; x < x1; ++x) {
                gi_row[static_cast<long long>(x) + dx] += wv * g_row[x];
              }
            }
          }
          gwk[ky * k + kx] += acc_w;
        }
      }
    }
  }
}

}  // namespace net_detail

// The fixed three-conv residual stack. Parameters live in one flat vector:
// [W1 | b1 | W2 | b2 | W3 | b3].
struct ConvStack {
  std::size_t in_ch = 0, hidden = 0, out_ch = 0, k = 3;

  std::size_t weight_count(std::size_t ic, std::size_t oc) const {
    return ic * oc * k * k;
  }
  std::size_t n_params() const {
    return weight_count(in_ch, hidden) + hidden + weight_count(hidden, hidden) +
           hidden + weight_count(hidden, out_ch) + out_ch;
  }

  struct Offsets {
    std::size_t w1, b1, w2, b2, w3, b3;
  };
  Offsets offsets() const {
    Offsets o{};
    o.w1 = 0;
    o.b1 = o.w1 + weight_count(in_ch, hidden);
    o.w2 = o.b1 + hidden;
    o.b2 = o.w2 + weight_count(hidden, hidden);
    o.w3 = o.b2 + hidden;
    o.b3 = o.w3 + weight_count(hidden, out_ch);
    return o;
  }

  // Seeded uniform init, scale sqrt(6 / (fan_in + fan_out)); the output conv
  // starts small so the score prediction begins near zero. Biases are zero.
  std::vector<double> init_params(std::uint64_t seed) const {
    std::vector<double> p(n_params(), 0.0);
    Rng rng(derive_seed(seed, "net-init"));
    const Offsets o = offsets();
    auto fill = [&](std::size_t at, std::size_t ic, std::size_t oc, double extra) {
      const double fan_in = static_cast<double>(ic * k * k);
      const double fan_out = static_cast<double>(oc * k * k);
      const double s = extra * std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t i = 0; i < weight_count(ic, oc); ++i) {
        p[at + i] = rng.uniform(-s, s);
      }
    };
    fill(o.w1, in_ch, hidden, 1.0);
    fill(o.w2, hidden, hidden, 1.0);
    fill(o.w3, hidden, out_ch, 0.05);
    return p;
  }

  struct Cache {
    FeatureMap input;        // as fed to conv1
    FeatureMap pre1, h1;     // conv1 output, after GELU
    FeatureMap pre2, h2;     // conv2 output, h1 + GELU(pre2)
  };

  // Forward pass; fills `cache` when non-null (required for backward).
  FeatureMap forward(const std::vector<double>& params, const FeatureMap& input,
                     Cache* cache) const {
    if (input.ch != in_ch) {
      throw ShapeError("ConvStack::forward: expected " + std::to_string(in_ch) +
                       " input channels, got " + std::to_string(input.ch));
    }
    if (params.size() != n_params()) {
      throw ShapeError("ConvStack::forward: parameter vector size mismatch");
    }
    const Offsets o = offsets();

    FeatureMap pre1;
    net_detail::conv2d_forward(input, params.data() + o.w1, params.data() + o.b1,
                               hidden, k, pre1);
    FeatureMap h1 = pre1;
    for (double& x : h1.v) x = gelu(x);

    FeatureMap pre2;
    net_detail::conv2d_forward(h1, params.data() + o.w2, params.data() + o.b2, hidden,
                               k, pre2);
    FeatureMap h2 = h1;
    for (std::size_t i = 0; i < h2.v.size(); ++i) h2.v[i] += gelu(pre2.v[i]);

    FeatureMap out;
    net_detail::conv2d_forward(h2, params.data() + o.w3, params.data() + o.b3, out_ch,
                               k, out);

    if (cache != nullptr) {
      cache->input = input;
      cache->pre1 = std::move(pre1);
      cache->h1 = std::move(h1);
      cache->pre2 = std::move(pre2);
      cache->h2 = std::move(h2);
    }
    return out;
  }

  // Accumulates dLoss/dparams into grad (same layout as params) given
  // dLoss/doutput. The gradient w.r.t. the input is not needed and not formed.
  void backward(const std::vector<double>& params, const Cache& cache,
                const FeatureMap& grad_out, std::vector<double>& grad) const {
    if (grad.size() != n_params()) {
      throw ShapeError("ConvStack::backward: gradient vector size mismatch");
    }
    const Offsets o = offsets();

    FeatureMap grad_h2;
    net_detail::conv2d_backward(cache.h2, params.data() + o.w3, out_ch, k, grad_out,
                                grad.data() + o.w3, grad.data() + o.b3, &grad_h2);

    // h2 = h1 + gelu(pre2): the residual path passes grad_h2 straight through.
    FeatureMap grad_pre2 = grad_h2;
    for (std::size_t i = 0; i < grad_pre2.v.size(); ++i) {
      grad_pre2.v[i] *= gelu_grad(cache.pre2.v[i]);
    }
    FeatureMap grad_h1;
    net_detail::conv2d_backward(cache.h1, params.data() + o.w2, hidden, k, grad_pre2,
                                grad.data() + o.w2, grad.data() + o.b2, &grad_h1);
    for (std::size_t i = 0; i < grad_h1.v.size(); ++i) grad_h1.v[i] += grad_h2.v[i];

    FeatureMap grad_pre1 = std::move(grad_h1);
    for (std::size_t i = 0; i < grad_pre1.v.size(); ++i) {
      grad_pre1.v[i] *= gelu_grad(cache.pre1.v[i]);
    }
    net_detail::conv2d_backward(cache.input, params.data() + o.w1, hidden, k,
                                grad_pre1, grad.data() + o.w1, grad.data() + o.b1,
                                nullptr);
  }
};

// Sinusoidal embedding of the diffusion time, broadcast later as constant
// feature planes. dim must be even; frequency ladder pi * 2^j covers the
// [t_min, 1] range injectively.
inline std::vector<double> time_embedding(double t, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("time_embedding: dim must be even");
  std::vector<double> emb(dim);
  constexpr double kPi = 3.14159265358979323846;
  double freq = kPi;
  for (std::size_t j = 0; j < dim / 2; ++j) {
    emb[2 * j] = std::sin(freq * t);
    emb[2 * j + 1] = std::cos(freq * t);
    freq *= 2.0;
  }
  return emb;
}

}  // namespace sbse
