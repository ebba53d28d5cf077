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
#include <complex>
#include <functional>
#include <optional>

#include "sbse/error.hpp"
#include "sbse/grid.hpp"
#include "sbse/rng.hpp"
#include "sbse/schedule.hpp"

namespace sbse {

// Bridge math core. The diffusion bridges the clean spectrogram x0 and the
// noisy spectrogram xT of the same utterance; with zero drift the posterior
// of x_t given both endpoints is Gaussian and fully determined by the
// cumulative schedule variances:
//
//   mean = sigma_bar^2/(sigma^2 + sigma_bar^2) * x0
//        + sigma^2/(sigma^2 + sigma_bar^2) * xT
//   var  = sigma^2 * sigma_bar^2 / (sigma^2 + sigma_bar^2)   (isotropic)
//
// Everything below operates on compressed complex spectrogram grids.

struct PosteriorParams {
  ComplexGrid mean;
  double var = 0.0;
};

// Injectable defect for the verification suite's mutation sanity check: the
// sign of the posterior mean's x0 weight is flipped, which the
// posterior-moment property must detect.
enum class PosteriorFault { none, flip_weight_sign };

inline PosteriorParams posterior_params(const ComplexGrid& x0, const ComplexGrid& xT,
                                        double t, const NoiseSchedule& schedule,
                                        PosteriorFault fault = PosteriorFault::none) {
  require_same_shape(x0, xT, "posterior_params");
  const auto [s2, s2_bar] = sigma_at(schedule, t);
  const double denom = s2 + s2_bar;
  double w0 = s2_bar / denom;
  const double wT = s2 / denom;
  if (fault == PosteriorFault::flip_weight_sign) w0 = -w0;

  PosteriorParams out;
  out.var = s2 * s2_bar / denom;
  out.mean = ComplexGrid(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.mean.data()[i] = w0 * x0.data()[i] + wT * xT.data()[i];
  }
  return out;
}

// One training sample drawn from the analytic posterior, with the score-
// matching target attached.
struct BridgeSample {
  ComplexGrid x_t;
  double t = 0.0;
  std::size_t t_index = 0;  // nearest schedule grid index
  double sigma_t = 0.0;     // sqrt(sigma2(t)), > 0 since t >= t_min
  ComplexGrid target;       // (x_t - x0) / sigma_t
};

// (x_t - x0) / sigma_t, the quantity the score network regresses onto.
inline ComplexGrid score_target(const ComplexGrid& x_t, const ComplexGrid& x0,
                                double sigma_t) {
  require_same_shape(x_t, x0, "score_target");
  if (!(sigma_t > 0.0)) {
    throw NumericError(
        "score_target: sigma_t must be positive (singular at sigma = 0; the "
        "schedule's t_min > 0 exists to rule this out)");
  }
  ComplexGrid out(x_t.rows(), x_t.cols());
  const double inv = 1.0 / sigma_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = (x_t.data()[i] - x0.data()[i]) * inv;
  }
  return out;
}

// x_t = mean + sqrt(var) * eps with eps circular complex standard normal
// (real/imag parts i.i.d. N(0, 1/2); see Rng::gaussian_complex).
inline BridgeSample sample_xt(const ComplexGrid& x0, const ComplexGrid& xT, double t,
                              const NoiseSchedule& schedule, Rng& rng) {
  PosteriorParams post = posterior_params(x0, xT, t, schedule);
  const double sd = std::sqrt(post.var);

  BridgeSample sample;
  sample.t = t;
  sample.t_index = schedule.nearest_index(t);
  sample.sigma_t = std::sqrt(sigma_at(schedule, t).first);
  sample.x_t = std::move(post.mean);
  if (sd > 0.0) {
    for (auto& v : sample.x_t) v += sd * rng.gaussian_complex();
  }
  sample.target = score_target(sample.x_t, x0, sample.sigma_t);
  return sample;
}

// x0 reconstruction from a score estimate: x0 = x_n - sigma_n * s.
inline ComplexGrid reconstruct_x0(const ComplexGrid& x_n, const ComplexGrid& s,
                                  double sigma_n) {
  require_same_shape(x_n, s, "reconstruct_x0");
  ComplexGrid out(x_n.rows(), x_n.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = x_n.data()[i] - sigma_n * s.data()[i];
  }
  return out;
}

// One reverse-chain transition: draws x_n from the analytic Gaussian
//
//   mean = (alpha2 * x0_hat + sigma2_lo * x_next) / (alpha2 + sigma2_lo)
//   var  = sigma2_lo * alpha2 / (alpha2 + sigma2_lo)
//
// where alpha2 = grid.alpha2[n] is the variance accumulated across the step
// and sigma2_lo is the cumulative variance at the step's lower index. The
// terminal transition (lower index 0) is not sampled by the reverse loop; it
// returns the last x0 estimate directly instead.
inline ComplexGrid ddpm_step(const ComplexGrid& x0_hat, const ComplexGrid& x_next,
                             std::size_t n, const InferenceGrid& grid,
                             const NoiseSchedule& schedule, Rng& rng) {
  require_same_shape(x0_hat, x_next, "ddpm_step");
  if (n >= grid.n_steps()) {
    throw DomainError("ddpm_step: step index out of range");
  }
  const double alpha2 = grid.alpha2[n];
  const double sigma2_lo = schedule.sigma2[grid.indices[n + 1]];
  const double denom = alpha2 + sigma2_lo;

  ComplexGrid out(x0_hat.rows(), x0_hat.cols());
  if (denom <= 0.0) {
    out = x0_hat;
    return out;
  }
  const double w0 = alpha2 / denom;
  const double w1 = sigma2_lo / denom;
  const double sd = std::sqrt(sigma2_lo * alpha2 / denom);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = w0 * x0_hat.data()[i] + w1 * x_next.data()[i];
  }
  if (sd > 0.0) {
    for (auto& v : out) v += sd * rng.gaussian_complex();
  }
  return out;
}

// Score estimator interface used by the reverse loop: x is the current state,
// grid_index the schedule index it sits at, mask the optional conditioning
// gains (nullptr when absent).
using ScoreFn =
    std::function<ComplexGrid(const ComplexGrid& x, std::size_t grid_index,
                              const RealGrid* mask)>;

// Full reverse inference: starts from the noisy endpoint, alternates score-
// based x0 reconstruction with posterior-sampled transitions, and returns the
// final x0 estimate (the last transition adds no noise, so the residual
// t_min-level variance is never injected into the output).
inline ComplexGrid reverse_enhance(const ComplexGrid& xT, const ScoreFn& score_fn,
                                   const RealGrid* mask, const NoiseSchedule& schedule,
                                   const InferenceGrid& grid, Rng& rng) {
  ComplexGrid x = xT;
  ComplexGrid x0_hat;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const std::size_t idx_hi = grid.indices[k];
    const double sigma_hi = std::sqrt(schedule.sigma2[idx_hi]);
    x0_hat = reconstruct_x0(x, score_fn(x, idx_hi, mask), sigma_hi);
    if (!all_finite(x0_hat)) {
      throw DivergenceError("reverse_enhance: non-finite x0 estimate at step " +
                            std::to_string(k) + " (grid index " +
                            std::to_string(idx_hi) + ")");
    }
    if (k + 1 == grid.n_steps()) break;
    x = ddpm_step(x0_hat, x, k, grid, schedule, rng);
    if (!all_finite(x)) {
      throw DivergenceError("reverse_enhance: non-finite state after step " +
                            std::to_string(k));
    }
  }
  return x0_hat;
}

}  // namespace sbse
