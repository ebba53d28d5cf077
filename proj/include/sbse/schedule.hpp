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
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sbse/error.hpp"

namespace sbse {

// Discretized noise schedule. t_grid spans [t_min, 1] with t_min > 0 so that
// sigma_t never vanishes where score targets are formed. The cumulative
// variances are
//
//   sigma2[i]     = integral of beta over [0, t_i]   (trapezoid rule)
//   sigma2_bar[i] = integral of beta over [t_i, 1]
//
// built from one shared per-segment table, so sigma2[i] + sigma2_bar[i] equals
// sigma2_total at every grid point up to rounding.
struct NoiseSchedule {
  std::vector<double> t_grid;      // N+1 increasing values in [t_min, 1]
  std::vector<double> beta;        // beta at each grid point
  std::vector<double> sigma2;      // non-decreasing
  std::vector<double> sigma2_bar;  // non-increasing, sigma2_bar[N] = 0
  double sigma2_total = 0.0;

  std::size_t top_index() const { return t_grid.size() - 1; }
  double t_min() const { return t_grid.front(); }

  std::size_t nearest_index(double t) const {
    const double t0 = t_grid.front();
    const double h = (t_grid.back() - t0) / static_cast<double>(top_index());
    const auto i = static_cast<long long>(std::llround((t - t0) / h));
    return static_cast<std::size_t>(
        std::clamp<long long>(i, 0, static_cast<long long>(top_index())));
  }
};

// Mirror-aligned default: with t_i = (i + 1) / (N + 1) the reflection 1 - t_i
// is itself a grid point, which makes the symmetric-schedule identity
// sigma2(t) = sigma2_bar(1 - t) hold to rounding instead of to the
// interpolation error.
inline double default_t_min(std::size_t n_grid) {
  return 1.0 / static_cast<double>(n_grid + 1);
}

namespace schedule_detail {

inline NoiseSchedule integrate(std::vector<double> t_grid, std::vector<double> beta) {
  NoiseSchedule s;
  s.t_grid = std::move(t_grid);
  s.beta = std::move(beta);
  const std::size_t n = s.t_grid.size() - 1;

  // Shared per-segment trapezoid areas; the lead-in over [0, t_min] is added
  // by the caller, which knows how beta behaves there.
  std::vector<double> seg(n);
  for (std::size_t i = 0; i < n; ++i) {
    seg[i] = 0.5 * (s.beta[i] + s.beta[i + 1]) * (s.t_grid[i + 1] - s.t_grid[i]);
  }

  s.sigma2.resize(n + 1);
  s.sigma2_bar.resize(n + 1);
  s.sigma2[0] = 0.0;  // caller adds the lead-in below
  for (std::size_t i = 0; i < n; ++i) s.sigma2[i + 1] = s.sigma2[i] + seg[i];
  s.sigma2_bar[n] = 0.0;
  for (std::size_t i = n; i-- > 0;) s.sigma2_bar[i] = s.sigma2_bar[i + 1] + seg[i];
  return s;
}

inline void add_lead_in(NoiseSchedule& s, double lead_area) {
  for (double& v : s.sigma2) v += lead_area;
  s.sigma2_total = s.sigma2.back();
}

}  // namespace schedule_detail

// Triangular schedule symmetric about t = 0.5:
//   beta(t) = beta_min + (beta_max - beta_min) * (1 - |2t - 1|)
// so the diffusion strength shrinks toward both trajectory endpoints.
// Cumulative variances use the trapezoid rule on the grid; the lead-in
// integral over [0, t_min] is included so sigma2 matches the from-zero
// definition.
inline NoiseSchedule build_symmetric(double beta_min, double beta_max,
                                     std::size_t n_grid, double t_min) {
  if (!(beta_min > 0.0)) throw ConfigError("build_symmetric: beta_min must be > 0");
  if (!(beta_max >= beta_min)) {
    throw ConfigError("build_symmetric: beta_max must be >= beta_min");
  }
  if (n_grid < 2) throw ConfigError("build_symmetric: N must be >= 2");
  if (!(t_min > 0.0 && t_min < 0.5)) {
    throw ConfigError("build_symmetric: t_min must lie in (0, 0.5)");
  }

  auto beta_at = [&](double t) {
    return beta_min + (beta_max - beta_min) * (1.0 - std::abs(2.0 * t - 1.0));
  };

  std::vector<double> t_grid(n_grid + 1), beta(n_grid + 1);
  const double h = (1.0 - t_min) / static_cast<double>(n_grid);
  for (std::size_t i = 0; i <= n_grid; ++i) {
    t_grid[i] = i == n_grid ? 1.0 : t_min + h * static_cast<double>(i);
    beta[i] = beta_at(t_grid[i]);
  }

  NoiseSchedule s = schedule_detail::integrate(std::move(t_grid), std::move(beta));
  // beta is linear on [0, t_min] (left of the kink), so this lead-in is exact.
  schedule_detail::add_lead_in(s, 0.5 * (beta_at(0.0) + beta_at(t_min)) * t_min);
  return s;
}

inline NoiseSchedule build_symmetric(double beta_min, double beta_max,
                                     std::size_t n_grid) {
  return build_symmetric(beta_min, beta_max, n_grid, default_t_min(n_grid));
}

// Schedule from a user-supplied beta table on an arbitrary increasing grid.
// beta is treated as constant on the unseen lead-in [0, t_grid[0]].
inline NoiseSchedule build_from_beta(const std::vector<double>& t_grid,
                                     const std::vector<double>& beta) {
  if (t_grid.size() != beta.size() || t_grid.size() < 3) {
    throw ConfigError("build_from_beta: need matching t/beta arrays of length >= 3");
  }
  if (!(t_grid.front() > 0.0) || t_grid.back() != 1.0) {
    throw ConfigError("build_from_beta: grid must span (0, 1] with t_min > 0");
  }
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
    if (!(t_grid[i] < t_grid[i + 1])) {
      throw ConfigError("build_from_beta: t grid must be strictly increasing");
    }
  }
  for (double b : beta) {
    if (!(b >= 0.0)) throw ConfigError("build_from_beta: beta must be non-negative");
  }
  NoiseSchedule s = schedule_detail::integrate(t_grid, beta);
  schedule_detail::add_lead_in(s, beta.front() * t_grid.front());
  if (!(s.sigma2.front() > 0.0)) {
    throw ConfigError("build_from_beta: sigma2 at t_min must be positive");
  }
  return s;
}

// (sigma_t^2, sigma_bar_t^2) by linear interpolation of the cumulative arrays.
inline std::pair<double, double> sigma_at(const NoiseSchedule& s, double t) {
  const double lo = s.t_grid.front();
  const double hi = s.t_grid.back();
  if (!(t >= lo && t <= hi)) {
    throw DomainError("sigma_at: t = " + std::to_string(t) + " outside [" +
                      std::to_string(lo) + ", 1]");
  }
  const auto it = std::lower_bound(s.t_grid.begin(), s.t_grid.end(), t);
  std::size_t j = static_cast<std::size_t>(it - s.t_grid.begin());
  if (j == 0) return {s.sigma2[0], s.sigma2_bar[0]};
  if (s.t_grid[j] == t) return {s.sigma2[j], s.sigma2_bar[j]};
  const std::size_t i = j - 1;
  const double w = (t - s.t_grid[i]) / (s.t_grid[j] - s.t_grid[i]);
  return {s.sigma2[i] + w * (s.sigma2[j] - s.sigma2[i]),
          s.sigma2_bar[i] + w * (s.sigma2_bar[j] - s.sigma2_bar[i])};
}

// Reverse-inference time grid: indices into t_grid from the top index down to
// 0, uniformly spaced in t (nearest-index rounding), plus the per-step
// accumulated variances alpha2[k] = sigma2[idx[k]] - sigma2[idx[k+1]].
struct InferenceGrid {
  std::vector<std::size_t> indices;  // n_steps + 1, strictly decreasing
  std::vector<double> alpha2;        // n_steps, all positive

  std::size_t n_steps() const { return alpha2.size(); }
};

// How the reverse-time indices are spread over the schedule. uniform_t is
// the default; uniform_sigma2 spaces the retained steps evenly in cumulative
// variance instead.
enum class GridSpacing { uniform_t, uniform_sigma2 };

inline GridSpacing grid_spacing_from_string(const std::string& s) {
  if (s == "uniform_t") return GridSpacing::uniform_t;
  if (s == "uniform_sigma2") return GridSpacing::uniform_sigma2;
  throw ConfigError("unknown grid spacing '" + s +
                    "' (uniform_t | uniform_sigma2)");
}

inline InferenceGrid inference_grid(const NoiseSchedule& s, std::size_t n_steps,
                                    GridSpacing spacing = GridSpacing::uniform_t) {
  const std::size_t n = s.top_index();
  if (n_steps < 1) throw ConfigError("inference_grid: need at least one step");
  if (n_steps > n) {
    throw ConfigError("inference_grid: n_steps exceeds the schedule grid size");
  }

  InferenceGrid grid;
  grid.indices.resize(n_steps + 1);
  if (spacing == GridSpacing::uniform_t) {
    for (std::size_t k = 0; k <= n_steps; ++k) {
      const double frac =
          static_cast<double>(n_steps - k) / static_cast<double>(n_steps);
      grid.indices[k] =
          static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    }
  } else {
    // Nearest grid index to each evenly spaced target in sigma2.
    const double lo = s.sigma2.front();
    const double hi = s.sigma2.back();
    for (std::size_t k = 0; k <= n_steps; ++k) {
      const double target =
          lo + (hi - lo) * static_cast<double>(n_steps - k) /
                   static_cast<double>(n_steps);
      const auto it = std::lower_bound(s.sigma2.begin(), s.sigma2.end(), target);
      std::size_t j = static_cast<std::size_t>(it - s.sigma2.begin());
      if (j > 0 && (j == s.sigma2.size() ||
                    target - s.sigma2[j - 1] < s.sigma2[j] - target)) {
        --j;
      }
      grid.indices[k] = j;
    }
    grid.indices.front() = n;
    grid.indices.back() = 0;
  }
  for (std::size_t k = 0; k + 1 <= n_steps; ++k) {
    if (grid.indices[k] <= grid.indices[k + 1]) {
      throw ConfigError(
          "inference_grid: schedule grid too coarse, duplicate indices after "
          "rounding");
    }
  }

  grid.alpha2.resize(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    grid.alpha2[k] = s.sigma2[grid.indices[k]] - s.sigma2[grid.indices[k + 1]];
    if (!(grid.alpha2[k] > 0.0)) {
      throw ConfigError("inference_grid: non-positive accumulated variance at step " +
                        std::to_string(k));
    }
  }
  return grid;
}

}  // namespace sbse
