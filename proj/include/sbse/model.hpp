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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "sbse/bridge.hpp"
#include "sbse/corpus.hpp"
#include "sbse/error.hpp"
#include "sbse/grid.hpp"
#include "sbse/net.hpp"
#include "sbse/rng.hpp"
#include "sbse/schedule.hpp"
#include "sbse/spectral.hpp"

namespace sbse {

// ---------------------------------------------------------------------------
// Ratio masks

// Division guard for the oracle gain.
constexpr double kMagnitudeEpsilon = 1e-12;
constexpr double kGainMax = 1.0;

// Oracle gain |S| / |X| clipped to [0, 1]; bins where the noisy magnitude is
// ~zero yield 0. Clipping matters because phase cancellation can push the raw
// ratio above 1 while the sigmoid predictor cannot follow.
inline RealGrid oracle_gain(const RealGrid& clean_mag, const RealGrid& noisy_mag) {
  if (!clean_mag.same_shape(noisy_mag)) {
    throw ShapeError("oracle_gain: magnitude grids differ in shape");
  }
  RealGrid out(clean_mag.rows(), clean_mag.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = noisy_mag.data()[i];
    const double s = clean_mag.data()[i];
    if (s < 0.0 || x < 0.0) {
      throw DomainError("oracle_gain: magnitudes must be non-negative");
    }
    out.data()[i] = x > kMagnitudeEpsilon ? std::clamp(s / x, 0.0, kGainMax) : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score network

struct ScoreNetArch {
  std::size_t hidden = 16;
  std::size_t emb_dim = 6;  // even; sinusoidal time planes
  std::size_t ksize = 3;
  // Extension knob: feed the noisy endpoint as extra channels. When false the
  // channels are zero-filled, which reproduces the x_t/t/M-only interface.
  bool condition_on_noisy = true;

  std::size_t in_channels() const { return 2 + 2 + 1 + emb_dim; }

  ConvStack stack() const { return ConvStack{in_channels(), hidden, 2, ksize}; }

  bool operator==(const ScoreNetArch&) const = default;
};

struct ScoreNet {
  ScoreNetArch arch;
  std::vector<double> params;
};

inline ScoreNet make_score_net(const ScoreNetArch& arch, std::uint64_t seed) {
  ScoreNet net;
  net.arch = arch;
  net.params = arch.stack().init_params(seed);
  return net;
}

namespace model_detail {

// Fixed input gain applied to the spectrogram feature planes. Compressed
// spectrogram values sit around 0.1-0.3 rms, which would leave the GELU units
// in their near-linear region; the gain moves the data into the activation's
// working range. Outputs stay in score units, so losses and reconstruction
// are unaffected.
constexpr double kInputGain = 8.0;

inline FeatureMap assemble_score_input(const ScoreNetArch& arch, const ComplexGrid& x_t,
                                       const ComplexGrid& xT, const RealGrid* mask,
                                       double t) {
  const std::size_t h = x_t.rows(), w = x_t.cols();
  require_same_shape(x_t, xT, "score_forward");
  if (mask != nullptr && (mask->rows() != h || mask->cols() != w)) {
    throw ShapeError("score_forward: mask shape differs from spectrogram");
  }

  FeatureMap in(arch.in_channels(), h, w);
  double* re = in.plane(0);
  double* im = in.plane(1);
  for (std::size_t i = 0; i < h * w; ++i) {
    re[i] = kInputGain * x_t.data()[i].real();
    im[i] = kInputGain * x_t.data()[i].imag();
  }
  if (arch.condition_on_noisy) {
    double* cre = in.plane(2);
    double* cim = in.plane(3);
    for (std::size_t i = 0; i < h * w; ++i) {
      cre[i] = kInputGain * xT.data()[i].real();
      cim[i] = kInputGain * xT.data()[i].imag();
    }
  }
  if (mask != nullptr) {
    double* m = in.plane(4);
    for (std::size_t i = 0; i < h * w; ++i) m[i] = mask->data()[i];
  }
  const auto emb = time_embedding(t, arch.emb_dim);
  for (std::size_t j = 0; j < arch.emb_dim; ++j) {
    double* plane = in.plane(5 + j);
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = emb[j];
  }
  return in;
}

inline ComplexGrid planes_to_complex(const FeatureMap& out) {
  ComplexGrid g(out.h, out.w);
  const double* re = out.plane(0);
  const double* im = out.plane(1);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = {re[i], im[i]};
  return g;
}

}  // namespace model_detail

// Deterministic score estimate s(x_t, t, M | xT). A null mask feeds a zero
// channel.
inline ComplexGrid score_forward(const ScoreNet& net, const ComplexGrid& x_t, double t,
                                 const ComplexGrid& xT,
                                 const RealGrid* mask = nullptr) {
  const FeatureMap in =
      model_detail::assemble_score_input(net.arch, x_t, xT, mask, t);
  const FeatureMap out = net.arch.stack().forward(net.params, in, nullptr);
  return model_detail::planes_to_complex(out);
}

// One training item: a bridge draw plus its conditioning.
struct ScoreBatchItem {
  BridgeSample sample;
  ComplexGrid xT;
  std::optional<RealGrid> mask;
};

// Mean over batch and bins of |prediction - target|^2, with the exact
// parameter gradient. Batch items may be evaluated in parallel; the gradient
// reduction runs in item order so results are independent of thread timing.
inline std::pair<double, std::vector<double>> score_loss_and_grad(
    const ScoreNet& net, const std::vector<ScoreBatchItem>& batch, int threads = 0) {
  if (batch.empty()) throw ShapeError("score_loss_and_grad: empty batch");
  const ConvStack stack = net.arch.stack();
  const std::size_t b = batch.size();

  std::vector<double> item_loss(b, 0.0);
  std::vector<std::vector<double>> item_grad(b);

  auto run_item = [&](std::size_t i) {
    const ScoreBatchItem& item = batch[i];
    const ComplexGrid& target = item.sample.target;
    require_same_shape(item.sample.x_t, target, "score_loss_and_grad");

    const FeatureMap in = model_detail::assemble_score_input(
        net.arch, item.sample.x_t, item.xT,
        item.mask.has_value() ? &*item.mask : nullptr, item.sample.t);
    ConvStack::Cache cache;
    const FeatureMap out = stack.forward(net.params, in, &cache);

    const std::size_t cells = target.size();
    const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(cells));
    FeatureMap grad_out(2, out.h, out.w);
    double* g_re = grad_out.plane(0);
    double* g_im = grad_out.plane(1);
    const double* o_re = out.plane(0);
    const double* o_im = out.plane(1);
    double loss = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      const double dr = o_re[j] - target.data()[j].real();
      const double di = o_im[j] - target.data()[j].imag();
      loss += dr * dr + di * di;
      g_re[j] = 2.0 * dr * norm;
      g_im[j] = 2.0 * di * norm;
    }
    item_loss[i] = loss * norm;

    item_grad[i].assign(stack.n_params(), 0.0);
    stack.backward(net.params, cache, grad_out, item_grad[i]);
  };

  std::size_t n_threads = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, b);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < b; ++i) run_item(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < b; i += n_threads) run_item(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  double loss = 0.0;
  std::vector<double> grad(stack.n_params(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    loss += item_loss[i];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += item_grad[i][j];
  }
  if (!std::isfinite(loss)) {
    throw DivergenceError("score_loss_and_grad: non-finite loss");
  }
  return {loss, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Mask network

struct MaskNetArch {
  std::size_t hidden = 16;
  std::size_t ksize = 3;

  ConvStack stack() const { return ConvStack{2, hidden, 1, ksize}; }

  bool operator==(const MaskNetArch&) const = default;
};

struct MaskNet {
  MaskNetArch arch;
  std::vector<double> params;
};

inline MaskNet make_mask_net(const MaskNetArch& arch, std::uint64_t seed) {
  MaskNet net;
  net.arch = arch;
  net.params = arch.stack().init_params(seed);
  return net;
}

namespace model_detail {

inline FeatureMap assemble_mask_input(const ComplexGrid& noisy) {
  FeatureMap in(2, noisy.rows(), noisy.cols());
  double* re = in.plane(0);
  double* im = in.plane(1);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    re[i] = kInputGain * noisy.data()[i].real();
    im[i] = kInputGain * noisy.data()[i].imag();
  }
  return in;
}

}  // namespace model_detail

// Predicted ratio mask; sigmoid output keeps every value in (0, 1).
inline RealGrid mask_forward(const MaskNet& net, const ComplexGrid& noisy) {
  if (!all_finite(noisy)) throw NumericError("mask_forward: non-finite input");
  const FeatureMap in = model_detail::assemble_mask_input(noisy);
  const FeatureMap out = net.arch.stack().forward(net.params, in, nullptr);
  RealGrid g(noisy.rows(), noisy.cols());
  const double* o = out.plane(0);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = sigmoid(o[i]);
  return g;
}

struct MaskBatchItem {
  ComplexGrid noisy;
  RealGrid target;  // oracle gains
};

// MSE between predicted and oracle gains, with the exact parameter gradient.
inline std::pair<double, std::vector<double>> mask_loss_and_grad(
    const MaskNet& net, const std::vector<MaskBatchItem>& batch, int threads = 0) {
  if (batch.empty()) throw ShapeError("mask_loss_and_grad: empty batch");
  const ConvStack stack = net.arch.stack();
  const std::size_t b = batch.size();

  std::vector<double> item_loss(b, 0.0);
  std::vector<std::vector<double>> item_grad(b);

  auto run_item = [&](std::size_t i) {
    const MaskBatchItem& item = batch[i];
    if (item.noisy.rows() != item.target.rows() ||
        item.noisy.cols() != item.target.cols()) {
      throw ShapeError("mask_loss_and_grad: target shape differs from input");
    }
    const FeatureMap in = model_detail::assemble_mask_input(item.noisy);
    ConvStack::Cache cache;
    const FeatureMap out = stack.forward(net.params, in, &cache);

    const std::size_t cells = item.target.size();
    const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(cells));
    FeatureMap grad_out(1, out.h, out.w);
    double* g = grad_out.plane(0);
    const double* o = out.plane(0);
    double loss = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      const double p = sigmoid(o[j]);
      const double d = p - item.target.data()[j];
      loss += d * d;
      g[j] = 2.0 * d * p * (1.0 - p) * norm;
    }
    item_loss[i] = loss * norm;
    item_grad[i].assign(stack.n_params(), 0.0);
    stack.backward(net.params, cache, grad_out, item_grad[i]);
  };

  std::size_t n_threads = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, b);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < b; ++i) run_item(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < b; i += n_threads) run_item(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  double loss = 0.0;
  std::vector<double> grad(stack.n_params(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    loss += item_loss[i];
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += item_grad[i][j];
  }
  if (!std::isfinite(loss)) {
    throw DivergenceError("mask_loss_and_grad: non-finite loss");
  }
  return {loss, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Optimizer

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 4;
  int steps = 500;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t crop_frames = 256;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
    if (crop_frames < 1) throw ConfigError("TrainConfig: crop_frames must be >= 1");
  }
};

struct AdamState {
  std::vector<double> m, v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_update(std::vector<double>& params, const std::vector<double>& grad,
                        AdamState& state, const TrainConfig& config) {
  if (state.m.size() != params.size()) state = AdamState(params.size());
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

// ---------------------------------------------------------------------------
// Training loops

namespace model_detail {

inline std::vector<const MixtureRecord*> split_view(const DatasetManifest& manifest,
                                                    Split split) {
  std::vector<const MixtureRecord*> view;
  for (const auto& r : manifest.records) {
    if (r.split == split) view.push_back(&r);
  }
  return view;
}

}  // namespace model_detail

// Builds the batch for one absolute training step. Exposed so that resumed
// runs replay the identical item stream: everything is derived from
// (config.seed, step_index).
inline std::vector<ScoreBatchItem> make_score_batch(
    const DatasetManifest& manifest, const SpectralParams& spectral,
    const NoiseSchedule& schedule, const TrainConfig& config, bool use_mask,
    long step_index) {
  const auto train = model_detail::split_view(manifest, Split::train);
  if (train.empty()) throw ShapeError("make_score_batch: no train records");

  std::vector<ScoreBatchItem> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int i = 0; i < config.batch_size; ++i) {
    Rng rng(derive_seed(config.seed, "train-item",
                        static_cast<std::uint64_t>(step_index) *
                                static_cast<std::uint64_t>(config.batch_size) +
                            static_cast<std::uint64_t>(i)));
    const MixtureRecord& rec = *train[rng.below(train.size())];
    const MixturePair pair = record_mixture(rec, manifest.clip_duration_s);

    const ComplexSpectrogram clean_c = compress(stft(pair.clean, spectral));
    const ComplexSpectrogram noisy_c = compress(stft(pair.noisy, spectral));

    const std::size_t frames = clean_c.frames();
    const std::size_t start =
        frames > config.crop_frames ? rng.below(frames - config.crop_frames + 1) : 0;
    ComplexGrid x0 = crop_frames(clean_c.values, start, config.crop_frames);
    ComplexGrid xT = crop_frames(noisy_c.values, start, config.crop_frames);

    ScoreBatchItem item;
    if (use_mask) item.mask = oracle_gain(magnitude(x0), magnitude(xT));

    const std::size_t t_index = rng.below(schedule.t_grid.size());
    const double t = schedule.t_grid[t_index];
    item.sample = sample_xt(x0, xT, t, schedule, rng);
    item.xT = std::move(xT);
    batch.push_back(std::move(item));
  }
  return batch;
}

inline std::vector<MaskBatchItem> make_mask_batch(const DatasetManifest& manifest,
                                                  const SpectralParams& spectral,
                                                  const TrainConfig& config,
                                                  long step_index) {
  const auto train = model_detail::split_view(manifest, Split::train);
  if (train.empty()) throw ShapeError("make_mask_batch: no train records");

  std::vector<MaskBatchItem> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int i = 0; i < config.batch_size; ++i) {
    Rng rng(derive_seed(config.seed, "train-item",
                        static_cast<std::uint64_t>(step_index) *
                                static_cast<std::uint64_t>(config.batch_size) +
                            static_cast<std::uint64_t>(i)));
    const MixtureRecord& rec = *train[rng.below(train.size())];
    const MixturePair pair = record_mixture(rec, manifest.clip_duration_s);

    const ComplexSpectrogram clean_c = compress(stft(pair.clean, spectral));
    const ComplexSpectrogram noisy_c = compress(stft(pair.noisy, spectral));
    const std::size_t frames = clean_c.frames();
    const std::size_t start =
        frames > config.crop_frames ? rng.below(frames - config.crop_frames + 1) : 0;
    ComplexGrid x0 = crop_frames(clean_c.values, start, config.crop_frames);
    ComplexGrid xT = crop_frames(noisy_c.values, start, config.crop_frames);

    MaskBatchItem item;
    item.target = oracle_gain(magnitude(x0), magnitude(xT));
    item.noisy = std::move(xT);
    batch.push_back(std::move(item));
  }
  return batch;
}

// Runs steps [first_step, first_step + n) on an existing net/optimizer pair.
// The per-step losses are appended to `losses` when non-null.
inline void train_score_steps(ScoreNet& net, AdamState& adam,
                              const DatasetManifest& manifest,
                              const SpectralParams& spectral,
                              const NoiseSchedule& schedule, const TrainConfig& config,
                              bool use_mask, long first_step, long n_steps,
                              std::vector<double>* losses) {
  for (long s = first_step; s < first_step + n_steps; ++s) {
    const auto batch =
        make_score_batch(manifest, spectral, schedule, config, use_mask, s);
    double loss = 0.0;
    std::vector<double> grad;
    try {
      std::tie(loss, grad) = score_loss_and_grad(net, batch, config.threads);
    } catch (const DivergenceError&) {
      throw DivergenceError("train_score: loss diverged at step " + std::to_string(s));
    }
    adam_update(net.params, grad, adam, config);
    if (losses != nullptr) losses->push_back(loss);
  }
}

inline ScoreNet train_score(const DatasetManifest& manifest,
                            const SpectralParams& spectral,
                            const NoiseSchedule& schedule, const TrainConfig& config,
                            bool use_mask, const ScoreNetArch& arch = {},
                            std::vector<double>* losses = nullptr) {
  config.validate();
  ScoreNet net = make_score_net(arch, config.seed);
  AdamState adam(net.params.size());
  train_score_steps(net, adam, manifest, spectral, schedule, config, use_mask, 0,
                    config.steps, losses);
  return net;
}

inline void train_mask_steps(MaskNet& net, AdamState& adam,
                             const DatasetManifest& manifest,
                             const SpectralParams& spectral, const TrainConfig& config,
                             long first_step, long n_steps,
                             std::vector<double>* losses) {
  for (long s = first_step; s < first_step + n_steps; ++s) {
    const auto batch = make_mask_batch(manifest, spectral, config, s);
    double loss = 0.0;
    std::vector<double> grad;
    try {
      std::tie(loss, grad) = mask_loss_and_grad(net, batch, config.threads);
    } catch (const DivergenceError&) {
      throw DivergenceError("train_mask: loss diverged at step " + std::to_string(s));
    }
    adam_update(net.params, grad, adam, config);
    if (losses != nullptr) losses->push_back(loss);
  }
}

inline MaskNet train_mask(const DatasetManifest& manifest,
                          const SpectralParams& spectral, const TrainConfig& config,
                          const MaskNetArch& arch = {},
                          std::vector<double>* losses = nullptr) {
  config.validate();
  MaskNet net = make_mask_net(arch, config.seed);
  AdamState adam(net.params.size());
  train_mask_steps(net, adam, manifest, spectral, config, 0, config.steps, losses);
  return net;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_param_index = 0;
  std::size_t n_checked = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares an analytic gradient against central finite differences of the
// scalar `value_fn`, parameter by parameter (or on a seeded random subset of
// at least `max_checked` parameters when the vector is larger).
//
// Relative error convention: |fd - ga| / max(|fd| + |ga|, 1e-3 * max_j |ga_j|,
// 1e-8). The scale floor keeps parameters whose gradient sits orders of
// magnitude below the dominant one from being measured against pure
// finite-difference roundoff (eps * |loss| / h), which at fp64 and h = 1e-5
// is the limiting noise for |g| below ~1e-6.
inline GradCheckReport grad_check_generic(
    const std::function<double(const std::vector<double>&)>& value_fn,
    std::vector<double> params, const std::vector<double>& analytic_grad, double h,
    double tolerance, std::size_t max_checked = 200,
    std::uint64_t subset_seed = 12345) {
  if (!(h > 0.0)) throw DomainError("grad_check: step h must be positive");
  if (params.size() != analytic_grad.size()) {
    throw ShapeError("grad_check: gradient size mismatch");
  }
  double grad_scale = 0.0;
  for (double g : analytic_grad) grad_scale = std::max(grad_scale, std::abs(g));
  grad_scale = std::max(1e-3 * grad_scale, 1e-8);

  std::vector<std::size_t> indices;
  if (params.size() <= max_checked) {
    indices.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) indices[i] = i;
  } else {
    Rng rng(subset_seed);
    indices.reserve(max_checked);
    for (std::size_t i = 0; i < max_checked; ++i) {
      indices.push_back(rng.below(params.size()));
    }
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t idx : indices) {
    const double saved = params[idx];
    params[idx] = saved + h;
    const double up = value_fn(params);
    params[idx] = saved - h;
    const double down = value_fn(params);
    params[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double ga = analytic_grad[idx];
    const double denom = std::max(std::abs(fd) + std::abs(ga), grad_scale);
    const double rel = std::abs(fd - ga) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param_index = idx;
    }
    ++report.n_checked;
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

inline GradCheckReport grad_check(const ScoreNet& net,
                                  const std::vector<ScoreBatchItem>& probe, double h,
                                  double tolerance) {
  auto [loss, grad] = score_loss_and_grad(net, probe, 1);
  (void)loss;
  ScoreNet probe_net = net;
  auto value = [&](const std::vector<double>& p) {
    probe_net.params = p;
    return score_loss_and_grad(probe_net, probe, 1).first;
  };
  return grad_check_generic(value, net.params, grad, h, tolerance);
}

inline GradCheckReport grad_check(const MaskNet& net,
                                  const std::vector<MaskBatchItem>& probe, double h,
                                  double tolerance) {
  auto [loss, grad] = mask_loss_and_grad(net, probe, 1);
  (void)loss;
  MaskNet probe_net = net;
  auto value = [&](const std::vector<double>& p) {
    probe_net.params = p;
    return mask_loss_and_grad(probe_net, probe, 1).first;
  };
  return grad_check_generic(value, net.params, grad, h, tolerance);
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary, magic + version + kind + arch descriptor
// + fp64 parameter vector. A text sidecar with the config snapshot is written
// by the CLI next to the checkpoint.

namespace ckpt_detail {

constexpr char kMagic[8] = {'S', 'B', 'S', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindScore = 1;
constexpr std::uint32_t kKindMask = 2;
constexpr std::uint32_t kKindScoreTrainState = 3;
constexpr std::uint32_t kKindMaskTrainState = 4;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) {
    throw IoError("checkpoint: truncated file '" + path + "'");
  }
  return v;
}
inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) {
    throw IoError("checkpoint: truncated file '" + path + "'");
  }
  return v;
}
inline std::vector<double> get_doubles(std::istream& in, const std::string& path) {
  const std::uint64_t n = get_u64(in, path);
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    throw IoError("checkpoint: truncated file '" + path + "'");
  }
  return v;
}

inline void open_and_check(std::ifstream& in, const std::string& path,
                           std::uint32_t expected_kind) {
  in.open(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw VersionError("checkpoint: bad magic in '" + path + "'");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw VersionError("checkpoint: unsupported version " + std::to_string(version) +
                       " in '" + path + "'");
  }
  const std::uint32_t kind = get_u32(in, path);
  if (kind != expected_kind) {
    throw VersionError("checkpoint: '" + path + "' holds kind " +
                       std::to_string(kind) + ", expected " +
                       std::to_string(expected_kind));
  }
}

inline void put_score_arch(std::ostream& out, const ScoreNetArch& arch) {
  put_u64(out, arch.hidden);
  put_u64(out, arch.emb_dim);
  put_u64(out, arch.ksize);
  put_u32(out, arch.condition_on_noisy ? 1 : 0);
}

inline ScoreNetArch get_score_arch(std::istream& in, const std::string& path) {
  ScoreNetArch arch;
  arch.hidden = get_u64(in, path);
  arch.emb_dim = get_u64(in, path);
  arch.ksize = get_u64(in, path);
  arch.condition_on_noisy = get_u32(in, path) != 0;
  return arch;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const ScoreNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open '" + path + "'");
  out.write(ckpt_detail::kMagic, 8);
  ckpt_detail::put_u32(out, ckpt_detail::kVersion);
  ckpt_detail::put_u32(out, ckpt_detail::kKindScore);
  ckpt_detail::put_score_arch(out, net.arch);
  ckpt_detail::put_doubles(out, net.params);
  if (!out) throw IoError("save_checkpoint: short write to '" + path + "'");
}

inline ScoreNet load_score_checkpoint(const std::string& path) {
  std::ifstream in;
  ckpt_detail::open_and_check(in, path, ckpt_detail::kKindScore);
  ScoreNet net;
  net.arch = ckpt_detail::get_score_arch(in, path);
  net.params = ckpt_detail::get_doubles(in, path);
  if (net.params.size() != net.arch.stack().n_params()) {
    throw VersionError("load_score_checkpoint: parameter count does not match arch");
  }
  return net;
}

inline void save_checkpoint(const MaskNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open '" + path + "'");
  out.write(ckpt_detail::kMagic, 8);
  ckpt_detail::put_u32(out, ckpt_detail::kVersion);
  ckpt_detail::put_u32(out, ckpt_detail::kKindMask);
  ckpt_detail::put_u64(out, net.arch.hidden);
  ckpt_detail::put_u64(out, net.arch.ksize);
  ckpt_detail::put_doubles(out, net.params);
  if (!out) throw IoError("save_checkpoint: short write to '" + path + "'");
}

inline MaskNet load_mask_checkpoint(const std::string& path) {
  std::ifstream in;
  ckpt_detail::open_and_check(in, path, ckpt_detail::kKindMask);
  MaskNet net;
  net.arch.hidden = ckpt_detail::get_u64(in, path);
  net.arch.ksize = ckpt_detail::get_u64(in, path);
  net.params = ckpt_detail::get_doubles(in, path);
  if (net.params.size() != net.arch.stack().n_params()) {
    throw VersionError("load_mask_checkpoint: parameter count does not match arch");
  }
  return net;
}

// Mid-training snapshot: parameters plus Adam state plus the absolute step,
// enough to resume with a bit-identical trajectory.
struct ScoreTrainState {
  ScoreNet net;
  AdamState adam;
  long step = 0;
};

inline void save_train_state(const ScoreTrainState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_train_state: cannot open '" + path + "'");
  out.write(ckpt_detail::kMagic, 8);
  ckpt_detail::put_u32(out, ckpt_detail::kVersion);
  ckpt_detail::put_u32(out, ckpt_detail::kKindScoreTrainState);
  ckpt_detail::put_score_arch(out, state.net.arch);
  ckpt_detail::put_u64(out, static_cast<std::uint64_t>(state.step));
  ckpt_detail::put_u64(out, static_cast<std::uint64_t>(state.adam.step));
  ckpt_detail::put_doubles(out, state.net.params);
  ckpt_detail::put_doubles(out, state.adam.m);
  ckpt_detail::put_doubles(out, state.adam.v);
  if (!out) throw IoError("save_train_state: short write to '" + path + "'");
}

inline ScoreTrainState load_train_state(const std::string& path) {
  std::ifstream in;
  ckpt_detail::open_and_check(in, path, ckpt_detail::kKindScoreTrainState);
  ScoreTrainState state;
  state.net.arch = ckpt_detail::get_score_arch(in, path);
  state.step = static_cast<long>(ckpt_detail::get_u64(in, path));
  state.adam.step = static_cast<long>(ckpt_detail::get_u64(in, path));
  state.net.params = ckpt_detail::get_doubles(in, path);
  state.adam.m = ckpt_detail::get_doubles(in, path);
  state.adam.v = ckpt_detail::get_doubles(in, path);
  if (state.net.params.size() != state.net.arch.stack().n_params()) {
    throw VersionError("load_train_state: parameter count does not match arch");
  }
  return state;
}

struct MaskTrainState {
  MaskNet net;
  AdamState adam;
  long step = 0;
};

inline void save_train_state(const MaskTrainState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_train_state: cannot open '" + path + "'");
  out.write(ckpt_detail::kMagic, 8);
  ckpt_detail::put_u32(out, ckpt_detail::kVersion);
  ckpt_detail::put_u32(out, ckpt_detail::kKindMaskTrainState);
  ckpt_detail::put_u64(out, state.net.arch.hidden);
  ckpt_detail::put_u64(out, state.net.arch.ksize);
  ckpt_detail::put_u64(out, static_cast<std::uint64_t>(state.step));
  ckpt_detail::put_u64(out, static_cast<std::uint64_t>(state.adam.step));
  ckpt_detail::put_doubles(out, state.net.params);
  ckpt_detail::put_doubles(out, state.adam.m);
  ckpt_detail::put_doubles(out, state.adam.v);
  if (!out) throw IoError("save_train_state: short write to '" + path + "'");
}

inline MaskTrainState load_mask_train_state(const std::string& path) {
  std::ifstream in;
  ckpt_detail::open_and_check(in, path, ckpt_detail::kKindMaskTrainState);
  MaskTrainState state;
  state.net.arch.hidden = ckpt_detail::get_u64(in, path);
  state.net.arch.ksize = ckpt_detail::get_u64(in, path);
  state.step = static_cast<long>(ckpt_detail::get_u64(in, path));
  state.adam.step = static_cast<long>(ckpt_detail::get_u64(in, path));
  state.net.params = ckpt_detail::get_doubles(in, path);
  state.adam.m = ckpt_detail::get_doubles(in, path);
  state.adam.v = ckpt_detail::get_doubles(in, path);
  if (state.net.params.size() != state.net.arch.stack().n_params()) {
    throw VersionError("load_mask_train_state: parameter count does not match arch");
  }
  return state;
}

}  // namespace sbse
