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
#include <cstdio>
#include <string>
#include <vector>

#include "sbse/bridge.hpp"
#include "sbse/config.hpp"
#include "sbse/corpus.hpp"
#include "sbse/metrics.hpp"
#include "sbse/model.hpp"
#include "sbse/pipeline.hpp"
#include "sbse/schedule.hpp"
#include "sbse/spectral.hpp"

namespace sbse {

// Self-check suite behind the `verify` CLI subcommand. Each property states a
// measured value against its tolerance; the full suite is the release gate
// and doubles as the traceability table for the module invariants (see
// README). All Monte-Carlo checks run on fixed seeds, so a pass is stable.

struct PropertyResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;   // the worst observed value
  double tolerance = 0.0;  // measured must stay below this
  std::string detail;
};

namespace verify_detail {

inline PropertyResult make_result(const std::string& name, double measured,
                                  double tolerance, const std::string& detail = "") {
  PropertyResult r;
  r.name = name;
  r.measured = measured;
  r.tolerance = tolerance;
  r.pass = measured < tolerance;
  r.detail = detail;
  return r;
}

inline ComplexGrid random_grid(std::size_t rows, std::size_t cols, Rng& rng,
                               double scale = 1.0) {
  ComplexGrid g(rows, cols);
  for (auto& v : g) v = scale * rng.gaussian_complex();
  return g;
}

}  // namespace verify_detail

// --- rng -------------------------------------------------------------------

inline PropertyResult verify_rng_moments() {
  Rng rng(20240101);
  const int n = 200000;
  double mean = 0.0, m2 = 0.0, cmean = 0.0, cvar = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    mean += g;
    m2 += g * g;
  }
  mean /= n;
  m2 /= n;
  for (int i = 0; i < n; ++i) {
    const auto z = rng.gaussian_complex();
    cmean += z.real() + z.imag();
    cvar += std::norm(z);
  }
  cmean /= (2.0 * n);
  cvar /= n;
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  double worst = std::abs(mean) / (4.0 * se);
  worst = std::max(worst, std::abs(m2 - 1.0) / 0.02);
  worst = std::max(worst, std::abs(cmean) / (4.0 * se));
  worst = std::max(worst, std::abs(cvar - 1.0) / 0.02);
  return verify_detail::make_result(
      "rng.gaussian_moments", worst, 1.0,
      "normalized worst deviation of mean (4 SE) and variance (2%)");
}

// --- corpus ----------------------------------------------------------------

inline PropertyResult verify_mix_snr_roundtrip() {
  double worst = 0.0;
  for (int level = -5; level <= 30; level += 5) {
    const AudioClip clean = synth_clean(0.5, 7001 + static_cast<std::uint64_t>(level));
    const AudioClip noise =
        synth_noise(0.5, level % 2 ? NoiseKind::pink : NoiseKind::white, 900);
    const auto [noisy, scaled] = mix_at_snr(clean, noise, level);
    (void)noisy;
    worst = std::max(worst, std::abs(snr(clean, scaled) - level));
  }
  return verify_detail::make_result("corpus.mix_snr_roundtrip", worst, 1e-9,
                                    "max |requested - measured| dB over [-5, 30]");
}

inline PropertyResult verify_generator_determinism() {
  const AudioClip a = synth_clean(0.7, 5);
  const AudioClip b = synth_clean(0.7, 5);
  const AudioClip c = synth_noise(0.7, NoiseKind::pink, 5);
  const AudioClip d = synth_noise(0.7, NoiseKind::pink, 5);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    worst = std::max(worst, std::abs(a.samples[i] - b.samples[i]));
    worst = std::max(worst, std::abs(c.samples[i] - d.samples[i]));
  }
  return verify_detail::make_result("corpus.generator_determinism", worst, 1e-300,
                                    "bitwise repeatability of seeded generators");
}

inline PropertyResult verify_wav_roundtrip(const std::string& tmp_dir) {
  ensure_dir(tmp_dir);
  Rng rng(31);
  AudioClip clip;
  clip.samples.resize(16000);
  for (double& s : clip.samples) s = rng.uniform(-1.0, 1.0);

  const std::string p16 = tmp_dir + "/verify_pcm16.wav";
  const std::string p32 = tmp_dir + "/verify_float32.wav";
  write_wav(clip, p16, WavEncoding::pcm16);
  write_wav(clip, p32, WavEncoding::float32);
  const AudioClip r16 = read_wav(p16);
  const AudioClip r32 = read_wav(p32);

  double worst16 = 0.0, worst32 = 0.0;
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    worst16 = std::max(worst16, std::abs(clip.samples[i] - r16.samples[i]));
    worst32 = std::max(worst32,
                       std::abs(static_cast<double>(static_cast<float>(clip.samples[i])) -
                                r32.samples[i]));
  }
  const double worst = std::max(worst16 * 32768.0, worst32 > 0.0 ? 2.0 : 0.0);
  return verify_detail::make_result(
      "corpus.wav_roundtrip", worst, 1.0 + 1e-12,
      "pcm16 error in LSB units; float32 must be exact");
}

// --- spectral ----------------------------------------------------------------

inline PropertyResult verify_cola(const SpectralParams& params) {
  return verify_detail::make_result(
      "spectral.cola", cola_squared_deviation(params), 1e-10,
      "relative deviation of the squared-window overlap sum");
}

inline PropertyResult verify_stft_roundtrip(const SpectralParams& params) {
  double worst = 0.0;
  int idx = 0;
  for (double dur : {0.5, 1.37, 3.0}) {
    Rng rng(100 + idx++);
    AudioClip clip;
    clip.samples.resize(static_cast<std::size_t>(dur * kSampleRateHz));
    for (double& s : clip.samples) s = rng.gaussian();
    const AudioClip back = istft(stft(clip, params), clip.samples.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      num += (back.samples[i] - clip.samples[i]) * (back.samples[i] - clip.samples[i]);
      den += clip.samples[i] * clip.samples[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return verify_detail::make_result("spectral.stft_roundtrip", worst, 1e-6,
                                    "relative RMS error over 0.5-3 s signals");
}

inline PropertyResult verify_compress_inverse(const SpectralParams& params) {
  Rng rng(41);
  ComplexSpectrogram spec;
  spec.params = params;
  spec.values = verify_detail::random_grid(params.bins(), 40, rng, 2.0);
  const ComplexSpectrogram back = decompress(compress(spec));
  double worst = rel_l2_error(back.values, spec.values);

  // Phase preservation through compression.
  const ComplexSpectrogram comp = compress(spec);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const auto orig = spec.values.data()[i];
    const auto c = comp.values.data()[i];
    if (std::abs(orig) > 1e-12) {
      worst = std::max(worst, std::abs(std::arg(c) - std::arg(orig)));
    }
  }
  return verify_detail::make_result("spectral.compress_inverse_and_phase", worst,
                                    1e-10, "round-trip rel error and phase drift");
}

// --- schedule ----------------------------------------------------------------

inline PropertyResult verify_schedule_identities(const NoiseSchedule& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.sigma2.size(); ++i) {
    worst = std::max(worst, std::abs(s.sigma2[i] + s.sigma2_bar[i] - s.sigma2_total) /
                                s.sigma2_total);
  }
  // Monotonicity folded in: any violation pushes the measure above tolerance.
  for (std::size_t i = 1; i < s.sigma2.size(); ++i) {
    if (s.sigma2[i] < s.sigma2[i - 1] || s.sigma2_bar[i] > s.sigma2_bar[i - 1]) {
      worst = 1.0;
    }
  }
  return verify_detail::make_result("schedule.complementarity", worst, 1e-12,
                                    "max relative |sigma2 + sigma2_bar - total|");
}

// Symmetry sigma2(t) = sigma2_bar(1 - t), checked at mirror-aligned grid
// pairs (t_i, t_{N-1-i}); exact pairing exists for the default t_min.
inline PropertyResult verify_schedule_symmetry(const NoiseSchedule& s) {
  const std::size_t n = s.top_index();
  double worst = 0.0;
  double worst_pairing = 0.0;
  for (std::size_t i = 0; i + 1 <= n; ++i) {
    const std::size_t j = n - 1 - i;
    if (j >= s.t_grid.size()) break;
    worst_pairing = std::max(worst_pairing,
                             std::abs((1.0 - s.t_grid[i]) - s.t_grid[j]));
    worst = std::max(worst, std::abs(s.sigma2[i] - s.sigma2_bar[j]) / s.sigma2_total);
  }
  std::string detail = "max relative |sigma2(t) - sigma2_bar(1-t)| at mirrored grid "
                       "points (pairing residual " +
                       format_double(worst_pairing) + ")";
  return verify_detail::make_result("schedule.symmetry", worst, 1e-10, detail);
}

inline PropertyResult verify_inference_grid(const NoiseSchedule& s) {
  double worst = 0.0;
  for (std::size_t n_steps : {std::size_t{1}, std::size_t{5}, std::size_t{50}}) {
    const InferenceGrid grid = inference_grid(s, n_steps);
    double sum = 0.0;
    for (double a : grid.alpha2) {
      if (!(a > 0.0)) worst = 1.0;
      sum += a;
    }
    const double expected = s.sigma2_total - s.sigma2.front();
    worst = std::max(worst, std::abs(sum - expected) / expected);
  }
  return verify_detail::make_result("schedule.alpha2_telescoping", worst, 1e-12,
                                    "relative telescoping error, n_steps in {1,5,50}");
}

// --- bridge ------------------------------------------------------------------

inline PropertyResult verify_posterior_boundaries(const NoiseSchedule& s) {
  Rng rng(55);
  const ComplexGrid x0 = verify_detail::random_grid(3, 4, rng);
  const ComplexGrid xT = verify_detail::random_grid(3, 4, rng);

  double worst = 0.0;
  {  // t = 1: mean collapses onto xT with zero variance.
    const PosteriorParams p = posterior_params(x0, xT, 1.0, s);
    worst = std::max(worst, rel_l2_error(p.mean, xT));
    worst = std::max(worst, std::abs(p.var));
  }
  {  // t = t_min: the x0 weight is 1 - sigma2(t_min)/total, so the mean sits
     // within that coefficient of x0.
    const PosteriorParams p = posterior_params(x0, xT, s.t_min(), s);
    const double eps = s.sigma2.front() / s.sigma2_total;
    double diff = rel_l2_error(p.mean, x0);
    worst = std::max(worst, diff > 10.0 * eps ? diff : 0.0);
  }
  // Convexity of the mean weights across t.
  for (double t : {s.t_min(), 0.25, 0.5, 0.75, 1.0}) {
    const auto [s2, s2b] = sigma_at(s, t);
    const double w0 = s2b / (s2 + s2b), wT = s2 / (s2 + s2b);
    if (w0 < 0.0 || wT < 0.0) worst = 1.0;
    worst = std::max(worst, std::abs(w0 + wT - 1.0));
  }
  return verify_detail::make_result("bridge.posterior_boundaries", worst, 1e-12,
                                    "endpoint collapse and weight convexity");
}

// Monte-Carlo check of the analytic posterior sampler: per-bin sample means
// within 4 standard errors, sample variance within 2%.
inline PropertyResult verify_posterior_moments(const NoiseSchedule& s,
                                               PosteriorFault fault,
                                               int n_draws = 100000) {
  Rng data_rng(66);
  const std::size_t rows = 4, cols = 3;
  const ComplexGrid x0 = verify_detail::random_grid(rows, cols, data_rng);
  const ComplexGrid xT = verify_detail::random_grid(rows, cols, data_rng);

  double worst = 0.0;
  for (double t : {0.1, 0.5, 0.9}) {
    // The reference moments are always the honest analytic ones; the fault,
    // when injected, corrupts the sampling path so this property must fail.
    const PosteriorParams ref = posterior_params(x0, xT, t, s);
    const PosteriorParams faulty = posterior_params(x0, xT, t, s, fault);

    Rng rng(derive_seed(77, "posterior-mc", static_cast<std::uint64_t>(t * 1000)));
    ComplexGrid sum(rows, cols);
    RealGrid sum_sq(rows, cols);
    ComplexGrid draw(rows, cols);
    const double faulty_sd = std::sqrt(faulty.var);
    for (int d = 0; d < n_draws; ++d) {
      if (fault == PosteriorFault::none) {
        draw = sample_xt(x0, xT, t, s, rng).x_t;
      } else {
        for (std::size_t i = 0; i < draw.size(); ++i) {
          draw.data()[i] = faulty.mean.data()[i] + faulty_sd * rng.gaussian_complex();
        }
      }
      for (std::size_t i = 0; i < sum.size(); ++i) {
        sum.data()[i] += draw.data()[i];
        sum_sq.data()[i] += std::norm(draw.data()[i] - ref.mean.data()[i]);
      }
    }
    const double n = static_cast<double>(n_draws);
    const double se = std::sqrt(ref.var / (2.0 * n));  // per real component
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const auto mean = sum.data()[i] / n;
      const auto delta = mean - ref.mean.data()[i];
      if (se > 0.0) {
        worst = std::max(worst, std::abs(delta.real()) / (4.0 * se));
        worst = std::max(worst, std::abs(delta.imag()) / (4.0 * se));
      }
      const double var = sum_sq.data()[i] / n;
      if (ref.var > 0.0) {
        worst = std::max(worst, std::abs(var - ref.var) / (0.02 * ref.var));
      }
    }
  }
  return verify_detail::make_result(
      "bridge.posterior_moments", worst, 1.0,
      "normalized worst deviation: mean vs 4 SE, variance vs 2%");
}

// Monte-Carlo check that iterating the reverse transition with the true x0
// reproduces the analytic posterior marginals (the recursive-posterior /
// analytic-posterior equivalence the sampler relies on).
inline PropertyResult verify_ddpm_composition(const NoiseSchedule& s,
                                              int n_traj = 10000) {
  Rng data_rng(88);
  const std::size_t rows = 2, cols = 2;
  const ComplexGrid x0 = verify_detail::random_grid(rows, cols, data_rng);
  const ComplexGrid xT = verify_detail::random_grid(rows, cols, data_rng);

  const std::size_t n = s.top_index();
  const InferenceGrid grid = inference_grid(s, n);  // every grid index
  const std::vector<std::size_t> probe_steps = {n / 4, n / 2, (3 * n) / 4};

  // accumulated per probe: sum of x and sum of |x - mu|^2
  std::vector<ComplexGrid> sums(probe_steps.size(), ComplexGrid(rows, cols));
  std::vector<RealGrid> sq_sums(probe_steps.size(), RealGrid(rows, cols));
  std::vector<PosteriorParams> refs;
  for (std::size_t p : probe_steps) {
    refs.push_back(posterior_params(x0, xT, s.t_grid[p], s));
  }

  Rng rng(derive_seed(99, "ddpm-mc"));
  for (int traj = 0; traj < n_traj; ++traj) {
    ComplexGrid x = xT;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
      x = ddpm_step(x0, x, k, grid, s, rng);
      const std::size_t reached = grid.indices[k + 1];
      for (std::size_t pi = 0; pi < probe_steps.size(); ++pi) {
        if (reached == probe_steps[pi]) {
          for (std::size_t i = 0; i < x.size(); ++i) {
            sums[pi].data()[i] += x.data()[i];
            sq_sums[pi].data()[i] += std::norm(x.data()[i] - refs[pi].mean.data()[i]);
          }
        }
      }
    }
  }

  double worst = 0.0;
  const double nt = static_cast<double>(n_traj);
  for (std::size_t pi = 0; pi < probe_steps.size(); ++pi) {
    const double var_ref = refs[pi].var;
    const double se_mean = std::sqrt(var_ref / (2.0 * nt));
    const double se_var = var_ref / std::sqrt(nt);
    for (std::size_t i = 0; i < sums[pi].size(); ++i) {
      const auto mean = sums[pi].data()[i] / nt;
      const auto delta = mean - refs[pi].mean.data()[i];
      worst = std::max(worst, std::abs(delta.real()) / (4.0 * se_mean));
      worst = std::max(worst, std::abs(delta.imag()) / (4.0 * se_mean));
      const double var = sq_sums[pi].data()[i] / nt;
      worst = std::max(worst, std::abs(var - var_ref) / (4.0 * se_var));
    }
  }
  return verify_detail::make_result(
      "bridge.ddpm_composition", worst, 1.0,
      "normalized worst mean/variance deviation vs 4 SE at 3 probe steps");
}

inline PropertyResult verify_reconstruct_identity(const NoiseSchedule& s) {
  Rng rng(111);
  const ComplexGrid x0 = verify_detail::random_grid(6, 5, rng);
  const ComplexGrid x_t = verify_detail::random_grid(6, 5, rng);
  const double sigma = std::sqrt(sigma_at(s, 0.37).first);
  const ComplexGrid target = score_target(x_t, x0, sigma);
  const ComplexGrid back = reconstruct_x0(x_t, target, sigma);
  return verify_detail::make_result("bridge.reconstruct_identity",
                                    rel_l2_error(back, x0), 1e-14,
                                    "reconstruct_x0 of the exact target");
}

inline PropertyResult verify_oracle_score_roundtrip(const NoiseSchedule& s) {
  Rng data_rng(123);
  const ComplexGrid x0 = verify_detail::random_grid(8, 6, data_rng);
  const ComplexGrid xT = verify_detail::random_grid(8, 6, data_rng);
  ScoreFn oracle = [&](const ComplexGrid& x, std::size_t idx, const RealGrid*) {
    return score_target(x, x0, std::sqrt(s.sigma2[idx]));
  };
  double worst = 0.0;
  for (std::size_t n_steps : {std::size_t{1}, std::size_t{5}, std::size_t{50}}) {
    Rng rng(321);
    const InferenceGrid grid = inference_grid(s, n_steps);
    const ComplexGrid out = reverse_enhance(xT, oracle, nullptr, s, grid, rng);
    worst = std::max(worst, rel_l2_error(out, x0));
  }
  return verify_detail::make_result("bridge.oracle_score_roundtrip", worst, 1e-10,
                                    "relative error, n_steps in {1,5,50}");
}

inline PropertyResult verify_enhance_determinism(const RunConfig& config) {
  const SpectralParams spectral = config.spectral_params();
  const NoiseSchedule schedule = config.schedule();
  const AudioClip clean = synth_clean(0.5, 2024);
  const AudioClip noise = synth_noise(0.5, NoiseKind::white, 2025);
  const AudioClip noisy = mix_at_snr(clean, noise, 5.0).first;

  const ScoreNet net = make_score_net(config.score_arch(), 7);
  Enhancer e;
  e.spectral = spectral;
  e.schedule = schedule;
  e.grid = inference_grid(schedule, 5);
  e.score_net = &net;

  Rng rng_a(derive_seed(config.seed, "determinism-probe"));
  Rng rng_b(derive_seed(config.seed, "determinism-probe"));
  const AudioClip a = enhance_clip(e, noisy, rng_a);
  const AudioClip b = enhance_clip(e, noisy, rng_b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (a.samples[i] != b.samples[i]) worst = 1.0;
  }
  return verify_detail::make_result("pipeline.enhance_determinism", worst, 0.5,
                                    "bitwise equality of two same-seed runs");
}

inline PropertyResult verify_oracle_end_to_end(const RunConfig& config) {
  const SpectralParams spectral = config.spectral_params();
  const NoiseSchedule schedule = config.schedule();
  const AudioClip clean = synth_clean(1.0, 77);
  const AudioClip noise = synth_noise(1.0, NoiseKind::pink, 78);
  const AudioClip noisy = mix_at_snr(clean, noise, 0.0).first;

  Enhancer e;
  e.spectral = spectral;
  e.schedule = schedule;
  e.grid = inference_grid(schedule, 5);
  e.oracle_score = true;

  Rng rng(555);
  const AudioClip out = enhance_clip(e, noisy, rng, &clean);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    num += (out.samples[i] - clean.samples[i]) * (out.samples[i] - clean.samples[i]);
    den += clean.samples[i] * clean.samples[i];
  }
  return verify_detail::make_result("pipeline.oracle_end_to_end",
                                    std::sqrt(num / den), 1e-5,
                                    "relative RMS error, oracle score, 5 steps");
}

// --- model -------------------------------------------------------------------

inline PropertyResult verify_score_grad_check(const RunConfig& config,
                                              const NoiseSchedule& schedule) {
  const ScoreNet net = make_score_net(config.score_arch(), 11);
  Rng rng(13);
  std::vector<ScoreBatchItem> probe(1);
  const ComplexGrid x0 = verify_detail::random_grid(7, 9, rng, 0.5);
  const ComplexGrid xT = verify_detail::random_grid(7, 9, rng, 0.5);
  probe[0].sample = sample_xt(x0, xT, 0.5, schedule, rng);
  probe[0].xT = xT;
  probe[0].mask = oracle_gain(magnitude(x0), magnitude(xT));
  const GradCheckReport report = grad_check(net, probe, 1e-5, 1e-5);
  return verify_detail::make_result(
      "model.score_grad_check", report.max_rel_err, report.tolerance,
      "max relative error over " + std::to_string(report.n_checked) + " params");
}

inline PropertyResult verify_mask_grad_check(const RunConfig& config) {
  const MaskNet net = make_mask_net(config.mask_arch(), 17);
  Rng rng(19);
  std::vector<MaskBatchItem> probe(1);
  const ComplexGrid x0 = verify_detail::random_grid(7, 9, rng, 0.5);
  const ComplexGrid xT = verify_detail::random_grid(7, 9, rng, 0.5);
  probe[0].noisy = xT;
  probe[0].target = oracle_gain(magnitude(x0), magnitude(xT));
  const GradCheckReport report = grad_check(net, probe, 1e-5, 1e-5);
  return verify_detail::make_result(
      "model.mask_grad_check", report.max_rel_err, report.tolerance,
      "max relative error over " + std::to_string(report.n_checked) + " params");
}

inline PropertyResult verify_mask_ranges(const RunConfig& config) {
  Rng rng(23);
  const MaskNet net = make_mask_net(config.mask_arch(), 29);
  const ComplexGrid noisy = verify_detail::random_grid(9, 8, rng, 3.0);
  const RealGrid predicted = mask_forward(net, noisy);
  double worst = 0.0;
  for (double v : predicted) {
    if (!(v > 0.0 && v < 1.0)) worst = 1.0;
  }
  const ComplexGrid clean = verify_detail::random_grid(9, 8, rng, 3.0);
  const RealGrid gains = oracle_gain(magnitude(clean), magnitude(noisy));
  const RealGrid gains2 = oracle_gain(gains, RealGrid(9, 8, 1.0));
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains.data()[i] < 0.0 || gains.data()[i] > 1.0) worst = 1.0;
    // Clipping idempotence: re-clipping against all-ones leaves gains alone.
    worst = std::max(worst, std::abs(gains.data()[i] - gains2.data()[i]));
  }
  return verify_detail::make_result("model.mask_ranges", worst, 1e-300,
                                    "sigmoid range and oracle-gain clipping");
}

// --- metrics -----------------------------------------------------------------

inline PropertyResult verify_si_sdr_units() {
  double worst = 0.0;
  {
    AudioClip s, e;
    s.samples = {1.0, 0.0};
    e.samples = {1.0, 1.0};
    worst = std::max(worst, std::abs(si_sdr(s, e)));  // exactly 0 dB
  }
  {
    Rng rng(37);
    AudioClip s, e;
    s.samples.resize(400);
    e.samples.resize(400);
    for (std::size_t i = 0; i < 400; ++i) {
      s.samples[i] = rng.gaussian();
      e.samples[i] = s.samples[i] + 0.1 * rng.gaussian();
    }
    const double base = si_sdr(s, e);
    for (double c : {2.5, -0.3}) {
      AudioClip scaled = e;
      for (double& v : scaled.samples) v *= c;
      worst = std::max(worst, std::abs(si_sdr(s, scaled) - base) / 1e-9);
    }
    worst = std::max(worst, std::abs(si_sdr(s, s) - kSiSdrCapDb));
  }
  return verify_detail::make_result(
      "metrics.si_sdr_units", worst, 1.0,
      "hand case |0 dB| and scale invariance residual / 1e-9");
}

// --- suite -------------------------------------------------------------------

struct VerifyOptions {
  PosteriorFault fault = PosteriorFault::none;  // set via --testing fault mode
  std::string tmp_dir = "/tmp/sbse_verify";
};

inline std::vector<PropertyResult> run_verify_suite(const RunConfig& config,
                                                    const VerifyOptions& opts = {}) {
  config.validate();
  const SpectralParams spectral = config.spectral_params();
  const NoiseSchedule schedule = config.schedule();

  std::vector<PropertyResult> results;
  results.push_back(verify_rng_moments());
  results.push_back(verify_generator_determinism());
  results.push_back(verify_mix_snr_roundtrip());
  results.push_back(verify_wav_roundtrip(opts.tmp_dir));
  results.push_back(verify_cola(spectral));
  results.push_back(verify_stft_roundtrip(spectral));
  results.push_back(verify_compress_inverse(spectral));
  results.push_back(verify_schedule_identities(schedule));
  results.push_back(verify_schedule_symmetry(schedule));
  results.push_back(verify_inference_grid(schedule));
  results.push_back(verify_posterior_boundaries(schedule));
  results.push_back(verify_posterior_moments(schedule, opts.fault));
  results.push_back(verify_ddpm_composition(schedule));
  results.push_back(verify_reconstruct_identity(schedule));
  results.push_back(verify_oracle_score_roundtrip(schedule));
  results.push_back(verify_enhance_determinism(config));
  results.push_back(verify_oracle_end_to_end(config));
  results.push_back(verify_score_grad_check(config, schedule));
  results.push_back(verify_mask_grad_check(config));
  results.push_back(verify_mask_ranges(config));
  results.push_back(verify_si_sdr_units());
  return results;
}

inline bool print_verify_results(const std::vector<PropertyResult>& results) {
  bool all_pass = true;
  for (const auto& r : results) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-34s %s  measured %.3e vs tolerance %.3e",
                  r.name.c_str(), r.pass ? "PASS" : "FAIL", r.measured, r.tolerance);
    std::string line = buf;
    if (!r.detail.empty()) line += "  (" + r.detail + ")";
    std::puts(line.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass;
}

}  // namespace sbse
