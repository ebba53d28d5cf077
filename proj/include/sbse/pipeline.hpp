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
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "sbse/audio.hpp"
#include "sbse/bridge.hpp"
#include "sbse/config.hpp"
#include "sbse/corpus.hpp"
#include "sbse/error.hpp"
#include "sbse/metrics.hpp"
#include "sbse/model.hpp"
#include "sbse/schedule.hpp"
#include "sbse/spectral.hpp"

namespace sbse {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Small shared machinery

// Bounded worker pool over [0, n); item i is handled by exactly one worker.
// Safe whenever fn(i) touches only item-i state.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  std::size_t n_threads = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, std::max<std::size_t>(n, 1));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Line-delimited timestamped log, mirrored to stdout. The default-constructed
// log is silent (used by tests and the acceptance driver).
class RunLog {
 public:
  RunLog() = default;

  explicit RunLog(const std::string& path) : echo_(true) {
    if (!path.empty()) {
      file_.open(path, std::ios::app);
      if (!file_) throw IoError("RunLog: cannot open '" + path + "'");
    }
  }

  void line(const std::string& message) {
    if (!echo_ && !file_.is_open()) return;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    if (echo_) std::cout << "[" << stamp << "] " << message << "\n";
    if (file_.is_open()) file_ << "[" << stamp << "] " << message << "\n" << std::flush;
  }

 private:
  std::ofstream file_;
  bool echo_ = false;
};

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

inline std::string snr_label(double level_db) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snr%+ddB", static_cast<int>(std::lround(level_db)));
  return buf;
}

// ---------------------------------------------------------------------------
// Enhancement pipeline: stft -> compress -> (optional mask) -> reverse chain
// -> decompress -> istft. The per-clip seed policy is derive_seed(master,
// record id), so independent clips can run concurrently.

struct Enhancer {
  SpectralParams spectral;
  NoiseSchedule schedule;
  InferenceGrid grid;
  const ScoreNet* score_net = nullptr;  // null only with oracle_score
  const MaskNet* mask_net = nullptr;
  bool use_mask = false;
  bool oracle_mask = false;   // condition on oracle gains (needs reference)
  bool oracle_score = false;  // testing hook: exact score from the reference
};

inline AudioClip enhance_clip(const Enhancer& e, const AudioClip& noisy, Rng& rng,
                              const AudioClip* clean_reference = nullptr) {
  const ComplexSpectrogram noisy_spec = stft(noisy, e.spectral);
  const ComplexSpectrogram noisy_c = compress(noisy_spec);
  const ComplexGrid& xT = noisy_c.values;

  ComplexGrid x0_true;
  if (e.oracle_score || (e.use_mask && e.oracle_mask)) {
    if (clean_reference == nullptr) {
      throw ConfigError(
          "enhance_clip: oracle score/mask requires a clean reference clip");
    }
    x0_true = compress(stft(*clean_reference, e.spectral)).values;
  }

  RealGrid mask;
  const RealGrid* mask_ptr = nullptr;
  if (e.use_mask) {
    if (e.oracle_mask) {
      mask = oracle_gain(magnitude(x0_true), magnitude(xT));
    } else {
      if (e.mask_net == nullptr) {
        throw ConfigError("enhance_clip: predicted mask requested without a mask net");
      }
      mask = mask_forward(*e.mask_net, xT);
    }
    mask_ptr = &mask;
  }

  ScoreFn score_fn;
  if (e.oracle_score) {
    const NoiseSchedule& schedule = e.schedule;
    score_fn = [&x0_true, &schedule](const ComplexGrid& x, std::size_t idx,
                                     const RealGrid*) {
      return score_target(x, x0_true, std::sqrt(schedule.sigma2[idx]));
    };
  } else {
    if (e.score_net == nullptr) {
      throw ConfigError("enhance_clip: no score checkpoint provided");
    }
    const ScoreNet& net = *e.score_net;
    const NoiseSchedule& schedule = e.schedule;
    score_fn = [&net, &schedule, &xT](const ComplexGrid& x, std::size_t idx,
                                      const RealGrid* m) {
      return score_forward(net, x, schedule.t_grid[idx], xT, m);
    };
  }

  ComplexGrid out = reverse_enhance(xT, score_fn, mask_ptr, e.schedule, e.grid, rng);

  ComplexSpectrogram out_spec;
  out_spec.values = std::move(out);
  out_spec.params = e.spectral;
  AudioClip enhanced = istft(decompress(out_spec), noisy.samples.size());
  enhanced.sample_rate_hz = noisy.sample_rate_hz;
  return enhanced;
}

// ---------------------------------------------------------------------------
// Run directory layout

struct RunPaths {
  fs::path workdir;

  explicit RunPaths(const std::string& dir) : workdir(dir) {}

  fs::path config_snapshot() const { return workdir / "config_snapshot.cfg"; }
  fs::path manifest() const { return workdir / "manifest.tsv"; }
  fs::path data_dir(Split split) const {
    return workdir / "data" / to_string(split);
  }
  fs::path eval_level_dir(double level_db) const {
    return data_dir(Split::eval) / snr_label(level_db);
  }
  fs::path record_dir(const MixtureRecord& rec) const {
    return rec.split == Split::eval ? eval_level_dir(rec.snr_db)
                                    : data_dir(Split::train);
  }
  fs::path clean_wav(const MixtureRecord& rec) const {
    return record_dir(rec) / (rec.clean_id + ".wav");
  }
  fs::path noise_wav(const MixtureRecord& rec) const {
    return record_dir(rec) / (rec.noise_id + ".wav");
  }
  fs::path noisy_wav(const MixtureRecord& rec) const {
    return record_dir(rec) / (rec.id + ".noisy.wav");
  }
  fs::path checkpoints_dir() const { return workdir / "checkpoints"; }
  fs::path checkpoint(const std::string& which) const {
    return checkpoints_dir() / (which + ".ckpt");
  }
  fs::path train_state(const std::string& which) const {
    return checkpoints_dir() / (which + ".state");
  }
  fs::path loss_curve(const std::string& which) const {
    return checkpoints_dir() / (which + "_loss.tsv");
  }
  fs::path enhanced_dir(const std::string& system) const {
    return workdir / "enhanced" / system;
  }
  fs::path enhanced_wav(const std::string& system, const MixtureRecord& rec) const {
    return enhanced_dir(system) / (rec.id + ".wav");
  }
  fs::path reports_dir() const { return workdir / "reports"; }
  fs::path log_file() const { return workdir / "log.txt"; }
};

// Writes the resolved config into the run directory; called by every command
// before any real work.
inline RunPaths prepare_workdir(const RunConfig& config) {
  RunPaths paths(config.workdir);
  ensure_dir(paths.workdir);
  write_config_snapshot(config, paths.config_snapshot().string());
  return paths;
}

// Text-table dump of a schedule grid for inspection (written by `verify`).
inline void dump_schedule_grid(const NoiseSchedule& s, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("dump_schedule_grid: cannot open '" + path + "'");
  out << "index\tt\tbeta\tsigma2\tsigma2_bar\n";
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    out << i << '\t' << format_double(s.t_grid[i]) << '\t'
        << format_double(s.beta[i]) << '\t' << format_double(s.sigma2[i]) << '\t'
        << format_double(s.sigma2_bar[i]) << '\n';
  }
  if (!out) throw IoError("dump_schedule_grid: short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// synth-data

inline DatasetManifest cmd_synth_data(const RunConfig& config, bool force,
                                      RunLog& log) {
  config.validate();
  RunPaths paths(config.workdir);
  if (fs::exists(paths.data_dir(Split::train)) && !force) {
    throw ConfigError("synth-data: workdir '" + config.workdir +
                      "' already holds data (use --force to overwrite)");
  }
  prepare_workdir(config);

  const DatasetManifest manifest = make_dataset(config.dataset_config());
  write_manifest(manifest, paths.manifest().string());
  log.line("synth-data: manifest with " + std::to_string(manifest.records.size()) +
           " records (" + std::to_string(manifest.count(Split::train)) + " train, " +
           std::to_string(manifest.count(Split::eval)) + " eval)");

  ensure_dir(paths.data_dir(Split::train));
  for (double level : kEvalSnrLevelsDb) ensure_dir(paths.eval_level_dir(level));

  parallel_for(manifest.records.size(), config.threads, [&](std::size_t i) {
    const MixtureRecord& rec = manifest.records[i];
    const MixturePair pair = record_mixture(rec, manifest.clip_duration_s);
    write_wav(pair.clean, paths.clean_wav(rec).string(), WavEncoding::float32);
    AudioClip noise = record_noise(rec, manifest.clip_duration_s);
    write_wav(noise, paths.noise_wav(rec).string(), WavEncoding::float32);
    write_wav(pair.noisy, paths.noisy_wav(rec).string(), WavEncoding::float32);
  });
  log.line("synth-data: wrote WAV tree under " + paths.data_dir(Split::train).string() +
           " and " + paths.data_dir(Split::eval).string());
  return manifest;
}

// ---------------------------------------------------------------------------
// train

inline void append_losses(const fs::path& path, long first_step,
                          const std::vector<double>& losses) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open loss curve '" + path.string() + "'");
  if (fresh) out << "step\tloss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << (first_step + static_cast<long>(i)) << '\t' << format_double(losses[i])
        << '\n';
  }
}

enum class TrainTarget { score, score_masked, mask };

inline TrainTarget train_target_from_string(const std::string& s) {
  if (s == "score") return TrainTarget::score;
  if (s == "score_masked") return TrainTarget::score_masked;
  if (s == "mask") return TrainTarget::mask;
  throw ConfigError("unknown train target '" + s + "' (score|score_masked|mask)");
}

inline const char* to_string(TrainTarget t) {
  switch (t) {
    case TrainTarget::score: return "score";
    case TrainTarget::score_masked: return "score_masked";
    case TrainTarget::mask: return "mask";
  }
  return "?";
}

// Trains (or resumes) one model. Training state is snapshotted every
// checkpoint_every steps; a resumed run replays the identical trajectory
// because every step's batch derives from (seed, absolute step index).
inline void cmd_train(const RunConfig& config, TrainTarget target, RunLog& log) {
  config.validate();
  RunPaths paths = prepare_workdir(config);
  if (!fs::exists(paths.manifest())) {
    throw ConfigError("train: no manifest at '" + paths.manifest().string() +
                      "' (run synth-data first)");
  }
  const DatasetManifest manifest = read_manifest(paths.manifest().string());
  const SpectralParams spectral = config.spectral_params();
  const TrainConfig tc = config.train_config();
  ensure_dir(paths.checkpoints_dir());

  const std::string which = to_string(target);
  const fs::path state_path = paths.train_state(which);
  const long chunk = std::max(1, config.checkpoint_every);

  if (target == TrainTarget::mask) {
    MaskTrainState state;
    if (fs::exists(state_path)) {
      state = load_mask_train_state(state_path.string());
      if (!(state.net.arch == config.mask_arch())) {
        throw VersionError("train: existing mask state arch differs from config");
      }
      log.line("train(mask): resuming from step " + std::to_string(state.step));
    } else {
      state.net = make_mask_net(config.mask_arch(), tc.seed);
    }
    while (state.step < tc.steps) {
      const long n = std::min<long>(chunk, tc.steps - state.step);
      std::vector<double> losses;
      train_mask_steps(state.net, state.adam, manifest, spectral, tc, state.step, n,
                       &losses);
      append_losses(paths.loss_curve(which), state.step, losses);
      state.step += n;
      save_train_state(state, state_path.string());
      log.line("train(mask): step " + std::to_string(state.step) + "/" +
               std::to_string(tc.steps) + ", loss " + format_double(losses.back()));
    }
    save_checkpoint(state.net, paths.checkpoint(which).string());
  } else {
    const bool use_mask = target == TrainTarget::score_masked;
    ScoreTrainState state;
    if (fs::exists(state_path)) {
      state = load_train_state(state_path.string());
      if (!(state.net.arch == config.score_arch())) {
        throw VersionError("train: existing score state arch differs from config");
      }
      log.line("train(" + which + "): resuming from step " + std::to_string(state.step));
    } else {
      state.net = make_score_net(config.score_arch(), tc.seed);
    }
    const NoiseSchedule schedule = config.schedule();
    while (state.step < tc.steps) {
      const long n = std::min<long>(chunk, tc.steps - state.step);
      std::vector<double> losses;
      train_score_steps(state.net, state.adam, manifest, spectral, schedule, tc,
                        use_mask, state.step, n, &losses);
      append_losses(paths.loss_curve(which), state.step, losses);
      state.step += n;
      save_train_state(state, state_path.string());
      log.line("train(" + which + "): step " + std::to_string(state.step) + "/" +
               std::to_string(tc.steps) + ", loss " + format_double(losses.back()));
    }
    save_checkpoint(state.net, paths.checkpoint(which).string());
  }

  // Config sidecar next to the checkpoint.
  write_config_snapshot(config, (paths.checkpoint(which).string() + ".cfg"));
  log.line("train(" + which + "): checkpoint at " + paths.checkpoint(which).string());
}

// ---------------------------------------------------------------------------
// enhance

struct EnhanceOptions {
  std::string input_wav;       // single-file mode when non-empty
  std::string system = "sbse"; // output tree name; sbse | sbse_m | custom
  std::string score_checkpoint;  // defaults by system
  std::string mask_checkpoint;   // defaults to checkpoints/mask.ckpt
  bool oracle_score = false;     // testing hook (requires --testing in the CLI)
};

inline Enhancer make_enhancer(const RunConfig& config, const RunPaths& paths,
                              const EnhanceOptions& opts, ScoreNet& score_storage,
                              MaskNet& mask_storage) {
  Enhancer e;
  e.spectral = config.spectral_params();
  e.schedule = config.schedule();
  e.grid = inference_grid(e.schedule, static_cast<std::size_t>(config.n_steps),
                          grid_spacing_from_string(config.grid_spacing));
  e.use_mask = config.use_mask;
  e.oracle_mask = config.mask_source == "oracle";
  e.oracle_score = opts.oracle_score;

  if (!e.oracle_score) {
    std::string ckpt = opts.score_checkpoint;
    if (ckpt.empty()) {
      ckpt = paths.checkpoint(e.use_mask ? "score_masked" : "score").string();
    }
    score_storage = load_score_checkpoint(ckpt);
    e.score_net = &score_storage;
  }
  if (e.use_mask && !e.oracle_mask) {
    std::string ckpt = opts.mask_checkpoint;
    if (ckpt.empty()) ckpt = paths.checkpoint("mask").string();
    mask_storage = load_mask_checkpoint(ckpt);
    e.mask_net = &mask_storage;
  }
  return e;
}

inline void cmd_enhance(const RunConfig& config, const EnhanceOptions& opts,
                        RunLog& log) {
  config.validate();
  RunPaths paths = prepare_workdir(config);
  ScoreNet score_storage;
  MaskNet mask_storage;
  const Enhancer enhancer =
      make_enhancer(config, paths, opts, score_storage, mask_storage);

  if (!opts.input_wav.empty()) {
    if (enhancer.oracle_score || (enhancer.use_mask && enhancer.oracle_mask)) {
      throw ConfigError(
          "enhance: oracle score/mask needs manifest records, not a bare WAV");
    }
    const AudioClip noisy = read_wav(opts.input_wav);
    Rng rng(derive_seed(config.seed, fs::path(opts.input_wav).filename().string()));
    const AudioClip enhanced = enhance_clip(enhancer, noisy, rng);
    ensure_dir(paths.enhanced_dir(opts.system));
    const fs::path out = paths.enhanced_dir(opts.system) /
                         fs::path(opts.input_wav).filename();
    write_wav(enhanced, out.string(), WavEncoding::float32);
    log.line("enhance: " + opts.input_wav + " -> " + out.string());
    return;
  }

  if (!fs::exists(paths.manifest())) {
    throw ConfigError("enhance: no manifest at '" + paths.manifest().string() + "'");
  }
  const DatasetManifest manifest = read_manifest(paths.manifest().string());
  ensure_dir(paths.enhanced_dir(opts.system));

  std::vector<const MixtureRecord*> records;
  for (const auto& rec : manifest.records) {
    if (rec.split == Split::eval) records.push_back(&rec);
  }
  parallel_for(records.size(), config.threads, [&](std::size_t i) {
    const MixtureRecord& rec = *records[i];
    const MixturePair pair = record_mixture(rec, manifest.clip_duration_s);
    Rng rng(derive_seed(config.seed, rec.id));
    const AudioClip enhanced = enhance_clip(enhancer, pair.noisy, rng, &pair.clean);
    write_wav(enhanced, paths.enhanced_wav(opts.system, rec).string(),
              WavEncoding::float32);
  });
  log.line("enhance: wrote " + std::to_string(records.size()) + " clips under " +
           paths.enhanced_dir(opts.system).string());
}

// ---------------------------------------------------------------------------
// eval

// Evaluates one system tree against the regenerated references and always
// reports the unprocessed noisy input as the `identity` baseline.
inline std::vector<EvalRow> cmd_eval(const RunConfig& config,
                                     const std::string& system, RunLog& log) {
  config.validate();
  RunPaths paths = prepare_workdir(config);
  if (!fs::exists(paths.manifest())) {
    throw ConfigError("eval: no manifest at '" + paths.manifest().string() + "'");
  }
  const DatasetManifest manifest = read_manifest(paths.manifest().string());

  std::map<std::string, AudioClip> system_outputs;
  std::map<std::string, AudioClip> identity_outputs;
  std::string missing;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::eval) continue;
    const fs::path wav = paths.enhanced_wav(system, rec);
    if (!fs::exists(wav)) {
      missing += missing.empty() ? rec.id : ", " + rec.id;
      continue;
    }
    system_outputs[rec.id] = read_wav(wav.string());
    identity_outputs[rec.id] = record_mixture(rec, manifest.clip_duration_s).noisy;
  }
  if (!missing.empty()) {
    throw CompletenessError("eval: missing enhanced outputs for: " + missing);
  }

  EvalReport system_report = evaluate(manifest, system_outputs, system);
  EvalReport identity_report = evaluate(manifest, identity_outputs, "identity");
  system_report.config_hash = config_hash(config);
  system_report.seed = config.seed;

  std::vector<EvalRow> rows = identity_report.rows;
  rows.insert(rows.end(), system_report.rows.begin(), system_report.rows.end());
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return a.snr_level_db != b.snr_level_db ? a.snr_level_db < b.snr_level_db
                                            : a.system < b.system;
  });

  ensure_dir(paths.reports_dir());
  const std::string table = format_report_table(rows, "identity");
  {
    const fs::path txt = paths.reports_dir() / ("eval_" + system + ".txt");
    std::ofstream out(txt, std::ios::trunc);
    if (!out) throw IoError("eval: cannot open '" + txt.string() + "'");
    out << "config_hash " << system_report.config_hash << ", seed "
        << system_report.seed << "\n" << table;
  }
  write_report_tsv(rows, system_report,
                   (paths.reports_dir() / ("eval_" + system + ".tsv")).string());
  log.line("eval(" + system + "):\n" + table);
  return rows;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  int nfe = 0;
  double rtf = 0.0;       // processing time / audio duration
  double seconds = 0.0;   // total processing time
};

// Real-time-factor measurement over bench_clip_count clips of
// bench_clip_duration_s seconds each (defaults: ten 10-second clips), for
// each requested NFE setting.
inline std::vector<BenchRow> cmd_bench(const RunConfig& config,
                                       const std::string& checkpoint, RunLog& log) {
  config.validate();
  RunPaths paths = prepare_workdir(config);
  std::string ckpt = checkpoint;
  if (ckpt.empty()) ckpt = paths.checkpoint("score").string();
  const ScoreNet net = load_score_checkpoint(ckpt);

  const int n_clips = config.bench_clip_count;
  const double dur = config.bench_clip_duration_s;
  std::vector<AudioClip> clips(static_cast<std::size_t>(n_clips));
  for (int i = 0; i < n_clips; ++i) {
    const std::uint64_t s = derive_seed(config.seed, "bench", static_cast<std::uint64_t>(i));
    const AudioClip clean = synth_clean(dur, s);
    const AudioClip noise = synth_noise(dur, NoiseKind::white, s + 1);
    clips[static_cast<std::size_t>(i)] = mix_at_snr(clean, noise, 5.0).first;
  }

  Enhancer e;
  e.spectral = config.spectral_params();
  e.schedule = config.schedule();
  e.score_net = &net;

  std::vector<BenchRow> rows;
  for (int nfe : config.bench_nfe_values()) {
    e.grid = inference_grid(e.schedule, static_cast<std::size_t>(nfe),
                            grid_spacing_from_string(config.grid_spacing));
    const auto start = std::chrono::steady_clock::now();
    parallel_for(clips.size(), config.threads, [&](std::size_t i) {
      Rng rng(derive_seed(config.seed, "bench-run", i));
      (void)enhance_clip(e, clips[i], rng);
    });
    const auto stop = std::chrono::steady_clock::now();
    BenchRow row;
    row.nfe = nfe;
    row.seconds = std::chrono::duration<double>(stop - start).count();
    row.rtf = row.seconds / (dur * n_clips);
    rows.push_back(row);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "bench: NFE %3d -> RTF %.4f (%.2fs / %.0fs audio)",
                  row.nfe, row.rtf, row.seconds, dur * n_clips);
    log.line(buf);
  }

  ensure_dir(paths.reports_dir());
  const fs::path tsv = paths.reports_dir() / "bench.tsv";
  std::ofstream out(tsv, std::ios::trunc);
  if (!out) throw IoError("bench: cannot open '" + tsv.string() + "'");
  out << "nfe\trtf\tseconds\n";
  for (const auto& row : rows) {
    out << row.nfe << '\t' << format_double(row.rtf) << '\t'
        << format_double(row.seconds) << '\n';
  }
  return rows;
}

}  // namespace sbse
