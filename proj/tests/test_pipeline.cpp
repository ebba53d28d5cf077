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

#include "sbse/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "catch2/catch_amalgamated.hpp"
#include "sbse/verify.hpp"

using namespace sbse;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sbse_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig tiny_config(const std::string& workdir) {
  RunConfig config;
  config.workdir = workdir;
  config.seed = 1234;
  config.train_count = 10;
  config.eval_count = 8;
  config.clip_duration_s = 0.5;
  config.steps = 4;
  config.batch_size = 2;
  config.learning_rate = 1e-3;
  config.crop_frames = 64;
  config.checkpoint_every = 2;
  config.n_steps = 3;
  return config;
}

RunLog quiet_log() { return RunLog(); }

}  // namespace

TEST_CASE("synth-data writes the manifest, the eval SNR subsets, and refuses reruns") {
  const std::string dir = fresh_dir("synth");
  RunConfig config = tiny_config(dir);
  RunLog log = quiet_log();
  const DatasetManifest manifest = cmd_synth_data(config, false, log);

  RunPaths paths(dir);
  REQUIRE(fs::exists(paths.manifest()));
  REQUIRE(fs::exists(paths.config_snapshot()));
  int level_dirs = 0;
  for (const auto& entry : fs::directory_iterator(paths.data_dir(Split::eval))) {
    if (entry.is_directory()) ++level_dirs;
  }
  REQUIRE(level_dirs == 8);
  for (const auto& rec : manifest.records) {
    REQUIRE(fs::exists(paths.clean_wav(rec)));
    REQUIRE(fs::exists(paths.noise_wav(rec)));
    REQUIRE(fs::exists(paths.noisy_wav(rec)));
  }

  REQUIRE_THROWS_AS(cmd_synth_data(config, false, log), ConfigError);

  // Same seed, fresh directory: byte-identical manifest.
  const std::string dir2 = fresh_dir("synth2");
  RunConfig config2 = tiny_config(dir2);
  cmd_synth_data(config2, false, log);
  REQUIRE(slurp(paths.manifest()) == slurp(RunPaths(dir2).manifest()));
}

TEST_CASE("train writes loss curves with one row per step and resumes bit-exactly") {
  const std::string dir_a = fresh_dir("train_a");
  const std::string dir_b = fresh_dir("train_b");
  RunLog log = quiet_log();

  RunConfig config_a = tiny_config(dir_a);
  cmd_synth_data(config_a, false, log);
  RunConfig config_b = tiny_config(dir_b);
  cmd_synth_data(config_b, false, log);

  // A: 10 steps in one go.
  config_a.steps = 10;
  cmd_train(config_a, TrainTarget::score, log);

  // B: 5 steps, then resume to 10.
  config_b.steps = 5;
  cmd_train(config_b, TrainTarget::score, log);
  config_b.steps = 10;
  cmd_train(config_b, TrainTarget::score, log);

  const std::string ckpt_a = slurp(RunPaths(dir_a).checkpoint("score"));
  const std::string ckpt_b = slurp(RunPaths(dir_b).checkpoint("score"));
  REQUIRE(ckpt_a == ckpt_b);

  // Loss curve: header + one row per step, identical trajectories.
  const std::string curve_a = slurp(RunPaths(dir_a).loss_curve("score"));
  const std::string curve_b = slurp(RunPaths(dir_b).loss_curve("score"));
  REQUIRE(curve_a == curve_b);
  REQUIRE(std::count(curve_a.begin(), curve_a.end(), '\n') == 11);

  // Mask training uses the same machinery.
  config_a.steps = 3;
  cmd_train(config_a, TrainTarget::mask, log);
  REQUIRE(fs::exists(RunPaths(dir_a).checkpoint("mask")));
}

TEST_CASE("enhance preserves duration and oracle mode reproduces the reference") {
  const std::string dir = fresh_dir("enhance");
  RunConfig config = tiny_config(dir);
  RunLog log = quiet_log();
  const DatasetManifest manifest = cmd_synth_data(config, false, log);
  cmd_train(config, TrainTarget::score, log);

  SECTION("manifest split with a trained checkpoint") {
    EnhanceOptions opts;
    cmd_enhance(config, opts, log);
    RunPaths paths(dir);
    for (const auto& rec : manifest.records) {
      if (rec.split != Split::eval) continue;
      const AudioClip out = read_wav(paths.enhanced_wav("sbse", rec).string());
      REQUIRE(out.samples.size() ==
              static_cast<std::size_t>(manifest.clip_duration_s * 16000));
    }
  }
  SECTION("oracle-score stub recovers the clean reference end to end") {
    EnhanceOptions opts;
    opts.system = "oracle";
    opts.oracle_score = true;
    cmd_enhance(config, opts, log);
    RunPaths paths(dir);
    for (const auto& rec : manifest.records) {
      if (rec.split != Split::eval) continue;
      const AudioClip out = read_wav(paths.enhanced_wav("oracle", rec).string());
      const AudioClip ref = record_clean(rec, manifest.clip_duration_s);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < ref.samples.size(); ++i) {
        num += (out.samples[i] - ref.samples[i]) * (out.samples[i] - ref.samples[i]);
        den += ref.samples[i] * ref.samples[i];
      }
      REQUIRE(std::sqrt(num / den) < 1e-5);
    }
  }
  SECTION("single WAV input lands next to the system tree") {
    const AudioClip clip = synth_clean(0.5, 5);
    const std::string wav = dir + "/input.wav";
    write_wav(clip, wav, WavEncoding::float32);
    EnhanceOptions opts;
    opts.input_wav = wav;
    opts.system = "single";
    cmd_enhance(config, opts, log);
    const AudioClip out =
        read_wav((RunPaths(dir).enhanced_dir("single") / "input.wav").string());
    REQUIRE(out.samples.size() == clip.samples.size());
  }
  SECTION("missing checkpoint surfaces as an error") {
    RunConfig other = config;
    other.use_mask = true;  // mask checkpoint was never trained
    EnhanceOptions opts;
    REQUIRE_THROWS_AS(cmd_enhance(other, opts, log), Error);
  }
}

TEST_CASE("eval reports identity plus system rows; identity sits at the mixing SNR") {
  const std::string dir = fresh_dir("eval");
  RunConfig config = tiny_config(dir);
  config.eval_count = 16;  // 2 records per level
  RunLog log = quiet_log();
  cmd_synth_data(config, false, log);

  EnhanceOptions opts;
  opts.system = "oracle";
  opts.oracle_score = true;
  cmd_enhance(config, opts, log);

  const std::vector<EvalRow> rows = cmd_eval(config, "oracle", log);
  REQUIRE(rows.size() == 16);  // 8 levels x {identity, oracle}

  for (const auto& row : rows) {
    if (row.system == "oracle") {
      REQUIRE(row.si_sdr_mean > 60.0);  // near the cap
    } else {
      REQUIRE(row.system == "identity");
      // SI-SDR of an additive mixture tracks the mixing SNR.
      REQUIRE(row.si_sdr_mean ==
              Catch::Approx(row.snr_level_db).margin(1.0 + 2.0 * row.ci95));
    }
  }
  RunPaths paths(dir);
  REQUIRE(fs::exists(paths.reports_dir() / "eval_oracle.txt"));
  REQUIRE(fs::exists(paths.reports_dir() / "eval_oracle.tsv"));

  SECTION("missing outputs are a completeness error") {
    const DatasetManifest manifest = read_manifest(paths.manifest().string());
    fs::remove(paths.enhanced_wav("oracle", manifest.records.back()));
    REQUIRE_THROWS_AS(cmd_eval(config, "oracle", log), CompletenessError);
  }
}

TEST_CASE("two identical runs produce bit-identical float32 outputs and reports") {
  RunLog log = quiet_log();
  std::array<std::string, 2> dirs = {fresh_dir("det_a"), fresh_dir("det_b")};
  std::array<std::string, 2> reports;
  std::array<std::string, 2> wavs;
  for (int i = 0; i < 2; ++i) {
    RunConfig config = tiny_config(dirs[static_cast<std::size_t>(i)]);
    config.steps = 3;
    const DatasetManifest manifest = cmd_synth_data(config, false, log);
    cmd_train(config, TrainTarget::score, log);
    EnhanceOptions opts;
    cmd_enhance(config, opts, log);
    cmd_eval(config, "sbse", log);
    RunPaths paths(config.workdir);
    reports[static_cast<std::size_t>(i)] =
        slurp(paths.reports_dir() / "eval_sbse.tsv");
    std::string all;
    for (const auto& rec : manifest.records) {
      if (rec.split == Split::eval) {
        all += slurp(paths.enhanced_wav("sbse", rec));
      }
    }
    wavs[static_cast<std::size_t>(i)] = std::move(all);
  }
  REQUIRE(wavs[0] == wavs[1]);
  // Reports embed the config hash, which covers the workdir path; strip the
  // metadata lines before comparing numbers.
  auto strip = [](const std::string& s) {
    return s.substr(s.find("snr_db"));
  };
  REQUIRE(strip(reports[0]) == strip(reports[1]));
}

TEST_CASE("bench reports one row per NFE with monotone cost in NFE") {
  const std::string dir = fresh_dir("bench");
  RunConfig config = tiny_config(dir);
  config.bench_clip_count = 2;
  config.bench_clip_duration_s = 1.0;
  config.bench_nfe_list = "8,2,1";
  RunLog log = quiet_log();
  cmd_synth_data(config, false, log);
  cmd_train(config, TrainTarget::score, log);

  const std::vector<BenchRow> rows = cmd_bench(config, "", log);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].nfe == 8);
  REQUIRE(rows[2].nfe == 1);
  for (const auto& row : rows) {
    REQUIRE(row.rtf > 0.0);
    REQUIRE(row.seconds > 0.0);
  }
  REQUIRE(rows[0].seconds > rows[2].seconds);
  REQUIRE(fs::exists(RunPaths(dir).reports_dir() / "bench.tsv"));
}

TEST_CASE("the verification suite passes on the default configuration") {
  RunConfig config;
  config.workdir = fresh_dir("verify");
  VerifyOptions opts;
  opts.tmp_dir = config.workdir + "/tmp";
  // Trimmed Monte-Carlo sizes keep the unit suite quick; the acceptance
  // binary runs the full-size versions. 50k draws keep the 2% variance gate
  // at ~4.4 standard errors of the estimator.
  const NoiseSchedule schedule = config.schedule();
  REQUIRE(verify_posterior_moments(schedule, PosteriorFault::none, 50000).pass);
  REQUIRE(verify_ddpm_composition(schedule, 2000).pass);
  REQUIRE_FALSE(
      verify_posterior_moments(schedule, PosteriorFault::flip_weight_sign, 50000)
          .pass);
  REQUIRE(verify_schedule_identities(schedule).pass);
  REQUIRE(verify_schedule_symmetry(schedule).pass);
  REQUIRE(verify_oracle_score_roundtrip(schedule).pass);
  REQUIRE(verify_si_sdr_units().pass);
}
