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

#include "sbse/metrics.hpp"

#include <cmath>
#include <map>

#include "catch2/catch_amalgamated.hpp"

using namespace sbse;

TEST_CASE("si_sdr hand-derived case: s=[1,0], est=[1,1] is exactly 0 dB") {
  AudioClip s, e;
  s.samples = {1.0, 0.0};
  e.samples = {1.0, 1.0};
  REQUIRE(si_sdr(s, e) == 0.0);
}

TEST_CASE("si_sdr caps at +100 dB exactly when the estimate is proportional") {
  Rng rng(1);
  AudioClip s;
  s.samples.resize(100);
  for (double& v : s.samples) v = rng.gaussian();
  REQUIRE(si_sdr(s, s) == kSiSdrCapDb);

  AudioClip scaled = s;
  for (double& v : scaled.samples) v *= -3.7;
  REQUIRE(si_sdr(s, scaled) == kSiSdrCapDb);

  AudioClip noisy = s;
  noisy.samples[0] += 1e-3;
  REQUIRE(si_sdr(s, noisy) < kSiSdrCapDb);
}

TEST_CASE("si_sdr is invariant to nonzero rescaling of the estimate") {
  Rng rng(2);
  AudioClip s, e;
  s.samples.resize(500);
  e.samples.resize(500);
  for (std::size_t i = 0; i < 500; ++i) {
    s.samples[i] = rng.gaussian();
    e.samples[i] = s.samples[i] + 0.3 * rng.gaussian();
  }
  const double base = si_sdr(s, e);
  for (double c : {2.0, 0.001, -1.0, -42.0}) {
    AudioClip scaled = e;
    for (double& v : scaled.samples) v *= c;
    REQUIRE(std::abs(si_sdr(s, scaled) - base) < 1e-9);
  }
}

TEST_CASE("si_sdr guards") {
  AudioClip s, e, zero;
  s.samples = {1.0, 2.0};
  e.samples = {1.0};
  zero.samples = {0.0, 0.0};
  REQUIRE_THROWS_AS(si_sdr(s, e), ShapeError);
  REQUIRE_THROWS_AS(si_sdr(zero, zero), DegenerateInputError);

  // Orthogonal estimate: the projected target vanishes; floored, not infinite.
  AudioClip orth;
  orth.samples = {0.0, 1.0};
  AudioClip ref;
  ref.samples = {1.0, 0.0};
  REQUIRE(si_sdr(ref, orth) == -kSiSdrCapDb);
}

TEST_CASE("snr decades and the degenerate guard") {
  AudioClip s, n;
  s.samples = {10.0, -10.0};
  n.samples = {1.0, -1.0};
  REQUIRE(snr(s, n) == Catch::Approx(20.0).epsilon(1e-12));
  REQUIRE(snr(n, n) == Catch::Approx(0.0).margin(1e-12));

  AudioClip zero;
  zero.samples = {0.0, 0.0};
  REQUIRE_THROWS_AS(snr(s, zero), DegenerateInputError);
}

namespace {

DatasetManifest eval_manifest(int per_level) {
  DatasetConfig config;
  config.train_count = 0;
  config.eval_count = per_level * 8;
  config.clip_duration_s = 0.5;
  config.seed = 99;
  return make_dataset(config);
}

}  // namespace

TEST_CASE("evaluate: perfect outputs hit the cap with zero-width intervals") {
  const DatasetManifest manifest = eval_manifest(2);
  std::map<std::string, AudioClip> outputs;
  for (const auto& rec : manifest.records) {
    outputs[rec.id] = record_clean(rec, manifest.clip_duration_s);
  }
  const EvalReport report = evaluate(manifest, outputs, "perfect");
  REQUIRE(report.rows.size() == 8);
  for (const auto& row : report.rows) {
    REQUIRE(row.si_sdr_mean == kSiSdrCapDb);
    REQUIRE(row.ci95 == 0.0);
    REQUIRE(row.count == 2);
    REQUIRE_FALSE(row.low_count);
  }
}

TEST_CASE("evaluate: single record per level is flagged low-count with ci 0") {
  const DatasetManifest manifest = eval_manifest(1);
  std::map<std::string, AudioClip> outputs;
  for (const auto& rec : manifest.records) {
    outputs[rec.id] = record_mixture(rec, manifest.clip_duration_s).noisy;
  }
  const EvalReport report = evaluate(manifest, outputs, "identity");
  for (const auto& row : report.rows) {
    REQUIRE(row.count == 1);
    REQUIRE(row.ci95 == 0.0);
    REQUIRE(row.low_count);
  }
}

TEST_CASE("evaluate matches an independent per-clip recomputation") {
  const DatasetManifest manifest = eval_manifest(3);
  std::map<std::string, AudioClip> outputs;
  Rng rng(7);
  for (const auto& rec : manifest.records) {
    AudioClip out = record_mixture(rec, manifest.clip_duration_s).noisy;
    for (double& v : out.samples) v += 0.01 * rng.gaussian();
    outputs[rec.id] = std::move(out);
  }
  const EvalReport report = evaluate(manifest, outputs, "probe");

  // Brute-force re-aggregation.
  std::map<double, std::vector<double>> by_level;
  for (const auto& rec : manifest.records) {
    const AudioClip ref = record_clean(rec, manifest.clip_duration_s);
    by_level[rec.snr_db].push_back(si_sdr(ref, outputs.at(rec.id)));
  }
  for (const auto& row : report.rows) {
    const auto& values = by_level.at(row.snr_level_db);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    REQUIRE(row.si_sdr_mean == Catch::Approx(mean).epsilon(1e-12));
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double ci =
        1.96 * std::sqrt(ss / (values.size() - 1)) / std::sqrt(double(values.size()));
    REQUIRE(row.ci95 == Catch::Approx(ci).epsilon(1e-12));
  }
}

TEST_CASE("evaluate lists missing outputs and rejects length mismatches") {
  const DatasetManifest manifest = eval_manifest(1);
  std::map<std::string, AudioClip> outputs;
  for (const auto& rec : manifest.records) {
    outputs[rec.id] = record_clean(rec, manifest.clip_duration_s);
  }
  outputs.erase(manifest.records.front().id);
  REQUIRE_THROWS_WITH(
      evaluate(manifest, outputs, "x"),
      Catch::Matchers::ContainsSubstring(manifest.records.front().id));

  outputs[manifest.records.front().id] = AudioClip{{0.1, 0.2}, 16000};
  REQUIRE_THROWS_AS(evaluate(manifest, outputs, "x"), ShapeError);
}

TEST_CASE("report formatting carries the delta column against the baseline") {
  std::vector<EvalRow> rows;
  EvalRow a;
  a.snr_level_db = 0.0;
  a.system = "identity";
  a.si_sdr_mean = 1.0;
  a.count = 4;
  EvalRow b = a;
  b.system = "sbse";
  b.si_sdr_mean = 4.5;
  rows = {a, b};
  const std::string table = format_report_table(rows, "identity");
  REQUIRE(table.find("+3.500") != std::string::npos);
}
