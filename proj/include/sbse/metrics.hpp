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
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sbse/audio.hpp"
#include "sbse/corpus.hpp"
#include "sbse/error.hpp"

namespace sbse {

// Caps that keep the metric total and finite: +100 dB when the residual is
// numerically zero (estimate proportional to the reference), -100 dB when the
// projected target is zero (estimate orthogonal to the reference).
constexpr double kSiSdrCapDb = 100.0;

// Scale-invariant signal-to-distortion ratio in dB. The estimate is compared
// against the optimally rescaled reference alpha * s with
// alpha = <estimate, reference> / ||reference||^2.
inline double si_sdr(const AudioClip& reference, const AudioClip& estimate) {
  if (reference.samples.size() != estimate.samples.size()) {
    throw ShapeError("si_sdr: length mismatch (" +
                     std::to_string(reference.samples.size()) + " vs " +
                     std::to_string(estimate.samples.size()) + ")");
  }
  double ref_energy = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < reference.samples.size(); ++i) {
    ref_energy += reference.samples[i] * reference.samples[i];
    dot += estimate.samples[i] * reference.samples[i];
  }
  if (ref_energy <= 0.0) {
    throw DegenerateInputError("si_sdr: reference has zero energy");
  }
  const double alpha = dot / ref_energy;
  double target_energy = 0.0, residual_energy = 0.0;
  for (std::size_t i = 0; i < reference.samples.size(); ++i) {
    const double t = alpha * reference.samples[i];
    const double r = t - estimate.samples[i];
    target_energy += t * t;
    residual_energy += r * r;
  }
  if (target_energy <= 0.0) return -kSiSdrCapDb;
  if (residual_energy <= 0.0) return kSiSdrCapDb;
  return std::min(kSiSdrCapDb, 10.0 * std::log10(target_energy / residual_energy));
}

// Plain power ratio in dB; the definitional counterpart of mix_at_snr.
inline double snr(const AudioClip& signal, const AudioClip& noise) {
  if (signal.samples.size() != noise.samples.size()) {
    throw ShapeError("snr: length mismatch");
  }
  const double p_noise = mean_power(noise);
  if (p_noise <= 0.0) throw DegenerateInputError("snr: noise has zero power");
  return 10.0 * std::log10(mean_power(signal) / p_noise);
}

// ---------------------------------------------------------------------------
// Per-SNR-level aggregation

struct EvalRow {
  double snr_level_db = 0.0;
  std::string system;
  double si_sdr_mean = 0.0;
  double ci95 = 0.0;  // 1.96 * standard error (normal approximation)
  int count = 0;
  bool low_count = false;  // single-record level; ci reported as 0
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (snr_level_db, system)
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Aggregates SI-SDR per eval SNR level for one system. `outputs` maps record
// id -> enhanced clip; references are regenerated from the manifest.
inline EvalReport evaluate(const DatasetManifest& manifest,
                           const std::map<std::string, AudioClip>& outputs,
                           const std::string& system_tag) {
  std::string missing;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::eval) continue;
    if (outputs.find(rec.id) == outputs.end()) {
      missing += missing.empty() ? rec.id : ", " + rec.id;
    }
  }
  if (!missing.empty()) {
    throw CompletenessError("evaluate: missing outputs for: " + missing);
  }

  std::map<double, std::vector<double>> per_level;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::eval) continue;
    const AudioClip reference = record_clean(rec, manifest.clip_duration_s);
    const AudioClip& estimate = outputs.at(rec.id);
    if (estimate.samples.size() != reference.samples.size()) {
      throw ShapeError("evaluate: output length mismatch for record " + rec.id);
    }
    per_level[rec.snr_db].push_back(si_sdr(reference, estimate));
  }

  EvalReport report;
  for (const auto& [level, values] : per_level) {
    EvalRow row;
    row.snr_level_db = level;
    row.system = system_tag;
    row.count = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    row.si_sdr_mean = mean;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
      row.ci95 = 1.96 * stddev / std::sqrt(static_cast<double>(values.size()));
    } else {
      row.ci95 = 0.0;
      row.low_count = true;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline const EvalRow* find_row(const EvalReport& report, double level,
                               const std::string& system) {
  for (const auto& row : report.rows) {
    if (row.snr_level_db == level && row.system == system) return &row;
  }
  return nullptr;
}

// Human-readable aligned table. Reports for several systems can be
// concatenated row-wise before printing; a `delta vs <baseline>` column is
// added when the baseline system is present.
inline std::string format_report_table(const std::vector<EvalRow>& rows,
                                       const std::string& baseline_system = "") {
  std::map<double, double> baseline_means;
  for (const auto& row : rows) {
    if (row.system == baseline_system) baseline_means[row.snr_level_db] = row.si_sdr_mean;
  }

  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%8s  %-16s  %12s  %8s  %6s", "snr_db", "system",
                "si_sdr_mean", "ci95", "count");
  out << buf;
  if (!baseline_means.empty()) out << "  " << "delta";
  out << "\n";
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%8.1f  %-16s  %12.3f  %8.3f  %6d",
                  row.snr_level_db, row.system.c_str(), row.si_sdr_mean, row.ci95,
                  row.count);
    out << buf;
    if (!baseline_means.empty()) {
      auto it = baseline_means.find(row.snr_level_db);
      if (it != baseline_means.end() && row.system != baseline_system) {
        std::snprintf(buf, sizeof(buf), "  %+.3f", row.si_sdr_mean - it->second);
        out << buf;
      }
    }
    if (row.low_count) out << "  (low count)";
    out << "\n";
  }
  return out.str();
}

// Machine-readable TSV, one row per (level, system).
inline void write_report_tsv(const std::vector<EvalRow>& rows, const EvalReport& meta,
                             const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_report_tsv: cannot open '" + path + "'");
  out << "# config_hash=" << meta.config_hash << "\n";
  out << "# seed=" << meta.seed << "\n";
  out << "snr_db\tsystem\tsi_sdr_mean\tci95\tcount\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g\t%s\t%.17g\t%.17g\t%d\n", row.snr_level_db,
                  row.system.c_str(), row.si_sdr_mean, row.ci95, row.count);
    out << buf;
  }
  if (!out) throw IoError("write_report_tsv: short write to '" + path + "'");
}

}  // namespace sbse
