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

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sbse/error.hpp"
#include "sbse/rng.hpp"
#include "sbse/synth.hpp"

namespace sbse {

enum class Split { train, eval };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "eval"; }

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "eval") return Split::eval;
  throw ConfigError("unknown split '" + s + "'");
}

// Evaluation SNR levels, -5 dB to 30 dB in 5 dB steps.
inline constexpr std::array<double, 8> kEvalSnrLevelsDb = {-5.0, 0.0,  5.0,  10.0,
                                                           15.0, 20.0, 25.0, 30.0};

// Training SNR range (uniform draw per record).
inline constexpr double kTrainSnrMinDb = -5.0;
inline constexpr double kTrainSnrMaxDb = 20.0;

struct MixtureRecord {
  std::string id;
  std::string clean_id;
  std::string noise_id;
  NoiseKind noise_kind = NoiseKind::white;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  Split split = Split::train;
};

struct DatasetConfig {
  int train_count = 200;
  int eval_count = 80;  // must be divisible by the 8 eval SNR levels
  double clip_duration_s = 2.0;
  std::uint64_t seed = 42;
};

struct DatasetManifest {
  std::vector<MixtureRecord> records;
  double clip_duration_s = 2.0;
  std::uint64_t master_seed = 0;

  int count(Split s) const {
    int n = 0;
    for (const auto& r : records) n += (r.split == s) ? 1 : 0;
    return n;
  }
};

// Materialization of a record's signals. Each record owns one seed; the clean,
// noise and mixing sub-streams are derived from it by name, so regeneration is
// a pure function of the manifest line.
inline AudioClip record_clean(const MixtureRecord& rec, double duration_s) {
  return synth_clean(duration_s, derive_seed(rec.seed, "clean"));
}

inline AudioClip record_noise(const MixtureRecord& rec, double duration_s) {
  return synth_noise(duration_s, rec.noise_kind, derive_seed(rec.seed, "noise"));
}

struct MixturePair {
  AudioClip clean;
  AudioClip noisy;
  AudioClip scaled_noise;
};

inline MixturePair record_mixture(const MixtureRecord& rec, double duration_s) {
  MixturePair out;
  out.clean = record_clean(rec, duration_s);
  AudioClip noise = record_noise(rec, duration_s);
  auto [noisy, scaled] = mix_at_snr(out.clean, noise, rec.snr_db);
  out.noisy = std::move(noisy);
  out.scaled_noise = std::move(scaled);
  return out;
}

// Builds the record list. Train records draw snr_db uniformly from [-5, 20];
// eval records enumerate the 8 levels with equal counts. Record seeds are
// consecutive outputs of a per-split derived stream, hence unique.
inline DatasetManifest make_dataset(const DatasetConfig& config) {
  if (config.train_count <= 0 && config.eval_count <= 0) {
    throw ConfigError("make_dataset: both train_count and eval_count are zero");
  }
  if (config.train_count < 0 || config.eval_count < 0) {
    throw ConfigError("make_dataset: negative record count");
  }
  const int levels = static_cast<int>(kEvalSnrLevelsDb.size());
  if (config.eval_count % levels != 0) {
    throw ConfigError("make_dataset: eval_count " + std::to_string(config.eval_count) +
                      " is not divisible by the " + std::to_string(levels) +
                      " eval SNR levels");
  }
  if (!(config.clip_duration_s > 0.0)) {
    throw ConfigError("make_dataset: clip_duration_s must be positive");
  }

  DatasetManifest manifest;
  manifest.clip_duration_s = config.clip_duration_s;
  manifest.master_seed = config.seed;
  manifest.records.reserve(static_cast<std::size_t>(config.train_count) +
                           static_cast<std::size_t>(config.eval_count));

  char buf[64];
  for (int i = 0; i < config.train_count; ++i) {
    MixtureRecord rec;
    std::snprintf(buf, sizeof(buf), "train-%05d", i);
    rec.id = buf;
    rec.clean_id = "clean-" + rec.id;
    rec.noise_id = "noise-" + rec.id;
    rec.seed = derive_seed(config.seed, "record-train", static_cast<std::uint64_t>(i));
    rec.split = Split::train;
    Rng rng(derive_seed(rec.seed, "mix"));
    rec.snr_db = rng.uniform(kTrainSnrMinDb, kTrainSnrMaxDb);
    rec.noise_kind = rng.below(2) == 0 ? NoiseKind::white : NoiseKind::pink;
    manifest.records.push_back(std::move(rec));
  }

  const int per_level = config.eval_count / levels;
  int eval_index = 0;
  for (int level = 0; level < levels; ++level) {
    for (int i = 0; i < per_level; ++i, ++eval_index) {
      MixtureRecord rec;
      std::snprintf(buf, sizeof(buf), "eval-%05d", eval_index);
      rec.id = buf;
      rec.clean_id = "clean-" + rec.id;
      rec.noise_id = "noise-" + rec.id;
      rec.seed =
          derive_seed(config.seed, "record-eval", static_cast<std::uint64_t>(eval_index));
      rec.split = Split::eval;
      rec.snr_db = kEvalSnrLevelsDb[static_cast<std::size_t>(level)];
      Rng rng(derive_seed(rec.seed, "mix"));
      rec.noise_kind = rng.below(2) == 0 ? NoiseKind::white : NoiseKind::pink;
      manifest.records.push_back(std::move(rec));
    }
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Manifest persistence: line-delimited text, one record per line, fixed field
// order, 17-significant-digit floats. Byte-identical for identical inputs.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_manifest: cannot open '" + path + "'");
  out << "# sbse dataset manifest v1\n";
  out << "# clip_duration_s=" << format_double(manifest.clip_duration_s) << "\n";
  out << "# master_seed=" << manifest.master_seed << "\n";
  out << "id\tclean_id\tnoise_id\tnoise_kind\tsnr_db\tseed\tsplit\n";
  for (const auto& r : manifest.records) {
    out << r.id << '\t' << r.clean_id << '\t' << r.noise_id << '\t'
        << to_string(r.noise_kind) << '\t' << format_double(r.snr_db) << '\t' << r.seed
        << '\t' << to_string(r.split) << '\n';
  }
  if (!out) throw IoError("write_manifest: short write to '" + path + "'");
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_manifest: cannot open '" + path + "'");

  DatasetManifest manifest;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eat = [&](const char* key) -> const char* {
        const std::string prefix = std::string("# ") + key + "=";
        return line.rfind(prefix, 0) == 0 ? line.c_str() + prefix.size() : nullptr;
      };
      if (const char* v = eat("clip_duration_s")) manifest.clip_duration_s = std::strtod(v, nullptr);
      if (const char* v = eat("master_seed"))
        manifest.master_seed = std::strtoull(v, nullptr, 10);
      continue;
    }
    if (!header_seen) {  // column header line
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    MixtureRecord rec;
    std::string kind, snr, seed, split;
    if (!(std::getline(ss, rec.id, '\t') && std::getline(ss, rec.clean_id, '\t') &&
          std::getline(ss, rec.noise_id, '\t') && std::getline(ss, kind, '\t') &&
          std::getline(ss, snr, '\t') && std::getline(ss, seed, '\t') &&
          std::getline(ss, split, '\t'))) {
      throw FormatError("read_manifest: malformed record line: " + line);
    }
    rec.noise_kind = noise_kind_from_string(kind);
    rec.snr_db = std::strtod(snr.c_str(), nullptr);
    rec.seed = std::strtoull(seed.c_str(), nullptr, 10);
    rec.split = split_from_string(split);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

}  // namespace sbse
