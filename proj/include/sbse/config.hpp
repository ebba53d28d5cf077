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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sbse/corpus.hpp"
#include "sbse/error.hpp"
#include "sbse/model.hpp"
#include "sbse/schedule.hpp"
#include "sbse/spectral.hpp"

namespace sbse {

// Run configuration. File grammar (see README for the full description):
//
//   # comment
//   [section]
//   key = value
//
// Every key has a default; unknown sections or keys are config errors so that
// typos cannot silently fall back to defaults. The fully-resolved config is
// written into the run directory before any work starts, and that snapshot
// re-parses to an identical configuration.
struct RunConfig {
  std::uint64_t seed = 42;

  // [corpus]
  int train_count = 200;
  int eval_count = 80;
  double clip_duration_s = 2.0;

  // [spectral]
  std::size_t window_len = 512;
  std::size_t hop = 128;
  double compress_exponent = 0.5;
  double compress_scale = 0.15;

  // [schedule]
  double beta_min = 1e-4;
  double beta_max = 0.3;
  std::size_t n_grid = 1000;
  double t_min = 0.0;  // 0 = auto: 1 / (n_grid + 1), mirror-aligned grid

  // [train]
  double learning_rate = 1e-4;
  int batch_size = 4;
  int steps = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t crop_frames = 256;
  int threads = 0;  // 0 = hardware concurrency
  std::size_t hidden_channels = 16;
  std::size_t emb_dim = 6;
  bool condition_on_noisy = true;
  int checkpoint_every = 100;  // steps between resumable snapshots

  // [inference]
  int n_steps = 5;
  bool use_mask = false;
  std::string mask_source = "predicted";   // predicted | oracle
  std::string grid_spacing = "uniform_t";  // uniform_t | uniform_sigma2

  // [bench]
  int bench_clip_count = 10;
  double bench_clip_duration_s = 10.0;
  std::string bench_nfe_list = "50,5,1";

  // [paths]
  std::string workdir = "run";

  double resolved_t_min() const { return t_min > 0.0 ? t_min : default_t_min(n_grid); }

  DatasetConfig dataset_config() const {
    DatasetConfig c;
    c.train_count = train_count;
    c.eval_count = eval_count;
    c.clip_duration_s = clip_duration_s;
    c.seed = derive_seed(seed, "dataset");
    return c;
  }

  SpectralParams spectral_params() const {
    SpectralParams p;
    p.window_len = window_len;
    p.hop = hop;
    p.fft_size = window_len;
    p.compress_exponent = compress_exponent;
    p.compress_scale = compress_scale;
    return p;
  }

  NoiseSchedule schedule() const {
    return build_symmetric(beta_min, beta_max, n_grid, resolved_t_min());
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.learning_rate = learning_rate;
    c.batch_size = batch_size;
    c.steps = steps;
    c.seed = derive_seed(seed, "train");
    c.adam_beta1 = adam_beta1;
    c.adam_beta2 = adam_beta2;
    c.adam_eps = adam_eps;
    c.crop_frames = crop_frames;
    c.threads = threads;
    return c;
  }

  ScoreNetArch score_arch() const {
    ScoreNetArch a;
    a.hidden = hidden_channels;
    a.emb_dim = emb_dim;
    a.condition_on_noisy = condition_on_noisy;
    return a;
  }

  MaskNetArch mask_arch() const {
    MaskNetArch a;
    a.hidden = hidden_channels;
    return a;
  }

  std::vector<int> bench_nfe_values() const {
    std::vector<int> out;
    std::stringstream ss(bench_nfe_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(std::stoi(item));
    }
    if (out.empty()) throw ConfigError("bench.nfe_list is empty");
    return out;
  }

  void validate() const {
    spectral_params().validate();
    train_config().validate();
    if (n_steps < 1) throw ConfigError("inference.n_steps must be >= 1");
    if (mask_source != "predicted" && mask_source != "oracle") {
      throw ConfigError("inference.mask_source must be 'predicted' or 'oracle'");
    }
    (void)grid_spacing_from_string(grid_spacing);
    if (t_min < 0.0 || t_min >= 0.5) {
      throw ConfigError("schedule.t_min must be 0 (auto) or in (0, 0.5)");
    }
    (void)bench_nfe_values();
  }
};

namespace config_detail {

struct Field {
  std::string section, key;
  enum class Type { u64, i32, size, f64, boolean, string } type;
  void* ptr;
};

inline std::vector<Field> fields(RunConfig& c) {
  using T = Field::Type;
  return {
      {"run", "seed", T::u64, &c.seed},
      {"corpus", "train_count", T::i32, &c.train_count},
      {"corpus", "eval_count", T::i32, &c.eval_count},
      {"corpus", "clip_duration_s", T::f64, &c.clip_duration_s},
      {"spectral", "window_len", T::size, &c.window_len},
      {"spectral", "hop", T::size, &c.hop},
      {"spectral", "compress_exponent", T::f64, &c.compress_exponent},
      {"spectral", "compress_scale", T::f64, &c.compress_scale},
      {"schedule", "beta_min", T::f64, &c.beta_min},
      {"schedule", "beta_max", T::f64, &c.beta_max},
      {"schedule", "n_grid", T::size, &c.n_grid},
      {"schedule", "t_min", T::f64, &c.t_min},
      {"train", "learning_rate", T::f64, &c.learning_rate},
      {"train", "batch_size", T::i32, &c.batch_size},
      {"train", "steps", T::i32, &c.steps},
      {"train", "adam_beta1", T::f64, &c.adam_beta1},
      {"train", "adam_beta2", T::f64, &c.adam_beta2},
      {"train", "adam_eps", T::f64, &c.adam_eps},
      {"train", "crop_frames", T::size, &c.crop_frames},
      {"train", "threads", T::i32, &c.threads},
      {"train", "hidden_channels", T::size, &c.hidden_channels},
      {"train", "emb_dim", T::size, &c.emb_dim},
      {"train", "condition_on_noisy", T::boolean, &c.condition_on_noisy},
      {"train", "checkpoint_every", T::i32, &c.checkpoint_every},
      {"inference", "n_steps", T::i32, &c.n_steps},
      {"inference", "use_mask", T::boolean, &c.use_mask},
      {"inference", "mask_source", T::string, &c.mask_source},
      {"inference", "grid_spacing", T::string, &c.grid_spacing},
      {"bench", "clip_count", T::i32, &c.bench_clip_count},
      {"bench", "clip_duration_s", T::f64, &c.bench_clip_duration_s},
      {"bench", "nfe_list", T::string, &c.bench_nfe_list},
      {"paths", "workdir", T::string, &c.workdir},
  };
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline void assign(const Field& f, const std::string& value) {
  const std::string where = f.section + "." + f.key;
  try {
    switch (f.type) {
      case Field::Type::u64:
        *static_cast<std::uint64_t*>(f.ptr) = std::stoull(value);
        break;
      case Field::Type::i32:
        *static_cast<int*>(f.ptr) = std::stoi(value);
        break;
      case Field::Type::size: {
        const long long v = std::stoll(value);
        if (v < 0) throw ConfigError(where + " must be non-negative");
        *static_cast<std::size_t*>(f.ptr) = static_cast<std::size_t>(v);
        break;
      }
      case Field::Type::f64:
        *static_cast<double*>(f.ptr) = std::stod(value);
        break;
      case Field::Type::boolean:
        if (value == "true" || value == "1") {
          *static_cast<bool*>(f.ptr) = true;
        } else if (value == "false" || value == "0") {
          *static_cast<bool*>(f.ptr) = false;
        } else {
          throw ConfigError(where + ": expected true/false, got '" + value + "'");
        }
        break;
      case Field::Type::string:
        *static_cast<std::string*>(f.ptr) = value;
        break;
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError(where + ": cannot parse value '" + value + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError(where + ": value out of range '" + value + "'");
  }
}

inline std::string render(const Field& f) {
  switch (f.type) {
    case Field::Type::u64:
      return std::to_string(*static_cast<const std::uint64_t*>(f.ptr));
    case Field::Type::i32:
      return std::to_string(*static_cast<const int*>(f.ptr));
    case Field::Type::size:
      return std::to_string(*static_cast<const std::size_t*>(f.ptr));
    case Field::Type::f64:
      return format_double(*static_cast<const double*>(f.ptr));
    case Field::Type::boolean:
      return *static_cast<const bool*>(f.ptr) ? "true" : "false";
    case Field::Type::string:
      return *static_cast<const std::string*>(f.ptr);
  }
  return "";
}

}  // namespace config_detail

// Applies one "section.key=value" assignment (CLI override path).
inline void apply_override(RunConfig& config, const std::string& dotted_key,
                           const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override '" + dotted_key + "' is not of the form section.key");
  }
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  for (const auto& f : config_detail::fields(config)) {
    if (f.section == section && f.key == key) {
      config_detail::assign(f, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + dotted_key + "'");
}

inline RunConfig parse_config_text(std::istream& in, const std::string& origin) {
  RunConfig config;
  auto fields = config_detail::fields(config);

  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": malformed section header '" + t + "'");
      }
      section = config_detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key = value, got '" + t + "'");
    }
    const std::string key = config_detail::trim(t.substr(0, eq));
    const std::string value = config_detail::trim(t.substr(eq + 1));
    bool found = false;
    for (const auto& f : fields) {
      if (f.section == section && f.key == key) {
        config_detail::assign(f, value);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" +
                        section + "." + key + "'");
    }
  }
  return config;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open '" + path + "'");
  return parse_config_text(in, path);
}

// Canonical serialization: fixed section/key order, 17-significant-digit
// floats. Used for both the run-directory snapshot and the config hash.
inline std::string serialize_config(const RunConfig& config) {
  auto& c = const_cast<RunConfig&>(config);
  std::ostringstream out;
  std::string current;
  for (const auto& f : config_detail::fields(c)) {
    if (f.section != current) {
      if (!current.empty()) out << "\n";
      out << "[" << f.section << "]\n";
      current = f.section;
    }
    out << f.key << " = " << config_detail::render(f) << "\n";
  }
  return out.str();
}

inline void write_config_snapshot(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_config_snapshot: cannot open '" + path + "'");
  out << "# resolved run configuration (written before any work starts)\n";
  out << "# schedule t_min resolves to " << format_double(config.resolved_t_min())
      << " when set to 0 (auto)\n";
  out << serialize_config(config);
  if (!out) throw IoError("write_config_snapshot: short write to '" + path + "'");
}

// FNV-1a over the canonical serialization, rendered as hex.
inline std::string config_hash(const RunConfig& config) {
  const std::string text = serialize_config(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sbse
