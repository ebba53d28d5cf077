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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbse/config.hpp"
#include "sbse/pipeline.hpp"
#include "sbse/verify.hpp"

namespace {

// Exit codes: 0 success, 1 property/runtime failure, 2 usage or config error,
// 3 I/O error.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct GlobalArgs {
  std::string config_path;
  std::string workdir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;  // section.key=value
  bool testing = false;
};

sbse::RunConfig resolve_config(const GlobalArgs& args) {
  sbse::RunConfig config;
  if (!args.config_path.empty()) config = sbse::load_config(args.config_path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw sbse::ConfigError("--set expects section.key=value, got '" + kv + "'");
    }
    sbse::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed_set) config.seed = args.seed;
  if (!args.workdir.empty()) config.workdir = args.workdir;
  config.validate();
  return config;
}

sbse::RunLog make_log(const sbse::RunConfig& config) {
  sbse::ensure_dir(config.workdir);
  return sbse::RunLog(sbse::RunPaths(config.workdir).log_file().string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sbse: Schrodinger-bridge speech enhancement on synthetic audio.\n"
      "Pipeline: synth-data -> train (mask, score, score_masked) -> enhance -> "
      "eval; verify runs the property suite, bench measures inference RTF."};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Config file (sectioned key=value)");
  app.add_option("--workdir", args.workdir, "Run directory (overrides paths.workdir)");
  auto* seed_opt = app.add_option("--seed", args.seed, "Master seed (overrides config)");
  app.add_option("--set", args.overrides,
                 "Override a config key, e.g. --set train.steps=100 (repeatable)")
      ->take_all();
  app.add_flag("--testing", args.testing,
               "Enable testing hooks (oracle score stub, fault injection)");
  bool force = false;
  app.add_flag("--force", force, "Overwrite existing run artifacts");

  auto* synth = app.add_subcommand("synth-data", "Generate the dataset + WAV tree");
  synth->add_flag("--force", force, "Overwrite an existing data tree");

  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_which = "score";
  train->add_option("--which", train_which, "score | score_masked | mask")
      ->check(CLI::IsMember({"score", "score_masked", "mask"}));
  std::string train_steps, train_batch, train_lr;
  train->add_option("--train.steps", train_steps, "Override train.steps");
  train->add_option("--train.batch_size", train_batch, "Override train.batch_size");
  train->add_option("--train.learning_rate", train_lr, "Override train.learning_rate");

  auto* enhance = app.add_subcommand("enhance", "Run the reverse-bridge enhancer");
  sbse::EnhanceOptions enhance_opts;
  enhance->add_option("--input", enhance_opts.input_wav,
                      "Single WAV input (default: the manifest eval split)");
  enhance->add_option("--system", enhance_opts.system,
                      "Output tree tag (default sbse)");
  enhance->add_option("--score-checkpoint", enhance_opts.score_checkpoint,
                      "Score checkpoint path (default by system)");
  enhance->add_option("--mask-checkpoint", enhance_opts.mask_checkpoint,
                      "Mask checkpoint path");
  bool oracle_score = false;
  enhance->add_flag("--oracle-score", oracle_score,
                    "Testing hook: use the exact score from the clean reference "
                    "(requires --testing)");
  std::string inf_steps, inf_use_mask, inf_mask_source;
  enhance->add_option("--inference.n_steps", inf_steps, "Override inference.n_steps");
  enhance->add_option("--inference.use_mask", inf_use_mask,
                      "Override inference.use_mask");
  enhance->add_option("--inference.mask_source", inf_mask_source,
                      "Override inference.mask_source");

  auto* eval = app.add_subcommand("eval", "Aggregate SI-SDR per SNR level");
  std::string eval_system = "sbse";
  eval->add_option("--system", eval_system, "System tag to evaluate");

  auto* verify = app.add_subcommand("verify", "Run the property suite");
  std::string fault_mode;
  verify->add_option("--fault", fault_mode,
                     "Inject a defect (requires --testing): posterior_sign_flip")
      ->check(CLI::IsMember({"posterior_sign_flip"}));

  auto* bench = app.add_subcommand("bench", "Measure inference real-time factor");
  std::string bench_checkpoint;
  bench->add_option("--checkpoint", bench_checkpoint,
                    "Score checkpoint (default checkpoints/score.ckpt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message / help text
    return code == 0 ? kExitOk : kExitUsage;
  }
  args.seed_set = seed_opt->count() > 0;

  try {
    // Subcommand-specific dotted options fold into the shared override list.
    if (!train_steps.empty()) args.overrides.push_back("train.steps=" + train_steps);
    if (!train_batch.empty()) {
      args.overrides.push_back("train.batch_size=" + train_batch);
    }
    if (!train_lr.empty()) {
      args.overrides.push_back("train.learning_rate=" + train_lr);
    }
    if (!inf_steps.empty()) args.overrides.push_back("inference.n_steps=" + inf_steps);
    if (!inf_use_mask.empty()) {
      args.overrides.push_back("inference.use_mask=" + inf_use_mask);
    }
    if (!inf_mask_source.empty()) {
      args.overrides.push_back("inference.mask_source=" + inf_mask_source);
    }

    const sbse::RunConfig config = resolve_config(args);

    if (synth->parsed()) {
      sbse::RunLog log = make_log(config);
      sbse::cmd_synth_data(config, force, log);
      return kExitOk;
    }
    if (train->parsed()) {
      sbse::RunLog log = make_log(config);
      sbse::cmd_train(config, sbse::train_target_from_string(train_which), log);
      return kExitOk;
    }
    if (enhance->parsed()) {
      if (oracle_score && !args.testing) {
        throw sbse::ConfigError("--oracle-score requires --testing");
      }
      enhance_opts.oracle_score = oracle_score;
      sbse::RunLog log = make_log(config);
      sbse::cmd_enhance(config, enhance_opts, log);
      return kExitOk;
    }
    if (eval->parsed()) {
      sbse::RunLog log = make_log(config);
      sbse::cmd_eval(config, eval_system, log);
      return kExitOk;
    }
    if (verify->parsed()) {
      sbse::VerifyOptions opts;
      if (!fault_mode.empty()) {
        if (!args.testing) throw sbse::ConfigError("--fault requires --testing");
        opts.fault = sbse::PosteriorFault::flip_weight_sign;
      }
      opts.tmp_dir = config.workdir + "/verify_tmp";
      sbse::ensure_dir(config.workdir);
      const std::string grid_path = config.workdir + "/schedule_grid.tsv";
      sbse::dump_schedule_grid(config.schedule(), grid_path);
      const auto results = sbse::run_verify_suite(config, opts);
      const bool ok = sbse::print_verify_results(results);
      std::cout << "schedule grid table written to " << grid_path << "\n";
      return ok ? kExitOk : kExitFailure;
    }
    if (bench->parsed()) {
      sbse::RunLog log = make_log(config);
      sbse::cmd_bench(config, bench_checkpoint, log);
      return kExitOk;
    }
  } catch (const sbse::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sbse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const sbse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
