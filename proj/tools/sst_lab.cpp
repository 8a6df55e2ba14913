// Copyright 2026 The sst-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Command-line front end: generate / train / eval / ablate / defaults.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sst/errors.hpp"
#include "sst/experiment.hpp"
#include "sst/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config_path, "experiment config file (key = value lines)");
  cmd->add_option("--set", c.overrides, "override a key: --set key=value")->take_all();
}

sst::ExperimentConfig build_config(const Common& c) {
  sst::ExperimentConfig cfg =
      c.config_path.empty() ? sst::default_config() : sst::load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sst::ConfigError("--set expects key=value, got '" + kv + "'");
    sst::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Semi-Siamese training desk lab", sst::kToolName};
  app.set_version_flag("--version", std::string(sst::kToolName) + " " + sst::kVersion);
  app.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts, ablate_opts;
  bool dry_run = false;
  std::string checkpoint, dataset;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset and its manifest");
  add_common(gen, gen_opts);
  auto* tr = app.add_subcommand("train", "train one variant; writes checkpoint, metrics, histogram");
  add_common(tr, train_opts);
  tr->add_flag("--dry-run", dry_run, "build data and wiring, run no steps, write nothing");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(ev, eval_opts);
  ev->add_option("--checkpoint", checkpoint, "pair manifest (same as eval.checkpoint)");
  ev->add_option("--dataset", dataset, "dataset file (same as data.path)");
  auto* ab = app.add_subcommand("ablate", "run the variant x loss x seed grid");
  add_common(ab, ablate_opts);
  auto* defs = app.add_subcommand("defaults", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*defs) {
      for (const auto& line : sst::default_config().echo()) std::cout << line << '\n';
      return 0;
    }
    if (*gen) {
      const auto out = sst::cmd_generate(build_config(gen_opts));
      std::cout << "dataset  " << out.dataset.string() << '\n'
                << "manifest " << out.manifest.string() << '\n'
                << "sha256   " << out.checksum << '\n';
      return 0;
    }
    if (*tr) {
      const auto cfg = build_config(train_opts);
      const auto out = sst::cmd_train(cfg, dry_run);
      if (dry_run) {
        std::cout << "dry run ok: variant " << sst::to_string(cfg.train.variant) << ", loss "
                  << sst::to_string(cfg.train.loss.kind) << ", seed " << cfg.train.seed << '\n';
        return 0;
      }
      std::cout << "checkpoint " << out.checkpoint.string() << '\n'
                << "metrics    " << out.metrics.string() << '\n';
      if (!out.histogram.empty()) std::cout << "histogram  " << out.histogram.string() << '\n';
      std::cout << "final_loss " << out.final_loss << "  training_rank1 " << out.training_rank1
                << '\n';
      return 0;
    }
    if (*ev) {
      auto cfg = build_config(eval_opts);
      if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
      if (!dataset.empty()) cfg.data_path = dataset;
      const auto out = sst::cmd_eval(cfg);
      std::cout << "report " << out.report.string() << '\n'
                << "tenfold " << out.metrics.tenfold_accuracy << "  rank1 " << out.metrics.rank1
                << '\n';
      return 0;
    }
    if (*ab) {
      const auto out = sst::cmd_ablate(build_config(ablate_opts));
      std::size_t failed = 0;
      for (const auto& c : out.cells) failed += c.ok ? 0 : 1;
      std::cout << "table   " << out.table.string() << '\n'
                << "summary " << out.summary.string() << '\n'
                << out.cells.size() << " cells, " << failed << " failed\n";
      return 0;
    }
  } catch (const sst::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sst::DivergenceError& e) {
    std::cerr << "training diverged at step " << e.step() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
