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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sst/data_synth.hpp"
#include "sst/eval.hpp"
#include "sst/trainer.hpp"

namespace sst {

// Everything one experiment needs, flattened into `key = value` lines.
struct ExperimentConfig {
  GenSpec data;
  std::string data_path;  // load this dataset instead of generating one
  TrainConfig train;
  EvalSettings eval;
  std::string checkpoint;  // pair manifest for the eval command

  std::vector<Variant> ablate_variants = all_variants();
  std::vector<LossKind> ablate_losses = {LossKind::kSoftmax, LossKind::kAmSoftmax};
  std::vector<std::uint64_t> ablate_seeds = {0, 1, 2, 3, 4};
  std::size_t ablate_threads = 1;

  std::size_t oscillation_window = 50;
  std::size_t histogram_bins = 50;

  std::string output_dir;

  void validate() const;
  // "key = value" for every key, in a fixed order.
  std::vector<std::string> echo() const;
};

// Desk defaults used when a key is absent.
ExperimentConfig default_config();

// Every accepted key in echo order.
const std::vector<std::string>& config_keys();

// Applies one "key=value" override. Unknown keys and bad values throw
// ConfigError naming the key.
void set_config_value(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value);

// Parses `key = value` lines with `#` comments on top of the defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Throws ConfigError naming the key when output_dir is unset.
void require_output_dir(const ExperimentConfig& cfg);

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Dataset named by data.path, or generated from data.*.
ShallowDataset obtain_dataset(const ExperimentConfig& cfg);

// Train config bound to a dataset: input width from the data, encoder seed
// from train.seed.
TrainConfig resolve_train(const ExperimentConfig& cfg, const ShallowDataset& ds);

struct GenerateOutcome {
  std::filesystem::path dataset;
  std::filesystem::path manifest;
  std::string checksum;
};
GenerateOutcome cmd_generate(const ExperimentConfig& cfg);

struct TrainOutcome {
  std::filesystem::path checkpoint;  // pair manifest
  std::filesystem::path metrics;
  std::filesystem::path histogram;   // empty when the run has no prototypes
  std::filesystem::path summary;
  double final_loss = 0.0;
  double training_rank1 = 0.0;
  long steps = 0;
};
// dry_run builds the dataset and the variant wiring, runs no steps and
// writes nothing.
TrainOutcome cmd_train(const ExperimentConfig& cfg, bool dry_run = false);

struct EvalOutcome {
  std::filesystem::path report;
  EvalReport metrics;
};
EvalOutcome cmd_eval(const ExperimentConfig& cfg);

struct CellResult {
  Variant variant = Variant::kOrg;
  LossKind loss = LossKind::kSoftmax;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> tpr;  // aligned with eval.far_levels
  double tenfold = 0.0;
  double rank1 = 0.0;
  double train_rank1 = 0.0;
  std::optional<double> zero_fraction;
  double oscillation = 0.0;
  double final_loss = 0.0;
};

// One grid cell: data.seed and train.seed are offset by `seed`.
CellResult run_cell(const ExperimentConfig& cfg, Variant v, LossKind loss,
                    std::uint64_t seed);

// All cells, sorted by (variant, loss, seed). Failures are recorded, not thrown.
std::vector<CellResult> run_grid(const ExperimentConfig& cfg);

struct SummaryRow {
  Variant variant = Variant::kOrg;
  LossKind loss = LossKind::kSoftmax;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::vector<double> tpr;
  double tenfold = 0.0;
  double rank1 = 0.0;
  double train_rank1 = 0.0;
  std::optional<double> zero_fraction;
  double oscillation = 0.0;
};
std::vector<SummaryRow> summarize(const ExperimentConfig& cfg,
                                  const std::vector<CellResult>& cells);

struct AblateOutcome {
  std::filesystem::path table;
  std::filesystem::path summary;
  std::vector<CellResult> cells;
  std::vector<SummaryRow> rows;
};
AblateOutcome cmd_ablate(const ExperimentConfig& cfg);

}  // namespace sst
