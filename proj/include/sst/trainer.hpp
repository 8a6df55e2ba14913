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
#include <span>
#include <string>
#include <vector>

#include "sst/data_synth.hpp"
#include "sst/encoder.hpp"
#include "sst/gallery_queue.hpp"
#include "sst/losses.hpp"
#include "sst/semi_siamese.hpp"

namespace sst {

// Ablation arms:
//   Org  plain training, learned prototypes, one shared network
//   A    Org + prototype constraint
//   B    learned prototypes + network-constraint pair
//   C    gallery queue + fully-Siamese pair
//   D    gallery queue + network-constraint pair
//   SST  gallery queue + moving-average pair
enum class Variant { kOrg, kA, kB, kC, kD, kSst };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();
bool uses_queue(Variant v);

struct LrSchedule {
  double initial = 0.05;
  std::vector<long> milestones = {1800, 2700};
  double factor = 0.1;

  // initial * factor^(number of milestones <= step)
  double at(long step) const;
};

struct TrainConfig {
  Variant variant = Variant::kSst;
  LossConfig loss = LossConfig::defaults_for(LossKind::kSoftmax);
  EncoderConfig encoder;
  std::size_t batch_size = 64;
  LrSchedule lr;
  long total_steps = 3000;
  SgdHyper sgd;
  std::size_t queue_size = 512;
  double ma_momentum = 0.999;
  double nc_lambda = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  UpdateMode update_mode() const;
  // Loss config with the variant's additions (A turns on the constraint).
  LossConfig effective_loss() const;
};

struct StepRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double param_distance = 0.0;
  std::size_t queue_filled = 0;
  std::size_t enqueued = 0;
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  // Wiring counters: how often learned-prototype logits were formed, and how
  // many gallery rows were pushed into the queue.
  std::size_t fc_logit_evaluations = 0;
  std::size_t queue_enqueued = 0;

  std::vector<double> losses() const;
  bool operator==(const MetricsLog& o) const;
};

struct TrainResult {
  SiamesePair pair;
  std::optional<PrototypeMatrix> prototypes;
  std::optional<GalleryQueue> queue;
  MetricsLog log;

  const Encoder& probe_net() const { return pair.probe_net(); }
};

// Runs cfg.total_steps iterations of sample -> encode -> loss -> backward ->
// update (-> enqueue). Throws DivergenceError carrying the step on NaN.
TrainResult train(const TrainConfig& cfg, const ShallowDataset& ds);

// Mean over every length-`window` slice of the slice's population std-dev.
double oscillation_metric(std::span<const double> history, std::size_t window);

struct Histogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> density;  // integrates to the in-range share
  double zero_fraction = 0.0;   // share of entries with |v| < zero_cutoff
  std::size_t count = 0;
};

inline constexpr double kZeroCutoff = 1e-2;

Histogram prototype_histogram(std::span<const double> entries, std::size_t bins,
                              double lo, double hi);
// Raw entries of the learned prototype rows (the parameters themselves).
Histogram prototype_histogram(const PrototypeMatrix& w, std::size_t bins,
                              double lo, double hi);
// Entries of the stored queue features.
Histogram prototype_histogram(const GalleryQueue& q, std::size_t bins,
                              double lo, double hi);

// Histogram of whatever serves as prototypes for the trained variant.
Histogram final_prototype_histogram(const TrainResult& r, std::size_t bins = 50);

// Nearest-prototype accuracy on the train split: learned rows for prototype
// variants, train gallery features for queue variants.
double training_rank1(const TrainResult& r, const ShallowDataset& ds);

// JSON-lines: one "meta" record with the config echo, then one per step.
void write_metrics_jsonl(const MetricsLog& log, const std::vector<std::string>& echo,
                         const std::filesystem::path& path);
void write_histogram_csv(const Histogram& h, const std::vector<std::string>& echo,
                         const std::filesystem::path& path);

}  // namespace sst
