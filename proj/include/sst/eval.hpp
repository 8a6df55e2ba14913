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
#include <span>
#include <string>
#include <vector>

#include "sst/data_synth.hpp"
#include "sst/encoder.hpp"
#include "sst/losses.hpp"

namespace sst {

// Cosine scores of genuine (same id) and impostor (different id) pairs.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct FarPoint {
  double far = 0.0;        // requested level
  double tpr = 0.0;
  double threshold = 0.0;  // accept iff score >= threshold
  double achieved_far = 0.0;
  bool low_confidence = false;  // fewer than 1/far impostors
};

// For each level: threshold = smallest impostor score t with
// #{impostor >= t} <= far * n_impostor (or just above the largest impostor when
// none may pass); tpr = fraction of genuine scores >= t.
std::vector<FarPoint> tpr_at_far(const ScoreSet& scores,
                                 std::span<const double> far_levels);

struct FoldedScore {
  double score;
  bool genuine;
  int fold;
};

// Per fold, the threshold maximizing accuracy on the other folds (smallest
// such threshold on ties; candidates are training scores plus +inf) is applied
// to the held-out fold. Returns the mean over non-empty folds.
double tenfold_accuracy(std::span<const FoldedScore> scores);

// Fraction of probes whose highest-cosine gallery row shares their id. Ties go
// to the lowest gallery index.
double rank1_identification(const Tensor& gallery_feats,
                            std::span<const std::int64_t> gallery_ids,
                            const Tensor& probe_feats,
                            std::span<const std::int64_t> probe_ids);

// Nearest-prototype accuracy of features against (normalized) prototype rows.
double prototype_rank1(const Tensor& feats, std::span<const std::size_t> labels,
                       const PrototypeMatrix& prototypes);

struct FeatureSet {
  Tensor features;  // unit rows
  std::vector<std::int64_t> ids;
  std::vector<Role> roles;
  std::vector<std::size_t> records;
};

// Embeds the given records with the probe-set encoder, without a graph.
FeatureSet extract_features(const Encoder& probe_net, const ShallowDataset& ds,
                            std::span<const std::size_t> records);

struct PairIndex {
  std::size_t gallery_row;
  std::size_t probe_row;
};

struct PairSet {
  std::vector<PairIndex> genuine;
  std::vector<PairIndex> impostor;
};

// Genuine: every gallery-probe pair within an id. Impostor: seeded sample of
// cross-id gallery-probe pairs, at most max_impostors, in random order.
PairSet build_pairs(const FeatureSet& set, std::size_t max_impostors,
                    std::uint64_t seed);
ScoreSet score_pairs(const FeatureSet& set, const PairSet& pairs);

// All genuine pairs plus as many impostors, shuffled and dealt round-robin
// into 10 folds.
std::vector<FoldedScore> fold_scores(const ScoreSet& scores, std::uint64_t seed);

struct EvalSettings {
  std::vector<double> far_levels = {1e-1, 1e-2, 1e-3};
  std::size_t max_impostors = 20000;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<FarPoint> roc;
  double tenfold_accuracy = 0.0;
  double rank1 = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  std::size_t n_test_ids = 0;
  std::uint64_t seed = 0;

  double tpr_at(double far) const;
};

// Open-set evaluation on the test split with the probe-set encoder.
EvalReport evaluate(const Encoder& probe_net, const ShallowDataset& ds,
                    const EvalSettings& settings);

}  // namespace sst
