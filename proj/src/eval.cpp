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

#include "sst/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "sst/errors.hpp"

namespace sst {

std::vector<FarPoint> tpr_at_far(const ScoreSet& scores,
                                 std::span<const double> far_levels) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw ContractError("tpr_at_far needs non-empty genuine and impostor scores");
  }
  std::vector<double> imp = scores.impostor;
  std::sort(imp.begin(), imp.end(), std::greater<>());
  const double n_imp = static_cast<double>(imp.size());
  const double n_gen = static_cast<double>(scores.genuine.size());
  std::vector<FarPoint> out;
  for (double far : far_levels) {
    if (!(far > 0.0 && far <= 1.0)) throw ContractError("FAR levels must lie in (0, 1]");
    const auto allowed = static_cast<std::size_t>(std::floor(far * n_imp + 1e-9));
    // Walk distinct impostor values from the top; count(imp >= v) only grows.
    double threshold = std::nextafter(imp.front(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < imp.size();) {
      const double v = imp[i];
      while (i < imp.size() && imp[i] == v) ++i;
      if (i > allowed) break;
      threshold = v;
    }
    FarPoint p;
    p.far = far;
    p.threshold = threshold;
    p.achieved_far =
        static_cast<double>(std::count_if(imp.begin(), imp.end(),
                                          [&](double s) { return s >= threshold; })) /
        n_imp;
    p.tpr = static_cast<double>(std::count_if(scores.genuine.begin(), scores.genuine.end(),
                                              [&](double s) { return s >= threshold; })) /
            n_gen;
    p.low_confidence = n_imp < 1.0 / far;
    out.push_back(p);
  }
  return out;
}

double tenfold_accuracy(std::span<const FoldedScore> scores) {
  const auto n_gen = std::count_if(scores.begin(), scores.end(),
                                   [](const FoldedScore& s) { return s.genuine; });
  const auto n_imp = static_cast<std::ptrdiff_t>(scores.size()) - n_gen;
  if (n_gen < 10 || n_imp < 10) {
    throw ContractError("tenfold_accuracy needs >= 10 genuine and >= 10 impostor pairs");
  }
  std::set<int> folds;
  for (const auto& s : scores) folds.insert(s.fold);
  double total = 0.0;
  int used = 0;
  for (int fold : folds) {
    std::vector<std::pair<double, bool>> train;
    for (const auto& s : scores) {
      if (s.fold != fold) train.emplace_back(s.score, s.genuine);
    }
    std::sort(train.begin(), train.end());
    std::size_t gen_total = 0;
    for (const auto& t : train) gen_total += t.second;
    const std::size_t imp_total = train.size() - gen_total;
    // Distinct training scores ascending, then +inf. At threshold t every
    // score >= t is accepted.
    double best_t = 0.0;
    std::ptrdiff_t best_correct = -1;
    std::size_t gen_below = 0, imp_below = 0;
    for (std::size_t i = 0; i < train.size();) {
      const double t = train[i].first;
      const auto correct = static_cast<std::ptrdiff_t>((gen_total - gen_below) + imp_below);
      if (correct > best_correct) {
        best_correct = correct;
        best_t = t;
      }
      while (i < train.size() && train[i].first == t) {
        (train[i].second ? gen_below : imp_below) += 1;
        ++i;
      }
    }
    if (static_cast<std::ptrdiff_t>(imp_total) > best_correct) {
      best_t = std::numeric_limits<double>::infinity();
    }
    std::size_t correct = 0, n = 0;
    for (const auto& s : scores) {
      if (s.fold != fold) continue;
      ++n;
      const bool accept = s.score >= best_t;
      correct += accept == s.genuine;
    }
    if (n == 0) continue;
    total += static_cast<double>(correct) / static_cast<double>(n);
    ++used;
  }
  if (used == 0) throw ContractError("tenfold_accuracy: no non-empty folds");
  return total / used;
}

double rank1_identification(const Tensor& gallery_feats,
                            std::span<const std::int64_t> gallery_ids,
                            const Tensor& probe_feats,
                            std::span<const std::int64_t> probe_ids) {
  if (gallery_feats.rows() != gallery_ids.size() || probe_feats.rows() != probe_ids.size()) {
    throw ContractError("rank1: feature and id counts differ");
  }
  if (gallery_feats.cols() != probe_feats.cols()) {
    throw DimensionError("rank1: gallery " + shape_str(gallery_feats.shape()) +
                         " vs probe " + shape_str(probe_feats.shape()));
  }
  const std::set<std::int64_t> known(gallery_ids.begin(), gallery_ids.end());
  for (auto id : probe_ids) {
    if (!known.count(id)) {
      throw ContractError("rank1: probe id " + std::to_string(id) + " has no gallery entry");
    }
  }
  if (probe_ids.empty()) throw ContractError("rank1: no probes");
  std::size_t hits = 0;
  for (std::size_t p = 0; p < probe_ids.size(); ++p) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gallery_ids.size(); ++g) {
      const double s = cosine_value(probe_feats.row(p), gallery_feats.row(g));
      if (s > best_score) {
        best_score = s;
        best = g;
      }
    }
    hits += gallery_ids[best] == probe_ids[p];
  }
  return static_cast<double>(hits) / static_cast<double>(probe_ids.size());
}

double prototype_rank1(const Tensor& feats, std::span<const std::size_t> labels,
                       const PrototypeMatrix& prototypes) {
  if (feats.rows() != labels.size()) throw ContractError("prototype_rank1: label count");
  NoGradGuard guard;
  const Tensor cos = logits_conventional(feats.detach(), prototypes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = cos.row(i);
    const auto best = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
    hits += best == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

FeatureSet extract_features(const Encoder& probe_net, const ShallowDataset& ds,
                            std::span<const std::size_t> records) {
  if (records.empty()) throw ContractError("extract_features: no records");
  const std::size_t d = ds.input_dim;
  std::vector<double> x(records.size() * d);
  FeatureSet out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = ds.records.at(records[i]);
    std::copy(r.x.begin(), r.x.end(), x.begin() + i * d);
    out.ids.push_back(r.id);
    out.roles.push_back(r.role);
    out.records.push_back(records[i]);
  }
  out.features = probe_net.forward(Tensor::matrix(records.size(), d, std::move(x)), false);
  return out;
}

PairSet build_pairs(const FeatureSet& set, std::size_t max_impostors,
                    std::uint64_t seed) {
  std::vector<std::size_t> gallery, probe;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    (set.roles[i] == Role::kGallery ? gallery : probe).push_back(i);
  }
  const std::set<std::int64_t> distinct(set.ids.begin(), set.ids.end());
  if (distinct.size() < 2) throw ContractError("build_pairs needs >= 2 identities");
  PairSet pairs;
  for (std::size_t g : gallery)
    for (std::size_t p : probe)
      if (set.ids[g] == set.ids[p]) pairs.genuine.push_back({g, p});

  std::mt19937_64 rng(seed);
  const std::size_t cross = gallery.size() * probe.size() - pairs.genuine.size();
  if (cross <= max_impostors) {
    for (std::size_t g : gallery)
      for (std::size_t p : probe)
        if (set.ids[g] != set.ids[p]) pairs.impostor.push_back({g, p});
    std::shuffle(pairs.impostor.begin(), pairs.impostor.end(), rng);
  } else {
    std::uniform_int_distribution<std::size_t> pick_g(0, gallery.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_p(0, probe.size() - 1);
    std::set<std::pair<std::size_t, std::size_t>> taken;
    while (pairs.impostor.size() < max_impostors) {
      const std::size_t g = gallery[pick_g(rng)], p = probe[pick_p(rng)];
      if (set.ids[g] == set.ids[p] || !taken.emplace(g, p).second) continue;
      pairs.impostor.push_back({g, p});
    }
  }
  return pairs;
}

ScoreSet score_pairs(const FeatureSet& set, const PairSet& pairs) {
  ScoreSet s;
  auto score = [&](const PairIndex& p) {
    return cosine_value(set.features.row(p.gallery_row), set.features.row(p.probe_row));
  };
  for (const auto& p : pairs.genuine) s.genuine.push_back(score(p));
  for (const auto& p : pairs.impostor) s.impostor.push_back(score(p));
  return s;
}

std::vector<FoldedScore> fold_scores(const ScoreSet& scores, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> gen = scores.genuine, imp = scores.impostor;
  std::shuffle(gen.begin(), gen.end(), rng);
  std::shuffle(imp.begin(), imp.end(), rng);
  imp.resize(std::min(imp.size(), gen.size()));
  std::vector<FoldedScore> out;
  for (std::size_t i = 0; i < gen.size(); ++i) out.push_back({gen[i], true, static_cast<int>(i % 10)});
  for (std::size_t i = 0; i < imp.size(); ++i) out.push_back({imp[i], false, static_cast<int>(i % 10)});
  return out;
}

double EvalReport::tpr_at(double far) const {
  for (const auto& p : roc) {
    if (p.far == far) return p.tpr;
  }
  throw ContractError("no ROC point at FAR " + std::to_string(far));
}

EvalReport evaluate(const Encoder& probe_net, const ShallowDataset& ds,
                    const EvalSettings& settings) {
  const auto records = ds.records_of(Split::kTest);
  FeatureSet set = extract_features(probe_net, ds, records);
  const PairSet pairs = build_pairs(set, settings.max_impostors, settings.seed);
  const ScoreSet scores = score_pairs(set, pairs);

  EvalReport report;
  report.seed = settings.seed;
  report.n_genuine = scores.genuine.size();
  report.n_impostor = scores.impostor.size();
  report.n_test_ids = std::set<std::int64_t>(set.ids.begin(), set.ids.end()).size();
  report.roc = tpr_at_far(scores, settings.far_levels);
  const auto folded = fold_scores(scores, settings.seed + 1);
  report.tenfold_accuracy = tenfold_accuracy(folded);

  std::vector<std::size_t> g_rows, p_rows;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    (set.roles[i] == Role::kGallery ? g_rows : p_rows).push_back(i);
  }
  std::vector<std::int64_t> g_ids, p_ids;
  for (auto r : g_rows) g_ids.push_back(set.ids[r]);
  for (auto r : p_rows) p_ids.push_back(set.ids[r]);
  report.rank1 = rank1_identification(gather_rows(set.features, g_rows), g_ids,
                                      gather_rows(set.features, p_rows), p_ids);
  return report;
}

}  // namespace sst
