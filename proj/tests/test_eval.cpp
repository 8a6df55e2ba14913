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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "sst/errors.hpp"
#include "sst/eval.hpp"
#include "sst/semi_siamese.hpp"
#include "support.hpp"

using namespace sst;
using sst::testing::random_unit_rows;

namespace {

// Smallest impostor score whose inclusive acceptance stays within far;
// falls back to rejecting everything.
FarPoint far_oracle(const ScoreSet& s, double far) {
  const double n = static_cast<double>(s.impostor.size());
  std::vector<double> cands = s.impostor;
  std::sort(cands.begin(), cands.end());
  for (double t : cands) {
    const auto admitted = std::count_if(s.impostor.begin(), s.impostor.end(), [&](double x) { return x >= t; });
    if (static_cast<double>(admitted) <= far * n + 1e-9) {
      FarPoint p;
      p.threshold = t;
      p.tpr = static_cast<double>(std::count_if(s.genuine.begin(), s.genuine.end(),
                                                [&](double x) { return x >= t; })) /
              static_cast<double>(s.genuine.size());
      p.achieved_far = static_cast<double>(admitted) / n;
      return p;
    }
  }
  const double top = cands.back();
  FarPoint p;
  p.tpr = static_cast<double>(std::count_if(s.genuine.begin(), s.genuine.end(),
                                            [&](double x) { return x > top; })) /
          static_cast<double>(s.genuine.size());
  p.threshold = std::numeric_limits<double>::quiet_NaN();
  return p;
}

// Threshold sweep over a fixed grid, lowest best threshold wins.
double tenfold_oracle(const std::vector<FoldedScore>& scores) {
  double total = 0.0;
  int used = 0;
  for (int fold = 0; fold < 10; ++fold) {
    std::size_t best_correct = 0;
    double best_t = 0.0;
    bool have = false;
    for (int k = -10000; k <= 11000; ++k) {
      const double t = k * 1e-4;
      std::size_t correct = 0;
      for (const auto& s : scores)
        if (s.fold != fold) correct += (s.score >= t) == s.genuine;
      if (!have || correct > best_correct) {
        best_correct = correct;
        best_t = t;
        have = true;
      }
    }
    std::size_t correct = 0, n = 0;
    for (const auto& s : scores) {
      if (s.fold != fold) continue;
      ++n;
      correct += (s.score >= best_t) == s.genuine;
    }
    if (n == 0) continue;
    total += static_cast<double>(correct) / static_cast<double>(n);
    ++used;
  }
  return total / used;
}

ShallowDataset small_dataset() {
  GenSpec s;
  s.n_ids = 60;
  s.input_dim = 6;
  s.test_fraction = 0.5;
  s.seed = 4;
  return generate(s);
}

}  // namespace

TEST_CASE("separable scores") {
  ScoreSet s{std::vector<double>(20, 0.9), std::vector<double>(200, 0.1)};
  const std::vector<double> fars = {1e-1, 1e-2, 1e-3};
  const auto roc = tpr_at_far(s, fars);
  for (const auto& p : roc) CHECK(p.tpr == 1.0);
  CHECK_FALSE(roc[1].low_confidence);
  CHECK(roc[2].low_confidence);
  CHECK_THROWS_AS(tpr_at_far(ScoreSet{{}, {0.1}}, fars), ContractError);
}

TEST_CASE("ten impostors at far 0.2") {
  ScoreSet s;
  for (int i = 0; i < 10; ++i) s.impostor.push_back(i / 10.0);
  s.genuine = {0.05, 0.75, 0.8, 0.95};
  const std::vector<double> far = {0.2};
  const auto p = tpr_at_far(s, far).front();
  CHECK(p.threshold == 0.8);
  CHECK(p.achieved_far == doctest::Approx(0.2));
  CHECK(p.tpr == 0.5);
}

TEST_CASE("identical distributions give chance tpr") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  ScoreSet s;
  for (int i = 0; i < 20000; ++i) {
    s.genuine.push_back(u(rng));
    s.impostor.push_back(u(rng));
  }
  const std::vector<double> fars = {0.1, 0.01};
  for (const auto& p : tpr_at_far(s, fars)) CHECK(std::abs(p.tpr - p.far) <= 0.3 * p.far);
}

TEST_CASE("tpr_at_far matches exhaustive small-case enumeration") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(1, 10), level(0, 9);
  const std::vector<double> fars = {0.05, 0.1, 0.2, 0.25, 0.5, 1.0};
  for (int trial = 0; trial < 500; ++trial) {
    ScoreSet s;
    const int ng = size(rng), ni = size(rng);
    // Coarse values force ties.
    for (int i = 0; i < ng; ++i) s.genuine.push_back(level(rng) / 10.0);
    for (int i = 0; i < ni; ++i) s.impostor.push_back(level(rng) / 10.0);
    const auto roc = tpr_at_far(s, fars);
    for (std::size_t k = 0; k < fars.size(); ++k) {
      const FarPoint want = far_oracle(s, fars[k]);
      CHECK(roc[k].tpr == want.tpr);
      if (!std::isnan(want.threshold)) {
        CHECK(roc[k].threshold == want.threshold);
        CHECK(roc[k].achieved_far == want.achieved_far);
      } else {
        CHECK(roc[k].achieved_far == 0.0);
      }
      CHECK(roc[k].achieved_far <= fars[k] + 1e-12);
      if (k > 0) CHECK(roc[k].tpr >= roc[k - 1].tpr);
    }
  }
}

TEST_CASE("tenfold accuracy examples") {
  std::vector<FoldedScore> sep;
  for (int i = 0; i < 50; ++i) {
    sep.push_back({0.8, true, i % 10});
    sep.push_back({0.2, false, i % 10});
  }
  CHECK(tenfold_accuracy(sep) == 1.0);
  std::vector<FoldedScore> swapped = sep;
  for (auto& s : swapped) s.genuine = !s.genuine;
  CHECK(tenfold_accuracy(swapped) <= 0.5 + 1e-12);
  sep.resize(18);
  CHECK_THROWS_AS(tenfold_accuracy(sep), ContractError);
}

TEST_CASE("tenfold accuracy matches a threshold sweep") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 19), fold(0, 9);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<FoldedScore> scores;
    for (int i = 0; i < 60; ++i) {
      const bool g = coin(rng);
      const double v = (g ? 5 + level(rng) : level(rng)) * 0.04;
      const int f = fold(rng);
      // Every value sits in two folds so each training side sees all values.
      scores.push_back({v, g, f});
      scores.push_back({v, g, (f + 1) % 10});
    }
    CHECK(tenfold_accuracy(scores) == tenfold_oracle(scores));
  }
}

TEST_CASE("rank1 examples") {
  std::mt19937_64 rng(4);
  const Tensor f = random_unit_rows(12, 5, rng);
  std::vector<std::int64_t> ids(12);
  std::iota(ids.begin(), ids.end(), 100);
  CHECK(rank1_identification(f, ids, f, ids) == 1.0);

  // Two galleries tie; the lower index wins.
  const Tensor gallery = Tensor::matrix(2, 2, {1, 0, 1, 0});
  const Tensor probe = Tensor::matrix(1, 2, {1, 0});
  const std::vector<std::int64_t> gid = {7, 8}, pid7 = {7}, pid8 = {8};
  CHECK(rank1_identification(gallery, gid, probe, pid7) == 1.0);
  CHECK(rank1_identification(gallery, gid, probe, pid8) == 0.0);

  const std::vector<std::int64_t> unknown = {9};
  CHECK_THROWS_AS(rank1_identification(gallery, gid, probe, unknown), ContractError);
}

TEST_CASE("random features give chance rank1") {
  std::mt19937_64 rng(5);
  double total = 0.0;
  const int trials = 400;
  std::vector<std::int64_t> ids(10);
  std::iota(ids.begin(), ids.end(), 0);
  for (int t = 0; t < trials; ++t) {
    total += rank1_identification(random_unit_rows(10, 8, rng), ids, random_unit_rows(10, 8, rng), ids);
  }
  CHECK(std::abs(total / trials - 0.1) <= 0.02);
}

TEST_CASE("extract_features uses only the given network") {
  const auto ds = small_dataset();
  SiamesePair pair(Encoder({6, {8}, 4, 1}), UpdateMode::moving_average(0.9));
  const auto records = ds.records_of(Split::kTest);
  const std::size_t gallery_calls = pair.gallery_net().forward_calls();
  const auto set = extract_features(pair.probe_net(), ds, records);
  CHECK(pair.gallery_net().forward_calls() == gallery_calls);
  CHECK(pair.probe_net().forward_calls() >= 1);
  for (std::size_t i = 0; i < set.ids.size(); ++i) CHECK(std::abs(l2_norm(set.features.row(i)) - 1.0) <= 1e-9);
  const std::vector<std::size_t> twice = {records[0], records[0]};
  const auto dup = extract_features(pair.probe_net(), ds, twice);
  CHECK(std::equal(dup.features.row(0).begin(), dup.features.row(0).end(), dup.features.row(1).begin()));
  CHECK_FALSE(set.features.requires_grad());

  EvalSettings settings;
  evaluate(pair.probe_net(), ds, settings);
  CHECK(pair.gallery_net().forward_calls() == gallery_calls);
}

TEST_CASE("build_pairs") {
  const auto ds = small_dataset();
  const Encoder enc({6, {8}, 4, 1});
  const auto set = extract_features(enc, ds, ds.records_of(Split::kTest));
  const auto all = build_pairs(set, 1000000, 1);
  CHECK(all.genuine.size() == 30);
  CHECK(all.impostor.size() == 30 * 29);
  for (const auto& p : all.impostor) CHECK(set.ids[p.gallery_row] != set.ids[p.probe_row]);
  for (const auto& p : all.genuine) {
    CHECK(set.ids[p.gallery_row] == set.ids[p.probe_row]);
    CHECK(set.roles[p.gallery_row] == Role::kGallery);
  }
  const auto capped = build_pairs(set, 100, 2);
  CHECK(capped.impostor.size() == 100);
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (const auto& p : capped.impostor) {
    CHECK(set.ids[p.gallery_row] != set.ids[p.probe_row]);
    unique.emplace(p.gallery_row, p.probe_row);
  }
  CHECK(unique.size() == 100);
  const auto again = build_pairs(set, 100, 2);
  for (std::size_t i = 0; i < 100; ++i) CHECK(again.impostor[i].probe_row == capped.impostor[i].probe_row);

  FeatureSet one = set;
  std::fill(one.ids.begin(), one.ids.end(), 3);
  CHECK_THROWS_AS(build_pairs(one, 10, 0), ContractError);
}

TEST_CASE("metrics are invariant under feature rescaling") {
  const auto ds = small_dataset();
  const Encoder enc({6, {8}, 4, 2});
  const auto set = extract_features(enc, ds, ds.records_of(Split::kTest));
  FeatureSet scaled = set;
  scaled.features = scale(set.features, 4.0);
  const auto pairs = build_pairs(set, 500, 3);
  const auto a = score_pairs(set, pairs), b = score_pairs(scaled, pairs);
  CHECK(a.genuine == b.genuine);
  CHECK(a.impostor == b.impostor);
  const std::vector<double> fars = {0.1, 0.01};
  const auto ra = tpr_at_far(a, fars), rb = tpr_at_far(b, fars);
  for (std::size_t k = 0; k < 2; ++k) CHECK(ra[k].tpr == rb[k].tpr);
  CHECK(tenfold_accuracy(fold_scores(a, 1)) == tenfold_accuracy(fold_scores(b, 1)));
  std::vector<std::size_t> g, p;
  std::vector<std::int64_t> gi, pi;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    if (set.roles[i] == Role::kGallery) {
      g.push_back(i);
      gi.push_back(set.ids[i]);
    } else {
      p.push_back(i);
      pi.push_back(set.ids[i]);
    }
  }
  CHECK(rank1_identification(gather_rows(set.features, g), gi, gather_rows(set.features, p), pi) ==
        rank1_identification(gather_rows(scaled.features, g), gi, gather_rows(scaled.features, p), pi));
}

TEST_CASE("evaluate is deterministic") {
  const auto ds = small_dataset();
  const Encoder enc({6, {8}, 4, 3});
  EvalSettings settings;
  settings.max_impostors = 300;
  const auto a = evaluate(enc, ds, settings), b = evaluate(enc, ds, settings);
  CHECK(a.tenfold_accuracy == b.tenfold_accuracy);
  CHECK(a.rank1 == b.rank1);
  CHECK(a.n_genuine == 30);
  CHECK(a.n_impostor == 300);
  CHECK(a.n_test_ids == 30);
  CHECK(a.tpr_at(1e-2) == b.tpr_at(1e-2));
  CHECK_THROWS_AS(a.tpr_at(0.5), ContractError);
}
