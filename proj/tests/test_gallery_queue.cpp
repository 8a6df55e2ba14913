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

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>

#include "sst/errors.hpp"
#include "sst/gallery_queue.hpp"
#include "sst/losses.hpp"
#include "support.hpp"

using namespace sst;
using sst::testing::random_unit_rows;

namespace {

std::vector<double> unit(std::size_t dim, std::size_t hot) {
  std::vector<double> v(dim, 0.0);
  v[hot % dim] = 1.0;
  return v;
}

std::vector<std::int64_t> arrival_ids(const GalleryQueue& q) {
  std::vector<std::int64_t> out;
  for (auto slot : q.slots_in_arrival_order()) out.push_back(q.id(slot));
  return out;
}

}  // namespace

TEST_CASE("prefill") {
  const GalleryQueue q(16, 5, 3);
  CHECK(q.filled() == 16);
  for (std::size_t s = 0; s < 16; ++s) {
    CHECK(std::abs(l2_norm(q.feature(s)) - 1.0) <= 1e-9);
    CHECK(q.id(s) == kSentinelId);
  }
  const GalleryQueue again(16, 5, 3);
  CHECK(std::equal(q.raw_features().begin(), q.raw_features().end(), again.raw_features().begin()));
  // A real id never matches a sentinel, so nothing is masked.
  CHECK(q.negatives_for(0).size() == 16);
  CHECK_THROWS_AS(GalleryQueue(0, 5, 0), ConfigError);
  CHECK_THROWS_AS(GalleryQueue(4, 1, 0), ConfigError);
}

TEST_CASE("FIFO examples") {
  auto q = GalleryQueue::empty(4, 3);
  for (std::int64_t id = 1; id <= 6; ++id) q.enqueue(unit(3, id), id);
  CHECK(arrival_ids(q) == std::vector<std::int64_t>{3, 4, 5, 6});

  auto r = GalleryQueue::empty(4, 3);
  r.enqueue_batch(Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0}), std::vector<std::int64_t>{10, 11});
  r.enqueue_batch(Tensor::matrix(2, 3, {0, 0, 1, 1, 0, 0}), std::vector<std::int64_t>{12, 13});
  CHECK(arrival_ids(r) == std::vector<std::int64_t>{10, 11, 12, 13});

  GalleryQueue full(3, 3, 0);
  full.enqueue_batch(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}),
                     std::vector<std::int64_t>{7, 8, 9});
  CHECK(arrival_ids(full) == std::vector<std::int64_t>{7, 8, 9});
}

TEST_CASE("non-unit rows are rejected without partial writes") {
  auto q = GalleryQueue::empty(4, 2);
  CHECK_THROWS_AS(q.enqueue(std::vector<double>{1.0, 1.0}, 1), ContractError);
  CHECK_THROWS_AS(q.enqueue_batch(Tensor::matrix(2, 2, {1, 0, 0.5, 0}), std::vector<std::int64_t>{1, 2}),
                  ContractError);
  CHECK(q.filled() == 0);
  CHECK_THROWS_AS(q.enqueue_batch(Tensor::matrix(1, 3, {1, 0, 0}), std::vector<std::int64_t>{1}),
                  DimensionError);
  CHECK_THROWS_AS(q.enqueue_batch(Tensor::matrix(1, 2, {1, 0}), std::vector<std::int64_t>{1, 2}),
                  ContractError);
}

TEST_CASE("negatives_for masks the probe identity") {
  auto q = GalleryQueue::empty(4, 4);
  for (std::int64_t id : {1, 2, 3, 4}) q.enqueue(unit(4, static_cast<std::size_t>(id)), id);
  CHECK(q.negatives_for(9).size() == 4);
  CHECK(q.negatives_for(2).size() == 3);
}

TEST_CASE("masking lowers the loss against a same-id near-duplicate") {
  std::mt19937_64 rng(4);
  const Tensor gallery = random_unit_rows(1, 8, rng);
  const Tensor probe = gallery.clone();
  auto masked = GalleryQueue::empty(4, 8);
  masked.enqueue(gallery.row(0), 5);
  const Tensor others = random_unit_rows(3, 8, rng);
  masked.enqueue_batch(others, std::vector<std::int64_t>{6, 7, 8});
  auto unmasked = GalleryQueue::empty(4, 8);
  unmasked.enqueue(gallery.row(0), 99);
  unmasked.enqueue_batch(others, std::vector<std::int64_t>{6, 7, 8});
  const LossConfig cfg = LossConfig::defaults_for(LossKind::kSoftmax);
  const std::vector<std::int64_t> ids = {5};
  const double with_mask = sst_loss(probe, gallery, ids, masked, cfg).item();
  const double without = sst_loss(probe, gallery, ids, unmasked, cfg).item();
  CHECK(with_mask <= without);
  CHECK(with_mask < without - 1e-6);
}

TEST_CASE("randomized sequences match a shadow FIFO") {
  std::mt19937_64 rng(11);
  for (std::size_t cap : {1u, 3u, 7u, 32u}) {
    auto q = GalleryQueue::empty(cap, 4);
    std::deque<std::pair<std::int64_t, std::vector<double>>> shadow;
    std::uniform_int_distribution<int> batch(1, 9), id(0, 20);
    std::size_t ops = 0;
    while (ops < 10000) {
      const int b = batch(rng);
      const Tensor feats = random_unit_rows(static_cast<std::size_t>(b), 4, rng);
      std::vector<std::int64_t> ids;
      for (int i = 0; i < b; ++i) ids.push_back(id(rng));
      q.enqueue_batch(feats, ids);
      for (int i = 0; i < b; ++i) {
        const auto row = feats.row(static_cast<std::size_t>(i));
        shadow.emplace_back(ids[static_cast<std::size_t>(i)], std::vector<double>(row.begin(), row.end()));
        if (shadow.size() > cap) shadow.pop_front();
      }
      ops += static_cast<std::size_t>(b);
      REQUIRE(q.filled() == shadow.size());
      REQUIRE(q.filled() <= cap);
      const auto slots = q.slots_in_arrival_order();
      for (std::size_t k = 0; k < slots.size(); ++k) {
        REQUIRE(q.id(slots[k]) == shadow[k].first);
        const auto f = q.feature(slots[k]);
        REQUIRE(std::equal(f.begin(), f.end(), shadow[k].second.begin()));
      }
      const std::int64_t probe = id(rng);
      std::size_t expected = 0;
      for (const auto& [sid, feat] : shadow) expected += sid != probe ? 1 : 0;
      const auto negs = q.negatives_for(probe);
      REQUIRE(negs.size() == expected);
      for (const auto& n : negs) {
        for (const auto& [sid, feat] : shadow) {
          if (std::equal(n.begin(), n.end(), feat.begin())) REQUIRE(sid != probe);
        }
      }
    }
    CHECK(q.total_enqueued() == ops);
  }
}

TEST_CASE("CSV dump") {
  auto q = GalleryQueue::empty(3, 2);
  q.enqueue(std::vector<double>{1.0, 0.0}, 4);
  const auto path = std::filesystem::temp_directory_path() / "sst_queue.csv";
  q.write_csv(path);
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "slot,id,f0,f1");
  CHECK(row.rfind("0,4,1,0", 0) == 0);
}

TEST_CASE("stored features carry no gradient") {
  std::mt19937_64 rng(1);
  Tensor feats = random_unit_rows(2, 3, rng);
  feats.set_requires_grad(true);
  auto q = GalleryQueue::empty(2, 3);
  q.enqueue_batch(feats, std::vector<std::int64_t>{1, 2});
  CHECK_FALSE(q.as_matrix().requires_grad());
}
