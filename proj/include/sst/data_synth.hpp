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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sst/tensor.hpp"

namespace sst {

enum class Role { kGallery, kProbe };
enum class Split { kTrain, kTest };

std::string to_string(Role role);
std::string to_string(Split split);

struct GenSpec {
  std::size_t n_ids = 1200;
  std::size_t depth = 2;
  std::size_t input_dim = 32;
  double class_separation = 0.35;
  double sigma_intra = 0.25;
  double shift_strength = 0.15;
  double test_fraction = 1.0 / 6.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t n_test_ids() const;
};

struct Record {
  std::int64_t id;
  Role role;
  Split split;
  std::vector<double> x;

  bool operator==(const Record&) const = default;
};

struct ShallowDataset {
  std::size_t input_dim = 0;
  std::vector<Record> records;
  // Free-form provenance lines written as '#' comments by save().
  std::vector<std::string> echo;

  std::vector<std::int64_t> ids(Split split) const;
  std::vector<std::size_t> records_of(Split split) const;
  bool operator==(const ShallowDataset& o) const {
    return input_dim == o.input_dim && records == o.records;
  }
};

// Identity centers ~ N(0, class_separation^2 I); samples add N(0, sigma^2 I);
// probe-role samples are blended toward a fixed global affine map:
// (1 - shift) x + shift (A x + b). Record 0 of each id is the gallery.
ShallowDataset generate(const GenSpec& spec);

struct Batch {
  Tensor gallery;                  // [B x input_dim]
  Tensor probe;                    // [B x input_dim]
  std::vector<std::int64_t> ids;   // identity per row
  std::vector<std::size_t> gallery_records;
  std::vector<std::size_t> probe_records;
};

// Per-identity lookup over the train split.
class TrainIndex {
 public:
  explicit TrainIndex(const ShallowDataset& ds);

  std::size_t n_ids() const { return ids_.size(); }
  const std::vector<std::int64_t>& ids() const { return ids_; }
  // Dense class index of a train id.
  std::size_t class_of(std::int64_t id) const { return class_.at(id); }
  const std::vector<std::size_t>& records(std::size_t cls) const { return recs_[cls]; }
  // True when every id has exactly one gallery and one probe record.
  bool shallow() const { return shallow_; }

 private:
  std::vector<std::int64_t> ids_;
  std::map<std::int64_t, std::size_t> class_;
  std::vector<std::vector<std::size_t>> recs_;
  bool shallow_ = true;
};

// Rows for the given train classes. Shallow ids route gallery-role records to
// the gallery slot; deeper ids pick two distinct records and flip a fair coin
// for the roles.
Batch assemble_batch(const ShallowDataset& ds, const TrainIndex& index,
                     std::span<const std::size_t> classes, std::mt19937_64& rng);

// B distinct train ids drawn uniformly.
Batch sample_batch(const ShallowDataset& ds, std::size_t batch_size,
                   std::uint64_t epoch_seed);

// Epoch-style sampler: walks a fresh permutation of train ids, B at a time,
// reshuffling when fewer than B remain so ids within a batch stay distinct.
class BatchSampler {
 public:
  BatchSampler(const ShallowDataset& ds, std::size_t batch_size,
               std::uint64_t seed);
  Batch next();
  const TrainIndex& index() const { return index_; }

 private:
  const ShallowDataset& ds_;
  TrainIndex index_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Text format: header "sstdata v1 <n_records> <input_dim>", optional '#'
// lines, then "id,role,split,v0,...,vD-1" with shortest round-trip decimals.
void save_dataset(const ShallowDataset& ds, const std::filesystem::path& path);
ShallowDataset load_dataset(const std::filesystem::path& path);
std::string serialize_dataset(const ShallowDataset& ds);
ShallowDataset parse_dataset(const std::string& text);

}  // namespace sst
