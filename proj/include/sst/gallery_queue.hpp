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
#include <span>
#include <vector>

#include "sst/tensor.hpp"

namespace sst {

// Label carried by prefill entries; never equal to a real identity.
inline constexpr std::int64_t kSentinelId = -1;

// Fixed-capacity FIFO of (unit feature, identity) pairs used as the
// feature-based prototype set. Slots are overwritten oldest-first.
class GalleryQueue {
 public:
  // Prefilled with `capacity` random unit vectors labelled kSentinelId.
  GalleryQueue(std::size_t capacity, std::size_t dim, std::uint64_t seed);
  // Starts empty (filled() == 0). Mostly for tests and diagnostics.
  static GalleryQueue empty(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t filled() const { return filled_; }
  std::size_t cursor() const { return cursor_; }
  std::uint64_t total_enqueued() const { return total_; }

  // feats: [B x dim], each row unit norm within 1e-6.
  void enqueue_batch(const Tensor& feats, std::span<const std::int64_t> ids);
  void enqueue(std::span<const double> feature, std::int64_t id);

  // Stored features whose label differs from probe_id (sentinels included),
  // in slot order.
  std::vector<std::span<const double>> negatives_for(std::int64_t probe_id) const;

  // Occupied slots, oldest first.
  std::vector<std::size_t> slots_in_arrival_order() const;
  std::span<const double> feature(std::size_t slot) const;
  std::int64_t id(std::size_t slot) const { return ids_[slot]; }
  std::span<const std::int64_t> ids() const { return {ids_.data(), filled_}; }

  // [filled x dim] copy of occupied slots in slot order; never on a tape.
  Tensor as_matrix() const;
  std::span<const double> raw_features() const {
    return {features_.data(), filled_ * dim_};
  }

  // CSV with columns slot,id,f0..f{dim-1}.
  void write_csv(const std::filesystem::path& path) const;

 private:
  GalleryQueue(std::size_t capacity, std::size_t dim);

  std::size_t capacity_;
  std::size_t dim_;
  std::vector<double> features_;  // capacity x dim
  std::vector<std::int64_t> ids_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
  std::uint64_t total_ = 0;
};

}  // namespace sst
