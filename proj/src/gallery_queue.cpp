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

#include "sst/gallery_queue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "sst/errors.hpp"

namespace sst {

GalleryQueue::GalleryQueue(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim) {
  if (capacity == 0) throw ConfigError("gallery queue capacity must be >= 1");
  if (dim < 2) throw ConfigError("gallery queue dim must be >= 2");
  features_.assign(capacity * dim, 0.0);
  ids_.assign(capacity, kSentinelId);
}

GalleryQueue::GalleryQueue(std::size_t capacity, std::size_t dim,
                           std::uint64_t seed)
    : GalleryQueue(capacity, dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < capacity; ++s) {
    std::span<double> row(features_.data() + s * dim, dim);
    double n = 0.0;
    // A zero draw has probability zero, but redraw rather than divide by it.
    while (n == 0.0) {
      for (double& v : row) v = normal(rng);
      n = l2_norm(row);
    }
    for (double& v : row) v /= n;
  }
  filled_ = capacity;
}

GalleryQueue GalleryQueue::empty(std::size_t capacity, std::size_t dim) {
  return GalleryQueue(capacity, dim);
}

void GalleryQueue::enqueue(std::span<const double> feature, std::int64_t id) {
  if (feature.size() != dim_) {
    throw DimensionError("gallery queue: feature length " +
                         std::to_string(feature.size()) + " != dim " +
                         std::to_string(dim_));
  }
  const double n = l2_norm(feature);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw ContractError("gallery queue: feature norm " + std::to_string(n) +
                        " is not unit");
  }
  std::copy(feature.begin(), feature.end(), features_.begin() + cursor_ * dim_);
  ids_[cursor_] = id;
  cursor_ = (cursor_ + 1) % capacity_;
  if (filled_ < capacity_) ++filled_;
  ++total_;
}

void GalleryQueue::enqueue_batch(const Tensor& feats,
                                 std::span<const std::int64_t> ids) {
  if (feats.rank() != 2 || feats.cols() != dim_) {
    throw DimensionError("gallery queue: expected [B x " + std::to_string(dim_) +
                         "], got " + shape_str(feats.shape()));
  }
  if (feats.rows() != ids.size()) {
    throw ContractError("gallery queue: " + std::to_string(feats.rows()) +
                        " features but " + std::to_string(ids.size()) + " ids");
  }
  // Check the whole batch first so a bad row leaves the queue untouched.
  for (std::size_t r = 0; r < feats.rows(); ++r) {
    const double n = l2_norm(feats.row(r));
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      throw ContractError("gallery queue: row " + std::to_string(r) +
                          " has norm " + std::to_string(n));
    }
  }
  for (std::size_t r = 0; r < feats.rows(); ++r) enqueue(feats.row(r), ids[r]);
}

std::vector<std::span<const double>> GalleryQueue::negatives_for(
    std::int64_t probe_id) const {
  std::vector<std::span<const double>> out;
  out.reserve(filled_);
  for (std::size_t s = 0; s < filled_; ++s) {
    if (ids_[s] != probe_id || ids_[s] == kSentinelId) out.push_back(feature(s));
  }
  return out;
}

std::vector<std::size_t> GalleryQueue::slots_in_arrival_order() const {
  std::vector<std::size_t> slots;
  slots.reserve(filled_);
  // Until the ring wraps, slot 0 is the oldest; afterwards the cursor is.
  const std::size_t start = filled_ < capacity_ ? 0 : cursor_;
  for (std::size_t i = 0; i < filled_; ++i) slots.push_back((start + i) % capacity_);
  return slots;
}

std::span<const double> GalleryQueue::feature(std::size_t slot) const {
  return {features_.data() + slot * dim_, dim_};
}

Tensor GalleryQueue::as_matrix() const {
  if (filled_ == 0) throw ContractError("gallery queue is empty");
  return Tensor::matrix(filled_, dim_,
                        std::vector<double>(features_.begin(),
                                            features_.begin() + filled_ * dim_));
}

void GalleryQueue::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "slot,id";
  for (std::size_t j = 0; j < dim_; ++j) os << ",f" << j;
  os << '\n';
  char buf[32];
  for (std::size_t s = 0; s < filled_; ++s) {
    os << s << ',' << ids_[s];
    for (double v : feature(s)) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      os << ',' << std::string_view(buf, end - buf);
    }
    os << '\n';
  }
}

}  // namespace sst
