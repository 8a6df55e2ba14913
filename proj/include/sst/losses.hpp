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

#include "sst/gallery_queue.hpp"
#include "sst/tensor.hpp"

namespace sst {

enum class LossKind {
  kSoftmax,
  kASoftmax,
  kAmSoftmax,
  kArcSoftmax,
  kProtoConstraintSoftmax,
  kContrastive,
  kTriplet,
  kNPairs,
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);
const std::vector<LossKind>& all_loss_kinds();

// Softmax family: cross-entropy over scaled cosine logits with a margin on the
// ground-truth logit.
bool is_margin_softmax(LossKind kind);

// Multiplicative angular margin of the A-softmax variant. Only m = 2 exists.
inline constexpr double kASoftmaxMargin = 2.0;

struct LossConfig {
  LossKind kind = LossKind::kSoftmax;
  double scale = 30.0;
  // am: additive cosine; arc: additive angle in radians (< pi/2);
  // a: fixed at 2; contrastive/triplet: Euclidean distance margin.
  double margin = 0.0;
  double alpha = 1.0;
  double beta = 0.1;
  // Adds beta * (alpha - ||w_y||). Implied by kProtoConstraintSoftmax; set
  // explicitly to graft the constraint onto another softmax kind.
  bool prototype_constraint = false;

  static LossConfig defaults_for(LossKind kind);
  bool has_prototype_constraint() const {
    return prototype_constraint || kind == LossKind::kProtoConstraintSoftmax;
  }
  void validate() const;
};

// Positive-logit transform applied before scaling:
//   softmax, proto: c
//   am:  c - m
//   arc: cos(min(acos(c) + m, pi))
//   a:   (-1)^k cos(2 theta) - 2k,  theta in [k pi/2, (k+1) pi/2]
double margin_transform(double cos_pos, LossKind kind, double margin);
double margin_transform_derivative(double cos_pos, LossKind kind, double margin);

// Learned class prototypes, one row per training identity. Rows are
// L2-normalized every time they are used; the raw rows are the parameters.
class PrototypeMatrix {
 public:
  PrototypeMatrix(std::size_t n_classes, std::size_t dim, std::uint64_t seed);
  explicit PrototypeMatrix(Tensor weight);

  std::size_t n_classes() const { return weight_.rows(); }
  std::size_t dim() const { return weight_.cols(); }
  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  // Row-normalized copy of the values, off the tape.
  Tensor normalized_values() const;

 private:
  Tensor weight_;
};

// Row-wise mask over a cosine matrix: 1 keeps the entry in the softmax
// denominator. An empty mask keeps everything.
using LogitMask = std::vector<std::uint8_t>;

// Softmax probabilities that margin_cross_entropy optimizes (masked entries 0).
std::vector<double> margin_softmax_probabilities(
    const Tensor& cosines, std::span<const std::size_t> targets,
    const LogitMask& mask, double scale, LossKind kind, double margin);

// mean_i -log softmax(s * z_i)[t_i] with z_ij = cos_ij for j != t_i and
// margin_transform(cos_it) at the target.
Tensor margin_cross_entropy(const Tensor& cosines,
                            std::span<const std::size_t> targets,
                            const LogitMask& mask, double scale, LossKind kind,
                            double margin);

// [B x n] cosines between unit features and normalized prototype rows.
Tensor logits_conventional(const Tensor& features, const PrototypeMatrix& w);

// Conventional classification objective against learned prototypes.
Tensor classification_loss(const Tensor& features,
                           std::span<const std::size_t> labels,
                           const PrototypeMatrix& w, const LossConfig& cfg);

// Same objective with the gallery feature of each identity as its positive
// prototype and the queue (same-id entries masked) as negatives.
Tensor sst_loss(const Tensor& probe_feats, const Tensor& gallery_feats,
                std::span<const std::int64_t> ids, const GalleryQueue& queue,
                const LossConfig& cfg);

// mean over pairs of [same: d^2; different: max(0, margin - d)^2].
Tensor contrastive_loss(const Tensor& anchors, const Tensor& pairs,
                        std::span<const std::uint8_t> same_id,
                        double margin);

// mean of max(0, d(a,p)^2 - d(a,n)^2 + margin).
Tensor triplet_loss(const Tensor& anchors, const Tensor& positives,
                    const Tensor& negatives, double margin);

// Row i of `anchors` against all rows of `positives` (target i), plus queue
// negatives when a queue is given. Needs B >= 2 without a queue.
Tensor npairs_loss(const Tensor& anchors, const Tensor& positives,
                   double scale, const GalleryQueue* queue = nullptr,
                   std::span<const std::int64_t> ids = {});

// Embedding objectives as wired into training. Without a queue, negatives
// come from the batch (gallery row i+1 mod B); with one, from the queue.
Tensor embedding_loss(const Tensor& probe_feats, const Tensor& gallery_feats,
                      std::span<const std::int64_t> ids,
                      const GalleryQueue* queue, const LossConfig& cfg);

}  // namespace sst
