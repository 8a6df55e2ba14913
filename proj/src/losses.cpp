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

#include "sst/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sst/errors.hpp"

namespace sst {

namespace {

struct KindName {
  LossKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LossKind::kSoftmax, "softmax"},
    {LossKind::kASoftmax, "a_softmax"},
    {LossKind::kAmSoftmax, "am_softmax"},
    {LossKind::kArcSoftmax, "arc_softmax"},
    {LossKind::kProtoConstraintSoftmax, "proto_constraint_softmax"},
    {LossKind::kContrastive, "contrastive"},
    {LossKind::kTriplet, "triplet"},
    {LossKind::kNPairs, "npairs"},
};

}  // namespace

std::string to_string(LossKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  throw ConfigError("unknown loss kind");
}

LossKind parse_loss_kind(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw ConfigError("unknown loss kind '" + name + "'");
}

const std::vector<LossKind>& all_loss_kinds() {
  static const std::vector<LossKind> kinds = [] {
    std::vector<LossKind> v;
    for (const auto& kn : kKindNames) v.push_back(kn.kind);
    return v;
  }();
  return kinds;
}

bool is_margin_softmax(LossKind kind) {
  switch (kind) {
    case LossKind::kSoftmax:
    case LossKind::kASoftmax:
    case LossKind::kAmSoftmax:
    case LossKind::kArcSoftmax:
    case LossKind::kProtoConstraintSoftmax:
      return true;
    default:
      return false;
  }
}

LossConfig LossConfig::defaults_for(LossKind kind) {
  LossConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case LossKind::kAmSoftmax: cfg.margin = 0.35; break;
    case LossKind::kArcSoftmax: cfg.margin = 0.5; break;
    case LossKind::kASoftmax: cfg.margin = kASoftmaxMargin; break;
    case LossKind::kContrastive:
    case LossKind::kTriplet: cfg.margin = 1.0; break;
    default: cfg.margin = 0.0; break;
  }
  return cfg;
}

void LossConfig::validate() const {
  if (!(scale > 0.0)) throw ConfigError("loss scale s must be > 0");
  if (!(margin >= 0.0)) throw ConfigError("loss margin must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("prototype constraint alpha must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("prototype constraint beta must be >= 0");
  if (kind == LossKind::kArcSoftmax && !(margin < std::numbers::pi / 2)) {
    throw ConfigError("arc_softmax margin must be < pi/2 radians");
  }
  if (kind == LossKind::kASoftmax && margin != kASoftmaxMargin) {
    throw ConfigError("a_softmax supports only the multiplicative margin 2");
  }
  if (prototype_constraint && !is_margin_softmax(kind)) {
    throw ConfigError("the prototype constraint applies only to softmax-family losses, not " +
                      to_string(kind));
  }
}

double margin_transform(double c, LossKind kind, double margin) {
  switch (kind) {
    case LossKind::kSoftmax:
    case LossKind::kProtoConstraintSoftmax:
      return c;
    case LossKind::kAmSoftmax:
      return c - margin;
    case LossKind::kArcSoftmax: {
      const double cc = std::clamp(c, -1.0, 1.0);
      const double theta = std::acos(cc);
      if (theta + margin >= std::numbers::pi) return -1.0;
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cc * cc));
      return cc * std::cos(margin) - sin_t * std::sin(margin);
    }
    case LossKind::kASoftmax: {
      // cos(2 theta) = 2c^2 - 1; k = 1 once theta passes pi/2.
      return c >= 0.0 ? 2.0 * c * c - 1.0 : -2.0 * c * c - 1.0;
    }
    default:
      throw ConfigError("margin_transform: " + to_string(kind) +
                        " is not a softmax-family loss");
  }
}

double margin_transform_derivative(double c, LossKind kind, double margin) {
  switch (kind) {
    case LossKind::kSoftmax:
    case LossKind::kProtoConstraintSoftmax:
    case LossKind::kAmSoftmax:
      return 1.0;
    case LossKind::kArcSoftmax: {
      const double cc = std::clamp(c, -1.0, 1.0);
      if (std::acos(cc) + margin >= std::numbers::pi) return 0.0;
      // sin(theta) floored so the derivative stays finite at c = 1.
      const double sin_t = std::sqrt(std::max(1e-12, 1.0 - cc * cc));
      return std::cos(margin) + cc * std::sin(margin) / sin_t;
    }
    case LossKind::kASoftmax:
      return 4.0 * std::abs(c);
    default:
      throw ConfigError("margin_transform: " + to_string(kind) +
                        " is not a softmax-family loss");
  }
}

// ---- prototypes -----------------------------------------------------------

PrototypeMatrix::PrototypeMatrix(std::size_t n_classes, std::size_t dim,
                                 std::uint64_t seed) {
  if (n_classes == 0 || dim < 2) {
    throw ConfigError("prototype matrix needs >= 1 class and dim >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(n_classes * dim);
  for (std::size_t r = 0; r < n_classes; ++r) {
    std::span<double> row(w.data() + r * dim, dim);
    for (double& v : row) v = normal(rng);
    const double n = l2_norm(row);
    for (double& v : row) v /= n;
  }
  weight_ = Tensor::matrix(n_classes, dim, std::move(w), true);
}

PrototypeMatrix::PrototypeMatrix(Tensor weight) : weight_(std::move(weight)) {
  if (weight_.rank() != 2) {
    throw DimensionError("prototype matrix must be rank 2, got " +
                         shape_str(weight_.shape()));
  }
}

Tensor PrototypeMatrix::normalized_values() const {
  NoGradGuard guard;
  return normalize_rows(weight_);
}

// ---- softmax head ---------------------------------------------------------

namespace {

struct HeadShape {
  std::size_t rows;
  std::size_t cols;
};

HeadShape check_head(const Tensor& cosines, std::span<const std::size_t> targets,
                     const LogitMask& mask) {
  if (cosines.rank() != 2) {
    throw DimensionError("cross entropy expects a [B x C] cosine matrix, got " +
                         shape_str(cosines.shape()));
  }
  const std::size_t b = cosines.rows(), c = cosines.cols();
  if (targets.size() != b) {
    throw ContractError("cross entropy: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(b) + " rows");
  }
  for (std::size_t t : targets) {
    if (t >= c) {
      throw ContractError("label " + std::to_string(t) + " out of range [0, " +
                          std::to_string(c) + ")");
    }
  }
  if (!mask.empty() && mask.size() != b * c) {
    throw DimensionError("cross entropy: mask size does not match cosines");
  }
  return {b, c};
}

// Fills probabilities and returns per-row losses.
std::vector<double> softmax_rows(const Tensor& cosines,
                                 std::span<const std::size_t> targets,
                                 const LogitMask& mask, double s,
                                 LossKind kind, double margin,
                                 std::vector<double>& probs) {
  const auto [b, c] = check_head(cosines, targets, mask);
  probs.assign(b * c, 0.0);
  std::vector<double> losses(b);
  std::vector<double> z(c);
  const auto cos = cosines.data();
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t t = targets[i];
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      const bool keep = j == t || mask.empty() || mask[i * c + j];
      if (!keep) continue;
      const double cv = cos[i * c + j];
      z[j] = s * (j == t ? margin_transform(cv, kind, margin) : cv);
      zmax = std::max(zmax, z[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const bool keep = j == t || mask.empty() || mask[i * c + j];
      if (!keep) continue;
      probs[i * c + j] = std::exp(z[j] - zmax);
      denom += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= denom;
    losses[i] = zmax + std::log(denom) - z[t];
  }
  return losses;
}

}  // namespace

std::vector<double> margin_softmax_probabilities(
    const Tensor& cosines, std::span<const std::size_t> targets,
    const LogitMask& mask, double scale, LossKind kind, double margin) {
  std::vector<double> probs;
  softmax_rows(cosines, targets, mask, scale, kind, margin, probs);
  return probs;
}

Tensor margin_cross_entropy(const Tensor& cosines,
                            std::span<const std::size_t> targets,
                            const LogitMask& mask, double scale,
                            LossKind kind, double margin) {
  std::vector<double> probs;
  const auto losses =
      softmax_rows(cosines, targets, mask, scale, kind, margin, probs);
  const std::size_t b = cosines.rows(), c = cosines.cols();
  double total = 0.0;
  for (double l : losses) total += l;
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return Tensor::make_result(
      "margin_cross_entropy", {1}, {total / static_cast<double>(b)}, {cosines},
      [b, c, scale, kind, margin, probs = std::move(probs),
       tgt = std::move(tgt)](detail::Node& self) {
        auto& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        auto& g = parent.ensure_grad();
        const double up = self.grad[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const std::size_t k = i * c + j;
            if (j == tgt[i]) {
              g[k] += up * (probs[k] - 1.0) * scale *
                      margin_transform_derivative(parent.data[k], kind, margin);
            } else {
              g[k] += up * probs[k] * scale;  // masked entries have p = 0
            }
          }
        }
      });
}

Tensor logits_conventional(const Tensor& features, const PrototypeMatrix& w) {
  if (features.rank() != 2 || features.cols() != w.dim()) {
    throw DimensionError("logits: features " + shape_str(features.shape()) +
                         " vs prototypes " + shape_str(w.weight().shape()));
  }
  return matmul(features, transpose(normalize_rows(w.weight())));
}

namespace {

// beta * mean_i (alpha - ||w_{y_i}||) on raw prototype rows.
Tensor prototype_constraint_term(const Tensor& weight,
                                 std::span<const std::size_t> labels,
                                 double alpha, double beta) {
  const std::size_t d = weight.cols();
  const double b = static_cast<double>(labels.size());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  std::vector<double> norms(lab.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    norms[i] = l2_norm(weight.row(lab[i]));
    total += beta * (alpha - norms[i]);
  }
  return Tensor::make_result(
      "prototype_constraint", {1}, {total / b}, {weight},
      [d, b, beta, lab = std::move(lab),
       norms = std::move(norms)](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < lab.size(); ++i) {
          if (norms[i] == 0.0) continue;
          const double f = -self.grad[0] * beta / (b * norms[i]);
          for (std::size_t j = 0; j < d; ++j)
            g[lab[i] * d + j] += f * p.data[lab[i] * d + j];
        }
      });
}

}  // namespace

Tensor classification_loss(const Tensor& features,
                           std::span<const std::size_t> labels,
                           const PrototypeMatrix& w, const LossConfig& cfg) {
  cfg.validate();
  if (!is_margin_softmax(cfg.kind)) {
    throw ConfigError("classification_loss: " + to_string(cfg.kind) +
                      " is an embedding loss");
  }
  Tensor cos = logits_conventional(features, w);
  Tensor loss = margin_cross_entropy(cos, labels, {}, cfg.scale, cfg.kind, cfg.margin);
  if (cfg.has_prototype_constraint()) {
    loss = add(loss, prototype_constraint_term(w.weight(), labels, cfg.alpha, cfg.beta));
  }
  return loss;
}

namespace {

LogitMask queue_mask(std::span<const std::int64_t> ids, const GalleryQueue& queue,
                     std::size_t leading) {
  const std::size_t k = queue.filled();
  const std::size_t c = leading + k;
  LogitMask mask(ids.size() * c, 1);
  const auto qids = queue.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (qids[j] != kSentinelId && qids[j] == ids[i]) mask[i * c + leading + j] = 0;
    }
  }
  return mask;
}

void check_pair_rows(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " must match");
  }
}

}  // namespace

Tensor sst_loss(const Tensor& probe_feats, const Tensor& gallery_feats,
                std::span<const std::int64_t> ids, const GalleryQueue& queue,
                const LossConfig& cfg) {
  cfg.validate();
  if (!is_margin_softmax(cfg.kind)) {
    throw ConfigError("sst_loss: " + to_string(cfg.kind) + " is an embedding loss");
  }
  check_pair_rows("sst_loss", probe_feats, gallery_feats);
  if (ids.size() != probe_feats.rows()) {
    throw ContractError("sst_loss: id count does not match batch size");
  }
  if (queue.dim() != probe_feats.cols()) {
    throw DimensionError("sst_loss: queue dim " + std::to_string(queue.dim()) +
                         " vs feature dim " + std::to_string(probe_feats.cols()));
  }
  Tensor pos = rowwise_dot(probe_feats, gallery_feats);
  Tensor cos = queue.filled() == 0
                   ? pos
                   : concat_cols(pos, matmul(probe_feats, transpose(queue.as_matrix())));
  const std::vector<std::size_t> targets(ids.size(), 0);
  const LogitMask mask = queue.filled() == 0 ? LogitMask{} : queue_mask(ids, queue, 1);
  Tensor loss = margin_cross_entropy(cos, targets, mask, cfg.scale, cfg.kind, cfg.margin);
  if (cfg.has_prototype_constraint()) {
    // Gallery features stand in for w_y; their norms are data, not parameters.
    double total = 0.0;
    for (std::size_t i = 0; i < gallery_feats.rows(); ++i)
      total += cfg.beta * (cfg.alpha - l2_norm(gallery_feats.row(i)));
    loss = add(loss, Tensor::scalar(total / static_cast<double>(gallery_feats.rows())));
  }
  return loss;
}

// ---- embedding losses -----------------------------------------------------

Tensor contrastive_loss(const Tensor& anchors, const Tensor& pairs,
                        std::span<const std::uint8_t> same_id, double margin) {
  check_pair_rows("contrastive_loss", anchors, pairs);
  const std::size_t n = anchors.rows(), d = anchors.cols();
  if (same_id.size() != n) {
    throw ContractError("contrastive_loss: " + std::to_string(same_id.size()) +
                        " flags for " + std::to_string(n) + " pairs");
  }
  std::vector<std::uint8_t> same(same_id.begin(), same_id.end());
  std::vector<double> dist(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = anchors.at(i, j) - pairs.at(i, j);
      sq += diff * diff;
    }
    dist[i] = std::sqrt(sq);
    const double hinge = std::max(0.0, margin - dist[i]);
    total += same[i] ? sq : hinge * hinge;
  }
  return Tensor::make_result(
      "contrastive", {1}, {total / static_cast<double>(n)}, {anchors, pairs},
      [n, d, margin, same = std::move(same),
       dist = std::move(dist)](detail::Node& self) {
        const auto& a = self.parents[0]->data;
        const auto& p = self.parents[1]->data;
        auto* ga = self.parents[0]->requires_grad ? &self.parents[0]->ensure_grad() : nullptr;
        auto* gp = self.parents[1]->requires_grad ? &self.parents[1]->ensure_grad() : nullptr;
        const double up = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          // d(loss_i)/d(a - p)
          double coeff;
          if (same[i]) {
            coeff = 2.0;
          } else {
            if (dist[i] >= margin || dist[i] == 0.0) continue;
            coeff = -2.0 * (margin - dist[i]) / dist[i];
          }
          for (std::size_t j = 0; j < d; ++j) {
            const double g = up * coeff * (a[i * d + j] - p[i * d + j]);
            if (ga) (*ga)[i * d + j] += g;
            if (gp) (*gp)[i * d + j] -= g;
          }
        }
      });
}

Tensor triplet_loss(const Tensor& anchors, const Tensor& positives,
                    const Tensor& negatives, double margin) {
  check_pair_rows("triplet_loss", anchors, positives);
  check_pair_rows("triplet_loss", anchors, negatives);
  const std::size_t n = anchors.rows(), d = anchors.cols();
  std::vector<std::uint8_t> active(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dp = 0.0, dn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = anchors.at(i, j) - positives.at(i, j);
      const double y = anchors.at(i, j) - negatives.at(i, j);
      dp += x * x;
      dn += y * y;
    }
    const double v = dp - dn + margin;
    active[i] = v > 0.0;
    if (active[i]) total += v;
  }
  return Tensor::make_result(
      "triplet", {1}, {total / static_cast<double>(n)},
      {anchors, positives, negatives},
      [n, d, active = std::move(active)](detail::Node& self) {
        const auto& a = self.parents[0]->data;
        const auto& p = self.parents[1]->data;
        const auto& q = self.parents[2]->data;
        std::vector<double>* g[3];
        for (int k = 0; k < 3; ++k)
          g[k] = self.parents[k]->requires_grad ? &self.parents[k]->ensure_grad() : nullptr;
        const double up = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          if (!active[i]) continue;
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t k = i * d + j;
            // d/da = 2(a-p) - 2(a-n) = 2(n-p)
            if (g[0]) (*g[0])[k] += up * 2.0 * (q[k] - p[k]);
            if (g[1]) (*g[1])[k] += up * -2.0 * (a[k] - p[k]);
            if (g[2]) (*g[2])[k] += up * 2.0 * (a[k] - q[k]);
          }
        }
      });
}

Tensor npairs_loss(const Tensor& anchors, const Tensor& positives, double scale,
                   const GalleryQueue* queue, std::span<const std::int64_t> ids) {
  check_pair_rows("npairs_loss", anchors, positives);
  const std::size_t b = anchors.rows();
  if (!queue && b < 2) {
    throw ContractError("npairs_loss needs B >= 2 for in-batch negatives");
  }
  Tensor cos = matmul(anchors, transpose(positives));
  std::vector<std::size_t> targets(b);
  for (std::size_t i = 0; i < b; ++i) targets[i] = i;
  LogitMask mask;
  if (queue && queue->filled() > 0) {
    if (ids.size() != b) throw ContractError("npairs_loss: ids required with a queue");
    cos = concat_cols(cos, matmul(anchors, transpose(queue->as_matrix())));
    mask = queue_mask(ids, *queue, b);
  }
  return margin_cross_entropy(cos, targets, mask, scale, LossKind::kSoftmax, 0.0);
}

Tensor embedding_loss(const Tensor& probe_feats, const Tensor& gallery_feats,
                      std::span<const std::int64_t> ids,
                      const GalleryQueue* queue, const LossConfig& cfg) {
  cfg.validate();
  check_pair_rows("embedding_loss", probe_feats, gallery_feats);
  const std::size_t b = probe_feats.rows();
  if (ids.size() != b) throw ContractError("embedding_loss: id count != batch size");
  if (cfg.kind == LossKind::kNPairs) {
    return npairs_loss(probe_feats, gallery_feats, cfg.scale, queue, ids);
  }
  if (cfg.kind != LossKind::kContrastive && cfg.kind != LossKind::kTriplet) {
    throw ConfigError("embedding_loss: " + to_string(cfg.kind) + " is not an embedding loss");
  }
  // Build (anchor index, positive index, negative source) lists.
  std::vector<std::size_t> anchor_idx, pos_idx, neg_idx;
  Tensor neg_source;
  if (queue) {
    neg_source = queue->as_matrix();
    const auto qids = queue->ids();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < qids.size(); ++j) {
        if (qids[j] != kSentinelId && qids[j] == ids[i]) continue;
        anchor_idx.push_back(i);
        pos_idx.push_back(i);
        neg_idx.push_back(j);
      }
    }
  } else {
    if (b < 2) throw ContractError("embedding_loss needs B >= 2 without a queue");
    neg_source = gallery_feats;
    for (std::size_t i = 0; i < b; ++i) {
      anchor_idx.push_back(i);
      pos_idx.push_back(i);
      neg_idx.push_back((i + 1) % b);
    }
  }
  if (cfg.kind == LossKind::kTriplet) {
    if (anchor_idx.empty()) throw ContractError("embedding_loss: no negatives available");
    return triplet_loss(gather_rows(probe_feats, anchor_idx),
                        gather_rows(gallery_feats, pos_idx),
                        gather_rows(neg_source, neg_idx), cfg.margin);
  }
  // Contrastive: every positive pair plus every negative pair.
  std::vector<std::size_t> all_anchor, all_pair_row;
  std::vector<std::uint8_t> flags;
  for (std::size_t i = 0; i < b; ++i) {
    all_anchor.push_back(i);
    all_pair_row.push_back(i);
    flags.push_back(1);
  }
  Tensor pair_positives = gather_rows(gallery_feats, all_pair_row);
  if (anchor_idx.empty()) {
    return contrastive_loss(gather_rows(probe_feats, all_anchor), pair_positives,
                            flags, cfg.margin);
  }
  all_anchor.insert(all_anchor.end(), anchor_idx.begin(), anchor_idx.end());
  flags.insert(flags.end(), anchor_idx.size(), 0);
  Tensor pair_rows = concat_rows(pair_positives, gather_rows(neg_source, neg_idx));
  return contrastive_loss(gather_rows(probe_feats, all_anchor), pair_rows, flags,
                          cfg.margin);
}

}  // namespace sst
