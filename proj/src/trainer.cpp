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

#include "sst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sst/errors.hpp"
#include "sst/eval.hpp"
#include "sst/version.hpp"

namespace sst {

namespace {

struct VariantName {
  Variant v;
  const char* name;
};

constexpr VariantName kVariants[] = {
    {Variant::kOrg, "Org"}, {Variant::kA, "A"}, {Variant::kB, "B"},
    {Variant::kC, "C"},     {Variant::kD, "D"}, {Variant::kSst, "SST"},
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& vn : kVariants) {
    if (vn.v == v) return vn.name;
  }
  throw ConfigError("unknown variant");
}

Variant parse_variant(const std::string& name) {
  for (const auto& vn : kVariants) {
    if (name == vn.name) return vn.v;
  }
  throw ConfigError("unknown variant '" + name + "' (expected Org, A, B, C, D or SST)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::kOrg, Variant::kA, Variant::kB,
                                         Variant::kC,   Variant::kD, Variant::kSst};
  return v;
}

bool uses_queue(Variant v) {
  return v == Variant::kC || v == Variant::kD || v == Variant::kSst;
}

double LrSchedule::at(long step) const {
  double lr = initial;
  for (long m : milestones) {
    if (step >= m) lr *= factor;
  }
  return lr;
}

void TrainConfig::validate() const {
  encoder.validate();
  effective_loss().validate();
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (total_steps < 0) throw ConfigError("train: steps must be >= 0");
  if (!(lr.initial >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (!(lr.factor > 0.0)) throw ConfigError("train: lr_factor must be > 0");
  if (!std::is_sorted(lr.milestones.begin(), lr.milestones.end())) {
    throw ConfigError("train: lr milestones must be ascending");
  }
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) {
    throw ConfigError("train: momentum must lie in [0, 1)");
  }
  if (!(sgd.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (uses_queue(variant) && queue_size == 0) {
    throw ConfigError("train: queue_size must be >= 1");
  }
  if (variant == Variant::kA && !is_margin_softmax(loss.kind)) {
    throw ConfigError("variant A (prototype constraint) needs a softmax-family loss, got " +
                      to_string(loss.kind));
  }
  update_mode();  // validates m / lambda
}

UpdateMode TrainConfig::update_mode() const {
  switch (variant) {
    case Variant::kOrg:
    case Variant::kA:
    case Variant::kC:
      return UpdateMode::fully_siamese();
    case Variant::kB:
    case Variant::kD:
      return UpdateMode::network_constraint(nc_lambda);
    case Variant::kSst:
      return UpdateMode::moving_average(ma_momentum);
  }
  throw ConfigError("unknown variant");
}

LossConfig TrainConfig::effective_loss() const {
  LossConfig l = loss;
  if (variant == Variant::kA) l.prototype_constraint = true;
  return l;
}

std::vector<double> MetricsLog::losses() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.loss);
  return out;
}

bool MetricsLog::operator==(const MetricsLog& o) const {
  if (steps.size() != o.steps.size() || fc_logit_evaluations != o.fc_logit_evaluations ||
      queue_enqueued != o.queue_enqueued) {
    return false;
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& a = steps[i];
    const auto& b = o.steps[i];
    if (a.step != b.step || a.loss != b.loss || a.lr != b.lr ||
        a.param_distance != b.param_distance || a.queue_filled != b.queue_filled ||
        a.enqueued != b.enqueued) {
      return false;
    }
  }
  return true;
}

TrainResult train(const TrainConfig& cfg, const ShallowDataset& ds) {
  cfg.validate();
  if (ds.input_dim != cfg.encoder.input_dim) {
    throw ConfigError("train: dataset input_dim " + std::to_string(ds.input_dim) +
                      " != encoder input_dim " + std::to_string(cfg.encoder.input_dim));
  }
  const LossConfig loss_cfg = cfg.effective_loss();
  const bool softmax_family = is_margin_softmax(loss_cfg.kind);
  const bool queue_variant = uses_queue(cfg.variant);
  const bool constrained = cfg.update_mode().kind() == UpdateMode::Kind::kNetworkConstraint;
  const bool shared_net = cfg.variant == Variant::kOrg || cfg.variant == Variant::kA;

  BatchSampler sampler(ds, cfg.batch_size, splitmix(cfg.seed));
  TrainResult result{SiamesePair(Encoder(cfg.encoder), cfg.update_mode()),
                     std::nullopt, std::nullopt, {}};
  const std::size_t d = cfg.encoder.embed_dim;
  if (queue_variant) {
    result.queue.emplace(cfg.queue_size, d, splitmix(cfg.seed + 1));
  } else if (softmax_family) {
    result.prototypes.emplace(sampler.index().n_ids(), d, splitmix(cfg.seed + 2));
  }
  std::vector<NamedTensor> proto_params;
  if (result.prototypes) proto_params.push_back({"prototypes", result.prototypes->weight()});
  SgdState proto_opt;

  SiamesePair& pair = result.pair;
  MetricsLog& log = result.log;
  for (long step = 0; step < cfg.total_steps; ++step) {
    const double lr = cfg.lr.at(step);
    Batch batch = sampler.next();
    std::vector<std::size_t> classes;
    classes.reserve(batch.ids.size());
    for (auto id : batch.ids) classes.push_back(sampler.index().class_of(id));

    Tensor gallery_feats, probe_feats;
    if (shared_net) {
      // One network embeds both roles and both carry gradients.
      gallery_feats = pair.probe_net().forward(batch.gallery, true);
      probe_feats = pair.probe_net().forward(batch.probe, true);
    } else {
      auto feats = pair.encode_pair(batch.gallery, batch.probe);
      gallery_feats = feats.gallery;
      probe_feats = feats.probe;
    }

    Tensor loss;
    if (queue_variant) {
      loss = softmax_family
                 ? sst_loss(probe_feats, gallery_feats, batch.ids, *result.queue, loss_cfg)
                 : embedding_loss(probe_feats, gallery_feats, batch.ids, &*result.queue,
                                  loss_cfg);
    } else if (softmax_family) {
      std::vector<std::size_t> labels = classes;
      labels.insert(labels.end(), classes.begin(), classes.end());
      loss = classification_loss(concat_rows(gallery_feats, probe_feats), labels,
                                 *result.prototypes, loss_cfg);
      ++log.fc_logit_evaluations;
    } else {
      loss = embedding_loss(probe_feats, gallery_feats, batch.ids, nullptr, loss_cfg);
    }
    const double task_loss = loss.item();
    if (!std::isfinite(task_loss)) {
      throw DivergenceError("loss became non-finite at step " + std::to_string(step), step);
    }
    if (constrained) loss = add(loss, pair.constraint_penalty());

    pair.zero_grad();
    for (auto& p : proto_params) p.value.zero_grad();
    backward(loss);
    try {
      pair.apply_update(lr, cfg.sgd);
      if (!proto_params.empty()) proto_opt.step(proto_params, lr, cfg.sgd);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(step), step);
    }

    StepRecord rec;
    rec.step = step;
    rec.loss = task_loss;
    rec.lr = lr;
    rec.param_distance = pair.distance();
    if (queue_variant) {
      result.queue->enqueue_batch(gallery_feats, batch.ids);
      rec.enqueued = batch.ids.size();
      rec.queue_filled = result.queue->filled();
      log.queue_enqueued += rec.enqueued;
    }
    log.steps.push_back(rec);
  }
  return result;
}

double oscillation_metric(std::span<const double> history, std::size_t window) {
  if (window < 2) throw ContractError("oscillation window must be >= 2");
  if (history.size() < window) {
    throw ContractError("oscillation: history shorter than the window");
  }
  const std::size_t n = history.size() - window + 1;
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double mu = 0.0;
    for (std::size_t i = s; i < s + window; ++i) mu += history[i];
    mu /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t i = s; i < s + window; ++i) var += (history[i] - mu) * (history[i] - mu);
    total += std::sqrt(var / static_cast<double>(window));
  }
  return total / static_cast<double>(n);
}

Histogram prototype_histogram(std::span<const double> entries, std::size_t bins,
                              double lo, double hi) {
  if (bins < 3) throw ContractError("histogram needs >= 3 bins");
  if (!(hi > lo)) throw ContractError("histogram range must be non-empty");
  if (entries.empty()) throw ContractError("histogram source is empty");
  Histogram h;
  h.count = entries.size();
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + width * static_cast<double>(b));
  h.density.assign(bins, 0.0);
  std::size_t zeros = 0;
  for (double v : entries) {
    if (std::abs(v) < kZeroCutoff) ++zeros;
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b == bins) b = bins - 1;
    h.density[b] += 1.0;
  }
  const double n = static_cast<double>(entries.size());
  for (double& v : h.density) v /= n * width;
  h.zero_fraction = static_cast<double>(zeros) / n;
  return h;
}

Histogram prototype_histogram(const PrototypeMatrix& w, std::size_t bins, double lo,
                              double hi) {
  return prototype_histogram(w.weight().data(), bins, lo, hi);
}

Histogram prototype_histogram(const GalleryQueue& q, std::size_t bins, double lo,
                              double hi) {
  return prototype_histogram(q.raw_features(), bins, lo, hi);
}

Histogram final_prototype_histogram(const TrainResult& r, std::size_t bins) {
  if (r.prototypes) return prototype_histogram(*r.prototypes, bins, -1.0, 1.0);
  if (r.queue) return prototype_histogram(*r.queue, bins, -1.0, 1.0);
  throw ContractError("trained model has no prototype source (embedding loss without queue)");
}

double training_rank1(const TrainResult& r, const ShallowDataset& ds) {
  const auto records = ds.records_of(Split::kTrain);
  const FeatureSet set = extract_features(r.probe_net(), ds, records);
  if (r.prototypes) {
    const TrainIndex index(ds);
    std::vector<std::size_t> labels;
    for (auto id : set.ids) labels.push_back(index.class_of(id));
    return prototype_rank1(set.features, labels, *r.prototypes);
  }
  std::vector<std::size_t> g_rows, p_rows;
  std::vector<std::int64_t> g_ids, p_ids;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    if (set.roles[i] == Role::kGallery) {
      g_rows.push_back(i);
      g_ids.push_back(set.ids[i]);
    } else {
      p_rows.push_back(i);
      p_ids.push_back(set.ids[i]);
    }
  }
  return rank1_identification(gather_rows(set.features, g_rows), g_ids,
                              gather_rows(set.features, p_rows), p_ids);
}

void write_metrics_jsonl(const MetricsLog& log, const std::vector<std::string>& echo,
                         const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json meta = {{"type", "meta"},
                         {"tool", kToolName},
                         {"version", kVersion},
                         {"config", echo},
                         {"fc_logit_evaluations", log.fc_logit_evaluations},
                         {"queue_enqueued", log.queue_enqueued}};
  os << meta.dump() << '\n';
  for (const auto& s : log.steps) {
    nlohmann::json j = {{"type", "step"},
                        {"step", s.step},
                        {"loss", s.loss},
                        {"lr", s.lr},
                        {"param_distance", s.param_distance},
                        {"queue_filled", s.queue_filled},
                        {"enqueued", s.enqueued}};
    os << j.dump() << '\n';
  }
}

void write_histogram_csv(const Histogram& h, const std::vector<std::string>& echo,
                         const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "# " << kToolName << ' ' << kVersion << '\n';
  for (const auto& line : echo) os << "# " << line << '\n';
  os << "# zero_fraction=" << h.zero_fraction << " count=" << h.count << '\n';
  os << "bin_left,bin_right,density\n";
  os.precision(17);
  for (std::size_t b = 0; b < h.density.size(); ++b) {
    os << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.density[b] << '\n';
  }
}

}  // namespace sst
