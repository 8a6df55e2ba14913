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

#include <filesystem>
#include <string>
#include <vector>

#include "sst/encoder.hpp"
#include "sst/optim.hpp"

namespace sst {

// How the gallery-set encoder follows the probe-set encoder.
class UpdateMode {
 public:
  enum class Kind { kFullySiamese, kNetworkConstraint, kMovingAverage };

  static UpdateMode fully_siamese();
  // lambda >= 0 weighs lambda * ||gallery - probe|| in the loss.
  static UpdateMode network_constraint(double lambda);
  // gallery <- m * gallery + (1 - m) * probe after each probe step; m in [0, 1].
  static UpdateMode moving_average(double m);

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  double momentum() const { return m_; }
  std::string name() const;
  bool operator==(const UpdateMode&) const = default;

 private:
  UpdateMode(Kind kind, double lambda, double m)
      : kind_(kind), lambda_(lambda), m_(m) {}
  Kind kind_;
  double lambda_ = 0.0;
  double m_ = 0.0;
};

// gallery <- m * gallery + (1 - m) * probe, per parameter.
void moving_average_update(Encoder& gallery, const Encoder& probe, double m);

struct PairFeatures {
  Tensor gallery;  // detached
  Tensor probe;    // on the tape
};

// Probe-set and gallery-set encoders of identical architecture. Both start as
// the same parameters; the update mode decides how they drift apart.
class SiamesePair {
 public:
  SiamesePair(Encoder enc, UpdateMode mode);

  Encoder& probe_net() { return probe_; }
  const Encoder& probe_net() const { return probe_; }
  Encoder& gallery_net() { return gallery_; }
  const Encoder& gallery_net() const { return gallery_; }
  const UpdateMode& mode() const { return mode_; }

  // Row i of both batches must belong to the same identity. Gallery features
  // come from the gallery net without a graph; probe features carry one.
  PairFeatures encode_pair(const Tensor& gallery_batch,
                           const Tensor& probe_batch) const;

  // lambda * ||gallery - probe||, differentiable w.r.t. both nets.
  // Only valid under NetworkConstraint.
  Tensor constraint_penalty() const;

  // One optimizer step for the probe net, then the mode-specific gallery
  // update. Probe grads must be populated (and gallery grads as well under
  // NetworkConstraint).
  void apply_update(double lr, const SgdHyper& hyper);

  void zero_grad();
  double distance() const { return param_distance(probe_, gallery_); }

 private:
  Encoder probe_;
  Encoder gallery_;
  UpdateMode mode_;
  SgdState probe_opt_;
  SgdState gallery_opt_;
};

// Writes <dir>/pair.manifest plus probe.enc and gallery.enc next to it.
void save_pair(const SiamesePair& pair, const std::filesystem::path& dir,
               const std::vector<std::string>& echo = {});
SiamesePair load_pair(const std::filesystem::path& manifest);

}  // namespace sst
