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
#include <vector>

#include "sst/optim.hpp"
#include "sst/tensor.hpp"

namespace sst {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims = {64};
  std::size_t embed_dim = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError when a dimension is zero or embed_dim < 2.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Feed-forward relu MLP whose output rows are L2-normalized embeddings.
// Parameter `layer<i>.weight` has shape [fan_in x fan_out] and is applied as
// x * W + b.
class Encoder {
 public:
  // He-uniform weights, zero biases, fully determined by config.seed.
  explicit Encoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  std::vector<NamedTensor>& params() { return params_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::size_t parameter_count() const;

  // batch: [B x input_dim]. With grad=false no graph is recorded.
  Tensor forward(const Tensor& batch, bool grad) const;

  // Deep copy with independent parameter storage (and zero forward count).
  Encoder clone() const;

  void zero_grad();
  void clear_grad();

  // Number of forward() calls made on this instance.
  std::size_t forward_calls() const { return forward_calls_; }

 private:
  EncoderConfig config_;
  std::vector<NamedTensor> params_;
  mutable std::size_t forward_calls_ = 0;
};

inline Encoder init_encoder(const EncoderConfig& config) {
  return Encoder(config);
}

// Euclidean norm of the concatenated parameter differences.
double param_distance(const Encoder& a, const Encoder& b);
// Differentiable version, grad flows into whichever side requires it.
Tensor param_distance_tensor(const Encoder& a, const Encoder& b);

// Binary checkpoint: magic "SSTENC1", config block, then every parameter in
// declared order as little-endian float64.
void save_encoder(const Encoder& enc, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace sst
