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

#include "sst/optim.hpp"

#include <cmath>

#include "sst/errors.hpp"

namespace sst {

void SgdState::step(std::span<NamedTensor> params, double lr,
                    const SgdHyper& hyper) {
  if (!(lr >= 0.0)) throw ConfigError("sgd: learning rate must be >= 0");
  if (!(hyper.momentum >= 0.0 && hyper.momentum < 1.0)) {
    throw ConfigError("sgd: momentum must lie in [0, 1)");
  }
  if (!(hyper.weight_decay >= 0.0)) {
    throw ConfigError("sgd: weight_decay must be >= 0");
  }
  if (buffers_.empty()) {
    buffers_.reserve(params.size());
    for (const auto& p : params) buffers_.emplace_back(p.value.numel(), 0.0);
  } else if (buffers_.size() != params.size()) {
    throw ContractError("sgd: parameter list changed between steps");
  }
  // Validate everything before touching any parameter.
  for (const auto& p : params) {
    if (!p.value.has_grad()) {
      throw ContractError("sgd: parameter '" + p.name + "' has no gradient");
    }
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("sgd: non-finite gradient in parameter '" +
                                  p.name + "'",
                              -1);
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& t = params[k].value;
    auto& buf = buffers_[k];
    if (buf.size() != t.numel()) {
      throw ContractError("sgd: shape of '" + params[k].name + "' changed");
    }
    auto data = t.mutable_data();
    const auto grad = t.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      buf[i] = hyper.momentum * buf[i] + grad[i] + hyper.weight_decay * data[i];
      data[i] -= lr * buf[i];
    }
  }
}

}  // namespace sst
