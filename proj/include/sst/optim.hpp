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

#include <span>
#include <string>
#include <vector>

#include "sst/tensor.hpp"

namespace sst {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct SgdHyper {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// Classic momentum SGD with L2 weight decay folded into the gradient:
//   buf <- momentum * buf + grad + weight_decay * param
//   param <- param - lr * buf
// Buffers are created lazily on the first step and keyed by position, so the
// same parameter list must be passed every time.
class SgdState {
 public:
  void step(std::span<NamedTensor> params, double lr, const SgdHyper& hyper);
  void reset() { buffers_.clear(); }
  const std::vector<std::vector<double>>& buffers() const { return buffers_; }

 private:
  std::vector<std::vector<double>> buffers_;
};

}  // namespace sst
