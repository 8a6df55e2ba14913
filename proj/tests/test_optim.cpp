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

#include <doctest.h>

#include <cmath>
#include <limits>

#include "sst/errors.hpp"
#include "sst/optim.hpp"

using namespace sst;

namespace {

NamedTensor param(std::vector<double> v, std::vector<double> g) {
  NamedTensor p{"p", Tensor::vector(std::move(v), true)};
  p.value.zero_grad();
  backward(sum(mul(p.value, Tensor::vector(std::move(g)))));
  return p;
}

}  // namespace

TEST_CASE("plain step arithmetic") {
  std::vector<NamedTensor> ps = {param({1.0}, {2.0})};
  SgdState opt;
  opt.step(ps, 0.1, {0.0, 0.0});
  CHECK(ps[0].value[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  std::vector<NamedTensor> ps = {param({1.0, -3.0}, {5.0, 7.0})};
  SgdState opt;
  opt.step(ps, 0.0, {0.9, 5e-4});
  CHECK(ps[0].value[0] == 1.0);
  CHECK(ps[0].value[1] == -3.0);
}

TEST_CASE("momentum and weight decay follow the recurrence") {
  // Independent recomputation of buf <- m buf + g + wd p; p <- p - lr buf.
  const double m = 0.9, wd = 0.01, lr = 0.05;
  std::vector<NamedTensor> ps = {param({0.5}, {1.0})};
  SgdState opt;
  double p = 0.5, buf = 0.0;
  for (int step = 0; step < 5; ++step) {
    opt.step(ps, lr, {m, wd});
    buf = m * buf + 1.0 + wd * p;
    p -= lr * buf;
    CHECK(ps[0].value[0] == doctest::Approx(p).epsilon(1e-14));
  }
}

TEST_CASE("invalid hyperparameters and missing grads") {
  std::vector<NamedTensor> ps = {param({1.0}, {1.0})};
  SgdState opt;
  CHECK_THROWS_AS(opt.step(ps, 0.1, {1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(opt.step(ps, 0.1, {0.5, -1.0}), ConfigError);
  CHECK_THROWS_AS(opt.step(ps, -0.1, {0.5, 0.0}), ConfigError);
  std::vector<NamedTensor> no_grad = {{"q", Tensor::vector({1.0}, true)}};
  CHECK_THROWS_AS(opt.step(no_grad, 0.1, {}), ContractError);
}

TEST_CASE("non-finite gradient aborts before touching anything") {
  std::vector<NamedTensor> ps = {param({1.0}, {1.0}),
                                 param({2.0}, {std::numeric_limits<double>::quiet_NaN()})};
  SgdState opt;
  try {
    opt.step(ps, 0.1, {0.0, 0.0});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("p") != std::string::npos);
  }
  CHECK(ps[0].value[0] == 1.0);
}
