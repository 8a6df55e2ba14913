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

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sst/tensor.hpp"

namespace sst::testing {

inline Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                            double lo = -2.0, double hi = 2.0, bool grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, std::move(v), grad);
}

inline Tensor random_unit_rows(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      v[i * c + j] = n(rng);
      s += v[i * c + j] * v[i * c + j];
    }
    s = std::sqrt(s);
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] /= s;
  }
  return Tensor::matrix(r, c, std::move(v));
}

// Central differences of f() w.r.t. every entry of `t`.
inline std::vector<double> numeric_grad(const std::function<double()>& f, Tensor& t,
                                        double h = 1e-6) {
  std::vector<double> g(t.numel());
  auto data = t.mutable_data();
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double old = data[i];
    data[i] = old + h;
    const double up = f();
    data[i] = old - h;
    const double down = f();
    data[i] = old;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double d2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    d2 += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    a2 += analytic[i] * analytic[i];
    n2 += numeric[i] * numeric[i];
  }
  const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
  return scale < 1e-14 ? 0.0 : std::sqrt(d2) / scale;
}

// Largest per-tensor relative error between backward() and central
// differences. build(true) must return a graph, build(false) a plain value.
inline double max_grad_error(const std::function<Tensor(bool)>& build,
                             std::vector<Tensor*> params, double h = 1e-6) {
  for (auto* p : params) p->zero_grad();
  backward(build(true));
  double worst = 0.0;
  for (auto* p : params) {
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    const auto numeric = numeric_grad([&] { return build(false).item(); }, *p, h);
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace sst::testing
