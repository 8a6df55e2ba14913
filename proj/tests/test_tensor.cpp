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
#include <random>
#include <set>

#include "sst/errors.hpp"
#include "sst/tensor.hpp"
#include "support.hpp"

using namespace sst;
using sst::testing::max_grad_error;
using sst::testing::numeric_grad;
using sst::testing::random_matrix;
using sst::testing::relative_error;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor id = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor b = Tensor::matrix(2, 2, {5, 6, 7, 8});
  CHECK(values(matmul(id, b)) == std::vector<double>{5, 6, 7, 8});
  const Tensor r = matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r.item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(A x B) w.r.t. A is ones x B^T") {
  std::mt19937_64 rng(1);
  Tensor a = random_matrix(3, 4, rng, -2, 2, true);
  const Tensor b = random_matrix(4, 5, rng);
  backward(sum(matmul(a, b)));
  // ones[3x5] * B^T: every row equals the row sums of B.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < 5; ++j) row_sum += b.at(k, j);
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(row_sum).epsilon(1e-12));
    }
  }
  const auto numeric = numeric_grad([&] { return sum(matmul(a, b)).item(); }, a);
  CHECK(relative_error(a.grad(), numeric) <= 1e-8);
}

TEST_CASE("elementwise examples") {
  CHECK(values(relu(Tensor::vector({-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(values(add(Tensor::vector({1, 2}), Tensor::vector({3, 4}))) == std::vector<double>{4, 6});
  CHECK(values(sub(Tensor::vector({1, 2}), Tensor::vector({3, 5}))) == std::vector<double>{-2, -3});
  CHECK(values(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4}))) == std::vector<double>{3, 8});
  CHECK(values(scale(Tensor::vector({1, -2}), 3.0)) == std::vector<double>{3, -6});
  CHECK(values(add(Tensor::vector({1, 2}), Tensor::scalar(10))) == std::vector<double>{11, 12});
  CHECK(values(mul(Tensor::scalar(2), Tensor::vector({1, 2}))) == std::vector<double>{2, 4});
}

TEST_CASE("elementwise shape mismatch is a dimension error") {
  CHECK_THROWS_AS(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), DimensionError);
}

TEST_CASE("relu gradient") {
  Tensor x = Tensor::vector({-1, 2}, true);
  backward(sum(relu(x)));
  CHECK(values(Tensor::vector({x.grad()[0], x.grad()[1]})) == std::vector<double>{0, 1});
  const auto numeric = numeric_grad([&] { return sum(relu(x)).item(); }, x);
  CHECK(numeric[0] == doctest::Approx(0.0));
  CHECK(numeric[1] == doctest::Approx(1.0));
  Tensor z = Tensor::vector({0.0}, true);
  backward(sum(relu(z)));
  CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("l2_normalize examples") {
  const Tensor n = l2_normalize(Tensor::vector({3, 4}));
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
  const Tensor u = Tensor::vector({0.6, 0.8});
  const Tensor again = l2_normalize(u);
  CHECK(std::abs(again[0] - 0.6) < 1e-15);
  CHECK(std::abs(again[1] - 0.8) < 1e-15);
  const Tensor zero = l2_normalize(Tensor::vector({0, 0}));
  CHECK(zero[0] == 0.0);
  CHECK(std::isfinite(zero[1]));
}

TEST_CASE("l2_normalize gradient at [1,2,3]") {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  const Tensor w = Tensor::vector({0.3, -1.1, 0.7});
  auto f = [&](bool) { return sum(mul(l2_normalize(x), w)); };
  CHECK(max_grad_error(f, {&x}) <= 1e-5);
}

TEST_CASE("cosine examples") {
  CHECK(cosine(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item() == 0.0);
  CHECK(cosine(Tensor::vector({2, 0}), Tensor::vector({1, 0})).item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(Tensor::vector({1, 1}), Tensor::vector({1, 0})).item() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(cosine(Tensor::vector({1, 0}), Tensor::vector({1, 0, 0})), DimensionError);
}

TEST_CASE("cosine invariants") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_matrix(1, 6, rng);
    const Tensor b = random_matrix(1, 6, rng);
    const Tensor av = Tensor::vector(values(a));
    const Tensor bv = Tensor::vector(values(b));
    const double ab = cosine(av, bv).item();
    CHECK(ab == cosine(bv, av).item());
    CHECK(ab >= -1.0 - 1e-9);
    CHECK(ab <= 1.0 + 1e-9);
    CHECK(std::abs(cosine(scale(av, pos(rng)), bv).item() - ab) <= 1e-12);
  }
}

TEST_CASE("backward examples") {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  backward(sum(x));
  CHECK(values(Tensor::vector({x.grad()[0], x.grad()[1], x.grad()[2]})) ==
        std::vector<double>{1, 1, 1});

  Tensor y = Tensor::vector({3, 4}, true);
  backward(cosine(y, Tensor::vector({1, 2})));
  CHECK(std::abs(y.grad()[0] * 3 + y.grad()[1] * 4) <= 1e-9);
}

TEST_CASE("backward contract errors") {
  Tensor x = Tensor::vector({1, 2}, true);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ContractError);
  CHECK_THROWS_AS(backward(sum(Tensor::vector({1, 2}))), ContractError);
}

TEST_CASE("repeated backward accumulates into leaves") {
  Tensor x = Tensor::vector({1, 2}, true);
  backward(sum(scale(x, 3.0)));
  backward(sum(scale(x, 3.0)));
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("two-path graph sums both adjoints") {
  // f = sum(x * x) + sum(3 x) -> df/dx = 2x + 3
  Tensor x = Tensor::vector({1.5, -2.0}, true);
  const Tensor f = add(sum(mul(x, x)), sum(scale(x, 3.0)));
  backward(f);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("tape visits each op once in reverse topological order") {
  Tensor x = Tensor::vector({1, 2}, true);
  const Tensor h = mul(x, x);
  const Tensor f = add(sum(h), sum(scale(h, 2.0)));
  const Tape tape = Tape::record(f);
  const auto& order = tape.order();
  std::set<const detail::Node*> seen(order.begin(), order.end());
  CHECK(seen.size() == order.size());
  // Every node appears before each of its parents.
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& parent : order[i]->parents) {
      const auto it = std::find(order.begin(), order.end(), parent.get());
      if (it != order.end()) CHECK(static_cast<std::size_t>(it - order.begin()) > i);
    }
  }
  CHECK(order.front() == f.node().get());
}

TEST_CASE("no-grad guard records nothing") {
  Tensor x = Tensor::vector({1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    y = sum(scale(x, 2.0));
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("every op matches central differences on random inputs") {
  std::mt19937_64 rng(42);
  const std::vector<std::size_t> idx = {2, 0, 2, 1};
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_matrix(3, 4, rng, -2, 2, true);
    Tensor b = random_matrix(4, 2, rng, -2, 2, true);
    Tensor c = random_matrix(3, 4, rng, -2, 2, true);
    const Tensor bias_row = random_matrix(1, 4, rng, -2, 2);
    Tensor bias = Tensor::vector({bias_row.data().begin(), bias_row.data().end()}, true);
    Tensor v = random_matrix(1, 4, rng, -2, 2, true);
    const Tensor w2 = random_matrix(3, 2, rng);
    const Tensor w4 = random_matrix(3, 4, rng);
    const Tensor w43 = random_matrix(4, 3, rng);
    const Tensor w33 = random_matrix(3, 3, rng);
    const Tensor w62 = random_matrix(6, 2, rng);
    const Tensor w44 = random_matrix(4, 4, rng);
    const Tensor w14 = random_matrix(1, 4, rng);
    std::vector<Tensor*> all = {&a, &b, &c, &bias, &v};

    auto probe = [&](const char* name, const std::function<Tensor()>& f) {
      CAPTURE(name);
      CHECK(max_grad_error([&](bool) { return f(); }, all) <= 1e-4);
    };
    probe("matmul", [&] { return sum(mul(matmul(a, b), w2)); });
    probe("transpose", [&] { return sum(mul(transpose(a), w43)); });
    probe("add", [&] { return sum(mul(add(a, c), w4)); });
    probe("sub", [&] { return sum(mul(sub(a, c), w4)); });
    probe("mul", [&] { return sum(mul(mul(a, c), w4)); });
    probe("scalar broadcast", [&] { return sum(mul(mul(a, sum(v)), w4)); });
    probe("scale", [&] { return sum(mul(scale(c, -1.7), w4)); });
    probe("relu", [&] { return sum(mul(relu(a), w4)); });
    probe("add_rowwise", [&] { return sum(mul(add_rowwise(a, bias), w4)); });
    probe("mean", [&] { return mean(mul(c, w4)); });
    probe("norm", [&] { return norm(a); });
    probe("l2_normalize", [&] { return sum(mul(l2_normalize(v), w14)); });
    probe("normalize_rows", [&] { return sum(mul(normalize_rows(c), w4)); });
    probe("cosine", [&] { return cosine(v, bias); });
    probe("rowwise_dot", [&] { return sum(mul(rowwise_dot(a, c), Tensor::matrix(3, 1, {0.5, -1, 2}))); });
    probe("concat_cols", [&] { return sum(mul(concat_cols(matmul(a, b), rowwise_dot(a, c)), w33)); });
    probe("concat_rows", [&] { return sum(mul(concat_rows(matmul(a, b), matmul(c, b)), w62)); });
    probe("gather_rows", [&] { return sum(mul(gather_rows(a, idx), w44)); });
  }
}
