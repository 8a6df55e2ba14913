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
#include <filesystem>
#include <fstream>
#include <random>

#include "sst/encoder.hpp"
#include "sst/errors.hpp"
#include "support.hpp"

using namespace sst;
using sst::testing::random_matrix;
namespace fs = std::filesystem;

namespace {

EncoderConfig small(std::uint64_t seed = 0) { return {6, {10, 7}, 5, seed}; }

// Independent flatten-and-norm oracle.
double flat_distance(const Encoder& a, const Encoder& b) {
  std::vector<double> fa, fb;
  for (const auto& p : a.params()) fa.insert(fa.end(), p.value.data().begin(), p.value.data().end());
  for (const auto& p : b.params()) fb.insert(fb.end(), p.value.data().begin(), p.value.data().end());
  long double s = 0.0L;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const long double d = fa[i] - fb[i];
    s += d * d;
  }
  return std::sqrt(static_cast<double>(s));
}

bool same_params(const Encoder& a, const Encoder& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t k = 0; k < a.params().size(); ++k) {
    const auto x = a.params()[k].value.data();
    const auto y = b.params()[k].value.data();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sst_test_encoder";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("init is deterministic under the seed") {
  CHECK(same_params(Encoder(small(3)), Encoder(small(3))));
  CHECK_FALSE(same_params(Encoder(small(3)), Encoder(small(4))));
}

TEST_CASE("parameter shapes follow the architecture") {
  const Encoder enc({4, {8}, 3, 0});
  REQUIRE(enc.params().size() == 4);
  CHECK(enc.params()[0].value.shape() == Shape{4, 8});
  CHECK(enc.params()[1].value.numel() == 8);
  CHECK(enc.params()[2].value.shape() == Shape{8, 3});
  CHECK(enc.params()[3].value.numel() == 3);
  CHECK(enc.parameter_count() == 4 * 8 + 8 + 8 * 3 + 3);
  CHECK(enc.params()[0].name == "layer0.weight");
  CHECK(enc.params()[3].name == "layer1.bias");
  for (double b : enc.params()[1].value.data()) CHECK(b == 0.0);
}

TEST_CASE("He-uniform bound") {
  const Encoder enc({16, {32}, 4, 1});
  const double limit = std::sqrt(6.0 / 16.0);
  for (double w : enc.params()[0].value.data()) CHECK(std::abs(w) <= limit);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(Encoder({4, {8}, 1, 0}), ConfigError);
  CHECK_THROWS_AS(Encoder({0, {8}, 3, 0}), ConfigError);
  CHECK_THROWS_AS(Encoder({4, {0}, 3, 0}), ConfigError);
  const Encoder linear({4, {}, 3, 0});
  CHECK(linear.params().size() == 2);
}

TEST_CASE("forward output rows are unit norm") {
  std::mt19937_64 rng(2);
  const Encoder enc(small());
  const Tensor out = enc.forward(random_matrix(20, 6, rng, -3, 3), false);
  CHECK(out.shape() == Shape{20, 5});
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(l2_norm(out.row(i)) - 1.0) <= 1e-9);
}

TEST_CASE("forward is batch independent and deterministic") {
  std::mt19937_64 rng(5);
  const Encoder enc(small());
  const Tensor two = random_matrix(2, 6, rng);
  const Tensor one = Tensor::matrix(1, 6, {two.row(0).begin(), two.row(0).end()});
  const Tensor a = enc.forward(one, false);
  const Tensor b = enc.forward(two, false);
  for (std::size_t j = 0; j < 5; ++j) CHECK(a.at(0, j) == b.at(0, j));
  const Tensor c = enc.forward(two, false);
  CHECK(std::equal(b.data().begin(), b.data().end(), c.data().begin()));
}

TEST_CASE("forward dimension mismatch") {
  const Encoder enc(small());
  CHECK_THROWS_AS(enc.forward(Tensor::zeros({2, 5}), false), DimensionError);
}

TEST_CASE("grad=false output never receives gradients") {
  std::mt19937_64 rng(6);
  Encoder enc(small());
  const Tensor x = random_matrix(3, 6, rng);
  const Tensor frozen = enc.forward(x, false);
  CHECK_FALSE(frozen.requires_grad());
  enc.zero_grad();
  const Tensor live = enc.forward(x, true);
  backward(sum(mul(live, frozen)));
  CHECK_FALSE(frozen.has_grad());
  bool any_nonzero = false;
  for (const auto& p : enc.params())
    for (double g : p.value.grad()) any_nonzero |= g != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("param_distance examples") {
  const Encoder a(small(1));
  CHECK(param_distance(a, a) == 0.0);
  Encoder b = a.clone();
  b.params()[2].value.mutable_data()[5] += 3.0;
  CHECK(param_distance(a, b) == doctest::Approx(3.0).epsilon(1e-12));
  const Encoder c(small(2));
  CHECK(std::abs(param_distance(a, c) - flat_distance(a, c)) <= 1e-12);
  CHECK_THROWS_AS(param_distance(a, Encoder({6, {10}, 5, 0})), ContractError);
}

TEST_CASE("param_distance is a metric") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Encoder a(small(s)), b(small(s + 100)), c(small(s + 200));
    CHECK(std::abs(param_distance(a, b) - param_distance(b, a)) <= 1e-12);
    CHECK(param_distance(a, c) <= param_distance(a, b) + param_distance(b, c) + 1e-9);
  }
}

TEST_CASE("param_distance_tensor matches the value and differentiates") {
  Encoder a(small(1));
  const Encoder b(small(2));
  a.zero_grad();
  const Tensor d = param_distance_tensor(a, b);
  CHECK(d.item() == doctest::Approx(param_distance(a, b)).epsilon(1e-12));
  backward(d);
  // d/da ||a - b|| = (a - b) / ||a - b||
  const double dist = d.item();
  for (std::size_t k = 0; k < a.params().size(); ++k) {
    const auto pa = a.params()[k].value.data();
    const auto pb = b.params()[k].value.data();
    const auto g = a.params()[k].value.grad();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(g[i] == doctest::Approx((pa[i] - pb[i]) / dist).epsilon(1e-10));
    }
  }
}

TEST_CASE("clone semantics") {
  Encoder a(small(7));
  Encoder b = a.clone();
  CHECK(param_distance(a, b) == 0.0);
  CHECK(b.config() == a.config());
  a.params()[0].value.mutable_data()[0] += 1.0;
  CHECK(param_distance(a, b) == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Encoder enc(small(9));
  const fs::path path = scratch("enc.bin");
  save_encoder(enc, path);
  const Encoder back = load_encoder(path);
  CHECK(back.config() == enc.config());
  CHECK(same_params(back, enc));
  std::ifstream is(path, std::ios::binary);
  char magic[7];
  is.read(magic, 7);
  CHECK(std::string(magic, 7) == "SSTENC1");
}

TEST_CASE("corrupt checkpoints are rejected") {
  const Encoder enc(small(9));
  const fs::path path = scratch("enc_bad.bin");
  save_encoder(enc, path);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << b;
  };
  write(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_encoder(path), ParseError);
  write("XXXXXXX" + bytes.substr(7));
  CHECK_THROWS_AS(load_encoder(path), ParseError);
  write(bytes + "junk");
  CHECK_THROWS_AS(load_encoder(path), ParseError);
  CHECK_THROWS(load_encoder(scratch("missing.bin")));
}
