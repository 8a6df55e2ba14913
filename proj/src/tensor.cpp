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

#include "sst/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sst/errors.hpp"

namespace sst {

using detail::Node;

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_str(shape));
    }
  }
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a) + " and " + shape_str(b));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor() : Tensor(Tensor::scalar(0.0)) {}

Tensor::Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data,
                    bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data, bool requires_grad) {
  return from({rows, cols}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on " + shape_str(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return data().subspan(r * c, c);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::has_grad() const {
  return node_->grad.size() == node_->data.size();
}
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

Tensor Tensor::clone() const {
  return from(shape(), node_->data, node_->requires_grad);
}

const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::make_result(const char* op, Shape shape,
                           std::vector<double> data,
                           std::vector<Tensor> inputs,
                           detail::BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(data), false);
  const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  Node& n = *out.node_;
  n.requires_grad = true;
  n.op = op;
  n.parents.reserve(inputs.size());
  for (auto& t : inputs) n.parents.push_back(t.node_);
  n.backward = std::move(backward);
  return out;
}

// ---- Tape / backward ------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.requires_grad()) return tape;
  std::vector<Node*> post;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      post.push_back(node);
      stack.pop_back();
    }
  }
  tape.order_.assign(post.rbegin(), post.rend());
  return tape;
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  for (const Node* n : order_) {
    if (!n->is_leaf()) names.emplace_back(n->op);
  }
  return names;
}

std::size_t backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError(
        "backward: loss is not reachable from any grad-enabled tensor");
  }
  Tape tape = Tape::record(loss);
  for (Node* n : tape.order()) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  Node* root = loss.node().get();
  root->ensure_grad()[0] += 1.0;
  for (Node* n : tape.order()) {
    if (n->backward) n->backward(*n);
  }
  return tape.size();
}

// ---- ops ------------------------------------------------------------------

namespace {

// Parent i's grad buffer if it takes part in backward, else nullptr.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

const std::vector<double>& data_of(const Node& self, std::size_t i) {
  return self.parents[i]->data;
}

// out[M x N] += a[M x K] * b[K x N]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* o0 = out + i * n;
    double* o1 = o0 + n;
    double* o2 = o1 + n;
    double* o3 = o2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a0 = a[i * k + p], a1 = a[(i + 1) * k + p];
      const double a2 = a[(i + 2) * k + p], a3 = a[(i + 3) * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        o0[j] += a0 * bv;
        o1[j] += a1 * bv;
        o2[j] += a2 * bv;
        o3[j] += a3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// Dot product with four interleaved partial sums so the loop vectorizes
// without reassociation flags.
inline double dot4(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += x[j] * y[j];
    s1 += x[j + 1] * y[j + 1];
    s2 += x[j + 2] * y[j + 2];
    s3 += x[j + 3] * y[j + 3];
  }
  for (; j < n; ++j) s0 += x[j] * y[j];
  return (s0 + s1) + (s2 + s3);
}

// out[M x K] += g[M x N] * b[K x N]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) out[i * k + p] += dot4(grow, b + p * n, n);
  }
}

// out[K x N] += a[M x K]^T * g[M x N]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* g0 = g + i * n;
    const double* g1 = g0 + n;
    const double* g2 = g1 + n;
    const double* g3 = g2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a0 = a[i * k + p], a1 = a[(i + 1) * k + p];
      const double a2 = a[(i + 2) * k + p], a3 = a[(i + 3) * k + p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        orow[j] += a0 * g0[j] + a1 * g1[j] + a2 * g2[j] + a3 * g3[j];
      }
    }
  }
  for (; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

enum class Broadcast { kSame, kScalarLeft, kScalarRight };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (a.numel() == 1) return Broadcast::kScalarLeft;
  if (b.numel() == 1) return Broadcast::kScalarRight;
  mismatch(op, a.shape(), b.shape());
}

double sum_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result(
      "matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        const double* g = self.grad.data();
        if (auto* ga = grad_of(self, 0)) {
          gemm_nt(g, data_of(self, 1).data(), ga->data(), m, n, k);
        }
        if (auto* gb = grad_of(self, 1)) {
          gemm_tn(data_of(self, 0).data(), g, gb->data(), m, k, n);
        }
      });
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto d = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  return Tensor::make_result("transpose", {c, r}, std::move(out), {a},
                             [r, c](Node& self) {
                               auto* ga = grad_of(self, 0);
                               if (!ga) return;
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j)
                                   (*ga)[i * c + j] += self.grad[j * r + i];
                             });
}

namespace {

// Shared body for add/sub: out = a + sign * b.
Tensor additive(const char* op, const Tensor& a, const Tensor& b,
                double sign) {
  const Broadcast kind = classify(op, a, b);
  const Shape shape = kind == Broadcast::kScalarLeft ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double av = kind == Broadcast::kScalarLeft ? ad[0] : ad[i];
    const double bv = kind == Broadcast::kScalarRight ? bd[0] : bd[i];
    out[i] = av + sign * bv;
  }
  return Tensor::make_result(
      op, shape, std::move(out), {a, b}, [kind, sign](Node& self) {
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
          if (kind == Broadcast::kScalarLeft) {
            (*ga)[0] += sum_of(g);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
          }
        }
        if (auto* gb = grad_of(self, 1)) {
          if (kind == Broadcast::kScalarRight) {
            (*gb)[0] += sign * sum_of(g);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
          }
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return additive("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return additive("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = classify("mul", a, b);
  const Shape shape = kind == Broadcast::kScalarLeft ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double av = kind == Broadcast::kScalarLeft ? ad[0] : ad[i];
    const double bv = kind == Broadcast::kScalarRight ? bd[0] : bd[i];
    out[i] = av * bv;
  }
  return Tensor::make_result("mul", shape, std::move(out), {a, b},
                             [kind](Node& self) {
    const auto& g = self.grad;
    const auto& ad = data_of(self, 0);
    const auto& bd = data_of(self, 1);
    auto aval = [&](std::size_t i) {
      return kind == Broadcast::kScalarLeft ? ad[0] : ad[i];
    };
    auto bval = [&](std::size_t i) {
      return kind == Broadcast::kScalarRight ? bd[0] : bd[i];
    };
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[kind == Broadcast::kScalarLeft ? 0 : i] += g[i] * bval(i);
      }
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gb)[kind == Broadcast::kScalarRight ? 0 : i] += g[i] * aval(i);
      }
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return Tensor::make_result("scale", a.shape(), std::move(out), {a},
                             [factor](Node& self) {
                               auto* ga = grad_of(self, 0);
                               if (!ga) return;
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                 (*ga)[i] += factor * self.grad[i];
                             });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result("relu", a.shape(), std::move(out), {a},
                             [](Node& self) {
                               auto* ga = grad_of(self, 0);
                               if (!ga) return;
                               const auto& x = data_of(self, 0);
                               for (std::size_t i = 0; i < x.size(); ++i)
                                 if (x[i] > 0.0) (*ga)[i] += self.grad[i];
                             });
}

Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  require_rank2("add_rowwise", x);
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.numel() != c || bias.rank() != 1) {
    mismatch("add_rowwise", x.shape(), bias.shape());
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bd[j];
  return Tensor::make_result(
      "add_rowwise", x.shape(), std::move(out), {x, bias}, [r, c](Node& self) {
        const auto& g = self.grad;
        if (auto* gx = grad_of(self, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
        if (auto* gb = grad_of(self, 1)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gb)[j] += g[i * c + j];
        }
      });
}

Tensor sum(const Tensor& a) {
  const double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  return Tensor::make_result("sum", {1}, {s}, {a}, [](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (double& v : *ga) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  const double s = std::accumulate(a.data().begin(), a.data().end(), 0.0) / n;
  return Tensor::make_result("mean", {1}, {s}, {a}, [n](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    for (double& v : *ga) v += self.grad[0] / n;
  });
}

Tensor norm(const Tensor& a) {
  const double nrm = l2_norm(a.data());
  return Tensor::make_result("norm", {1}, {nrm}, {a}, [nrm](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga || nrm == 0.0) return;
    const auto& x = data_of(self, 0);
    const double g = self.grad[0] / nrm;
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g * x[i];
  });
}

namespace {

// Normalizes `len`-long chunks of `x` independently.
Tensor normalize_chunks(const char* op, const Tensor& x, std::size_t len,
                        double eps) {
  const std::size_t chunks = x.numel() / len;
  std::vector<double> out(x.data().begin(), x.data().end());
  std::vector<double> denom(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    std::span<double> v(out.data() + c * len, len);
    denom[c] = std::max(l2_norm(v), eps);
    for (double& e : v) e /= denom[c];
  }
  std::vector<double> unit = out;
  return Tensor::make_result(
      op, x.shape(), std::move(out), {x},
      [len, chunks, eps, denom = std::move(denom),
       unit = std::move(unit)](Node& self) {
        auto* gx = grad_of(self, 0);
        if (!gx) return;
        const auto& g = self.grad;
        for (std::size_t c = 0; c < chunks; ++c) {
          const std::size_t o = c * len;
          const double d = denom[c];
          if (d > eps) {
            double yg = 0.0;
            for (std::size_t i = 0; i < len; ++i) yg += unit[o + i] * g[o + i];
            for (std::size_t i = 0; i < len; ++i)
              (*gx)[o + i] += (g[o + i] - unit[o + i] * yg) / d;
          } else {
            for (std::size_t i = 0; i < len; ++i) (*gx)[o + i] += g[o + i] / d;
          }
        }
      });
}

}  // namespace

Tensor l2_normalize(const Tensor& v, double eps) {
  return normalize_chunks("l2_normalize", v, v.numel(), eps);
}

Tensor normalize_rows(const Tensor& x, double eps) {
  require_rank2("normalize_rows", x);
  return normalize_chunks("normalize_rows", x, x.cols(), eps);
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) mismatch("cosine", a.shape(), b.shape());
  const double na = std::max(l2_norm(a.data()), kNormalizeEps);
  const double nb = std::max(l2_norm(b.data()), kNormalizeEps);
  const double c = dot(a.data(), b.data()) / (na * nb);
  return Tensor::make_result(
      "cosine", {1}, {c}, {a, b}, [na, nb, c](Node& self) {
        const auto& ad = data_of(self, 0);
        const auto& bd = data_of(self, 1);
        const double g = self.grad[0];
        if (auto* ga = grad_of(self, 0)) {
          for (std::size_t i = 0; i < ad.size(); ++i)
            (*ga)[i] += g * (bd[i] / (na * nb) - c * ad[i] / (na * na));
        }
        if (auto* gb = grad_of(self, 1)) {
          for (std::size_t i = 0; i < bd.size(); ++i)
            (*gb)[i] += g * (ad[i] / (na * nb) - c * bd[i] / (nb * nb));
        }
      });
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require_rank2("rowwise_dot", a);
  if (a.shape() != b.shape()) mismatch("rowwise_dot", a.shape(), b.shape());
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = dot(a.row(i), b.row(i));
  return Tensor::make_result(
      "rowwise_dot", {r, 1}, std::move(out), {a, b}, [r, c](Node& self) {
        const auto& ad = data_of(self, 0);
        const auto& bd = data_of(self, 1);
        auto* ga = grad_of(self, 0);
        auto* gb = grad_of(self, 1);
        for (std::size_t i = 0; i < r; ++i) {
          const double g = self.grad[i];
          for (std::size_t j = 0; j < c; ++j) {
            if (ga) (*ga)[i * c + j] += g * bd[i * c + j];
            if (gb) (*gb)[i * c + j] += g * ad[i * c + j];
          }
        }
      });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2("concat_cols", a);
  require_rank2("concat_cols", b);
  if (a.rows() != b.rows()) mismatch("concat_cols", a.shape(), b.shape());
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.row(i).begin(), ca, out.begin() + i * c);
    std::copy_n(b.row(i).begin(), cb, out.begin() + i * c + ca);
  }
  return Tensor::make_result(
      "concat_cols", {r, c}, std::move(out), {a, b}, [r, ca, cb, c](Node& self) {
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < ca; ++j) (*ga)[i * ca + j] += g[i * c + j];
        }
        if (auto* gb = grad_of(self, 1)) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < cb; ++j)
              (*gb)[i * cb + j] += g[i * c + ca + j];
        }
      });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank2("concat_rows", a);
  require_rank2("concat_rows", b);
  if (a.cols() != b.cols()) mismatch("concat_rows", a.shape(), b.shape());
  const std::size_t na = a.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return Tensor::make_result(
      "concat_rows", {a.rows() + b.rows(), a.cols()}, std::move(out), {a, b},
      [na](Node& self) {
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
          for (std::size_t i = 0; i < na; ++i) (*ga)[i] += g[i];
        }
        if (auto* gb = grad_of(self, 1)) {
          for (std::size_t i = na; i < g.size(); ++i) (*gb)[i - na] += g[i];
        }
      });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_rank2("gather_rows", x);
  const std::size_t c = x.cols(), r = x.rows();
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) +
                           " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(x.row(idx[i]).begin(), c, out.begin() + i * c);
  }
  const std::size_t n = idx.size();
  return Tensor::make_result(
      "gather_rows", {n, c}, std::move(out), {x},
      [c, idx = std::move(idx)](Node& self) {
        auto* gx = grad_of(self, 0);
        if (!gx) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < c; ++j)
            (*gx)[idx[i] * c + j] += self.grad[i * c + j];
      });
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_value(std::span<const double> a, std::span<const double> b) {
  const double na = std::max(l2_norm(a), kNormalizeEps);
  const double nb = std::max(l2_norm(b), kNormalizeEps);
  return dot(a, b) / (na * nb);
}

}  // namespace sst
