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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sst {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the define-by-run graph. Leaves have no parents and no
// backward function; interior nodes only exist when some input requires grad.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  bool is_leaf() const { return parents.empty(); }
  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major double tensor with optional participation in reverse-mode
// autodiff. Copies share the underlying node (handle semantics); use clone()
// for an independent value.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const;
  // Writable view for in-place parameter updates. Never call on a tensor that
  // is an input to a graph still awaiting backward.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;
  std::span<const double> row(std::size_t r) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad();

  // Same values, cut from the graph.
  Tensor detach() const;
  // Independent deep copy; a leaf with the same requires_grad flag.
  Tensor clone() const;

  const char* op_name() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Builds an interior node. `backward` receives the output node and must add
  // its adjoint into each parent that requires grad. When no input requires
  // grad the result is a detached leaf and `backward` is dropped.
  static Tensor make_result(const char* op, Shape shape,
                            std::vector<double> data,
                            std::vector<Tensor> inputs,
                            detail::BackwardFn backward);

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on this thread while alive; results of ops become
// plain values. Nests.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Reverse topological order of the grad-requiring subgraph below a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  // Interior (op) nodes in the order backward visits them.
  std::vector<std::string> op_names() const;
  const std::vector<detail::Node*>& order() const { return order_; }

 private:
  std::vector<detail::Node*> order_;  // root first
};

// Propagates d(loss)/d(node) into every grad-requiring ancestor. Leaf grads
// accumulate across calls until zero_grad(); interior grads are reset on each
// call. Returns the number of nodes visited.
std::size_t backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
// X[B x N] + bias[N] applied to every row. The only row-broadcast op.
Tensor add_rowwise(const Tensor& x, const Tensor& bias);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Euclidean norm of all entries; subgradient 0 at the zero tensor.
Tensor norm(const Tensor& a);

inline constexpr double kNormalizeEps = 1e-12;

Tensor l2_normalize(const Tensor& v, double eps = kNormalizeEps);
// Row-wise l2_normalize of a matrix.
Tensor normalize_rows(const Tensor& x, double eps = kNormalizeEps);
Tensor cosine(const Tensor& a, const Tensor& b);

// A[B x D], B[B x D] -> [B x 1] of row inner products.
Tensor rowwise_dot(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
// Rows of x picked by index (repeats allowed); adjoints scatter-add back.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);

// Plain-value helpers that never touch the tape.
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double cosine_value(std::span<const double> a, std::span<const double> b);

}  // namespace sst
