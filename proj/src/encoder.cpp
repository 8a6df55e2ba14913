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

#include "sst/encoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>

#include "sst/errors.hpp"

namespace sst {

void EncoderConfig::validate() const {
  if (input_dim == 0) throw ConfigError("encoder: input_dim must be positive");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("encoder: hidden dims must be positive");
  }
  if (embed_dim < 2) {
    throw ConfigError("encoder: embed_dim must be >= 2, got " +
                      std::to_string(embed_dim));
  }
}

Encoder::Encoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::vector<std::size_t> dims{config_.input_dim};
  dims.insert(dims.end(), config_.hidden_dims.begin(), config_.hidden_dims.end());
  dims.push_back(config_.embed_dim);
  for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
    const std::size_t fan_in = dims[layer], fan_out = dims[layer + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = uni(rng);
    const std::string prefix = "layer" + std::to_string(layer);
    params_.push_back({prefix + ".weight",
                       Tensor::matrix(fan_in, fan_out, std::move(w), true)});
    params_.push_back({prefix + ".bias", Tensor::zeros({fan_out}, true)});
  }
}

std::size_t Encoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

Tensor Encoder::forward(const Tensor& batch, bool grad) const {
  if (batch.rank() != 2 || batch.cols() != config_.input_dim) {
    throw DimensionError("encoder forward: expected [B x " +
                         std::to_string(config_.input_dim) + "], got " +
                         shape_str(batch.shape()));
  }
  ++forward_calls_;
  std::optional<NoGradGuard> guard;
  if (!grad) guard.emplace();
  Tensor h = batch;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add_rowwise(matmul(h, params_[2 * l].value), params_[2 * l + 1].value);
    if (l + 1 < layers) h = relu(h);
  }
  return normalize_rows(h);
}

Encoder Encoder::clone() const {
  Encoder copy = *this;
  for (auto& p : copy.params_) {
    p.value = p.value.clone();
  }
  copy.forward_calls_ = 0;
  return copy;
}

void Encoder::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

void Encoder::clear_grad() {
  for (auto& p : params_) p.value.clear_grad();
}

namespace {

void require_aligned(const Encoder& a, const Encoder& b) {
  if (!(a.config().input_dim == b.config().input_dim &&
        a.config().hidden_dims == b.config().hidden_dims &&
        a.config().embed_dim == b.config().embed_dim)) {
    throw ContractError("param_distance: encoder architectures differ");
  }
}

}  // namespace

double param_distance(const Encoder& a, const Encoder& b) {
  require_aligned(a, b);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.params().size(); ++k) {
    const auto x = a.params()[k].value.data();
    const auto y = b.params()[k].value.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - y[i];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

Tensor param_distance_tensor(const Encoder& a, const Encoder& b) {
  require_aligned(a, b);
  // sqrt(sum_k ||a_k - b_k||^2) assembled from per-tensor norms.
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < a.params().size(); ++k) {
    Tensor n = norm(sub(a.params()[k].value, b.params()[k].value));
    total = add(total, mul(n, n));
  }
  const double value = std::sqrt(total.item());
  return Tensor::make_result(
      "sqrt", {1}, {value}, {total}, [value](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad || value == 0.0) return;
        p.ensure_grad()[0] += self.grad[0] / (2.0 * value);
      });
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[] = "SSTENC1";
constexpr std::size_t kMagicLen = 7;

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  std::uint64_t u64(const char* what) {
    if (pos_ + 8 > buf_.size()) {
      throw ParseError("encoder checkpoint truncated while reading " +
                       std::string(what) + " at byte offset " +
                       std::to_string(pos_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw ParseError("encoder checkpoint truncated at byte offset " +
                       std::to_string(pos_));
    }
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_encoder(const Encoder& enc, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto& cfg = enc.config();
  os.write(kMagic, kMagicLen);
  put_u64(os, cfg.input_dim);
  put_u64(os, cfg.hidden_dims.size());
  for (std::size_t h : cfg.hidden_dims) put_u64(os, h);
  put_u64(os, cfg.embed_dim);
  put_u64(os, cfg.seed);
  put_u64(os, enc.parameter_count());
  for (const auto& p : enc.params()) {
    for (double v : p.value.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Encoder load_encoder(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open encoder checkpoint " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(is), {}));
  if (r.bytes(kMagicLen) != std::string(kMagic, kMagicLen)) {
    throw ParseError("not an SSTENC1 encoder checkpoint: bad magic at byte offset 0");
  }
  EncoderConfig cfg;
  cfg.input_dim = r.u64("input_dim");
  const std::uint64_t n_hidden = r.u64("hidden count");
  if (n_hidden > 1024) throw ParseError("encoder checkpoint: implausible hidden count");
  cfg.hidden_dims.clear();
  for (std::uint64_t i = 0; i < n_hidden; ++i) cfg.hidden_dims.push_back(r.u64("hidden dim"));
  cfg.embed_dim = r.u64("embed_dim");
  cfg.seed = r.u64("seed");
  const std::uint64_t count = r.u64("parameter count");
  Encoder enc(cfg);
  if (count != enc.parameter_count()) {
    throw ParseError("encoder checkpoint: parameter count " + std::to_string(count) +
                     " does not match config (" +
                     std::to_string(enc.parameter_count()) + ")");
  }
  for (auto& p : enc.params()) {
    for (double& v : p.value.mutable_data()) v = std::bit_cast<double>(r.u64("parameter"));
  }
  if (r.pos() != r.size()) {
    throw ParseError("encoder checkpoint: trailing bytes at offset " +
                     std::to_string(r.pos()));
  }
  return enc;
}

}  // namespace sst
