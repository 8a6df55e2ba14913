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

#include "sst/semi_siamese.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "sst/errors.hpp"
#include "sst/version.hpp"

namespace sst {

UpdateMode UpdateMode::fully_siamese() {
  return UpdateMode(Kind::kFullySiamese, 0.0, 0.0);
}

UpdateMode UpdateMode::network_constraint(double lambda) {
  if (!(lambda >= 0.0)) {
    throw ConfigError("network constraint lambda must be >= 0");
  }
  return UpdateMode(Kind::kNetworkConstraint, lambda, 0.0);
}

UpdateMode UpdateMode::moving_average(double m) {
  if (!(m >= 0.0 && m <= 1.0)) {
    throw ConfigError("moving-average weight m must lie in [0, 1]");
  }
  return UpdateMode(Kind::kMovingAverage, 0.0, m);
}

std::string UpdateMode::name() const {
  switch (kind_) {
    case Kind::kFullySiamese: return "fully_siamese";
    case Kind::kNetworkConstraint: return "network_constraint";
    case Kind::kMovingAverage: return "moving_average";
  }
  return "unknown";
}

void moving_average_update(Encoder& gallery, const Encoder& probe, double m) {
  if (gallery.params().size() != probe.params().size()) {
    throw ContractError("moving average: encoders are not aligned");
  }
  for (std::size_t k = 0; k < gallery.params().size(); ++k) {
    auto g = gallery.params()[k].value.mutable_data();
    const auto p = probe.params()[k].value.data();
    if (g.size() != p.size()) {
      throw ContractError("moving average: parameter '" +
                          gallery.params()[k].name + "' shape differs");
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = m * g[i] + (1.0 - m) * p[i];
  }
}

namespace {

void set_trainable(Encoder& enc, bool on) {
  for (auto& p : enc.params()) {
    p.value.set_requires_grad(on);
    if (!on) p.value.clear_grad();
  }
}

void copy_params(Encoder& dst, const Encoder& src) {
  for (std::size_t k = 0; k < dst.params().size(); ++k) {
    auto d = dst.params()[k].value.mutable_data();
    const auto s = src.params()[k].value.data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

}  // namespace

SiamesePair::SiamesePair(Encoder enc, UpdateMode mode)
    : probe_(std::move(enc)), gallery_(probe_.clone()), mode_(mode) {
  set_trainable(probe_, true);
  set_trainable(gallery_, mode_.kind() == UpdateMode::Kind::kNetworkConstraint);
}

PairFeatures SiamesePair::encode_pair(const Tensor& gallery_batch,
                                      const Tensor& probe_batch) const {
  if (gallery_batch.rank() != 2 || probe_batch.rank() != 2 ||
      gallery_batch.rows() != probe_batch.rows()) {
    throw ContractError("encode_pair: gallery batch " +
                        shape_str(gallery_batch.shape()) +
                        " and probe batch " + shape_str(probe_batch.shape()) +
                        " must have the same number of rows");
  }
  return {gallery_.forward(gallery_batch, false),
          probe_.forward(probe_batch, true)};
}

Tensor SiamesePair::constraint_penalty() const {
  if (mode_.kind() != UpdateMode::Kind::kNetworkConstraint) {
    throw ContractError("constraint_penalty requires NetworkConstraint mode, pair is " +
                        mode_.name());
  }
  return scale(param_distance_tensor(probe_, gallery_), mode_.lambda());
}

void SiamesePair::apply_update(double lr, const SgdHyper& hyper) {
  probe_opt_.step(probe_.params(), lr, hyper);
  switch (mode_.kind()) {
    case UpdateMode::Kind::kFullySiamese:
      copy_params(gallery_, probe_);
      break;
    case UpdateMode::Kind::kMovingAverage:
      moving_average_update(gallery_, probe_, mode_.momentum());
      break;
    case UpdateMode::Kind::kNetworkConstraint:
      gallery_opt_.step(gallery_.params(), lr, hyper);
      break;
  }
}

void SiamesePair::zero_grad() {
  probe_.zero_grad();
  gallery_.zero_grad();
}

// ---- manifest -------------------------------------------------------------

void save_pair(const SiamesePair& pair, const std::filesystem::path& dir,
               const std::vector<std::string>& echo) {
  std::filesystem::create_directories(dir);
  save_encoder(pair.probe_net(), dir / "probe.enc");
  save_encoder(pair.gallery_net(), dir / "gallery.enc");
  std::ofstream os(dir / "pair.manifest");
  char buf[64];
  auto fmt = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  };
  os << "# " << kToolName << ' ' << kVersion << " pair checkpoint\n";
  for (const auto& line : echo) os << "# " << line << '\n';
  os << "mode = " << pair.mode().name() << '\n'
     << "lambda = " << fmt(pair.mode().lambda()) << '\n'
     << "m = " << fmt(pair.mode().momentum()) << '\n'
     << "probe = probe.enc\n"
     << "gallery = gallery.enc\n";
  if (!os) throw std::runtime_error("cannot write pair manifest in " + dir.string());
}

SiamesePair load_pair(const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw std::runtime_error("cannot open pair manifest " + manifest.string());
  std::map<std::string, std::string> kv;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("pair manifest line " + std::to_string(lineno) +
                       ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const char* key : {"mode", "lambda", "m", "probe", "gallery"}) {
    if (!kv.count(key)) throw ParseError("pair manifest missing key '" + std::string(key) + "'");
  }
  const auto base = manifest.parent_path();
  Encoder probe = load_encoder(base / kv["probe"]);
  Encoder gallery = load_encoder(base / kv["gallery"]);
  const std::string& mode = kv["mode"];
  UpdateMode um = mode == "fully_siamese" ? UpdateMode::fully_siamese()
                  : mode == "network_constraint"
                      ? UpdateMode::network_constraint(std::stod(kv["lambda"]))
                  : mode == "moving_average"
                      ? UpdateMode::moving_average(std::stod(kv["m"]))
                      : throw ParseError("pair manifest: unknown mode '" + mode + "'");
  SiamesePair pair(std::move(probe), um);
  copy_params(pair.gallery_net(), gallery);
  return pair;
}

}  // namespace sst
