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

#include "sst/data_synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sst/errors.hpp"

namespace sst {

std::string to_string(Role role) {
  return role == Role::kGallery ? "gallery" : "probe";
}

std::string to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

void GenSpec::validate() const {
  if (n_ids == 0) throw ConfigError("data: n_ids must be positive");
  if (depth < 2) throw ConfigError("data: depth must be >= 2");
  if (input_dim == 0) throw ConfigError("data: input_dim must be positive");
  if (!(class_separation > 0.0)) throw ConfigError("data: class_separation must be > 0");
  if (!(sigma_intra >= 0.0)) throw ConfigError("data: sigma_intra must be >= 0");
  if (!(shift_strength >= 0.0)) throw ConfigError("data: shift_strength must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("data: test_fraction must lie in (0, 1)");
  }
  const std::size_t n_test = n_test_ids();
  if (n_test == 0 || n_test >= n_ids) {
    throw ConfigError("data: test_fraction leaves an empty train or test split");
  }
}

std::size_t GenSpec::n_test_ids() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n_ids) * test_fraction));
}

std::vector<std::int64_t> ShallowDataset::ids(Split split) const {
  std::vector<std::int64_t> out;
  for (const auto& r : records) {
    if (r.split == split && (out.empty() || out.back() != r.id)) out.push_back(r.id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> ShallowDataset::records_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

ShallowDataset generate(const GenSpec& spec) {
  spec.validate();
  const std::size_t d = spec.input_dim;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Global probe-domain map: A ~ N(0, 1/d) entries, b ~ N(0, sep^2).
  std::vector<double> a(d * d), b(d);
  const double a_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : a) v = normal(rng) * a_scale;
  for (double& v : b) v = normal(rng) * spec.class_separation;

  // Which ids are held out.
  std::vector<std::size_t> perm(spec.n_ids);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Split> split(spec.n_ids, Split::kTrain);
  for (std::size_t i = 0; i < spec.n_test_ids(); ++i) split[perm[i]] = Split::kTest;

  ShallowDataset ds;
  ds.input_dim = d;
  ds.records.reserve(spec.n_ids * spec.depth);
  std::vector<double> center(d), x(d);
  const double shift = spec.shift_strength;
  for (std::size_t id = 0; id < spec.n_ids; ++id) {
    for (double& v : center) v = normal(rng) * spec.class_separation;
    for (std::size_t k = 0; k < spec.depth; ++k) {
      for (std::size_t j = 0; j < d; ++j) x[j] = center[j] + normal(rng) * spec.sigma_intra;
      const Role role = k == 0 ? Role::kGallery : Role::kProbe;
      std::vector<double> out = x;
      if (role == Role::kProbe && shift != 0.0) {
        for (std::size_t r = 0; r < d; ++r) {
          double ax = b[r];
          for (std::size_t c = 0; c < d; ++c) ax += a[r * d + c] * x[c];
          out[r] = (1.0 - shift) * x[r] + shift * ax;
        }
      }
      ds.records.push_back({static_cast<std::int64_t>(id), role, split[id], std::move(out)});
    }
  }
  return ds;
}

// ---- batching -------------------------------------------------------------

TrainIndex::TrainIndex(const ShallowDataset& ds) {
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.split != Split::kTrain) continue;
    auto [it, inserted] = class_.try_emplace(r.id, ids_.size());
    if (inserted) {
      ids_.push_back(r.id);
      recs_.emplace_back();
    }
    recs_[it->second].push_back(i);
  }
  if (ids_.empty()) throw ContractError("dataset has no train identities");
  for (const auto& recs : recs_) {
    if (recs.size() < 2) {
      throw ContractError("every train identity needs at least two records");
    }
    std::size_t gallery = 0, probe = 0;
    for (std::size_t r : recs) {
      (ds.records[r].role == Role::kGallery ? gallery : probe) += 1;
    }
    if (gallery == 0 || probe == 0) {
      throw ContractError("every train identity needs a gallery and a probe record");
    }
    if (recs.size() != 2) shallow_ = false;
  }
}

Batch assemble_batch(const ShallowDataset& ds, const TrainIndex& index,
                     std::span<const std::size_t> classes, std::mt19937_64& rng) {
  const std::size_t bsz = classes.size(), d = ds.input_dim;
  Batch batch;
  std::vector<double> g(bsz * d), p(bsz * d);
  for (std::size_t i = 0; i < bsz; ++i) {
    const auto& recs = index.records(classes[i]);
    std::size_t gi, pi;
    if (recs.size() == 2) {
      const bool first_is_gallery = ds.records[recs[0]].role == Role::kGallery;
      gi = first_is_gallery ? recs[0] : recs[1];
      pi = first_is_gallery ? recs[1] : recs[0];
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, recs.size() - 1);
      const std::size_t u = pick(rng);
      std::size_t v = pick(rng);
      while (v == u) v = pick(rng);
      const bool swap = std::bernoulli_distribution(0.5)(rng);
      gi = recs[swap ? v : u];
      pi = recs[swap ? u : v];
    }
    std::copy(ds.records[gi].x.begin(), ds.records[gi].x.end(), g.begin() + i * d);
    std::copy(ds.records[pi].x.begin(), ds.records[pi].x.end(), p.begin() + i * d);
    batch.ids.push_back(index.ids()[classes[i]]);
    batch.gallery_records.push_back(gi);
    batch.probe_records.push_back(pi);
  }
  batch.gallery = Tensor::matrix(bsz, d, std::move(g));
  batch.probe = Tensor::matrix(bsz, d, std::move(p));
  return batch;
}

Batch sample_batch(const ShallowDataset& ds, std::size_t batch_size,
                   std::uint64_t epoch_seed) {
  TrainIndex index(ds);
  if (batch_size == 0 || batch_size > index.n_ids()) {
    throw ContractError("sample_batch: batch size " + std::to_string(batch_size) +
                        " exceeds the " + std::to_string(index.n_ids()) +
                        " train identities");
  }
  std::mt19937_64 rng(epoch_seed);
  std::vector<std::size_t> classes(index.n_ids());
  std::iota(classes.begin(), classes.end(), 0);
  // Partial Fisher-Yates: the first batch_size entries are a uniform draw.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, classes.size() - 1);
    std::swap(classes[i], classes[pick(rng)]);
  }
  classes.resize(batch_size);
  return assemble_batch(ds, index, classes, rng);
}

BatchSampler::BatchSampler(const ShallowDataset& ds, std::size_t batch_size,
                           std::uint64_t seed)
    : ds_(ds), index_(ds), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0 || batch_size > index_.n_ids()) {
    throw ContractError("batch size " + std::to_string(batch_size) +
                        " exceeds the " + std::to_string(index_.n_ids()) +
                        " train identities");
  }
  order_.resize(index_.n_ids());
  std::iota(order_.begin(), order_.end(), 0);
  pos_ = order_.size();
}

Batch BatchSampler::next() {
  if (order_.size() - pos_ < batch_size_) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  std::span<const std::size_t> classes(order_.data() + pos_, batch_size_);
  pos_ += batch_size_;
  return assemble_batch(ds_, index_, classes, rng_);
}

// ---- serialization --------------------------------------------------------

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t lineno, const std::string& msg) {
  throw ParseError("dataset line " + std::to_string(lineno) + ": " + msg);
}

}  // namespace

std::string serialize_dataset(const ShallowDataset& ds) {
  std::string out = "sstdata v1 " + std::to_string(ds.records.size()) + " " +
                    std::to_string(ds.input_dim) + "\n";
  for (const auto& line : ds.echo) out += "# " + line + "\n";
  for (const auto& r : ds.records) {
    out += std::to_string(r.id);
    out += ',';
    out += to_string(r.role);
    out += ',';
    out += to_string(r.split);
    for (double v : r.x) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

ShallowDataset parse_dataset(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) fail(lineno, "empty file");
  std::istringstream header(line);
  std::string magic, version;
  std::size_t n_records = 0, dim = 0;
  header >> magic >> version;
  if (magic != "sstdata") fail(lineno, "missing 'sstdata' header");
  if (version != "v1") fail(lineno, "unsupported version '" + version + "'");
  if (!(header >> n_records >> dim) || dim == 0) {
    fail(lineno, "header must read 'sstdata v1 <n_records> <input_dim>'");
  }
  ShallowDataset ds;
  ds.input_dim = dim;
  ds.records.reserve(n_records);
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      ds.echo.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != 3 + dim) {
      fail(lineno, "expected " + std::to_string(3 + dim) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Record r;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), r.id);
    if (ec != std::errc() || p != fields[0].data() + fields[0].size()) fail(lineno, "bad id");
    if (fields[1] == "gallery") r.role = Role::kGallery;
    else if (fields[1] == "probe") r.role = Role::kProbe;
    else fail(lineno, "bad role '" + std::string(fields[1]) + "'");
    if (fields[2] == "train") r.split = Split::kTrain;
    else if (fields[2] == "test") r.split = Split::kTest;
    else fail(lineno, "bad split '" + std::string(fields[2]) + "'");
    r.x.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[3 + j];
      auto [q, ec2] = std::from_chars(f.data(), f.data() + f.size(), r.x[j]);
      if (ec2 != std::errc() || q != f.data() + f.size()) {
        fail(lineno, "bad value in column " + std::to_string(3 + j));
      }
    }
    ds.records.push_back(std::move(r));
    if (ds.records.size() > n_records) fail(lineno, "more records than the header declares");
  }
  if (ds.records.size() != n_records) {
    fail(lineno, "truncated: header declares " + std::to_string(n_records) +
                     " records, found " + std::to_string(ds.records.size()));
  }
  return ds;
}

void save_dataset(const ShallowDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << serialize_dataset(ds);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

ShallowDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_dataset(ss.str());
}

}  // namespace sst
