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

#include "sst/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "sst/errors.hpp"
#include "sst/version.hpp"

namespace sst {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += f(items[i]);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* first = v.data();
  const auto* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, v, "an integer");
  return out;
}

struct KeySpec {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> set;
};

#define SST_DOUBLE(KEY, FIELD)                                                       \
  KeySpec{KEY, [](const ExperimentConfig& c) { return fmt_double(c.FIELD); },       \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {    \
            c.FIELD = to_double(k, v);                                              \
          }}
#define SST_INT(KEY, FIELD, TYPE)                                                    \
  KeySpec{KEY, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },   \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {    \
            c.FIELD = to_int<TYPE>(k, v);                                           \
          }}
#define SST_STRING(KEY, FIELD)                                                       \
  KeySpec{KEY, [](const ExperimentConfig& c) { return c.FIELD; },                   \
          [](ExperimentConfig& c, const std::string&, const std::string& v) {      \
            c.FIELD = v;                                                            \
          }}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      SST_STRING("output_dir", output_dir),
      SST_INT("data.n_ids", data.n_ids, std::size_t),
      SST_INT("data.depth", data.depth, std::size_t),
      SST_INT("data.input_dim", data.input_dim, std::size_t),
      SST_DOUBLE("data.class_separation", data.class_separation),
      SST_DOUBLE("data.sigma_intra", data.sigma_intra),
      SST_DOUBLE("data.shift_strength", data.shift_strength),
      SST_DOUBLE("data.test_fraction", data.test_fraction),
      SST_INT("data.seed", data.seed, std::uint64_t),
      SST_STRING("data.path", data_path),
      KeySpec{"encoder.hidden_dims",
              [](const ExperimentConfig& c) {
                return join<std::size_t>(c.train.encoder.hidden_dims,
                                         [](const std::size_t& h) { return std::to_string(h); });
              },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                std::vector<std::size_t> dims;
                for (const auto& item : split_list(v)) dims.push_back(to_int<std::size_t>(k, item));
                c.train.encoder.hidden_dims = dims;
              }},
      SST_INT("encoder.embed_dim", train.encoder.embed_dim, std::size_t),
      KeySpec{"loss.kind", [](const ExperimentConfig& c) { return to_string(c.train.loss.kind); },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                // Switching kind resets the margin to that kind's default.
                LossConfig l = LossConfig::defaults_for(parse_loss_kind(v));
                l.scale = c.train.loss.scale;
                l.alpha = c.train.loss.alpha;
                l.beta = c.train.loss.beta;
                c.train.loss = l;
              }},
      SST_DOUBLE("loss.scale", train.loss.scale),
      SST_DOUBLE("loss.margin", train.loss.margin),
      SST_DOUBLE("loss.alpha", train.loss.alpha),
      SST_DOUBLE("loss.beta", train.loss.beta),
      KeySpec{"train.variant", [](const ExperimentConfig& c) { return to_string(c.train.variant); },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                c.train.variant = parse_variant(v);
              }},
      SST_INT("train.batch_size", train.batch_size, std::size_t),
      SST_INT("train.steps", train.total_steps, long),
      SST_DOUBLE("train.lr", train.lr.initial),
      KeySpec{"train.lr_milestones",
              [](const ExperimentConfig& c) {
                return join<long>(c.train.lr.milestones,
                                  [](const long& m) { return std::to_string(m); });
              },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                std::vector<long> ms;
                for (const auto& item : split_list(v)) ms.push_back(to_int<long>(k, item));
                c.train.lr.milestones = ms;
              }},
      SST_DOUBLE("train.lr_factor", train.lr.factor),
      SST_DOUBLE("train.momentum", train.sgd.momentum),
      SST_DOUBLE("train.weight_decay", train.sgd.weight_decay),
      SST_INT("train.queue_size", train.queue_size, std::size_t),
      SST_DOUBLE("train.ma_momentum", train.ma_momentum),
      SST_DOUBLE("train.nc_lambda", train.nc_lambda),
      SST_INT("train.seed", train.seed, std::uint64_t),
      KeySpec{"eval.far_levels",
              [](const ExperimentConfig& c) {
                return join<double>(c.eval.far_levels, [](const double& f) { return fmt_double(f); });
              },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                std::vector<double> fars;
                for (const auto& item : split_list(v)) fars.push_back(to_double(k, item));
                c.eval.far_levels = fars;
              }},
      SST_INT("eval.max_impostors", eval.max_impostors, std::size_t),
      SST_INT("eval.seed", eval.seed, std::uint64_t),
      SST_STRING("eval.checkpoint", checkpoint),
      KeySpec{"ablate.variants",
              [](const ExperimentConfig& c) {
                return join<Variant>(c.ablate_variants, [](const Variant& v) { return to_string(v); });
              },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                std::vector<Variant> vs;
                for (const auto& item : split_list(v)) vs.push_back(parse_variant(item));
                c.ablate_variants = vs;
              }},
      KeySpec{"ablate.losses",
              [](const ExperimentConfig& c) {
                return join<LossKind>(c.ablate_losses, [](const LossKind& l) { return to_string(l); });
              },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                std::vector<LossKind> ls;
                for (const auto& item : split_list(v)) ls.push_back(parse_loss_kind(item));
                c.ablate_losses = ls;
              }},
      KeySpec{"ablate.seeds",
              [](const ExperimentConfig& c) {
                return join<std::uint64_t>(c.ablate_seeds,
                                           [](const std::uint64_t& s) { return std::to_string(s); });
              },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                std::vector<std::uint64_t> ss;
                for (const auto& item : split_list(v)) ss.push_back(to_int<std::uint64_t>(k, item));
                c.ablate_seeds = ss;
              }},
      SST_INT("ablate.threads", ablate_threads, std::size_t),
      SST_INT("diag.oscillation_window", oscillation_window, std::size_t),
      SST_INT("diag.histogram_bins", histogram_bins, std::size_t),
  };
  return table;
}

#undef SST_DOUBLE
#undef SST_INT
#undef SST_STRING

const KeySpec& find_key(const std::string& key) {
  for (const auto& k : key_table()) {
    if (k.name == key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> with_version(std::vector<std::string> echo) {
  echo.insert(echo.begin(), std::string(kToolName) + " " + kVersion);
  return echo;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

// Per-run training config: encoder shape follows the dataset, encoder init
// follows train.seed.
std::string far_label(double far) { return "tpr@" + fmt_double(far); }

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_opt(const std::optional<double>& v) { return v ? csv_num(*v) : "na"; }

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += (ch == '\n' ? ' ' : ch);
  }
  return out + "\"";
}

}  // namespace

TrainConfig resolve_train(const ExperimentConfig& cfg, const ShallowDataset& ds) {
  TrainConfig tc = cfg.train;
  tc.encoder.input_dim = ds.input_dim;
  tc.encoder.seed = tc.seed;
  return tc;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.train.encoder.input_dim = c.data.input_dim;
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, key, value);
}

std::vector<std::string> ExperimentConfig::echo() const {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name + " = " + k.get(*this));
  return out;
}

void ExperimentConfig::validate() const {
  data.validate();
  TrainConfig tc = train;
  tc.encoder.input_dim = data.input_dim;
  tc.validate();
  if (eval.far_levels.empty()) throw ConfigError("eval.far_levels must not be empty");
  for (double f : eval.far_levels) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("eval.far_levels entries must lie in (0, 1)");
  }
  if (eval.max_impostors == 0) throw ConfigError("eval.max_impostors must be positive");
  if (ablate_variants.empty()) throw ConfigError("ablate.variants must not be empty");
  if (ablate_losses.empty()) throw ConfigError("ablate.losses must not be empty");
  if (ablate_seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
  if (ablate_threads == 0) throw ConfigError("ablate.threads must be >= 1");
  if (oscillation_window < 2) throw ConfigError("diag.oscillation_window must be >= 2");
  if (histogram_bins < 3) throw ConfigError("diag.histogram_bins must be >= 3");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg = default_config();
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, int> seen;
  std::istringstream is(text);
  std::string raw;
  for (int lineno = 1; std::getline(is, raw); ++lineno) {
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    find_key(key);
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                        "' already set on line " + std::to_string(it->second));
    }
    entries.emplace_back(key, value);
  }
  // loss.kind resets kind-specific fields, so it goes first.
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return e.first == "loss.kind"; });
  for (const auto& [key, value] : entries) set_config_value(cfg, key, value);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void require_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("missing required key 'output_dir'");
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  char buf[1 << 15];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

ShallowDataset obtain_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data_path.empty()) return load_dataset(cfg.data_path);
  ShallowDataset ds = generate(cfg.data);
  ds.echo = with_version(cfg.echo());
  return ds;
}

GenerateOutcome cmd_generate(const ExperimentConfig& cfg) {
  require_output_dir(cfg);
  cfg.data.validate();
  fs::create_directories(cfg.output_dir);
  ShallowDataset ds = generate(cfg.data);
  ds.echo = with_version(cfg.echo());
  GenerateOutcome out;
  out.dataset = fs::path(cfg.output_dir) / "dataset.sstdata";
  out.manifest = fs::path(cfg.output_dir) / "dataset.manifest";
  save_dataset(ds, out.dataset);
  out.checksum = sha256_file(out.dataset);
  std::string manifest;
  for (const auto& line : ds.echo) manifest += "# " + line + "\n";
  manifest += "file = dataset.sstdata\n";
  manifest += "records = " + std::to_string(ds.records.size()) + "\n";
  manifest += "sha256 = " + out.checksum + "\n";
  write_text(out.manifest, manifest);
  return out;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg, bool dry_run) {
  if (!dry_run) require_output_dir(cfg);
  cfg.validate();
  const ShallowDataset ds = obtain_dataset(cfg);
  TrainConfig tc = resolve_train(cfg, ds);
  TrainOutcome out;
  if (dry_run) {
    tc.total_steps = 0;
    TrainResult r = train(tc, ds);
    (void)r;
    return out;
  }
  TrainResult r = train(tc, ds);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const auto echo = with_version(cfg.echo());
  out.checkpoint = dir / "checkpoint" / "pair.manifest";
  save_pair(r.pair, dir / "checkpoint", echo);
  out.metrics = dir / "metrics.jsonl";
  write_metrics_jsonl(r.log, echo, out.metrics);
  if (r.prototypes || r.queue) {
    out.histogram = dir / "histogram.csv";
    write_histogram_csv(final_prototype_histogram(r, cfg.histogram_bins), echo, out.histogram);
  }
  out.steps = tc.total_steps;
  out.final_loss = r.log.steps.empty() ? std::nan("") : r.log.steps.back().loss;
  out.training_rank1 = training_rank1(r, ds);
  nlohmann::json summary = {{"tool", kToolName},
                            {"version", kVersion},
                            {"config", echo},
                            {"seed", tc.seed},
                            {"variant", to_string(tc.variant)},
                            {"loss", to_string(tc.loss.kind)},
                            {"steps", out.steps},
                            {"training_rank1", out.training_rank1}};
  if (std::isfinite(out.final_loss)) summary["final_loss"] = out.final_loss;
  if (r.log.steps.size() >= cfg.oscillation_window) {
    summary["oscillation"] = oscillation_metric(r.log.losses(), cfg.oscillation_window);
  }
  out.summary = dir / "train_summary.json";
  write_text(out.summary, summary.dump(2) + "\n");
  return out;
}

EvalOutcome cmd_eval(const ExperimentConfig& cfg) {
  require_output_dir(cfg);
  if (cfg.checkpoint.empty()) throw ConfigError("missing required key 'eval.checkpoint'");
  cfg.validate();
  if (!fs::exists(cfg.checkpoint)) {
    throw std::runtime_error("checkpoint not found: " + cfg.checkpoint);
  }
  const SiamesePair pair = load_pair(cfg.checkpoint);
  const ShallowDataset ds = obtain_dataset(cfg);
  if (pair.probe_net().config().input_dim != ds.input_dim) {
    throw std::runtime_error("checkpoint input_dim does not match the dataset");
  }
  EvalOutcome out;
  out.metrics = evaluate(pair.probe_net(), ds, cfg.eval);
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : out.metrics.roc) {
    roc.push_back({{"far", p.far},
                   {"tpr", p.tpr},
                   {"threshold", p.threshold},
                   {"achieved_far", p.achieved_far},
                   {"low_confidence", p.low_confidence}});
  }
  nlohmann::json report = {
      {"tool", kToolName},
      {"version", kVersion},
      {"config", with_version(cfg.echo())},
      {"metrics",
       {{"tpr_at_far", roc},
        {"tenfold_accuracy", out.metrics.tenfold_accuracy},
        {"rank1", out.metrics.rank1}}},
      {"pairs", {{"genuine", out.metrics.n_genuine}, {"impostor", out.metrics.n_impostor}}},
      {"n_test_ids", out.metrics.n_test_ids},
      {"seeds", {{"data", cfg.data.seed}, {"eval", cfg.eval.seed}}},
  };
  fs::create_directories(cfg.output_dir);
  out.report = fs::path(cfg.output_dir) / "report.json";
  write_text(out.report, report.dump(2) + "\n");
  return out;
}

CellResult run_cell(const ExperimentConfig& cfg, Variant v, LossKind loss, std::uint64_t seed) {
  CellResult res;
  res.variant = v;
  res.loss = loss;
  res.seed = seed;
  try {
    ExperimentConfig c = cfg;
    c.data.seed += seed;
    c.train.seed += seed;
    c.eval.seed += seed;
    c.train.variant = v;
    if (loss != cfg.train.loss.kind) set_config_value(c, "loss.kind", to_string(loss));
    c.train.validate();
    const ShallowDataset ds = obtain_dataset(c);
    const TrainConfig tc = resolve_train(c, ds);
    TrainResult r = train(tc, ds);
    const EvalReport rep = evaluate(r.probe_net(), ds, c.eval);
    for (double far : c.eval.far_levels) res.tpr.push_back(rep.tpr_at(far));
    res.tenfold = rep.tenfold_accuracy;
    res.rank1 = rep.rank1;
    res.train_rank1 = training_rank1(r, ds);
    if (r.prototypes || r.queue) {
      res.zero_fraction = final_prototype_histogram(r, c.histogram_bins).zero_fraction;
    }
    const auto losses = r.log.losses();
    res.oscillation = losses.size() >= c.oscillation_window
                          ? oscillation_metric(losses, c.oscillation_window)
                          : std::nan("");
    res.final_loss = losses.empty() ? std::nan("") : losses.back();
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

std::vector<CellResult> run_grid(const ExperimentConfig& cfg) {
  struct Key {
    Variant v;
    LossKind l;
    std::uint64_t s;
  };
  std::vector<Key> keys;
  for (Variant v : cfg.ablate_variants)
    for (LossKind l : cfg.ablate_losses)
      for (std::uint64_t s : cfg.ablate_seeds) keys.push_back({v, l, s});
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.v, a.l, a.s) < std::tie(b.v, b.l, b.s);
  });
  keys.erase(std::unique(keys.begin(), keys.end(),
                         [](const Key& a, const Key& b) {
                           return a.v == b.v && a.l == b.l && a.s == b.s;
                         }),
             keys.end());
  std::vector<CellResult> results(keys.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      results[i] = run_cell(cfg, keys[i].v, keys[i].l, keys[i].s);
    }
  };
  const std::size_t n_threads = std::min(cfg.ablate_threads, std::max<std::size_t>(keys.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

std::vector<SummaryRow> summarize(const ExperimentConfig& cfg,
                                  const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) {
      return r.variant == c.variant && r.loss == c.loss;
    });
    if (it == rows.end()) {
      SummaryRow r;
      r.variant = c.variant;
      r.loss = c.loss;
      r.tpr.assign(cfg.eval.far_levels.size(), 0.0);
      rows.push_back(r);
      it = rows.end() - 1;
    }
    if (!c.ok) {
      ++it->n_failed;
      continue;
    }
    ++it->n_ok;
    for (std::size_t k = 0; k < c.tpr.size() && k < it->tpr.size(); ++k) it->tpr[k] += c.tpr[k];
    it->tenfold += c.tenfold;
    it->rank1 += c.rank1;
    it->train_rank1 += c.train_rank1;
    it->oscillation += c.oscillation;
    if (c.zero_fraction) it->zero_fraction = it->zero_fraction.value_or(0.0) + *c.zero_fraction;
  }
  for (auto& r : rows) {
    if (r.n_ok == 0) {
      const double nan = std::nan("");
      std::fill(r.tpr.begin(), r.tpr.end(), nan);
      r.tenfold = r.rank1 = r.train_rank1 = r.oscillation = nan;
      continue;
    }
    const double n = static_cast<double>(r.n_ok);
    for (double& t : r.tpr) t /= n;
    r.tenfold /= n;
    r.rank1 /= n;
    r.train_rank1 /= n;
    r.oscillation /= n;
    if (r.zero_fraction) *r.zero_fraction /= n;
  }
  return rows;
}

AblateOutcome cmd_ablate(const ExperimentConfig& cfg) {
  require_output_dir(cfg);
  cfg.validate();
  AblateOutcome out;
  out.cells = run_grid(cfg);
  out.rows = summarize(cfg, out.cells);

  std::string header_echo;
  for (const auto& line : with_version(cfg.echo())) header_echo += "# " + line + "\n";
  std::string far_cols;
  for (double f : cfg.eval.far_levels) far_cols += far_label(f) + ",";

  std::string table = header_echo;
  table += "variant,loss,seed,status," + far_cols +
           "tenfold,rank1,train_rank1,zero_fraction,oscillation,final_loss,error\n";
  for (const auto& c : out.cells) {
    table += to_string(c.variant) + "," + to_string(c.loss) + "," + std::to_string(c.seed) + "," +
             (c.ok ? "ok" : "failed") + ",";
    for (std::size_t k = 0; k < cfg.eval.far_levels.size(); ++k) {
      table += (c.ok ? csv_num(c.tpr[k]) : std::string("nan")) + ",";
    }
    if (c.ok) {
      table += csv_num(c.tenfold) + "," + csv_num(c.rank1) + "," + csv_num(c.train_rank1) + "," +
               csv_opt(c.zero_fraction) + "," + csv_num(c.oscillation) + "," +
               csv_num(c.final_loss) + ",\n";
    } else {
      table += "nan,nan,nan,na,nan,nan," + csv_escape(c.error) + "\n";
    }
  }
  std::string summary = header_echo;
  summary += "variant,loss,n_ok,n_failed," + far_cols +
             "tenfold,rank1,train_rank1,zero_fraction,oscillation\n";
  for (const auto& r : out.rows) {
    summary += to_string(r.variant) + "," + to_string(r.loss) + "," + std::to_string(r.n_ok) + "," +
               std::to_string(r.n_failed) + ",";
    for (double t : r.tpr) summary += csv_num(t) + ",";
    summary += csv_num(r.tenfold) + "," + csv_num(r.rank1) + "," + csv_num(r.train_rank1) + "," +
               csv_opt(r.zero_fraction) + "," + csv_num(r.oscillation) + "\n";
  }
  fs::create_directories(cfg.output_dir);
  out.table = fs::path(cfg.output_dir) / "ablation.csv";
  out.summary = fs::path(cfg.output_dir) / "ablation_summary.csv";
  write_text(out.table, table);
  write_text(out.summary, summary);
  return out;
}

}  // namespace sst
