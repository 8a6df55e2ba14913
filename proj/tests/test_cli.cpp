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

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "sst_cli_output.txt";
  const std::string cmd = std::string(SST_LAB_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream is(log);
  std::ostringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "sst_test_cli";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const std::string kTiny =
    "data.n_ids = 120\n"
    "data.input_dim = 8\n"
    "encoder.hidden_dims = 16\n"
    "encoder.embed_dim = 8\n"
    "train.steps = 10\n"
    "train.batch_size = 16\n"
    "train.queue_size = 32\n"
    "eval.max_impostors = 300\n";

}  // namespace

TEST_CASE("version and defaults") {
  const auto v = run("--version");
  CHECK(v.code == 0);
  CHECK(v.output.find("sst-lab") != std::string::npos);
  const auto d = run("defaults");
  CHECK(d.code == 0);
  CHECK(d.output.find("train.ma_momentum = 0.999") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  const auto cfg = write_config("bad_key.cfg", kTiny + "train.nonsense = 1\n");
  const auto r = run("train " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("train.nonsense") != std::string::npos);
}

TEST_CASE("missing required key is named") {
  const auto cfg = write_config("no_output.cfg", kTiny);
  const auto r = run("generate " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("output_dir") != std::string::npos);
}

TEST_CASE("generate, train, eval round trip") {
  const fs::path out = fs::temp_directory_path() / "sst_test_cli" / "run";
  fs::remove_all(out);
  const auto cfg = write_config("ok.cfg", kTiny + "output_dir = " + out.string() + "\n");
  CHECK(run("generate " + cfg.string()).code == 0);
  CHECK(fs::exists(out / "dataset.sstdata"));
  CHECK(run("train " + cfg.string() + " --set train.seed=3").code == 0);
  CHECK(fs::exists(out / "metrics.jsonl"));
  const auto e = run("eval " + cfg.string() + " --checkpoint " + (out / "checkpoint" / "pair.manifest").string() +
                     " --dataset " + (out / "dataset.sstdata").string());
  CHECK(e.code == 0);
  CHECK(fs::exists(out / "report.json"));
  CHECK(run("eval " + cfg.string() + " --checkpoint " + (out / "absent.manifest").string()).code == 3);
}

TEST_CASE("dry run writes nothing") {
  const fs::path out = fs::temp_directory_path() / "sst_test_cli" / "dry";
  fs::remove_all(out);
  const auto cfg = write_config("dry.cfg", kTiny + "output_dir = " + out.string() + "\n");
  CHECK(run("train --dry-run " + cfg.string()).code == 0);
  CHECK_FALSE(fs::exists(out));
  CHECK(run("train --dry-run " + cfg.string() + " --set train.variant=A --set loss.kind=triplet").code == 2);
}

TEST_CASE("divergence exits 3 with the step") {
  const fs::path out = fs::temp_directory_path() / "sst_test_cli" / "nan";
  const auto cfg = write_config("nan.cfg", kTiny + "output_dir = " + out.string() + "\ntrain.lr = 1e300\n");
  const auto r = run("train " + cfg.string() + " --set train.variant=Org");
  CHECK(r.code == 3);
  CHECK(r.output.find("diverged at step") != std::string::npos);
}
