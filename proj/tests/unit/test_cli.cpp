// Copyright 2026 The K-SENSE Authors
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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "ksense/cli.hpp"
#include "ksense/config.hpp"
#include "ksense/error.hpp"

namespace ksense::cli {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ksense_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct Invocation {
  int code;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ksense");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig =
    "# tiny end-to-end run\n"
    "synth.post_count = 120\n"
    "synth.seed = 3\n"
    "synth.d_h = 8\n"
    "synth.d_k = 4\n"
    "synth.min_sentences = 2\n"
    "synth.max_sentences = 3\n"
    "model.gru_hidden = 4\n"
    "model.mlp_hidden = 6\n"
    "train.base_lr = 0.001\n"
    "train.max_epochs = 2\n"
    "train.seeds = 1,2\n"
    "train.eval_threads = 1\n";

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(kTinyConfig);
  CHECK(c.synth.post_count == 120);
  CHECK(c.train.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.train.base_lr == 0.001);
  CHECK(c.has("synth.seed"));
  CHECK_FALSE(c.has("train.alpha"));
  CHECK(c.train.alpha == 0.7);

  CHECK_THROWS_AS(parse_config("train.alpah = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.alpha = 0.5\ntrain.alpha = 0.6\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.batch_size = many\n"), ConfigError);
  try {
    parse_config("bogus.key = 1\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus.key") != std::string::npos);
  }

  const ExperimentConfig d = parse_config(defaults_text());
  CHECK(d.train.batch_size == 16);
  CHECK(d.train.base_lr == 2e-5);
  CHECK(d.preset == Preset::kFull);
  CHECK(parse_seed_list("4, 5,6") == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(parse_config("ablation.preset = gru\n").preset == Preset::kGru);
}

TEST_CASE("synth needs its seed and is byte-stable") {
  TempDir tmp("synth");
  spit(tmp.path / "missing.cfg", "synth.post_count = 50\n");
  const auto bad = invoke({"synth", "--config", (tmp.path / "missing.cfg").string(), "--out",
                           (tmp.path / "x.kseb").string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("synth.seed") != std::string::npos);

  spit(tmp.path / "tiny.cfg", kTinyConfig);
  for (const char* name : {"a.kseb", "b.kseb"}) {
    const auto r = invoke({"synth", "--config", (tmp.path / "tiny.cfg").string(), "--out",
                           (tmp.path / name).string()});
    REQUIRE(r.code == kExitOk);
  }
  CHECK(slurp(tmp.path / "a.kseb") == slurp(tmp.path / "b.kseb"));
  CHECK(invoke({"train", (tmp.path / "nope.kseb").string(), "--out",
                (tmp.path / "r").string()}).code == kExitIo);
  CHECK(invoke({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("train, compare and repquality end to end") {
  TempDir tmp("train");
  const std::string cfg = (tmp.path / "tiny.cfg").string();
  const std::string fixture = (tmp.path / "tiny.kseb").string();
  spit(cfg, kTinyConfig);
  REQUIRE(invoke({"synth", "--config", cfg, "--out", fixture}).code == kExitOk);

  const std::string run_a = (tmp.path / "run_a").string();
  const auto t = invoke({"train", fixture, "--config", cfg, "--out", run_a, "--quiet"});
  REQUIRE(t.code == kExitOk);
  for (const char* f : {"config.txt", "resolved.txt", "summary.txt", "traces_init.csv",
                        "traces_best.csv", "attention.txt"}) {
    const bool found = fs::exists(fs::path(run_a) / "seed_1" / f) || fs::exists(fs::path(run_a) / f);
    CHECK_MESSAGE(found, f);
  }
  CHECK(fs::exists(fs::path(run_a) / "seed_2" / "predictions.csv"));
  CHECK(fs::exists(fs::path(run_a) / "seed_2" / "params_best.ksep"));
  CHECK(slurp(fs::path(run_a) / "config.txt") == kTinyConfig);

  const PredictionSet preds = read_predictions_csv(fs::path(run_a) / "seed_1" / "predictions.csv");
  CHECK(preds.size() == 12);
  preds.validate();

  const auto same = invoke({"compare", run_a, run_a, "--resamples", "200"});
  REQUIRE(same.code == kExitOk);
  const auto pooled = same.out.find("pooled");
  REQUIRE(pooled != std::string::npos);
  const std::string row = same.out.substr(pooled, same.out.find('\n', pooled) - pooled);
  CHECK(row.substr(row.size() - 6) == "1.0000");

  const auto rq = invoke({"repquality", run_a});
  REQUIRE(rq.code == kExitOk);
  CHECK(rq.out.find("Silhouette") != std::string::npos);
  CHECK(rq.out.find("Davies-Bouldin") != std::string::npos);

  const std::string single = (tmp.path / "single").string();
  REQUIRE(invoke({"train", fixture, "--config", cfg, "--out", single, "--seeds", "1",
                  "--quiet"}).code == kExitOk);
  CHECK(slurp(fs::path(single) / "summary.txt").find("(n=1)") != std::string::npos);

  const std::string base = (tmp.path / "base").string();
  REQUIRE(invoke({"train", fixture, "--config", cfg, "--out", base, "--preset", "base",
                  "--quiet"}).code == kExitOk);
  const auto no_traces = invoke({"repquality", base});
  CHECK(no_traces.code == kExitUsage);

  // A run on a different fixture has disjoint post ids.
  std::string other_cfg = kTinyConfig;
  other_cfg += "synth.name = other\n";
  spit(tmp.path / "other.cfg", other_cfg);
  const std::string other_fixture = (tmp.path / "other.kseb").string();
  REQUIRE(invoke({"synth", "--config", (tmp.path / "other.cfg").string(), "--out",
                  other_fixture}).code == kExitOk);
  const std::string run_c = (tmp.path / "run_c").string();
  REQUIRE(invoke({"train", other_fixture, "--config", (tmp.path / "other.cfg").string(),
                  "--out", run_c, "--quiet"}).code == kExitOk);
  CHECK(invoke({"compare", run_a, run_c}).code == kExitUsage);
}

TEST_CASE("ablate rejects per-row toggles") {
  TempDir tmp("ablate");
  spit(tmp.path / "t.cfg", std::string(kTinyConfig) + "ablation.use_scl = false\n");
  REQUIRE(invoke({"synth", "--config", (tmp.path / "t.cfg").string(), "--out",
                  (tmp.path / "t.kseb").string()}).code == kExitOk);
  const auto r = invoke({"ablate", (tmp.path / "t.kseb").string(), "--config",
                         (tmp.path / "t.cfg").string(), "--out", (tmp.path / "o").string()});
  CHECK(r.code == kExitUsage);
}

TEST_CASE("defaults command prints a parseable config") {
  const auto r = invoke({"defaults"});
  REQUIRE(r.code == kExitOk);
  CHECK_NOTHROW(parse_config(r.out));
}

}  // namespace
}  // namespace ksense::cli
