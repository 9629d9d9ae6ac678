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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Optional arguments select criteria by number.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ksense/cli.hpp"
#include "ksense/evaluation.hpp"
#include "ksense/fixtures.hpp"
#include "ksense/gru.hpp"
#include "ksense/losses.hpp"
#include "ksense/model.hpp"
#include "ksense/ops.hpp"
#include "ksense/rng.hpp"
#include "ksense/training.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace ksense::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::check_gradients;
using testing::random_tensor;
using testing::random_vector;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Desk-scale training setup shared by the learning criteria.
TrainConfig accept_config() {
  TrainConfig c;
  c.base_lr = 1e-3;
  c.gru_hidden = 16;
  c.mlp_hidden = 32;
  c.eval_threads = 1;
  return c;
}

std::vector<std::uint32_t> labels_of(const Dataset& ds) {
  std::vector<std::uint32_t> y;
  y.reserve(ds.fixtures.size());
  for (const auto& f : ds.fixtures) y.push_back(f.label);
  return y;
}

struct Prepared {
  Dataset dataset;
  SplitAssignment splits;
};

Prepared prepare(const SyntheticSpec& spec) {
  Prepared p;
  p.dataset = quantize_to_float32(generate_synthetic(spec).dataset);
  p.splits = stratified_split(labels_of(p.dataset), spec.n_classes, {}, spec.seed);
  return p;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  constexpr int kSeeds = 20;
  constexpr double kTol = 1e-4;
  struct Case {
    std::string name;
    std::function<double(std::uint64_t)> run;
  };
  auto weighted_sum = [](const Tensor& x, const Tensor& w) { return sum(mul(x, w)); };
  std::vector<Case> cases;
  cases.push_back({"matmul", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    Tensor v = random_tensor({4}, rng);
    const Tensor w = random_tensor({3, 5}, rng, 1.0, false);
    const Tensor w2 = random_tensor({5}, rng, 1.0, false);
    return check_gradients(
        [&] { return add(weighted_sum(matmul(a, b), w), weighted_sum(matmul(v, b), w2)); },
        {a, b, v}).max_rel_error;
  }});
  cases.push_back({"attention", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    Tensor q = random_tensor({6}, rng), k = random_tensor({4, 6}, rng);
    const Tensor wc = random_tensor({6}, rng, 1.0, false);
    const Tensor ww = random_tensor({4}, rng, 1.0, false);
    return check_gradients([&] {
      const auto r = scaled_softmax_attention(q, k, 6);
      return add(weighted_sum(r.context, wc), weighted_sum(r.weights, ww));
    }, {q, k}).max_rel_error;
  }});
  cases.push_back({"dropout path", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    Tensor h = random_tensor({8}, rng);
    const Tensor w = random_tensor({8}, rng, 1.0, false);
    return check_gradients([&] {
      const auto v = build_anchor_views(h, 0.3, s * 2 + 1, s * 2 + 2, Mode::kTrain);
      return add(weighted_sum(tanh(v.anchor), w), sum(mul(v.pass_a, v.pass_b)));
    }, {h}).max_rel_error;
  }});
  cases.push_back({"GRU sequence", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    GruParams g;
    for (Tensor* t : {&g.W_z, &g.W_r, &g.W_n}) *t = random_tensor({3, 4}, rng, 0.7);
    for (Tensor* t : {&g.U_z, &g.U_r, &g.U_n}) *t = random_tensor({4, 4}, rng, 0.7);
    for (Tensor* t : {&g.b_z, &g.b_r, &g.b_n, &g.b_hn}) *t = random_tensor({4}, rng, 0.3);
    Tensor x = random_tensor({5, 3}, rng), h0 = random_tensor({4}, rng, 0.5);
    const Tensor w = random_tensor({5, 4}, rng, 1.0, false);
    return check_gradients([&] { return weighted_sum(gru_sequence(x, g, h0), w); },
                           {x, h0, g.W_z, g.W_r, g.W_n, g.U_z, g.U_r, g.U_n, g.b_z,
                            g.b_r, g.b_n, g.b_hn}).max_rel_error;
  }});
  cases.push_back({"MLP", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    ModelDims d;
    d.d_h = 5;
    d.d_k = 3;
    d.gru_hidden = 2;
    d.mlp_hidden = 6;
    KSenseParams p = KSenseParams::init(d, s);
    Tensor h = random_tensor({5}, rng), k = random_tensor({3}, rng);
    const Tensor w = random_tensor({2}, rng, 1.0, false);
    std::vector<Tensor> leaves = {h, k, p.mlp_W1(), p.mlp_b1(), p.mlp_W2(), p.mlp_b2()};
    return check_gradients([&] {
      return weighted_sum(classify_logits(h, k, p, Mode::kTrain, 0.2, s), w);
    }, leaves).max_rel_error;
  }});
  cases.push_back({"cross-entropy", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    Tensor logits = random_tensor({6, 3}, rng, 2.0);
    std::vector<std::uint32_t> y(6);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng.below(3));
    const std::vector<double> cw = {0.5, 1.0, 1.7};
    return check_gradients([&] { return weighted_cross_entropy(logits, y, cw); }, {logits})
        .max_rel_error;
  }});
  cases.push_back({"SupCon", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    Tensor z = random_tensor({6, 4}, rng, 0.4);
    const std::vector<std::uint32_t> y = {0, 1, 0, 1, 1, 0};
    const std::vector<double> w = {1.0, 0.5, 1.0, 0.25, 1.0, 0.0};
    const double dot = check_gradients([&] { return supcon_loss(z, y, 0.1, w); }, {z})
                           .max_rel_error;
    const double cos = check_gradients([&] { return supcon_loss(z, y, 0.1, w, true); }, {z})
                           .max_rel_error;
    return std::max(dot, cos);
  }});
  cases.push_back({"full forward + combined loss", [&](std::uint64_t s) {
    Xoshiro256 rng(s);
    ModelDims d;
    d.d_h = 5;
    d.d_k = 3;
    d.gru_hidden = 3;
    d.mlp_hidden = 4;
    KSenseParams p = KSenseParams::init(d, s);
    const std::vector<std::uint32_t> y = {0, 0, 1, 1};
    std::vector<EmbeddingFixture> posts(4);
    for (std::size_t i = 0; i < 4; ++i) {
      posts[i].label = y[i];
      posts[i].n_sentences = 2 + static_cast<std::uint32_t>(i % 2);
      posts[i].post_embedding = random_vector(d.d_h, rng, 0.5);
      posts[i].knowledge = random_vector(posts[i].n_sentences * 5 * d.d_k, rng, 0.5);
    }
    TrainConfig cfg;
    cfg.batch_size = 4;
    const std::vector<double> cw = {0.8, 1.2};
    const AblationConfig full = preset_config(Preset::kFull);
    std::vector<Tensor> leaves;
    for (auto& prm : p.parameters()) leaves.push_back(prm.tensor);
    return check_gradients([&] {
      std::vector<Tensor> logits, proj;
      for (std::size_t i = 0; i < 4; ++i) {
        auto out = forward(posts[i], p, full, Mode::kTrain, {10 + i, 20 + i, 30 + i});
        logits.push_back(out.logits);
        proj.push_back(out.scl_input);
      }
      return combined_loss(stack_rows(logits), y, stack_rows(proj), cw, cfg, 2).total;
    }, leaves).max_rel_error;
  }});

  Outcome o{true, ""};
  for (const auto& c : cases) {
    double worst = 0;
    for (std::uint64_t s = 1; s <= kSeeds; ++s) worst = std::max(worst, c.run(s));
    o.pass = o.pass && worst < kTol;
    o.detail += (o.detail.empty() ? "" : ", ") + c.name + fmt(" %.1e", worst);
  }
  o.detail = "max rel err over 20 seeds: " + o.detail;
  return o;
}

// ---------------------------------------------------------------------------

Outcome anchor_variance() {
  constexpr std::size_t kDim = 768;
  constexpr std::size_t kPairs = 5000;
  Xoshiro256 rng(768);
  const Tensor h0 = Tensor::vector(random_vector(kDim, rng));
  std::vector<double> s1(kDim), s2(kDim), a1(kDim), a2(kDim);
  for (std::size_t t = 0; t < kPairs; ++t) {
    const auto v = build_anchor_views(h0, 0.1, derive_seed({768, t, 0}),
                                      derive_seed({768, t, 1}), Mode::kTrain);
    for (std::size_t i = 0; i < kDim; ++i) {
      const double single = v.pass_a.at(i);
      const double half = v.anchor.at(i) / 2;
      s1[i] += single;
      s2[i] += single * single;
      a1[i] += half;
      a2[i] += half * half;
    }
  }
  std::size_t lower = 0;
  for (std::size_t i = 0; i < kDim; ++i) {
    const double n = kPairs;
    const double var_single = (s2[i] - s1[i] * s1[i] / n) / (n - 1);
    const double var_half = (a2[i] - a1[i] * a1[i] / n) / (n - 1);
    lower += var_half < var_single;
  }
  const double frac = static_cast<double>(lower) / kDim;
  return {frac >= 0.95, "Var(anchor/2) < Var(single view) on " + std::to_string(lower) +
                            "/768 coordinates (" + fmt("%.4f", frac) + ")"};
}

// ---------------------------------------------------------------------------

double mean_test_f1(const Prepared& data, Preset preset, const TrainConfig& cfg) {
  return run_multi_seed(data.dataset, data.splits, preset_config(preset), cfg).test_f1.mean;
}

SyntheticSpec temporal_spec() {
  SyntheticSpec s;
  s.name = "temporal";
  s.post_count = 2000;
  s.temporal_task = true;
  s.min_sentences = 3;
  s.max_sentences = 6;
  s.knowledge_separation = 2.0;
  s.noise_scale = 0.5;
  s.d_h = 32;
  s.d_k = 16;
  s.seed = 301;
  return s;
}

Outcome temporal_gap() {
  const Prepared data = prepare(temporal_spec());
  const TrainConfig cfg = accept_config();
  const double gru = mean_test_f1(data, Preset::kGru, cfg);
  const double pool = mean_test_f1(data, Preset::kMeanPool, cfg);
  return {gru >= pool + 0.05, "GRU " + fmt("%.4f", gru) + " vs mean-pool " + fmt("%.4f", pool) +
                                  " (gap " + fmt("%+.4f", gru - pool) + ", need >= +0.05)"};
}

// ---------------------------------------------------------------------------

SyntheticSpec separable_spec() {
  SyntheticSpec s;
  s.name = "separable";
  s.post_count = 1000;
  s.class_separation = 2.0;
  s.knowledge_separation = 2.0;
  s.d_h = 32;
  s.d_k = 16;
  s.seed = 401;
  return s;
}

PointSet projected_points(const std::vector<ForwardTrace>& traces) {
  PointSet pts;
  for (const auto& t : traces) pts.push_back(t.projected);
  return pts;
}

Outcome scl_representation() {
  const Prepared data = prepare(separable_spec());
  TrainConfig cfg = accept_config();
  cfg.cosine_similarity = true;
  const AblationConfig full = preset_config(Preset::kFull);
  std::vector<std::uint32_t> val_labels;
  for (std::size_t i : data.splits.val) val_labels.push_back(data.dataset.fixtures[i].label);
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : cfg.seeds) {
    const RunResult r = train_one(data.dataset, data.splits, full, cfg, seed);
    std::vector<ForwardTrace> before;
    predict(data.dataset, data.splits.val, r.initial_params, full, 1, &before);
    const auto q0 = representation_quality(projected_points(before), val_labels);
    const auto q1 = representation_quality(projected_points(r.traces), val_labels);
    const double d_sil = q1.silhouette - q0.silhouette;
    const bool ok = d_sil >= 0.10 && q1.davies_bouldin < q0.davies_bouldin;
    pass = pass && ok;
    detail += "seed " + std::to_string(seed) + ": sil " + fmt("%.3f", q0.silhouette) + "->" +
              fmt("%.3f", q1.silhouette) + " DB " + fmt("%.3f", q0.davies_bouldin) + "->" +
              fmt("%.3f", q1.davies_bouldin) + (ok ? "" : " (miss)") + (seed == cfg.seeds.back() ? "" : "; ");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------

SyntheticSpec distractor_spec() {
  SyntheticSpec s;
  s.name = "distractor";
  s.post_count = 800;
  s.class_separation = 0.5;
  s.knowledge_separation = 2.0;
  s.distractor_sentence = true;
  s.distractor_scale = 3.0;
  s.d_h = 32;
  s.d_k = 16;
  s.seed = 501;
  return s;
}

double mean_entropy(const Prepared& data, Preset preset, const TrainConfig& cfg) {
  const auto summary = run_multi_seed(data.dataset, data.splits, preset_config(preset), cfg);
  std::vector<const EmbeddingFixture*> val;
  for (std::size_t i : data.splits.val) val.push_back(&data.dataset.fixtures[i]);
  const ModelDims dims = ModelDims::from_manifest(data.dataset.manifest, cfg.gru_hidden,
                                                  cfg.mlp_hidden);
  double total = 0;
  for (const auto& r : summary.runs) total += attention_report(r.traces, val, dims).mean_entropy_nats;
  return total / static_cast<double>(summary.runs.size());
}

Outcome noise_suppression() {
  const Prepared data = prepare(distractor_spec());
  const TrainConfig cfg = accept_config();
  const double full = mean_entropy(data, Preset::kFull, cfg);
  const double plain = mean_entropy(data, Preset::kContrastiveNoSelfAug, cfg);
  return {full < plain, "mean attention entropy full " + fmt("%.4f", full) +
                            " nats vs no-self-aug " + fmt("%.4f", plain) + " nats"};
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Xoshiro256 rng(606);
  double supcon_err = 0, sil_err = 0, db_err = 0, boot_err = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng.below(7);
    const std::size_t d = 1 + rng.below(5);
    oracle::Points z(n, std::vector<double>(d));
    std::vector<std::uint32_t> y(n);
    std::vector<double> w(n);
    std::vector<double> flat;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 2 ? static_cast<std::uint32_t>(i) : static_cast<std::uint32_t>(rng.below(3));
      w[i] = rng.uniform() < 0.2 ? 0.5 : 1.0;
      for (double& v : z[i]) {
        v = 0.5 * rng.gaussian();
        flat.push_back(v);
      }
    }
    const Tensor zt = Tensor::from_values({n, d}, flat);
    supcon_err = std::max(supcon_err, std::abs(supcon_loss(zt, y, 0.1, w).item() -
                                               oracle::supcon(z, y, 0.1, w)));
    sil_err = std::max(sil_err, std::abs(silhouette(z, y) - oracle::silhouette(z, y)));
    db_err = std::max(db_err, std::abs(davies_bouldin(z, y) - oracle::davies_bouldin(z, y)));
  }
  constexpr int kResamples = 20000;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint32_t> g(10), a(10), b(10);
    for (std::size_t i = 0; i < 10; ++i) {
      g[i] = rng.uniform() < 0.5;
      a[i] = rng.uniform() < 0.7 ? g[i] : 1 - g[i];
      b[i] = rng.uniform() < 0.7 ? g[i] : 1 - g[i];
    }
    const double p = paired_bootstrap(a, b, g, kResamples, 6000 + trial);
    const double ref = oracle::bootstrap_p(a, b, g, kResamples, 7000 + trial);
    boot_err = std::max(boot_err, std::abs(p - ref));
  }
  const double boot_tol = 3.0 / std::sqrt(static_cast<double>(kResamples));
  const bool pass = supcon_err < 1e-9 && sil_err < 1e-9 && db_err < 1e-9 && boot_err <= boot_tol;
  return {pass, "max abs diff SupCon " + fmt("%.1e", supcon_err) + ", silhouette " +
                    fmt("%.1e", sil_err) + ", Davies-Bouldin " + fmt("%.1e", db_err) +
                    ", bootstrap " + fmt("%.4f", boot_err) + " (tol " + fmt("%.4f", boot_tol) +
                    ")"};
}

// ---------------------------------------------------------------------------

SyntheticSpec combined_spec() {
  SyntheticSpec s;
  s.name = "combined";
  s.post_count = 1000;
  s.class_separation = 0.5;
  s.knowledge_separation = 1.5;
  s.d_h = 32;
  s.d_k = 16;
  s.seed = 701;
  return s;
}

Outcome ablation_order() {
  const Prepared data = prepare(combined_spec());
  const TrainConfig cfg = accept_config();
  const double full = mean_test_f1(data, Preset::kFull, cfg);
  const double base = mean_test_f1(data, Preset::kBaseOnly, cfg);
  return {full >= base,
          "full " + fmt("%.4f", full) + " vs base-only " + fmt("%.4f", base)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome ablate_determinism() {
  const fs::path root =
      fs::temp_directory_path() / ("ksense_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "ablate.cfg");
    cfg << "synth.name = determinism\n"
           "synth.post_count = 240\n"
           "synth.seed = 801\n"
           "synth.d_h = 16\n"
           "synth.d_k = 8\n"
           "synth.class_separation = 1.0\n"
           "model.gru_hidden = 8\n"
           "model.mlp_hidden = 16\n"
           "train.base_lr = 0.001\n"
           "train.max_epochs = 4\n"
           "train.eval_threads = 2\n";
  }
  std::ostringstream sink;
  cli::cmd_synth(root / "ablate.cfg", root / "ablate.kseb", sink);
  cli::RunOverrides quiet;
  quiet.quiet = true;
  cli::cmd_ablate(root / "ablate.kseb", root / "ablate.cfg", root / "a", quiet, sink);
  cli::cmd_ablate(root / "ablate.kseb", root / "ablate.cfg", root / "b", quiet, sink);
  const std::string a = slurp(root / "a" / "ablation_table.txt");
  const std::string b = slurp(root / "b" / "ablation_table.txt");
  fs::remove_all(root);
  const bool pass = !a.empty() && a == b;
  return {pass, std::to_string(a.size()) + "-byte tables " + (a == b ? "identical" : "differ")};
}

}  // namespace
}  // namespace ksense::acceptance

int main(int argc, char** argv) {
  using namespace ksense::acceptance;
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "gradient suite", gradient_suite},
      {2, "anchor variance reduction", anchor_variance},
      {3, "GRU beats mean-pool on the temporal task", temporal_gap},
      {4, "contrastive training tightens projected clusters", scl_representation},
      {5, "anchor query lowers attention entropy", noise_suppression},
      {6, "oracle equivalence", oracle_equivalence},
      {7, "full model at least matches base-only", ablation_order},
      {8, "ablate tables are byte-identical", ablate_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s %s: %s [%.1fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
