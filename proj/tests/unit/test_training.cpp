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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "ksense/error.hpp"
#include "ksense/losses.hpp"
#include "ksense/training.hpp"
#include "test_support.hpp"

namespace ksense {
namespace {

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::map<std::uint32_t, std::size_t> class_counts(const std::vector<std::size_t>& batch,
                                                  const std::vector<std::uint32_t>& labels) {
  std::map<std::uint32_t, std::size_t> c;
  for (std::size_t i : batch) ++c[labels[i]];
  return c;
}

SyntheticSpec tiny_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.post_count = 160;
  s.d_h = 12;
  s.d_k = 6;
  s.min_sentences = 2;
  s.max_sentences = 3;
  s.class_separation = 1.5;
  s.knowledge_separation = 2.5;
  s.seed = seed;
  return s;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.base_lr = 1e-3;
  c.max_epochs = 4;
  c.gru_hidden = 4;
  c.mlp_hidden = 8;
  c.eval_threads = 1;
  return c;
}

std::vector<std::uint32_t> labels_of(const Dataset& ds) {
  std::vector<std::uint32_t> y;
  for (const auto& f : ds.fixtures) y.push_back(f.label);
  return y;
}

TEST_CASE("stratified batches: exact fit and balanced full batches") {
  std::vector<std::uint32_t> labels(16);
  for (std::size_t i = 8; i < 16; ++i) labels[i] = 1;
  const auto ids = iota_ids(16);
  const auto one = sample_stratified_batches(ids, labels, 2, 16, 7, true);
  REQUIRE(one.size() == 1);
  CHECK(class_counts(one[0], labels) == std::map<std::uint32_t, std::size_t>{{0, 8}, {1, 8}});

  std::vector<std::uint32_t> big(160);
  for (std::size_t i = 0; i < 160; ++i) big[i] = i % 2;
  const auto batches = sample_stratified_batches(iota_ids(160), big, 2, 16, 9, true);
  std::vector<int> seen(160, 0);
  for (const auto& b : batches) {
    if (b.size() == 16) {
      const auto c = class_counts(b, big);
      CHECK(c.at(0) == 8);
      CHECK(c.at(1) == 8);
    }
    for (std::size_t i : b) ++seen[i];
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(sample_stratified_batches(iota_ids(160), big, 2, 16, 9, true) == batches);
  CHECK(sample_stratified_batches(iota_ids(160), big, 2, 16, 10, true) != batches);
}

TEST_CASE("stratified batches: sampling errors") {
  std::vector<std::uint32_t> labels(10, 0);
  CHECK_THROWS_AS(sample_stratified_batches(iota_ids(10), labels, 2, 4, 1), ConfigError);
  labels[0] = 1;
  CHECK_THROWS_AS(sample_stratified_batches(iota_ids(10), labels, 2, 3, 1, true), ConfigError);
}

TEST_CASE("58/42 imbalance depletes the minority and engages the downweight") {
  const std::size_t n = 1000;
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < 580 ? 0 : 1;
  const auto batches = sample_stratified_batches(iota_ids(n), labels, 2, 16, 3, true);
  std::size_t depleted = 0;
  std::size_t downweighted = 0;
  std::vector<int> seen(n, 0);
  for (const auto& b : batches) {
    std::vector<std::uint32_t> bl;
    for (std::size_t i : b) {
      bl.push_back(labels[i]);
      ++seen[i];
    }
    const auto c = class_counts(b, labels);
    const std::size_t minority = c.count(1) ? c.at(1) : 0;
    if (minority < 8) ++depleted;
    const auto w = supcon_downweight(bl, 16, 2);
    // Independent count of anchors below the expected 7 positives.
    for (std::size_t i = 0; i < bl.size(); ++i) {
      const std::size_t pos =
          static_cast<std::size_t>(std::count(bl.begin(), bl.end(), bl[i])) - 1;
      CHECK(w[i] == doctest::Approx(std::min(1.0, pos / 7.0)).epsilon(1e-15));
      downweighted += w[i] < 1.0;
    }
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(depleted > 0);
  CHECK(downweighted > 0);
}

TEST_CASE("downweight rule examples") {
  std::vector<std::uint32_t> even(16, 0);
  std::fill(even.begin() + 8, even.end(), 1u);
  for (double w : supcon_downweight(even, 16, 2)) CHECK(w == 1.0);

  std::vector<std::uint32_t> skew(16, 0);
  skew[14] = skew[15] = 1;
  const auto w = supcon_downweight(skew, 16, 2);
  for (std::size_t i = 0; i < 14; ++i) CHECK(w[i] == 1.0);
  CHECK(w[14] == doctest::Approx(1.0 / 7.0));
  CHECK(w[15] == doctest::Approx(1.0 / 7.0));

  const std::vector<std::uint32_t> lone = {0, 0, 1};
  CHECK(supcon_downweight(lone, 4, 2)[2] == 0.0);
  CHECK_THROWS_AS(supcon_downweight(even, 2, 2), ConfigError);
}

TEST_CASE("combined objective arithmetic") {
  CHECK(combine_objective(1.0, 0.42, 3.0) == doctest::Approx(0.42));
  CHECK(combine_objective(0.7, 1.0, 2.0) == doctest::Approx(1.3));
  CHECK(combine_objective(0.7, 0.9, 0.0) == doctest::Approx(0.63));
  CHECK(combine_objective(0.7, 0.9, std::nullopt) == 0.9);
}

TEST_CASE("combined loss without SCL is unscaled CE; identical anchors give alpha CE") {
  const Tensor logits = Tensor::from_values({4, 2}, {0.3, -0.2, 1.1, 0.4, -0.5, 0.2, 0.0, 0.9});
  const std::vector<std::uint32_t> y = {0, 1, 0, 1};
  const std::vector<double> cw = {1.0, 1.0};
  TrainConfig cfg;
  cfg.batch_size = 4;
  const double ce = weighted_cross_entropy(logits, y, cw).item();
  const auto plain = combined_loss(logits, y, Tensor{}, cw, cfg, 2);
  CHECK(plain.total.item() == ce);
  CHECK_FALSE(plain.scl.has_value());

  const Tensor same = Tensor::from_values({4, 3}, {1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0});
  cfg.cosine_similarity = true;
  const auto with = combined_loss(logits, y, same, cw, cfg, 2);
  // Each anchor's only positive is identical to it, both negatives orthogonal.
  const double l = -std::log(std::exp(10.0) / (std::exp(10.0) + 2.0));
  CHECK(*with.scl == doctest::Approx(l).epsilon(1e-12));
  CHECK(with.total.item() == doctest::Approx(0.7 * ce + 0.3 * l).epsilon(1e-12));
}

TEST_CASE("all-zero anchor weights are a degenerate batch") {
  const Tensor logits = Tensor::from_values({2, 2}, {0.1, 0.2, 0.3, 0.4});
  const Tensor proj = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  const std::vector<std::uint32_t> y = {0, 1};
  const std::vector<double> cw = {1.0, 1.0};
  TrainConfig cfg;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(combined_loss(logits, y, proj, cw, cfg, 2), DegenerateBatchError);
}

TEST_CASE("class weights are mean-normalized inverse frequencies") {
  const std::vector<std::uint32_t> balanced = {0, 1, 0, 1};
  CHECK(inverse_frequency_weights(balanced, 2) == std::vector<double>{1.0, 1.0});
  const std::vector<std::uint32_t> skew = {0, 0, 0, 1};
  const auto w = inverse_frequency_weights(skew, 2);
  CHECK(w[0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[1] == doctest::Approx(2.0));
}

TEST_CASE("early stopping") {
  SUBCASE("plateau after one improvement") {
    EarlyStopState s;
    const double seq[] = {0.6, 0.7, 0.7, 0.7, 0.7};
    std::size_t stopped = 0;
    for (std::size_t e = 1; e <= 5; ++e) {
      if (s.update(e, seq[e - 1], 3, nullptr)) {
        stopped = e;
        break;
      }
      CHECK(s.epochs_since_improve <= 3);
    }
    CHECK(stopped == 5);
    CHECK(s.best_epoch == 2);
    CHECK(s.best_val_f1 == 0.7);
  }
  SUBCASE("first epoch always snapshots") {
    ModelDims d;
    d.d_h = 4;
    d.d_k = 2;
    d.gru_hidden = 2;
    d.mlp_hidden = 2;
    const KSenseParams p = KSenseParams::init(d, 1);
    EarlyStopState s;
    s.update(1, 0.0, 3, &p);
    CHECK(s.best_params_snapshot.has_value());
    CHECK(s.best_epoch == 1);
  }
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  const AblationConfig full = preset_config(Preset::kFull);
  c.validate(full, 2);
  c.batch_size = 3;
  CHECK_THROWS_AS(c.validate(full, 2), ConfigError);
  c.validate(preset_config(Preset::kBaseOnly), 2);
  c = TrainConfig{};
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(full, 2), ConfigError);
  c = TrainConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(full, 2), ConfigError);
  c = TrainConfig{};
  c.warmup_frac = 1.0;
  CHECK_THROWS_AS(c.validate(full, 2), ConfigError);
}

TEST_CASE("mean and sample std over seeds") {
  const std::vector<double> two = {0.8, 0.9};
  const MeanStd m = mean_std(two);
  CHECK(m.mean == doctest::Approx(0.85));
  CHECK(*m.stddev == doctest::Approx(0.0707106781).epsilon(1e-8));
  const std::vector<double> same = {0.7, 0.7, 0.7};
  CHECK(*mean_std(same).stddev == 0.0);
  const std::vector<double> one = {0.5};
  CHECK_FALSE(mean_std(one).stddev.has_value());
  CHECK(format_mean_std(m) == "0.8500 ± 0.0707");
  CHECK(format_mean_std(mean_std(one)) == "0.5000 (n=1)");
}

TEST_CASE("full forward plus combined loss matches finite differences") {
  ModelDims d;
  d.d_h = 5;
  d.d_k = 3;
  d.gru_hidden = 3;
  d.mlp_hidden = 4;
  TrainConfig cfg;
  cfg.batch_size = 4;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Xoshiro256 rng(seed);
    KSenseParams p = KSenseParams::init(d, seed);
    std::vector<EmbeddingFixture> posts(4);
    const std::vector<std::uint32_t> y = {0, 0, 1, 1};
    for (std::size_t i = 0; i < 4; ++i) {
      posts[i].post_id = std::to_string(i);
      posts[i].label = y[i];
      posts[i].n_sentences = 2 + i % 2;
      posts[i].post_embedding = testing::random_vector(d.d_h, rng, 0.5);
      posts[i].knowledge =
          testing::random_vector(posts[i].n_sentences * 5 * d.d_k, rng, 0.5);
    }
    const std::vector<double> cw = {0.8, 1.2};
    const AblationConfig full = preset_config(Preset::kFull);
    auto loss = [&] {
      std::vector<Tensor> logits, proj;
      for (std::size_t i = 0; i < 4; ++i) {
        auto out = forward(posts[i], p, full, Mode::kTrain, {10 + i, 20 + i, 30 + i});
        logits.push_back(out.logits);
        proj.push_back(out.scl_input);
      }
      return combined_loss(stack_rows(logits), y, stack_rows(proj), cw, cfg, 2).total;
    };
    std::vector<Tensor> leaves;
    for (auto& prm : p.parameters()) leaves.push_back(prm.tensor);
    const auto r = testing::check_gradients(loss, leaves);
    worst = std::max(worst, r.max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training is deterministic in the seed") {
  const auto syn = generate_synthetic(tiny_spec(5));
  const auto splits = stratified_split(labels_of(syn.dataset), 2, {}, 5);
  const TrainConfig cfg = tiny_config();
  const AblationConfig full = preset_config(Preset::kFull);
  const RunResult a = train_one(syn.dataset, splits, full, cfg, 11);
  const RunResult b = train_one(syn.dataset, splits, full, cfg, 11);
  CHECK(a.val_f1_history == b.val_f1_history);
  CHECK(a.test_predictions.logits == b.test_predictions.logits);
  REQUIRE(a.final_params.parameters().size() == b.final_params.parameters().size());
  for (std::size_t i = 0; i < a.final_params.parameters().size(); ++i) {
    const auto x = a.final_params.parameters()[i].tensor.values();
    const auto y = b.final_params.parameters()[i].tensor.values();
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  }
  CHECK(a.val_f1_history.size() <= cfg.max_epochs);
  CHECK(a.best_val_f1 == *std::max_element(a.val_f1_history.begin(), a.val_f1_history.end()));
  const RunResult c = train_one(syn.dataset, splits, full, cfg, 12);
  CHECK(c.test_predictions.logits != a.test_predictions.logits);
}

TEST_CASE("metrics sink receives one formatted record per epoch") {
  const auto syn = generate_synthetic(tiny_spec(6));
  const auto splits = stratified_split(labels_of(syn.dataset), 2, {}, 6);
  std::vector<std::string> lines;
  const RunResult r = train_one(syn.dataset, splits, preset_config(Preset::kFull), tiny_config(), 1,
                                [&](const EpochRecord& e) { lines.push_back(format_epoch_record(e)); });
  CHECK(lines.size() == r.history.size());
  REQUIRE_FALSE(lines.empty());
  CHECK(lines[0].rfind("epoch=1 train_loss=", 0) == 0);
  CHECK(lines[0].find(" scl=") != std::string::npos);
  CHECK(lines[0].find(" lr=") != std::string::npos);
}

TEST_CASE("runaway learning rate reports divergence with its position") {
  const auto syn = generate_synthetic(tiny_spec(7));
  const auto splits = stratified_split(labels_of(syn.dataset), 2, {}, 7);
  TrainConfig cfg = tiny_config();
  cfg.base_lr = 1e300;
  cfg.weight_decay = 0.0;
  try {
    train_one(syn.dataset, splits, preset_config(Preset::kFull), cfg, 1);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("five seeds on separable data agree closely") {
  SyntheticSpec s = tiny_spec(8);
  s.post_count = 600;
  s.class_separation = 6.0;
  s.knowledge_separation = 6.0;
  const auto syn = generate_synthetic(s);
  const auto splits = stratified_split(labels_of(syn.dataset), 2, {}, 8);
  TrainConfig cfg = tiny_config();
  cfg.max_epochs = 15;
  const auto summary = run_multi_seed(syn.dataset, splits, preset_config(Preset::kFull), cfg);
  CHECK(summary.runs.size() == 5);
  CHECK(summary.test_f1.n == 5);
  CHECK(*summary.test_f1.stddev < 0.03);
}

}  // namespace
}  // namespace ksense
