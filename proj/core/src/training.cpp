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

#include "ksense/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "ksense/error.hpp"
#include "ksense/losses.hpp"
#include "ksense/optim.hpp"
#include "ksense/rng.hpp"

namespace ksense {

namespace {

constexpr std::uint64_t kInitTag = 0x494E4954;   // "INIT"
constexpr std::uint64_t kBatchTag = 0x4241544348;  // "BATCH"
constexpr std::uint64_t kClassTag = 0x434C;        // "CL"

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<std::uint32_t> gather_labels(const Dataset& dataset,
                                         std::span<const std::size_t> ids) {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(dataset.fixtures.at(i).label);
  return out;
}

bool has_same_class_pair(const std::vector<std::size_t>& batch,
                         std::span<const std::uint32_t> labels) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      if (labels[batch[i]] == labels[batch[j]]) return true;
    }
  }
  return false;
}

}  // namespace

void TrainConfig::validate(const AblationConfig& ablation,
                           std::size_t n_classes) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("train.alpha must lie in (0, 1]");
  }
  if (!(tau > 0.0)) throw ConfigError("train.tau must be positive");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("train.base_lr must be positive");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) {
    throw ConfigError("train.warmup_frac must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (seeds.empty()) throw ConfigError("train.seeds must not be empty");
  if (gru_hidden == 0 || mlp_hidden == 0) {
    throw ConfigError("train.gru_hidden and train.mlp_hidden must be positive");
  }
  if (ablation.use_scl && batch_size < 2 * n_classes) {
    throw ConfigError("train.batch_size must be >= 2 * n_classes (" +
                      std::to_string(2 * n_classes) +
                      ") when contrastive training is on");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "alpha=" << fmt(alpha) << "\n"
     << "tau=" << fmt(tau) << "\n"
     << "base_lr=" << fmt(base_lr) << "\n"
     << "weight_decay=" << fmt(weight_decay) << "\n"
     << "warmup_frac=" << fmt(warmup_frac) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "max_epochs=" << max_epochs << "\n"
     << "patience=" << patience << "\n"
     << "seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    os << (i ? "," : "") << seeds[i];
  }
  os << "\n"
     << "class_weighting=" << (class_weighting ? "true" : "false") << "\n"
     << "cosine_similarity=" << (cosine_similarity ? "true" : "false") << "\n"
     << "gru_hidden=" << gru_hidden << "\n"
     << "mlp_hidden=" << mlp_hidden << "\n";
  return os.str();
}

std::size_t resolve_eval_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KSENSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

bool EarlyStopState::update(std::size_t epoch, double val_f1, std::size_t patience,
                            const KSenseParams* params) {
  if (best_epoch == 0 || val_f1 > best_val_f1) {
    best_val_f1 = val_f1;
    best_epoch = epoch;
    epochs_since_improve = 0;
    if (params != nullptr) best_params_snapshot = *params;
  } else {
    ++epochs_since_improve;
  }
  return epochs_since_improve >= patience;
}

std::vector<std::vector<std::size_t>> sample_stratified_batches(
    std::span<const std::size_t> split_ids, std::span<const std::uint32_t> labels,
    std::size_t n_classes, std::size_t batch_size, std::uint64_t seed,
    bool require_pairs) {
  if (batch_size == 0) throw ConfigError("batching: batch_size must be positive");
  if (n_classes == 0) throw ConfigError("batching: n_classes must be positive");
  if (require_pairs && batch_size < 2 * n_classes) {
    throw ConfigError("batching: batch_size " + std::to_string(batch_size) +
                      " cannot hold a pair of every one of " +
                      std::to_string(n_classes) + " classes");
  }
  std::vector<std::vector<std::size_t>> per_class(n_classes);
  for (std::size_t id : split_ids) {
    if (id >= labels.size()) throw ConfigError("batching: id out of range");
    const std::uint32_t y = labels[id];
    if (y >= n_classes) throw ConfigError("batching: label out of range");
    per_class[y].push_back(id);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (per_class[c].empty()) {
      throw ConfigError("batching: class " + std::to_string(c) +
                        " has no example in the split");
    }
    Xoshiro256 rng(derive_seed({seed, kClassTag, c}));
    rng.shuffle(per_class[c]);
  }
  std::vector<std::size_t> global(split_ids.begin(), split_ids.end());
  Xoshiro256 global_rng(derive_seed({seed, kBatchTag}));
  global_rng.shuffle(global);

  std::vector<char> taken(labels.size(), 0);
  std::vector<std::size_t> cursor(n_classes, 0);
  std::size_t global_cursor = 0;
  std::size_t remaining = split_ids.size();
  const std::size_t quota = batch_size / n_classes;

  std::vector<std::vector<std::size_t>> batches;
  while (remaining > 0) {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    for (std::size_t c = 0; c < n_classes; ++c) {
      auto& members = per_class[c];
      std::size_t got = 0;
      while (got < quota && cursor[c] < members.size()) {
        const std::size_t id = members[cursor[c]++];
        if (taken[id]) continue;
        taken[id] = 1;
        batch.push_back(id);
        ++got;
      }
    }
    while (batch.size() < batch_size && global_cursor < global.size()) {
      const std::size_t id = global[global_cursor++];
      if (taken[id]) continue;
      taken[id] = 1;
      batch.push_back(id);
    }
    remaining -= batch.size();
    batches.push_back(std::move(batch));
  }
  if (require_pairs && batches.size() > 1 &&
      !has_same_class_pair(batches.back(), labels)) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

std::vector<double> supcon_downweight(std::span<const std::uint32_t> batch_labels,
                                      std::size_t batch_size, std::size_t n_classes) {
  if (batch_labels.empty()) throw ConfigError("downweight: empty batch");
  if (n_classes == 0) throw ConfigError("downweight: n_classes must be positive");
  const double expected =
      static_cast<double>(batch_size) / static_cast<double>(n_classes) - 1.0;
  if (!(expected > 0.0)) {
    throw ConfigError("downweight: expected positives per anchor must be > 0");
  }
  std::vector<double> weights(batch_labels.size());
  for (std::size_t i = 0; i < batch_labels.size(); ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < batch_labels.size(); ++j) {
      positives += j != i && batch_labels[j] == batch_labels[i];
    }
    weights[i] = std::min(1.0, static_cast<double>(positives) / expected);
  }
  return weights;
}

std::vector<double> inverse_frequency_weights(std::span<const std::uint32_t> labels,
                                              std::size_t n_classes) {
  std::vector<std::size_t> count(n_classes, 0);
  for (std::uint32_t y : labels) {
    if (y >= n_classes) throw ConfigError("class weights: label out of range");
    ++count[y];
  }
  std::vector<double> w(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (count[c] == 0) {
      throw ConfigError("class weights: class " + std::to_string(c) +
                        " absent from the training split");
    }
    w[c] = static_cast<double>(labels.size()) /
           (static_cast<double>(n_classes) * static_cast<double>(count[c]));
  }
  return w;
}

double combine_objective(double alpha, double ce, std::optional<double> scl) {
  if (!scl) return ce;
  return alpha * ce + (1.0 - alpha) * *scl;
}

LossParts combined_loss(const Tensor& logits, std::span<const std::uint32_t> labels,
                        const Tensor& projected,
                        std::span<const double> class_weights,
                        const TrainConfig& config, std::size_t n_classes) {
  LossParts out;
  Tensor ce = weighted_cross_entropy(logits, labels, class_weights);
  out.ce = ce.item();
  if (!projected.defined()) {
    out.total = ce;
    return out;
  }
  const auto weights = supcon_downweight(labels, config.batch_size, n_classes);
  Tensor scl = supcon_loss(projected, labels, config.tau, weights,
                           config.cosine_similarity);
  out.scl = scl.item();
  out.total = add(scale(ce, config.alpha), scale(scl, 1.0 - config.alpha));
  return out;
}

std::string format_epoch_record(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "epoch=%zu train_loss=%.6f ce=%.6f scl=%.6f val_f1=%.6f "
                "val_macro_f1=%.6f lr=%.6g",
                r.epoch, r.train_loss, r.ce_loss, r.scl_loss, r.val_f1,
                r.val_macro_f1, r.lr);
  return buf;
}

double selection_f1(const PredictionSet& p, std::size_t n_classes) {
  if (n_classes == 2) return f1_binary(p.predicted, p.gold, 1);
  return macro_f1(p.predicted, p.gold, n_classes);
}

PredictionSet predict(const Dataset& dataset, std::span<const std::size_t> indices,
                      const KSenseParams& params, const AblationConfig& ablation,
                      std::size_t threads, std::vector<ForwardTrace>* traces) {
  const std::size_t n = indices.size();
  PredictionSet out;
  out.ids.resize(n);
  out.predicted.resize(n);
  out.gold.resize(n);
  out.logits.resize(n);
  if (traces != nullptr) traces->assign(n, ForwardTrace{});

  const ForwardSeeds eval_seeds{};
  auto work = [&](std::size_t begin, std::size_t end) {
    NoGradGuard no_grad;
    for (std::size_t k = begin; k < end; ++k) {
      const EmbeddingFixture& f = dataset.fixtures.at(indices[k]);
      ForwardOutput fo = forward(f, params, ablation, Mode::kEval, eval_seeds);
      out.ids[k] = f.post_id;
      out.gold[k] = f.label;
      out.logits[k] = fo.trace.logits;
      out.predicted[k] = argmax_label(out.logits[k]);
      if (traces != nullptr) (*traces)[k] = std::move(fo.trace);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

KSenseParams initial_params_for(const Dataset& dataset, const TrainConfig& config,
                                std::uint64_t seed) {
  const ModelDims dims =
      ModelDims::from_manifest(dataset.manifest, config.gru_hidden, config.mlp_hidden);
  return KSenseParams::init(dims, derive_seed({seed, kInitTag}));
}

RunResult train_one(const Dataset& dataset, const SplitAssignment& splits,
                    const AblationConfig& ablation, const TrainConfig& config,
                    std::uint64_t seed, const MetricsSink& sink) {
  ablation.validate();
  const std::size_t n_classes = dataset.manifest.n_classes;
  config.validate(ablation, n_classes);
  if (splits.train.empty() || splits.val.empty() || splits.test.empty()) {
    throw ConfigError("training: every split must be non-empty");
  }
  const std::vector<std::uint32_t> labels = dataset.labels();
  const std::vector<std::uint32_t> train_labels = gather_labels(dataset, splits.train);
  const std::vector<double> class_weights =
      config.class_weighting ? inverse_frequency_weights(train_labels, n_classes)
                             : std::vector<double>(n_classes, 1.0);
  const std::size_t threads = resolve_eval_threads(config.eval_threads);

  RunResult result;
  result.seed = seed;
  KSenseParams params = initial_params_for(dataset, config, seed);
  result.initial_params = params;

  const std::size_t steps_per_epoch =
      (splits.train.size() + config.batch_size - 1) / config.batch_size;
  const auto total_steps =
      static_cast<std::int64_t>(steps_per_epoch * config.max_epochs);
  AdamWOptions adam;
  adam.weight_decay = config.weight_decay;
  std::vector<Parameter*> param_ptrs = params.parameter_ptrs();

  EarlyStopState stop;
  std::int64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = sample_stratified_batches(
        splits.train, labels, n_classes, config.batch_size,
        derive_seed({seed, kBatchTag, epoch}), ablation.use_scl);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      params.zero_grad();
      std::vector<Tensor> logit_rows;
      std::vector<Tensor> scl_rows;
      std::vector<std::uint32_t> batch_labels;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const ForwardSeeds fs{derive_seed({seed, epoch, b, k, 0}),
                              derive_seed({seed, epoch, b, k, 1}),
                              derive_seed({seed, epoch, b, k, 2})};
        ForwardOutput fo =
            forward(dataset.fixtures[batch[k]], params, ablation, Mode::kTrain, fs);
        logit_rows.push_back(fo.logits);
        if (ablation.use_scl) scl_rows.push_back(fo.scl_input);
        batch_labels.push_back(labels[batch[k]]);
      }
      const Tensor projected = ablation.use_scl ? stack_rows(scl_rows) : Tensor();
      LossParts loss = combined_loss(stack_rows(logit_rows), batch_labels, projected,
                                     class_weights, config, n_classes);
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged: loss is " + fmt(value) +
                                  " at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step),
                              static_cast<int>(epoch), static_cast<int>(step));
      }
      loss.total.backward();
      const double lr = linear_warmup_schedule(step, total_steps, config.warmup_frac,
                                               config.base_lr);
      adamw_step(param_ptrs, lr, adam);
      ++step;
      rec.train_loss += value;
      rec.ce_loss += loss.ce;
      rec.scl_loss += loss.scl.value_or(0.0);
      rec.lr = lr;
    }
    const double nb = static_cast<double>(batches.size());
    rec.train_loss /= nb;
    rec.ce_loss /= nb;
    rec.scl_loss /= nb;

    const PredictionSet val = predict(dataset, splits.val, params, ablation, threads);
    rec.val_f1 = selection_f1(val, n_classes);
    rec.val_macro_f1 = macro_f1(val.predicted, val.gold, n_classes);
    result.val_f1_history.push_back(rec.val_f1);
    result.history.push_back(rec);
    if (sink) sink(rec);
    if (stop.update(epoch, rec.val_f1, config.patience, &params)) break;
  }

  result.final_params = std::move(*stop.best_params_snapshot);
  result.best_val_f1 = stop.best_val_f1;
  result.best_epoch = stop.best_epoch;
  result.test_predictions =
      predict(dataset, splits.test, result.final_params, ablation, threads);
  result.test_f1 = selection_f1(result.test_predictions, n_classes);
  result.test_macro_f1 = macro_f1(result.test_predictions.predicted,
                                  result.test_predictions.gold, n_classes);
  predict(dataset, splits.val, result.final_params, ablation, threads, &result.traces);
  return result;
}

MultiSeedSummary run_multi_seed(const Dataset& dataset, const SplitAssignment& splits,
                                const AblationConfig& ablation,
                                const TrainConfig& config,
                                const SeedSinkFactory& sinks) {
  MultiSeedSummary summary;
  std::vector<double> f1s;
  std::vector<double> macro;
  for (std::uint64_t seed : config.seeds) {
    summary.runs.push_back(train_one(dataset, splits, ablation, config, seed,
                                     sinks ? sinks(seed) : MetricsSink{}));
    f1s.push_back(summary.runs.back().test_f1);
    macro.push_back(summary.runs.back().test_macro_f1);
  }
  summary.test_f1 = mean_std(f1s);
  summary.test_macro_f1 = mean_std(macro);
  return summary;
}

std::string format_mean_std(const MeanStd& value) {
  char buf[64];
  if (value.stddev) {
    std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", value.mean, *value.stddev);
  } else {
    std::snprintf(buf, sizeof(buf), "%.4f (n=%zu)", value.mean, value.n);
  }
  return buf;
}

}  // namespace ksense
