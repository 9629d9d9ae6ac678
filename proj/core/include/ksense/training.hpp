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

#ifndef KSENSE_TRAINING_HPP_
#define KSENSE_TRAINING_HPP_

// Stratified batching, the combined CE + SupCon objective, and the training
// loop with warmup, early stopping and multi-seed reporting.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksense/evaluation.hpp"
#include "ksense/fixtures.hpp"
#include "ksense/model.hpp"

namespace ksense {

struct TrainConfig {
  double alpha = 0.7;
  double tau = 0.1;
  double base_lr = 2e-5;
  double weight_decay = 0.01;
  double warmup_frac = 0.1;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool class_weighting = true;
  bool cosine_similarity = false;  // SupCon on L2-normalized vectors
  std::size_t gru_hidden = 256;
  std::size_t mlp_hidden = 256;
  // 0 means KSENSE_THREADS, falling back to the hardware concurrency.
  std::size_t eval_threads = 0;

  void validate(const AblationConfig& ablation, std::size_t n_classes) const;
  std::string to_text() const;  // key=value lines
};

// Worker count for evaluation passes.
std::size_t resolve_eval_threads(std::size_t requested);

class EarlyStopState {
 public:
  double best_val_f1 = -1.0;
  std::size_t best_epoch = 0;  // 1-based; 0 before the first epoch
  std::size_t epochs_since_improve = 0;
  std::optional<KSenseParams> best_params_snapshot;

  // Records the end of `epoch`. The first epoch always snapshots; later
  // epochs only when val_f1 is strictly greater than the best so far.
  // Returns true once training should stop.
  bool update(std::size_t epoch, double val_f1, std::size_t patience,
              const KSenseParams* params);
};

// Batches of indices into `labels` (the whole dataset's labels); only ids in
// `split_ids` are used. Each batch first takes floor(batch_size / n_classes)
// examples from every class, then fills up from a global shuffle. With
// `require_pairs`, a trailing batch holding no same-class pair is merged into
// the previous one.
std::vector<std::vector<std::size_t>> sample_stratified_batches(
    std::span<const std::size_t> split_ids, std::span<const std::uint32_t> labels,
    std::size_t n_classes, std::size_t batch_size, std::uint64_t seed,
    bool require_pairs = false);

// weight_i = min(1, |P(i)| / E) with E = batch_size / n_classes - 1.
std::vector<double> supcon_downweight(std::span<const std::uint32_t> batch_labels,
                                      std::size_t batch_size, std::size_t n_classes);

// N / (n_classes * count_c).
std::vector<double> inverse_frequency_weights(std::span<const std::uint32_t> labels,
                                              std::size_t n_classes);

// alpha * ce + (1 - alpha) * scl, or ce alone without a contrastive term.
double combine_objective(double alpha, double ce, std::optional<double> scl);

struct LossParts {
  Tensor total;
  double ce = 0.0;
  std::optional<double> scl;
};

// `projected` [B x d] is left undefined when contrastive training is off.
LossParts combined_loss(const Tensor& logits, std::span<const std::uint32_t> labels,
                        const Tensor& projected,
                        std::span<const double> class_weights,
                        const TrainConfig& config, std::size_t n_classes);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double ce_loss = 0.0;
  double scl_loss = 0.0;
  double val_f1 = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
};

std::string format_epoch_record(const EpochRecord& record);

using MetricsSink = std::function<void(const EpochRecord&)>;

struct RunResult {
  std::uint64_t seed = 0;
  double test_f1 = 0.0;
  double test_macro_f1 = 0.0;
  double best_val_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<double> val_f1_history;
  std::vector<EpochRecord> history;
  KSenseParams initial_params;
  KSenseParams final_params;  // best-validation snapshot
  PredictionSet test_predictions;
  // Eval-mode traces over the validation split, with the final params.
  std::vector<ForwardTrace> traces;
};

// Selection metric: positive-class F1 for two classes, macro-F1 otherwise.
double selection_f1(const PredictionSet& predictions, std::size_t n_classes);

// Eval-mode predictions for dataset.fixtures[i], i in `indices`, in order.
PredictionSet predict(const Dataset& dataset, std::span<const std::size_t> indices,
                      const KSenseParams& params, const AblationConfig& ablation,
                      std::size_t threads, std::vector<ForwardTrace>* traces = nullptr);

// Deterministic parameter initialization for a run seed.
KSenseParams initial_params_for(const Dataset& dataset, const TrainConfig& config,
                                std::uint64_t seed);

RunResult train_one(const Dataset& dataset, const SplitAssignment& splits,
                    const AblationConfig& ablation, const TrainConfig& config,
                    std::uint64_t seed, const MetricsSink& sink = {});

struct MultiSeedSummary {
  std::vector<RunResult> runs;
  MeanStd test_f1;
  MeanStd test_macro_f1;
};

using SeedSinkFactory = std::function<MetricsSink(std::uint64_t seed)>;

MultiSeedSummary run_multi_seed(const Dataset& dataset, const SplitAssignment& splits,
                                const AblationConfig& ablation,
                                const TrainConfig& config,
                                const SeedSinkFactory& sinks = {});

// "0.8500 ± 0.0707" or "0.8500 (n=1)".
std::string format_mean_std(const MeanStd& value);

}  // namespace ksense

#endif  // KSENSE_TRAINING_HPP_
