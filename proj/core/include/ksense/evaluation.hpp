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

#ifndef KSENSE_EVALUATION_HPP_
#define KSENSE_EVALUATION_HPP_

// Classification metrics, paired bootstrap significance and representation
// quality analyses. Every function here is pure.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksense/fixtures.hpp"
#include "ksense/model.hpp"

namespace ksense {

struct PredictionSet {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> predicted;
  std::vector<std::uint32_t> gold;
  std::vector<std::vector<double>> logits;

  // Equal lengths, unique ids.
  void validate() const;
  std::size_t size() const { return ids.size(); }
};

// Argmax with ties resolved to the lowest class index.
std::uint32_t argmax_label(std::span<const double> logits);

// F1 of `positive_class`. 0 when precision + recall = 0, except that a set
// with no positive predictions and no positive golds (TP = FP = FN = 0)
// scores 1.
double f1_binary(std::span<const std::uint32_t> preds,
                 std::span<const std::uint32_t> golds,
                 std::uint32_t positive_class = 1);

// Unweighted mean of the per-class F1 scores.
double macro_f1(std::span<const std::uint32_t> preds,
                std::span<const std::uint32_t> golds, std::size_t n_classes);

// One-sided paired bootstrap. Resamples test indices with replacement
// (Xoshiro256(seed), index = below(n)) and returns the fraction of resamples
// in which F1(b) >= F1(a); `a` is the candidate system, ties count against it.
double paired_bootstrap(std::span<const std::uint32_t> preds_a,
                        std::span<const std::uint32_t> preds_b,
                        std::span<const std::uint32_t> golds,
                        std::size_t n_resamples, std::uint64_t seed,
                        std::uint32_t positive_class = 1);

using PointSet = std::vector<std::vector<double>>;

// Mean silhouette, Euclidean distance. Points in singleton classes score 0,
// as do points with a = b = 0. Needs at least two non-empty classes.
double silhouette(const PointSet& points, std::span<const std::uint32_t> labels);

// (1/C) sum_i max_{j != i} (s_i + s_j) / d_ij over the C non-empty classes;
// s_i is the mean distance to the class centroid, d_ij the centroid distance.
// Coincident centroids give +infinity.
double davies_bouldin(const PointSet& points, std::span<const std::uint32_t> labels);

struct RepQualityReport {
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  std::size_t n_points = 0;
  std::size_t n_classes = 0;
};

RepQualityReport representation_quality(const PointSet& points,
                                        std::span<const std::uint32_t> labels);

// Shannon entropy in nats; 0 * ln 0 = 0.
double attention_entropy(std::span<const double> weights);

struct AttentionReport {
  double mean_entropy_nats = 0.0;
  // Diagnostic readout, not the model's attention: per post, softmax of the
  // projected anchor (the query when there is no projection) against the
  // five per-relation means (averaged over sentences),
  // scaled by 1/sqrt(scale_dim), then averaged over posts.
  std::array<double, kNumRelations> per_relation_mean_weight{};
  std::size_t n_posts = 0;
  std::size_t max_keys = 0;
};

// traces[i] must come from fixtures[i]. Throws ConfigError when a trace has
// no attention weights (knowledge disabled).
AttentionReport attention_report(std::span<const ForwardTrace> traces,
                                 std::span<const EmbeddingFixture* const> fixtures,
                                 const ModelDims& dims);

struct MeanStd {
  double mean = 0.0;
  std::optional<double> stddev;  // sample std, absent for n = 1
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

std::string to_key_value(const RepQualityReport& report);
std::string to_key_value(const AttentionReport& report);

}  // namespace ksense

#endif  // KSENSE_EVALUATION_HPP_
