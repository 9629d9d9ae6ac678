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

#include "ksense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "ksense/error.hpp"
#include "ksense/ops.hpp"
#include "ksense/rng.hpp"

namespace ksense {

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

double f1_from(const Counts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return 1.0;
  const double denom = 2.0 * static_cast<double>(c.tp) +
                       static_cast<double>(c.fp) + static_cast<double>(c.fn);
  return 2.0 * static_cast<double>(c.tp) / denom;
}

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ConfigError("metrics: prediction/gold length mismatch (" +
                      std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw ConfigError("metrics: empty prediction set");
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Class ids that occur, ascending, plus validation shared by the cluster
// metrics.
std::vector<std::uint32_t> present_classes(const PointSet& points,
                                           std::span<const std::uint32_t> labels) {
  if (points.size() != labels.size()) {
    throw ConfigError("cluster metrics: points/labels length mismatch");
  }
  if (points.size() < 2) throw ConfigError("cluster metrics: need N >= 2");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ConfigError("cluster metrics: ragged points");
  }
  std::set<std::uint32_t> classes(labels.begin(), labels.end());
  if (classes.size() < 2) {
    throw ConfigError("cluster metrics: need at least two classes");
  }
  return {classes.begin(), classes.end()};
}

}  // namespace

void PredictionSet::validate() const {
  if (predicted.size() != ids.size() || gold.size() != ids.size() ||
      logits.size() != ids.size()) {
    throw ConfigError("prediction set: field lengths differ");
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) {
    throw ConfigError("prediction set: duplicate ids");
  }
}

std::uint32_t argmax_label(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return static_cast<std::uint32_t>(best);
}

double f1_binary(std::span<const std::uint32_t> preds,
                 std::span<const std::uint32_t> golds,
                 std::uint32_t positive_class) {
  check_aligned(preds.size(), golds.size());
  Counts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool g = golds[i] == positive_class;
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
  }
  return f1_from(c);
}

double macro_f1(std::span<const std::uint32_t> preds,
                std::span<const std::uint32_t> golds, std::size_t n_classes) {
  check_aligned(preds.size(), golds.size());
  double total = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    total += f1_binary(preds, golds, static_cast<std::uint32_t>(c));
  }
  return total / static_cast<double>(n_classes);
}

double paired_bootstrap(std::span<const std::uint32_t> preds_a,
                        std::span<const std::uint32_t> preds_b,
                        std::span<const std::uint32_t> golds,
                        std::size_t n_resamples, std::uint64_t seed,
                        std::uint32_t positive_class) {
  check_aligned(preds_a.size(), golds.size());
  check_aligned(preds_b.size(), golds.size());
  if (n_resamples == 0) throw ConfigError("bootstrap: n_resamples must be > 0");
  const std::size_t n = golds.size();
  Xoshiro256 rng(seed);
  std::size_t b_wins = 0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    Counts ca, cb;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.below(n));
      const bool g = golds[i] == positive_class;
      const bool pa = preds_a[i] == positive_class;
      const bool pb = preds_b[i] == positive_class;
      ca.tp += pa && g;
      ca.fp += pa && !g;
      ca.fn += !pa && g;
      cb.tp += pb && g;
      cb.fp += pb && !g;
      cb.fn += !pb && g;
    }
    if (f1_from(cb) >= f1_from(ca)) ++b_wins;
  }
  return static_cast<double>(b_wins) / static_cast<double>(n_resamples);
}

double silhouette(const PointSet& points, std::span<const std::uint32_t> labels) {
  const auto classes = present_classes(points, labels);
  const std::size_t N = points.size();
  std::vector<std::size_t> class_size(*std::max_element(classes.begin(), classes.end()) + 1, 0);
  for (std::uint32_t y : labels) ++class_size[y];

  std::vector<double> sums(class_size.size());
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (class_size[labels[i]] == 1) continue;  // singleton scores 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      if (j != i) sums[labels[j]] += distance(points[i], points[j]);
    }
    const double a = sums[labels[i]] / static_cast<double>(class_size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::uint32_t c : classes) {
      if (c == labels[i]) continue;
      b = std::min(b, sums[c] / static_cast<double>(class_size[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(N);
}

double davies_bouldin(const PointSet& points, std::span<const std::uint32_t> labels) {
  const auto classes = present_classes(points, labels);
  const std::size_t dim = points.front().size();
  const std::size_t C = classes.size();
  std::vector<std::vector<double>> centroid(C, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(C, 0);
  auto slot = [&](std::uint32_t y) {
    return static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), y) - classes.begin());
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t c = slot(labels[i]);
    ++count[c];
    for (std::size_t k = 0; k < dim; ++k) centroid[c][k] += points[i][k];
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (double& v : centroid[c]) v /= static_cast<double>(count[c]);
  }
  std::vector<double> scatter(C, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t c = slot(labels[i]);
    scatter[c] += distance(points[i], centroid[c]);
  }
  for (std::size_t c = 0; c < C; ++c) scatter[c] /= static_cast<double>(count[c]);

  double total = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      if (j == i) continue;
      const double d = distance(centroid[i], centroid[j]);
      if (d == 0.0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, (scatter[i] + scatter[j]) / d);
    }
    total += worst;
  }
  return total / static_cast<double>(C);
}

RepQualityReport representation_quality(const PointSet& points,
                                        std::span<const std::uint32_t> labels) {
  RepQualityReport r;
  r.silhouette = silhouette(points, labels);
  r.davies_bouldin = davies_bouldin(points, labels);
  r.n_points = points.size();
  r.n_classes = std::set<std::uint32_t>(labels.begin(), labels.end()).size();
  return r;
}

double attention_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double w : weights) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

AttentionReport attention_report(std::span<const ForwardTrace> traces,
                                 std::span<const EmbeddingFixture* const> fixtures,
                                 const ModelDims& dims) {
  if (traces.size() != fixtures.size()) {
    throw ConfigError("attention report: traces and fixtures are not aligned");
  }
  if (traces.empty()) throw ConfigError("attention report: no traces");
  if (dims.n_relations != kNumRelations) {
    throw ConfigError("attention report: expects five relations");
  }
  AttentionReport rep;
  rep.n_posts = traces.size();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dims.scale_dim()));
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ForwardTrace& t = traces[i];
    const std::vector<double>& probe =
        t.projected.size() == dims.d_k ? t.projected : t.query;
    if (t.attention_weights.empty() || probe.size() != dims.d_k) {
      throw ConfigError("attention report: trace " + std::to_string(i) +
                        " carries no attention weights");
    }
    rep.mean_entropy_nats += attention_entropy(t.attention_weights);
    rep.max_keys = std::max(rep.max_keys, t.attention_weights.size());

    const EmbeddingFixture& f = *fixtures[i];
    std::array<double, kNumRelations> logits{};
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < dims.d_k; ++k) {
        double mean = 0.0;
        for (std::size_t j = 0; j < f.n_sentences; ++j) {
          mean += f.relation(j, r, dims.n_relations, dims.d_k)[k];
        }
        s += probe[k] * mean / static_cast<double>(f.n_sentences);
      }
      logits[r] = s * inv_sqrt;
    }
    const auto w = softmax(logits);
    for (std::size_t r = 0; r < kNumRelations; ++r) rep.per_relation_mean_weight[r] += w[r];
  }
  const double n = static_cast<double>(traces.size());
  rep.mean_entropy_nats /= n;
  for (double& w : rep.per_relation_mean_weight) w /= n;
  return rep;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ConfigError("mean_std: no values");
  MeanStd out;
  out.n = values.size();
  // Shifted by the first value so identical inputs give an exact mean.
  const double shift = values[0];
  double acc = 0.0;
  for (double v : values) acc += v - shift;
  out.mean = shift + acc / static_cast<double>(out.n);
  if (out.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

std::string to_key_value(const RepQualityReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "silhouette=%.6f\ndavies_bouldin=%.6f\nn_points=%zu\nn_classes=%zu\n",
                r.silhouette, r.davies_bouldin, r.n_points, r.n_classes);
  return buf;
}

std::string to_key_value(const AttentionReport& r) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "mean_entropy_nats=%.6f\n", r.mean_entropy_nats);
  os << buf;
  for (std::size_t k = 0; k < kNumRelations; ++k) {
    std::snprintf(buf, sizeof(buf), "relation_weight.%s=%.6f\n",
                  std::string(kRelationNames[k]).c_str(), r.per_relation_mean_weight[k]);
    os << buf;
  }
  os << "n_posts=" << r.n_posts << "\nmax_keys=" << r.max_keys << "\n";
  return os.str();
}

}  // namespace ksense
