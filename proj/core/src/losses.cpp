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

#include "ksense/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "graph.hpp"

namespace ksense {

using detail::grad_sink;
using detail::make_result;
using detail::Node;
using detail::require;

namespace {

double log_sum_exp(const double* v, std::size_t n, std::size_t skip) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != skip) mx = std::max(mx, v[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != skip) z += std::exp(v[j] - mx);
  }
  return mx + std::log(z);
}

}  // namespace

Tensor supcon_loss(const Tensor& projected, std::span<const std::uint32_t> labels,
                   double tau, std::span<const double> anchor_weights,
                   bool cosine) {
  require(projected.rank() == 2, "supcon: expected [B x d], got " +
                                     shape_to_string(projected.shape()));
  const std::size_t B = projected.dim(0);
  const std::size_t d = projected.dim(1);
  if (B < 2) throw ConfigError("supcon: batch needs at least 2 members");
  if (!(tau > 0.0)) throw ConfigError("supcon: tau must be positive");
  require(labels.size() == B && anchor_weights.size() == B,
          "supcon: labels/anchor_weights must have one entry per row");
  for (double w : anchor_weights) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw ConfigError("supcon: anchor weights must lie in [0, 1]");
    }
  }

  // Unit rows when cosine similarity is requested.
  const auto z = projected.values();
  std::vector<double> u(z.begin(), z.end());
  std::vector<double> norms(B, 1.0);
  if (cosine) {
    for (std::size_t i = 0; i < B; ++i) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) n2 += u[i * d + k] * u[i * d + k];
      norms[i] = std::max(std::sqrt(n2), 1e-12);
      for (std::size_t k = 0; k < d; ++k) u[i * d + k] /= norms[i];
    }
  }

  std::vector<double> sim(B * B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = i + 1; j < B; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += u[i * d + k] * u[j * d + k];
      sim[i * B + j] = sim[j * B + i] = s / tau;
    }
  }

  std::vector<std::size_t> n_pos(B, 0);
  std::size_t with_pos = 0;
  bool any_weight = false;
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      if (j != i && labels[j] == labels[i]) ++n_pos[i];
    }
    if (n_pos[i] > 0) {
      ++with_pos;
      any_weight = any_weight || anchor_weights[i] > 0.0;
    }
  }
  if (with_pos == 0 || !any_weight) {
    throw DegenerateBatchError(
        "supcon: no anchor in the batch has a weighted positive pair");
  }

  // Per-anchor softmax over A(i); reused by backward.
  std::vector<double> prob(B * B, 0.0);
  std::vector<double> coef(B, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    if (n_pos[i] == 0) continue;
    const double* si = sim.data() + i * B;
    const double lse = log_sum_exp(si, B, i);
    double pos_sum = 0.0;
    for (std::size_t j = 0; j < B; ++j) {
      if (j == i) continue;
      prob[i * B + j] = std::exp(si[j] - lse);
      if (labels[j] == labels[i]) pos_sum += si[j];
    }
    const double li = lse - pos_sum / static_cast<double>(n_pos[i]);
    coef[i] = anchor_weights[i] / static_cast<double>(with_pos);
    total += coef[i] * li;
  }

  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  return make_result(
      {}, {total}, {projected},
      [B, d, tau, cosine, u = std::move(u), norms = std::move(norms),
       prob = std::move(prob), coef = std::move(coef),
       n_pos = std::move(n_pos), lab = std::move(lab)](Node& self) {
        auto* gz = grad_sink(*self.parents[0]);
        if (!gz) return;
        const double g = self.grad[0];
        std::vector<double> du(B * d, 0.0);
        for (std::size_t i = 0; i < B; ++i) {
          if (n_pos[i] == 0 || coef[i] == 0.0) continue;
          for (std::size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            double gs = prob[i * B + j];
            if (lab[j] == lab[i]) gs -= 1.0 / static_cast<double>(n_pos[i]);
            gs *= g * coef[i] / tau;
            for (std::size_t k = 0; k < d; ++k) {
              du[i * d + k] += gs * u[j * d + k];
              du[j * d + k] += gs * u[i * d + k];
            }
          }
        }
        if (!cosine) {
          for (std::size_t k = 0; k < B * d; ++k) (*gz)[k] += du[k];
          return;
        }
        for (std::size_t i = 0; i < B; ++i) {
          double proj = 0.0;
          for (std::size_t k = 0; k < d; ++k) proj += u[i * d + k] * du[i * d + k];
          for (std::size_t k = 0; k < d; ++k) {
            (*gz)[i * d + k] += (du[i * d + k] - u[i * d + k] * proj) / norms[i];
          }
        }
      });
}

Tensor weighted_cross_entropy(const Tensor& logits,
                              std::span<const std::uint32_t> labels,
                              std::span<const double> class_weights) {
  require(logits.rank() == 2, "cross entropy: expected [B x C] logits, got " +
                                  shape_to_string(logits.shape()));
  const std::size_t B = logits.dim(0);
  const std::size_t C = logits.dim(1);
  require(B > 0 && labels.size() == B,
          "cross entropy: need one label per logit row");
  require(class_weights.size() == C,
          "cross entropy: need one weight per class");
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("cross entropy: class weights must be > 0");
  }
  for (std::uint32_t y : labels) {
    if (y >= C) {
      throw ConfigError("cross entropy: label " + std::to_string(y) +
                        " out of range for " + std::to_string(C) + " classes");
    }
  }
  const auto v = logits.values();
  std::vector<double> prob(B * C);
  std::vector<double> wy(B);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double lse = log_sum_exp(v.data() + i * C, C, C);
    for (std::size_t c = 0; c < C; ++c) prob[i * C + c] = std::exp(v[i * C + c] - lse);
    wy[i] = class_weights[labels[i]];
    total += wy[i] * (lse - v[i * C + labels[i]]);
  }
  total /= static_cast<double>(B);
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  return make_result({}, {total}, {logits},
                     [B, C, prob = std::move(prob), wy = std::move(wy),
                      lab = std::move(lab)](Node& self) {
                       auto* g = grad_sink(*self.parents[0]);
                       if (!g) return;
                       const double scale = self.grad[0] / static_cast<double>(B);
                       for (std::size_t i = 0; i < B; ++i) {
                         for (std::size_t c = 0; c < C; ++c) {
                           const double target = c == lab[i] ? 1.0 : 0.0;
                           (*g)[i * C + c] += scale * wy[i] * (prob[i * C + c] - target);
                         }
                       }
                     });
}

}  // namespace ksense
