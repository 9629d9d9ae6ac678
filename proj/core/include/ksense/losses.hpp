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

#ifndef KSENSE_LOSSES_HPP_
#define KSENSE_LOSSES_HPP_

#include <cstdint>
#include <span>

#include "ksense/tensor.hpp"

namespace ksense {

// Supervised contrastive loss over a batch of representations [B x d].
//
// For anchor i let P(i) be the other batch members sharing its label and A(i)
// every other member. With s_ij = z_i . z_j / tau,
//
//   L_i = -(1/|P(i)|) sum_{p in P(i)} log( exp(s_ip) / sum_{a in A(i)} exp(s_ia) )
//
// and the result is (1/M) sum_i anchor_weights[i] * L_i, where M counts the
// anchors with a non-empty P(i). Anchors without positives contribute 0.
// Similarity is the raw dot product unless `cosine` is set, in which case
// rows are L2-normalised first.
//
// Throws DegenerateBatchError when no anchor with positives carries a
// non-zero weight.
Tensor supcon_loss(const Tensor& projected, std::span<const std::uint32_t> labels,
                   double tau, std::span<const double> anchor_weights,
                   bool cosine = false);

// Mean over the batch of class_weights[y_i] * -log softmax(logits_i)[y_i].
// logits: [B x C].
Tensor weighted_cross_entropy(const Tensor& logits,
                              std::span<const std::uint32_t> labels,
                              std::span<const double> class_weights);

}  // namespace ksense

#endif  // KSENSE_LOSSES_HPP_
