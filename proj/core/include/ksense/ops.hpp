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

#ifndef KSENSE_OPS_HPP_
#define KSENSE_OPS_HPP_

// Differentiable operations over Tensor. Only what the fusion model needs:
// rank-1 and rank-2 operands, no general broadcasting.

#include <cstdint>
#include <span>
#include <vector>

#include "ksense/tensor.hpp"

namespace ksense {

enum class Mode { kTrain, kEval };

// a: [k] or [m x k], b: [k x n]  ->  [n] or [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x: [n] or [m x n], bias: [n]; bias is added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Rank-1 helpers.
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& x, std::size_t begin, std::size_t length);

// Rank-2 helpers.
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor row(const Tensor& x, std::size_t index);
Tensor mean_rows(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Sum of all entries, rank-0 result.
Tensor sum(const Tensor& x);

struct DropoutResult {
  Tensor output;
  std::vector<std::uint8_t> mask;  // 1 = kept
};

// Inverted dropout: kept entries are scaled by 1/(1-p). The Bernoulli(1-p)
// mask is a pure function of mask_seed (entry i is kept iff the i-th uniform
// draw of Xoshiro256(mask_seed) is >= p). Eval mode is the identity.
DropoutResult dropout(const Tensor& x, double p, std::uint64_t mask_seed,
                      Mode mode);

struct AttentionResult {
  Tensor weights;  // [r]
  Tensor context;  // [d]
};

// weights = softmax(keys . query / sqrt(scale_dim)), context = weights . keys.
// query: [d], keys: [r x d].
AttentionResult scaled_softmax_attention(const Tensor& query,
                                         const Tensor& keys,
                                         std::size_t scale_dim);

// Max-shifted softmax of a plain vector; used by analysis code.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ksense

#endif  // KSENSE_OPS_HPP_
