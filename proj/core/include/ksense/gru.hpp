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

#ifndef KSENSE_GRU_HPP_
#define KSENSE_GRU_HPP_

#include <cstdint>

#include "ksense/tensor.hpp"

namespace ksense {

// Gate weights of a single-layer GRU. Inputs are row vectors, so the
// input-to-hidden matrices are [d_in x d_hid] and x * W is a row.
struct GruParams {
  Tensor W_z, W_r, W_n;        // [d_in x d_hid]
  Tensor U_z, U_r, U_n;        // [d_hid x d_hid]
  Tensor b_z, b_r, b_n, b_hn;  // [d_hid]

  std::size_t input_dim() const { return W_z.dim(0); }
  std::size_t hidden_dim() const { return W_z.dim(1); }

  // Shape consistency; throws ShapeError.
  void validate() const;

  static GruParams zeros(std::size_t d_in, std::size_t d_hid,
                         bool requires_grad = false);
};

// Runs the recurrence over every row of `inputs` ([T x d_in]) from h0 ([d_hid])
// and returns all hidden states [T x d_hid]:
//
//   z  = sigmoid(x W_z + h U_z + b_z)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   n  = tanh(x W_n + b_n + r * (h U_n + b_hn))
//   h' = (1 - z) * n + z * h
//
// Backward is fused (backpropagation through time) and reaches inputs, h0
// and all parameters.
Tensor gru_sequence(const Tensor& inputs, const GruParams& params,
                    const Tensor& h0);

}  // namespace ksense

#endif  // KSENSE_GRU_HPP_
