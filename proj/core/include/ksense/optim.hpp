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

#ifndef KSENSE_OPTIM_HPP_
#define KSENSE_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ksense/tensor.hpp"

namespace ksense {

// A trainable tensor with its AdamW state.
struct Parameter {
  std::string name;
  Tensor tensor;  // requires_grad
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string name, Tensor tensor);

  // Fresh zero moments and step counter, e.g. after loading a snapshot.
  void reset_state();
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One AdamW update with decoupled weight decay:
//   theta <- theta - lr * wd * theta
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Every parameter must hold a gradient buffer (zero_grad() counts); a
// missing one raises ConfigError naming the parameter.
void adamw_step(std::span<Parameter* const> params, double lr,
                const AdamWOptions& options);

// Linear warmup from 0 to base_lr over the first warmup_frac * total_steps
// steps, then linear decay to 0 at total_steps.
double linear_warmup_schedule(std::int64_t step, std::int64_t total_steps,
                              double warmup_frac, double base_lr);

// I.i.d. U(-a, a) with a = sqrt(6 / (rows + cols)), drawn from
// Xoshiro256(seed) in row-major order.
Tensor xavier_uniform_init(std::size_t rows, std::size_t cols,
                           std::uint64_t seed, bool requires_grad = true);

}  // namespace ksense

#endif  // KSENSE_OPTIM_HPP_
