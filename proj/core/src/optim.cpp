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

#include "ksense/optim.hpp"

#include <cmath>

#include "ksense/error.hpp"
#include "ksense/rng.hpp"

namespace ksense {

Parameter::Parameter(std::string n, Tensor t)
    : name(std::move(n)), tensor(std::move(t)) {
  reset_state();
}

void Parameter::reset_state() {
  adam_m.assign(tensor.numel(), 0.0);
  adam_v.assign(tensor.numel(), 0.0);
  step_count = 0;
}

void adamw_step(std::span<Parameter* const> params, double lr,
                const AdamWOptions& o) {
  for (const Parameter* p : params) {
    if (!p->tensor.has_grad()) {
      throw ConfigError("adamw: parameter '" + p->name + "' has no gradient");
    }
  }
  for (Parameter* p : params) {
    ++p->step_count;
    const double t = static_cast<double>(p->step_count);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    const double decay = 1.0 - lr * o.weight_decay;
    auto theta = p->tensor.mutable_values();
    const auto g = p->tensor.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      p->adam_m[i] = o.beta1 * p->adam_m[i] + (1.0 - o.beta1) * g[i];
      p->adam_v[i] = o.beta2 * p->adam_v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = p->adam_m[i] / c1;
      const double v_hat = p->adam_v[i] / c2;
      theta[i] = theta[i] * decay - lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

double linear_warmup_schedule(std::int64_t step, std::int64_t total_steps,
                              double warmup_frac, double base_lr) {
  if (total_steps <= 0) throw ConfigError("schedule: total_steps must be > 0");
  if (step < 0 || step > total_steps) {
    throw ConfigError("schedule: step outside [0, total_steps]");
  }
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) {
    throw ConfigError("schedule: warmup_frac must lie in [0, 1)");
  }
  const double s = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double warm = warmup_frac * total;
  if (s < warm) return base_lr * s / warm;
  return base_lr * (total - s) / (total - warm);
}

Tensor xavier_uniform_init(std::size_t rows, std::size_t cols,
                           std::uint64_t seed, bool requires_grad) {
  if (rows == 0 || cols == 0) throw ConfigError("xavier: empty shape");
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Xoshiro256 rng(seed);
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-a, a);
  return Tensor::from_values({rows, cols}, std::move(values), requires_grad);
}

}  // namespace ksense
