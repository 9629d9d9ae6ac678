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

#include <doctest.h>

#include <cmath>

#include "ksense/error.hpp"
#include "ksense/ops.hpp"
#include "ksense/optim.hpp"

namespace ksense {
namespace {

Parameter scalar_param(double v) {
  return Parameter("theta", Tensor::from_values({1}, {v}, true));
}

TEST_CASE("first step moves by lr against the gradient sign") {
  for (double g : {3.0, -0.02, 1e-3}) {
    Parameter p = scalar_param(0.5);
    p.tensor.mutable_grad()[0] = g;
    Parameter* ptrs[] = {&p};
    AdamWOptions o;
    o.weight_decay = 0.0;
    adamw_step(ptrs, 0.01, o);
    const double delta = p.tensor.at(0) - 0.5;
    const double expected = -0.01 * (g > 0 ? 1 : -1);
    CHECK(std::abs(delta - expected) <= 1.01 * 0.01 * 1e-8 / (std::abs(g) + 1e-8) + 1e-15);
    CHECK(p.step_count == 1);
  }
}

TEST_CASE("zero gradient without decay is a fixed point") {
  Parameter p = scalar_param(1.25);
  p.tensor.mutable_grad();
  Parameter* ptrs[] = {&p};
  AdamWOptions o;
  o.weight_decay = 0.0;
  adamw_step(ptrs, 0.1, o);
  CHECK(p.tensor.at(0) == 1.25);
}

TEST_CASE("two steps on theta^2 match a hand-stepped reference") {
  for (double wd : {0.0, 0.01}) {
    Parameter p = scalar_param(1.0);
    Parameter* ptrs[] = {&p};
    AdamWOptions o;
    o.weight_decay = wd;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double theta = 1.0, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
      const double g = 2 * theta;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      theta = theta - lr * wd * theta - lr * mh / (std::sqrt(vh) + eps);

      p.tensor.zero_grad();
      Tensor x = p.tensor;
      sum(mul(x, x)).backward();
      adamw_step(ptrs, lr, o);
      CHECK(std::abs(p.tensor.at(0) - theta) < 1e-12);
    }
  }
}

TEST_CASE("decay alone contracts the norm by 1 - lr * wd") {
  Parameter p("w", Tensor::from_values({3}, {3, -4, 12}, true));
  p.tensor.mutable_grad();
  Parameter* ptrs[] = {&p};
  AdamWOptions o;
  o.weight_decay = 0.01;
  for (int s = 0; s < 3; ++s) {
    double before = 0, after = 0;
    for (double v : p.tensor.values()) before += v * v;
    adamw_step(ptrs, 0.5, o);
    for (double v : p.tensor.values()) after += v * v;
    CHECK(std::sqrt(after) == doctest::Approx(std::sqrt(before) * (1 - 0.005)).epsilon(1e-14));
  }
}

TEST_CASE("missing gradient names the parameter") {
  Parameter p = scalar_param(1.0);
  Parameter* ptrs[] = {&p};
  try {
    adamw_step(ptrs, 0.1, {});
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
}

TEST_CASE("linear warmup schedule") {
  CHECK(linear_warmup_schedule(0, 100, 0.1, 2e-5) == 0.0);
  CHECK(linear_warmup_schedule(10, 100, 0.1, 2e-5) == doctest::Approx(2e-5));
  CHECK(linear_warmup_schedule(5, 100, 0.1, 2e-5) == doctest::Approx(1e-5));
  CHECK(linear_warmup_schedule(55, 100, 0.1, 2e-5) == doctest::Approx(1e-5));
  CHECK(linear_warmup_schedule(100, 100, 0.1, 2e-5) == 0.0);
  CHECK_THROWS_AS(linear_warmup_schedule(0, 0, 0.1, 1.0), ConfigError);
}

TEST_CASE("xavier uniform init") {
  const Tensor w = xavier_uniform_init(768, 384, 17);
  const double a = std::sqrt(6.0 / 1152.0);
  CHECK(a == doctest::Approx(0.07217).epsilon(1e-4));
  double mean = 0, sq = 0;
  for (double v : w.values()) {
    CHECK(std::abs(v) <= a);
    mean += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.numel());
  const double var = sq / n - (mean / n) * (mean / n);
  CHECK(std::abs(var - a * a / 3) < 0.05 * a * a / 3);
  const Tensor again = xavier_uniform_init(768, 384, 17);
  CHECK(std::equal(w.values().begin(), w.values().end(), again.values().begin()));
  CHECK(w.requires_grad());
}

}  // namespace
}  // namespace ksense
