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

#include <benchmark/benchmark.h>

#include <vector>

#include "ksense/gru.hpp"
#include "ksense/losses.hpp"
#include "ksense/model.hpp"
#include "ksense/ops.hpp"
#include "ksense/rng.hpp"

namespace ksense {
namespace {

Tensor random(Shape shape, std::uint64_t seed, bool grad = false) {
  Xoshiro256 rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = 0.1 * rng.gaussian();
  return Tensor::from_values(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random({n, n}, 1), b = random({n, n}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_AnchorProjection(benchmark::State& state) {
  const Tensor h = random({768}, 3);
  const Tensor w = random({768, 384}, 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(project_anchor(h, w));
}
BENCHMARK(BM_AnchorProjection);

GruParams gru_params(std::size_t d_in, std::size_t d_hid, bool grad) {
  GruParams g;
  std::uint64_t s = 10;
  for (Tensor* t : {&g.W_z, &g.W_r, &g.W_n}) *t = random({d_in, d_hid}, s++, grad);
  for (Tensor* t : {&g.U_z, &g.U_r, &g.U_n}) *t = random({d_hid, d_hid}, s++, grad);
  for (Tensor* t : {&g.b_z, &g.b_r, &g.b_n, &g.b_hn}) *t = random({d_hid}, s++, grad);
  return g;
}

void BM_GruForwardBackward(benchmark::State& state) {
  const std::size_t steps = static_cast<std::size_t>(state.range(0));
  const GruParams g = gru_params(384, 256, true);
  const Tensor x = random({steps, 384}, 20, true);
  const Tensor h0 = Tensor::zeros({256});
  for (auto _ : state) {
    sum(gru_sequence(x, g, h0)).backward();
  }
}
BENCHMARK(BM_GruForwardBackward)->Arg(4)->Arg(16);

void BM_SupCon(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  const Tensor z = random({batch, 384}, 30, true);
  std::vector<std::uint32_t> y(batch);
  for (std::size_t i = 0; i < batch; ++i) y[i] = i % 2;
  const std::vector<double> w(batch, 1.0);
  for (auto _ : state) supcon_loss(z, y, 0.1, w).backward();
}
BENCHMARK(BM_SupCon)->Arg(16)->Arg(64);

void BM_FullForwardBackward(benchmark::State& state) {
  ModelDims d;
  const KSenseParams p = KSenseParams::init(d, 40);
  Xoshiro256 rng(41);
  EmbeddingFixture f;
  f.n_sentences = 6;
  f.post_embedding.resize(d.d_h);
  f.knowledge.resize(f.n_sentences * d.n_relations * d.d_k);
  for (double& v : f.post_embedding) v = rng.gaussian();
  for (double& v : f.knowledge) v = 0.1 * rng.gaussian();
  const AblationConfig full = preset_config(Preset::kFull);
  for (auto _ : state) {
    auto out = forward(f, p, full, Mode::kTrain, {1, 2, 3});
    add(sum(out.logits), sum(out.scl_input)).backward();
  }
}
BENCHMARK(BM_FullForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ksense

BENCHMARK_MAIN();
