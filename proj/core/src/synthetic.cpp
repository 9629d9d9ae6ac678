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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "ksense/error.hpp"
#include "ksense/fixtures.hpp"
#include "ksense/rng.hpp"

namespace ksense {

namespace {

std::vector<double> random_unit(Xoshiro256& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

void add_noise(Xoshiro256& rng, std::span<double> out, double scale) {
  for (double& x : out) x += scale * rng.gaussian();
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::uint32_t draw_class(Xoshiro256& rng, const std::vector<double>& prior) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < prior.size(); ++c) {
    acc += prior[c];
    if (u < acc) return static_cast<std::uint32_t>(c);
  }
  return static_cast<std::uint32_t>(prior.size() - 1);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (min_sentences == 0 || min_sentences > max_sentences) {
    throw ConfigError("synthetic: need 1 <= min_sentences <= max_sentences");
  }
  if (relevant_relation >= kNumRelations) {
    throw ConfigError("synthetic: relevant_relation must be in [0,5)");
  }
  if (!(class_separation > 0.0) || !(noise_scale > 0.0) ||
      !(knowledge_separation > 0.0) || !(distractor_scale > 0.0)) {
    throw ConfigError("synthetic: separations and scales must be positive");
  }
  if (d_h == 0 || d_k == 0 || n_classes < 2) {
    throw ConfigError("synthetic: need d_h, d_k >= 1 and n_classes >= 2");
  }
  DatasetManifest probe;
  probe.n_classes = n_classes;
  probe.class_prior = class_prior;
  probe.validate();
  if (temporal_task) {
    if (n_classes != 2) throw ConfigError("synthetic: temporal task is binary");
    if (min_sentences < 2) {
      throw ConfigError("synthetic: temporal task needs min_sentences >= 2");
    }
    if (distractor_sentence) {
      throw ConfigError(
          "synthetic: distractor sentences are not supported on the temporal "
          "task (they would enter the escalation rule)");
    }
  }
}

std::uint32_t escalation_label(std::span<const double> projections) {
  const double n = static_cast<double>(projections.size());
  const double centre = (n - 1.0) / 2.0;
  double slope = 0.0;
  for (std::size_t j = 0; j < projections.size(); ++j) {
    slope += (static_cast<double>(j) - centre) * projections[j];
  }
  return slope > 0.0 ? 1u : 0u;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Xoshiro256 rng(spec.seed);

  const std::size_t C = spec.n_classes;
  std::vector<std::vector<double>> post_dirs(C), know_dirs(C);
  if (C == 2) {
    post_dirs[1] = random_unit(rng, spec.d_h);
    know_dirs[1] = random_unit(rng, spec.d_k);
    post_dirs[0] = post_dirs[1];
    know_dirs[0] = know_dirs[1];
    for (double& x : post_dirs[0]) x = -x;
    for (double& x : know_dirs[0]) x = -x;
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      post_dirs[c] = random_unit(rng, spec.d_h);
      know_dirs[c] = random_unit(rng, spec.d_k);
    }
  }
  const std::vector<double>& w = know_dirs[C == 2 ? 1 : 0];

  SyntheticDataset out;
  out.knowledge_direction = w;
  Dataset& ds = out.dataset;
  ds.manifest.name = spec.name;
  ds.manifest.d_h = spec.d_h;
  ds.manifest.d_k = spec.d_k;
  ds.manifest.n_relations = kNumRelations;
  ds.manifest.n_classes = C;
  ds.manifest.post_count = spec.post_count;
  ds.manifest.extra["generator"] = "synthetic";
  ds.manifest.extra["seed"] = std::to_string(spec.seed);
  ds.manifest.extra["temporal_task"] = spec.temporal_task ? "true" : "false";

  const std::size_t R = kNumRelations;
  const std::size_t dk = spec.d_k;
  const int width = static_cast<int>(std::to_string(spec.post_count).size());
  std::vector<std::size_t> counts(C, 0);

  for (std::size_t i = 0; i < spec.post_count; ++i) {
    EmbeddingFixture f;
    char id[64];
    std::snprintf(id, sizeof(id), "%0*zu", width, i);
    f.post_id = spec.name + "-" + id;
    const std::uint32_t n_core = spec.min_sentences + static_cast<std::uint32_t>(rng.below(
        spec.max_sentences - spec.min_sentences + 1));
    const std::uint32_t target = draw_class(rng, spec.class_prior);

    f.post_embedding.assign(spec.d_h, 0.0);
    if (!spec.temporal_task) {
      for (std::size_t d = 0; d < spec.d_h; ++d) {
        f.post_embedding[d] = spec.class_separation * post_dirs[target][d];
      }
    }
    add_noise(rng, f.post_embedding, spec.noise_scale);

    std::vector<double> core(std::size_t{n_core} * R * dk, 0.0);
    add_noise(rng, core, spec.noise_scale);
    if (spec.temporal_task) {
      std::vector<double> coeffs(n_core);
      for (double& a : coeffs) {
        a = rng.uniform(-spec.knowledge_separation, spec.knowledge_separation);
      }
      std::sort(coeffs.begin(), coeffs.end());
      if (target == 0) std::reverse(coeffs.begin(), coeffs.end());
      std::vector<double> proj(n_core);
      for (std::uint32_t j = 0; j < n_core; ++j) {
        double* row = core.data() + (j * R + spec.relevant_relation) * dk;
        for (std::size_t d = 0; d < dk; ++d) row[d] += coeffs[j] * w[d];
        proj[j] = dot(std::span<const double>(row, dk), w);
      }
      f.label = escalation_label(proj);
    } else {
      for (std::uint32_t j = 0; j < n_core; ++j) {
        double* row = core.data() + (j * R + spec.relevant_relation) * dk;
        for (std::size_t d = 0; d < dk; ++d) {
          row[d] += spec.knowledge_separation * know_dirs[target][d];
        }
      }
      f.label = target;
    }

    if (spec.distractor_sentence) {
      const std::size_t pos = static_cast<std::size_t>(rng.below(n_core + 1));
      std::vector<double> noise(R * dk, 0.0);
      add_noise(rng, noise, spec.distractor_scale * spec.noise_scale);
      core.insert(core.begin() + static_cast<std::ptrdiff_t>(pos * R * dk),
                  noise.begin(), noise.end());
      f.n_sentences = n_core + 1;
    } else {
      f.n_sentences = n_core;
    }
    f.knowledge = std::move(core);
    ++counts[f.label];
    ds.fixtures.push_back(std::move(f));
  }

  if (spec.post_count == 0) {
    ds.manifest.class_prior = spec.class_prior;
  } else {
    ds.manifest.class_prior.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      ds.manifest.class_prior[c] = static_cast<double>(counts[c]) /
                                   static_cast<double>(spec.post_count);
    }
  }
  return out;
}

}  // namespace ksense
