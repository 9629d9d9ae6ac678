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

#include "ksense/model.hpp"

#include <sstream>

#include "graph.hpp"
#include "ksense/error.hpp"
#include "ksense/rng.hpp"

namespace ksense {

using detail::grad_sink;
using detail::make_result;
using detail::Node;

namespace {

constexpr std::array<std::string_view, 17> kParamNames = {
    "W_P",
    "gru.W_z", "gru.W_r", "gru.W_n", "gru.U_z", "gru.U_r", "gru.U_n",
    "gru.b_z", "gru.b_r", "gru.b_n", "gru.b_hn",
    "W_G", "b_G", "mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2"};

std::vector<double> copy_values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

// [n*g x d] -> [n x d], mean over consecutive groups of g rows.
Tensor mean_row_groups(const Tensor& x, std::size_t g) {
  const std::size_t rows = x.dim(0);
  const std::size_t d = x.dim(1);
  const std::size_t n = rows / g;
  std::vector<double> out(n * d, 0.0);
  const auto v = x.values();
  const double inv = 1.0 / static_cast<double>(g);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t r = 0; r < g; ++r) {
      const double* src = v.data() + (s * g + r) * d;
      for (std::size_t j = 0; j < d; ++j) out[s * d + j] += src[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[s * d + j] *= inv;
  }
  return make_result({n, d}, std::move(out), {x}, [n, g, d, inv](Node& self) {
    if (auto* gx = grad_sink(*self.parents[0])) {
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t r = 0; r < g; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            (*gx)[(s * g + r) * d + j] += inv * self.grad[s * d + j];
          }
        }
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelDims / KSenseParams
// ---------------------------------------------------------------------------

void ModelDims::validate() const {
  if (d_h == 0 || d_k == 0 || n_relations == 0 || gru_hidden == 0 ||
      mlp_hidden == 0 || n_classes < 2) {
    throw ConfigError("model: all dimensions must be >= 1 and n_classes >= 2");
  }
}

ModelDims ModelDims::from_manifest(const DatasetManifest& m,
                                   std::size_t gru_hidden,
                                   std::size_t mlp_hidden) {
  ModelDims dims;
  dims.d_h = m.d_h;
  dims.d_k = m.d_k;
  dims.n_relations = m.n_relations;
  dims.n_classes = m.n_classes;
  dims.gru_hidden = gru_hidden;
  dims.mlp_hidden = mlp_hidden;
  dims.validate();
  return dims;
}

KSenseParams KSenseParams::allocate(const ModelDims& dims) {
  dims.validate();
  const std::size_t dh = dims.d_h, dk = dims.d_k, gh = dims.gru_hidden,
                    mh = dims.mlp_hidden, C = dims.n_classes;
  const std::array<Shape, kCount> shapes = {
      Shape{dh, dk},
      Shape{dk, gh}, Shape{dk, gh}, Shape{dk, gh},
      Shape{gh, gh}, Shape{gh, gh}, Shape{gh, gh},
      Shape{gh}, Shape{gh}, Shape{gh}, Shape{gh},
      Shape{gh, dk}, Shape{dk},
      Shape{dh + dk, mh}, Shape{mh},
      Shape{mh, C}, Shape{C}};
  KSenseParams p;
  p.dims_ = dims;
  for (std::size_t i = 0; i < kCount; ++i) {
    p.params_.emplace_back(std::string(kParamNames[i]),
                           Tensor::zeros(shapes[i], true));
  }
  return p;
}

KSenseParams KSenseParams::zeros(const ModelDims& dims) { return allocate(dims); }

KSenseParams KSenseParams::init(const ModelDims& dims, std::uint64_t seed) {
  KSenseParams p = allocate(dims);
  for (std::size_t i = 0; i < kCount; ++i) {
    Tensor& t = p.params_[i].tensor;
    if (t.rank() != 2) continue;  // biases stay zero
    Tensor init = xavier_uniform_init(t.dim(0), t.dim(1), derive_seed({seed, i}));
    auto dst = t.mutable_values();
    std::copy(init.values().begin(), init.values().end(), dst.begin());
  }
  return p;
}

KSenseParams::KSenseParams(const KSenseParams& other) : dims_(other.dims_) {
  params_.reserve(other.params_.size());
  for (const auto& src : other.params_) {
    Parameter copy;
    copy.name = src.name;
    copy.tensor = Tensor::from_values(src.tensor.shape(), copy_values(src.tensor), true);
    copy.adam_m = src.adam_m;
    copy.adam_v = src.adam_v;
    copy.step_count = src.step_count;
    params_.push_back(std::move(copy));
  }
}

KSenseParams& KSenseParams::operator=(const KSenseParams& other) {
  if (this != &other) {
    KSenseParams tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

GruParams KSenseParams::gru() const {
  GruParams g;
  g.W_z = get(kGruWz);
  g.W_r = get(kGruWr);
  g.W_n = get(kGruWn);
  g.U_z = get(kGruUz);
  g.U_r = get(kGruUr);
  g.U_n = get(kGruUn);
  g.b_z = get(kGruBz);
  g.b_r = get(kGruBr);
  g.b_n = get(kGruBn);
  g.b_hn = get(kGruBhn);
  return g;
}

std::vector<Parameter*> KSenseParams::parameter_ptrs() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

Parameter& KSenseParams::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

void KSenseParams::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

// ---------------------------------------------------------------------------
// Ablation presets
// ---------------------------------------------------------------------------

void AblationConfig::validate() const {
  if (anchor_as_query && !use_self_aug) {
    throw ConfigError("ablation: anchor_as_query requires use_self_aug");
  }
  if (use_projection && !use_knowledge) {
    throw ConfigError("ablation: use_projection requires use_knowledge");
  }
  if (use_scl && !use_projection) {
    throw ConfigError("ablation: use_scl operates on projected anchors and "
                      "requires use_projection");
  }
  if (use_scl && scl_target == SclTarget::kAnchor && !use_self_aug) {
    throw ConfigError("ablation: SCL on the anchor requires use_self_aug");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0) ||
      !(head_dropout_p >= 0.0 && head_dropout_p < 1.0)) {
    throw ConfigError("ablation: dropout probabilities must lie in [0, 1)");
  }
}

std::string AblationConfig::to_text() const {
  auto b = [](bool v) { return v ? "true" : "false"; };
  const char* temporal = temporal_mode == TemporalMode::kGru        ? "gru"
                         : temporal_mode == TemporalMode::kMeanPool ? "mean_pool"
                                                                    : "flat";
  std::ostringstream os;
  os << "use_knowledge=" << b(use_knowledge) << "\n"
     << "use_projection=" << b(use_projection) << "\n"
     << "temporal_mode=" << temporal << "\n"
     << "use_self_aug=" << b(use_self_aug) << "\n"
     << "use_scl=" << b(use_scl) << "\n"
     << "anchor_as_query=" << b(anchor_as_query) << "\n"
     << "scl_target="
     << (scl_target == SclTarget::kAnchor ? "anchor" : "single_pass") << "\n"
     << "dropout_p=" << dropout_p << "\n"
     << "head_dropout_p=" << head_dropout_p << "\n";
  return os.str();
}

AblationConfig preset_config(Preset preset) {
  AblationConfig c;
  c.use_knowledge = true;
  c.use_projection = true;
  c.temporal_mode = TemporalMode::kGru;
  c.use_self_aug = false;
  c.use_scl = false;
  c.anchor_as_query = false;
  c.scl_target = SclTarget::kSinglePass;
  switch (preset) {
    case Preset::kBaseOnly:
      c.use_knowledge = false;
      c.use_projection = false;
      break;
    case Preset::kNoProjection:
      c.use_projection = false;
      c.temporal_mode = TemporalMode::kFlat;
      break;
    case Preset::kWithProjection:
      c.temporal_mode = TemporalMode::kFlat;
      break;
    case Preset::kMeanPool:
      c.temporal_mode = TemporalMode::kMeanPool;
      break;
    case Preset::kGru:
      break;
    case Preset::kSelfAugNoContrastive:
      c.use_self_aug = true;
      c.anchor_as_query = true;
      break;
    case Preset::kContrastiveNoSelfAug:
      c.use_scl = true;
      break;
    case Preset::kSelfAugQuery:
      c.use_self_aug = true;
      c.anchor_as_query = true;
      c.use_scl = true;
      break;
    case Preset::kFull:
      c.use_self_aug = true;
      c.anchor_as_query = true;
      c.use_scl = true;
      c.scl_target = SclTarget::kAnchor;
      break;
  }
  return c;
}

std::string_view preset_label(Preset preset) {
  switch (preset) {
    case Preset::kBaseOnly: return "Base encoder only";
    case Preset::kNoProjection: return "+ COMET (no projection)";
    case Preset::kWithProjection: return "+ COMET (with projection)";
    case Preset::kMeanPool: return "+ COMET (proj., mean-pool)";
    case Preset::kGru: return "+ COMET (proj., GRU)";
    case Preset::kSelfAugNoContrastive: return "+ Self-aug. (no contrastive)";
    case Preset::kContrastiveNoSelfAug: return "+ Contrastive (no self-aug.)";
    case Preset::kSelfAugQuery: return "+ Self-aug. as knowledge query";
    case Preset::kFull: return "Full K-SENSE";
  }
  return "";
}

std::string_view preset_key(Preset preset) {
  switch (preset) {
    case Preset::kBaseOnly: return "base";
    case Preset::kNoProjection: return "no_projection";
    case Preset::kWithProjection: return "with_projection";
    case Preset::kMeanPool: return "mean_pool";
    case Preset::kGru: return "gru";
    case Preset::kSelfAugNoContrastive: return "self_aug";
    case Preset::kContrastiveNoSelfAug: return "contrastive";
    case Preset::kSelfAugQuery: return "self_aug_query";
    case Preset::kFull: return "full";
  }
  return "";
}

std::optional<Preset> parse_preset(std::string_view name) {
  for (Preset p : kAllPresets) {
    if (name == preset_key(p) || name == preset_label(p)) return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

AnchorViews build_anchor_views(const Tensor& H0, double p, std::uint64_t seed_a,
                               std::uint64_t seed_b, Mode mode) {
  if (seed_a == seed_b) {
    throw ConfigError(
        "anchor: the two dropout masks must use different seeds");
  }
  AnchorViews v;
  v.pass_a = dropout(H0, p, seed_a, mode).output;
  v.pass_b = dropout(H0, p, seed_b, mode).output;
  v.anchor = add(v.pass_a, v.pass_b);
  return v;
}

Tensor build_anchor(const Tensor& H0, double p, std::uint64_t seed_a,
                    std::uint64_t seed_b, Mode mode) {
  return build_anchor_views(H0, p, seed_a, seed_b, mode).anchor;
}

Tensor project_anchor(const Tensor& anchor, const Tensor& W_P) {
  if (anchor.rank() != 1 || W_P.rank() != 2 || W_P.dim(0) != anchor.dim(0)) {
    throw ShapeError("projection: cannot map " + shape_to_string(anchor.shape()) +
                     " through " + shape_to_string(W_P.shape()));
  }
  return matmul(anchor, W_P);
}

Tensor integrate_knowledge(const Tensor& knowledge, std::size_t n_relations,
                           TemporalMode mode, const KSenseParams& params) {
  if (knowledge.rank() != 2 || knowledge.dim(0) == 0 || n_relations == 0 ||
      knowledge.dim(0) % n_relations != 0) {
    throw ShapeError("knowledge: expected [n_sentences * n_relations x d_k] "
                     "with n_sentences >= 1, got " +
                     shape_to_string(knowledge.shape()));
  }
  if (mode == TemporalMode::kFlat) return knowledge;
  Tensor pooled = mean_row_groups(knowledge, n_relations);
  if (mode == TemporalMode::kMeanPool) return pooled;
  const auto& d = params.dims();
  Tensor states = gru_sequence(pooled, params.gru(),
                               Tensor::zeros({d.gru_hidden}));
  return add_bias(matmul(states, params.W_G()), params.b_G());
}

Tensor classify_logits(const Tensor& H0, const Tensor& K_star,
                       const KSenseParams& params, Mode mode,
                       double head_dropout_p, std::uint64_t head_seed) {
  const auto& d = params.dims();
  if (H0.shape() != Shape{d.d_h} || K_star.shape() != Shape{d.d_k}) {
    throw ShapeError("classifier: expected H0 [" + std::to_string(d.d_h) +
                     "] and K* [" + std::to_string(d.d_k) + "], got " +
                     shape_to_string(H0.shape()) + " and " +
                     shape_to_string(K_star.shape()));
  }
  Tensor hidden = relu(add_bias(matmul(concat(H0, K_star), params.mlp_W1()),
                                params.mlp_b1()));
  hidden = dropout(hidden, head_dropout_p, head_seed, mode).output;
  return add_bias(matmul(hidden, params.mlp_W2()), params.mlp_b2());
}

Tensor knowledge_tensor(const EmbeddingFixture& fixture, const ModelDims& dims) {
  return Tensor::from_values(
      {std::size_t{fixture.n_sentences} * dims.n_relations, dims.d_k},
      fixture.knowledge);
}

ForwardOutput forward(const EmbeddingFixture& fixture,
                      const KSenseParams& params, const AblationConfig& config,
                      Mode mode, const ForwardSeeds& seeds) {
  config.validate();
  const auto& dims = params.dims();
  if (fixture.post_embedding.size() != dims.d_h ||
      fixture.knowledge.size() !=
          std::size_t{fixture.n_sentences} * dims.n_relations * dims.d_k ||
      fixture.n_sentences == 0) {
    throw ShapeError("forward: fixture '" + fixture.post_id +
                     "' does not match model dimensions");
  }
  if (!config.use_projection && config.use_knowledge && dims.d_k > dims.d_h) {
    throw ShapeError("forward: unprojected query needs d_k <= d_h");
  }

  ForwardOutput out;
  ForwardTrace& tr = out.trace;
  tr.mask_seeds = {seeds.pass_a, seeds.pass_b};

  const Tensor h0 = Tensor::vector(fixture.post_embedding);
  Tensor single;
  Tensor anchor;
  if (config.use_self_aug) {
    AnchorViews v = build_anchor_views(h0, config.dropout_p, seeds.pass_a,
                                       seeds.pass_b, mode);
    single = v.pass_a;
    anchor = v.anchor;
    tr.anchor = copy_values(anchor);
  } else {
    single = dropout(h0, config.dropout_p, seeds.pass_a, mode).output;
  }
  tr.H0 = copy_values(single);

  Tensor proj_single;
  Tensor proj_anchor;
  if (config.use_projection) {
    if (anchor.defined()) proj_anchor = project_anchor(anchor, params.W_P());
    const bool need_single =
        !config.anchor_as_query ||
        (config.use_scl && config.scl_target == SclTarget::kSinglePass) ||
        !anchor.defined();
    if (need_single) proj_single = project_anchor(single, params.W_P());
    tr.projected = copy_values(proj_anchor.defined() ? proj_anchor : proj_single);
  }
  if (config.use_scl) {
    out.scl_input =
        config.scl_target == SclTarget::kAnchor ? proj_anchor : proj_single;
  }

  Tensor k_star;
  if (config.use_knowledge) {
    const Tensor& src = config.anchor_as_query ? anchor : single;
    Tensor query;
    if (config.use_projection) {
      query = config.anchor_as_query ? proj_anchor : proj_single;
    } else {
      query = slice(src, 0, dims.d_k);
    }
    Tensor keys = integrate_knowledge(knowledge_tensor(fixture, dims),
                                      dims.n_relations, config.temporal_mode,
                                      params);
    AttentionResult att = scaled_softmax_attention(query, keys, dims.scale_dim());
    k_star = att.context;
    tr.query = copy_values(query);
    tr.attention_weights = copy_values(att.weights);
  } else {
    k_star = Tensor::zeros({dims.d_k});
  }
  tr.K_star = copy_values(k_star);

  out.logits = classify_logits(single, k_star, params, mode,
                               config.head_dropout_p, seeds.head);
  tr.logits = copy_values(out.logits);
  return out;
}

}  // namespace ksense
