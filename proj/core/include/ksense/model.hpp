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

#ifndef KSENSE_MODEL_HPP_
#define KSENSE_MODEL_HPP_

// Fusion model: semantic anchor -> cross-space projection -> temporal
// knowledge integration -> knowledge attention -> two-layer MLP head.
//
// Pass 2 and pass 3 of the encoder are emulated on frozen embeddings: each
// pass is an independently seeded inverted-dropout mask over the stored post
// embedding H0. In train mode pass 2 is also the representation the
// classifier and the single-pass query see; in eval mode both passes are the
// identity, so the anchor is exactly 2 * H0.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksense/fixtures.hpp"
#include "ksense/gru.hpp"
#include "ksense/ops.hpp"
#include "ksense/optim.hpp"
#include "ksense/tensor.hpp"

namespace ksense {

struct ModelDims {
  std::size_t d_h = 768;
  std::size_t d_k = 384;
  std::size_t n_relations = kNumRelations;
  std::size_t gru_hidden = 256;
  std::size_t mlp_hidden = 256;
  std::size_t n_classes = 2;

  // Attention temperature is sqrt(d_k).
  std::size_t scale_dim() const { return d_k; }
  void validate() const;

  static ModelDims from_manifest(const DatasetManifest& manifest,
                                 std::size_t gru_hidden = 256,
                                 std::size_t mlp_hidden = 256);
};

// All trainable tensors. Copying deep-copies values and optimizer state, so a
// copy is a snapshot.
class KSenseParams {
 public:
  // Xavier-uniform matrices, zero biases; each tensor gets its own stream
  // derived from `seed`.
  static KSenseParams init(const ModelDims& dims, std::uint64_t seed);
  // All tensors zero (useful for analytic tests).
  static KSenseParams zeros(const ModelDims& dims);

  KSenseParams() = default;
  KSenseParams(const KSenseParams& other);
  KSenseParams& operator=(const KSenseParams& other);
  KSenseParams(KSenseParams&&) noexcept = default;
  KSenseParams& operator=(KSenseParams&&) noexcept = default;

  const ModelDims& dims() const { return dims_; }

  const Tensor& W_P() const { return get(kWP); }        // [d_h x d_k]
  GruParams gru() const;                                  // d_k -> gru_hidden
  const Tensor& W_G() const { return get(kWG); }        // [gru_hidden x d_k]
  const Tensor& b_G() const { return get(kBG); }        // [d_k]
  const Tensor& mlp_W1() const { return get(kW1); }     // [(d_h+d_k) x mlp_hidden]
  const Tensor& mlp_b1() const { return get(kB1); }
  const Tensor& mlp_W2() const { return get(kW2); }     // [mlp_hidden x n_classes]
  const Tensor& mlp_b2() const { return get(kB2); }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter*> parameter_ptrs();
  Parameter& find(std::string_view name);

  void zero_grad();

 private:
  enum Index : std::size_t {
    kWP = 0,
    kGruWz, kGruWr, kGruWn, kGruUz, kGruUr, kGruUn,
    kGruBz, kGruBr, kGruBn, kGruBhn,
    kWG, kBG, kW1, kB1, kW2, kB2,
    kCount,
  };
  const Tensor& get(Index i) const { return params_[i].tensor; }
  static KSenseParams allocate(const ModelDims& dims);

  ModelDims dims_;
  std::vector<Parameter> params_;
};

enum class TemporalMode {
  kGru,       // GRU over sentences, hidden states bridged back to d_k
  kMeanPool,  // per-sentence relation mean, no recurrence
  kFlat,      // every relation vector of every sentence is its own key
};

enum class SclTarget {
  kSinglePass,  // projection of the pass-2 representation
  kAnchor,      // projection of the semantic anchor
};

struct AblationConfig {
  bool use_knowledge = true;
  bool use_projection = true;
  TemporalMode temporal_mode = TemporalMode::kGru;
  bool use_self_aug = true;
  bool use_scl = true;
  bool anchor_as_query = true;
  SclTarget scl_target = SclTarget::kAnchor;
  double dropout_p = 0.1;       // encoder-pass dropout
  double head_dropout_p = 0.1;  // between the MLP layers

  void validate() const;
  std::string to_text() const;  // key=value lines
};

// The supported rows of the ablation grid, in table order.
enum class Preset {
  kBaseOnly,
  kNoProjection,
  kWithProjection,
  kMeanPool,
  kGru,
  kSelfAugNoContrastive,
  kContrastiveNoSelfAug,
  kSelfAugQuery,
  kFull,
};

inline constexpr std::array<Preset, 9> kAllPresets = {
    Preset::kBaseOnly,         Preset::kNoProjection,
    Preset::kWithProjection,   Preset::kMeanPool,
    Preset::kGru,              Preset::kSelfAugNoContrastive,
    Preset::kContrastiveNoSelfAug, Preset::kSelfAugQuery,
    Preset::kFull};

AblationConfig preset_config(Preset preset);
std::string_view preset_label(Preset preset);  // table row label
std::string_view preset_key(Preset preset);    // short identifier
// Accepts either the short key or the exact row label.
std::optional<Preset> parse_preset(std::string_view name);

struct ForwardSeeds {
  std::uint64_t pass_a = 1;  // pass-2 dropout mask
  std::uint64_t pass_b = 2;  // pass-3 dropout mask
  std::uint64_t head = 3;    // MLP dropout mask
};

// Plain-value record of one forward pass. Optional pieces are empty when the
// configuration does not compute them.
struct ForwardTrace {
  std::vector<double> H0;                 // pass-2 representation
  std::vector<double> anchor;             // semantic anchor
  std::vector<double> projected;          // projected anchor (or pass 2)
  std::vector<double> query;              // attention query
  std::vector<double> attention_weights;  // one per key
  std::vector<double> K_star;             // attended knowledge
  std::vector<double> logits;
  std::array<std::uint64_t, 2> mask_seeds{};
};

struct ForwardOutput {
  Tensor logits;       // [n_classes]
  Tensor scl_input;    // [d_k]; undefined unless use_scl
  ForwardTrace trace;
};

struct AnchorViews {
  Tensor pass_a;  // dropout(H0, seed_a)
  Tensor pass_b;  // dropout(H0, seed_b)
  Tensor anchor;  // pass_a + pass_b
};

// Semantic anchor from two independently masked views. seed_a == seed_b is
// rejected.
AnchorViews build_anchor_views(const Tensor& H0, double p, std::uint64_t seed_a,
                               std::uint64_t seed_b, Mode mode);
Tensor build_anchor(const Tensor& H0, double p, std::uint64_t seed_a,
                    std::uint64_t seed_b, Mode mode);

// anchor [d_h] * W_P [d_h x d_k], no bias.
Tensor project_anchor(const Tensor& anchor, const Tensor& W_P);

// knowledge: [n_sentences * n_relations x d_k], rows ordered sentence-major.
// Returns attention keys: [n_sentences x d_k] (GRU, mean-pool) or
// [n_sentences * n_relations x d_k] (flat).
Tensor integrate_knowledge(const Tensor& knowledge, std::size_t n_relations,
                           TemporalMode mode, const KSenseParams& params);

// ReLU(concat(H0, K*) W1 + b1) [dropout] W2 + b2.
Tensor classify_logits(const Tensor& H0, const Tensor& K_star,
                       const KSenseParams& params, Mode mode = Mode::kEval,
                       double head_dropout_p = 0.0, std::uint64_t head_seed = 0);

Tensor knowledge_tensor(const EmbeddingFixture& fixture, const ModelDims& dims);

ForwardOutput forward(const EmbeddingFixture& fixture,
                      const KSenseParams& params, const AblationConfig& config,
                      Mode mode, const ForwardSeeds& seeds);

}  // namespace ksense

#endif  // KSENSE_MODEL_HPP_
