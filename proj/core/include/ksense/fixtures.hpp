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

#ifndef KSENSE_FIXTURES_HPP_
#define KSENSE_FIXTURES_HPP_

// Embedding fixtures: the unit of ingestion for the fusion model. A fixture
// holds a precomputed post embedding, one knowledge block per sentence and a
// class label. Fixtures are stored on disk in the KSEB container.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ksense {

inline constexpr std::size_t kNumRelations = 5;

// Frozen relation index map. Index order is part of the file format.
enum class Relation : std::size_t {
  kXIntent = 0,  // speaker intent
  kXReact = 1,   // speaker emotional reaction
  kXNeed = 2,    // what the speaker needs
  kOReact = 3,   // how others react
  kOEffect = 4,  // effect on others
};

inline constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "xIntent", "xReact", "xNeed", "oReact", "oEffect"};

struct DatasetManifest {
  std::string name = "dataset";
  std::size_t d_h = 768;
  std::size_t d_k = 384;
  std::size_t n_relations = kNumRelations;
  std::size_t n_classes = 2;
  std::size_t post_count = 0;
  std::vector<double> class_prior = {0.5, 0.5};
  // Free-form provenance (encoder ids, context policy, ...). Keys must not
  // collide with the fields above.
  std::map<std::string, std::string> extra;

  void validate() const;
};

struct EmbeddingFixture {
  std::string post_id;
  std::uint32_t label = 0;
  std::uint32_t n_sentences = 0;
  std::vector<double> post_embedding;  // d_h
  std::vector<double> knowledge;       // n_sentences x n_relations x d_k

  // Row of the knowledge tensor for (sentence, relation).
  std::span<const double> relation(std::size_t sentence, std::size_t rel,
                                   std::size_t n_relations,
                                   std::size_t d_k) const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EmbeddingFixture> fixtures;

  // Checks every type invariant; throws ConfigError naming the first
  // offending post. Values are required to be finite.
  void validate() const;
  std::vector<std::uint32_t> labels() const;
};

// ---------------------------------------------------------------------------
// KSEB v1
//
//   offset  size  field
//   0       4     magic "KSEB"
//   4       1     version (1)
//   5       4     reserved, zero
//   9       4     manifest length L (uint32)
//   13      L     manifest, UTF-8 "key=value\n" lines
//   then per post:
//           4     id length (uint32), followed by id bytes
//           1     label (uint8)
//           4     n_sentences (uint32)
//           4*d_h             post embedding (float32)
//           4*n*n_rel*d_k     knowledge (float32)
//
// All integers and floats are little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kKsebVersion = 1;

struct LoadOptions {
  // Posts with more sentences than this are rejected rather than truncated.
  std::uint32_t max_sentences = 256;
};

std::string manifest_to_text(const DatasetManifest& manifest);
DatasetManifest manifest_from_text(std::string_view text);

std::vector<std::uint8_t> encode_kseb(const Dataset& dataset);
Dataset decode_kseb(std::span<const std::uint8_t> bytes,
                    const LoadOptions& options = {});

// Writes `path` and a `<path>.manifest` sidecar. Returns bytes written to
// `path`. Values are narrowed to float32; the dataset is validated first.
std::uint64_t write_fixture_file(const Dataset& dataset,
                                 const std::filesystem::path& path);
Dataset load_fixture_file(const std::filesystem::path& path,
                          const LoadOptions& options = {});

// Rounds every embedding value through float32, i.e. returns the dataset a
// write/load cycle would produce.
Dataset quantize_to_float32(Dataset dataset);

// ---------------------------------------------------------------------------
// Synthetic fixtures
// ---------------------------------------------------------------------------

// Parameters of the class-conditional generator.
//
// Non-temporal task: the label is drawn from `class_prior`; the post
// embedding is class_separation * v_label + noise_scale * N(0, I), and the
// `relevant_relation` row of every sentence is
// knowledge_separation * w_label + noise_scale * N(0, I). The other relation
// rows are pure noise.
//
// Temporal task: the post embedding is pure noise. The relevant row of
// sentence j carries a coefficient a_j along a single knowledge direction w;
// the coefficients are a sorted draw from U(-knowledge_separation,
// +knowledge_separation), ascending or descending with equal probability.
// The stored label is the escalation rule evaluated on the stored (noisy)
// knowledge: 1 iff the least-squares slope of (relevant_row_j . w) over j is
// positive. The coefficient multiset is identical for both classes, so only
// sentence order is informative.
//
// With `distractor_sentence`, one extra sentence at a random position carries
// pure noise of scale distractor_scale * noise_scale in every relation.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t post_count = 200;
  std::uint32_t min_sentences = 3;
  std::uint32_t max_sentences = 6;
  std::size_t relevant_relation = 0;
  double class_separation = 1.0;
  double knowledge_separation = 2.0;
  double noise_scale = 1.0;
  bool temporal_task = false;
  bool distractor_sentence = false;
  double distractor_scale = 3.0;
  std::size_t d_h = 768;
  std::size_t d_k = 384;
  std::size_t n_classes = 2;
  std::vector<double> class_prior = {0.5, 0.5};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  Dataset dataset;
  // Unit knowledge direction w. Temporal task: the escalation axis.
  // Binary non-temporal task: class 1 is +w, class 0 is -w. Exposed so tests
  // can recompute the labelling rule.
  std::vector<double> knowledge_direction;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Escalation rule of the temporal task: sign of the least-squares slope of
// the projections. Returns 1 for strictly positive slope.
std::uint32_t escalation_label(std::span<const double> projections);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Indices into Dataset::fixtures.
struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Per-class stratified split. Each class with n_c examples contributes
// round(n_c * val) validation and round(n_c * test) test examples; the rest
// go to training. Classes with 1 or 2 examples cannot be stratified and
// raise ConfigError; absent classes are ignored.
SplitAssignment stratified_split(std::span<const std::uint32_t> labels,
                                 std::size_t n_classes,
                                 const SplitRatios& ratios,
                                 std::uint64_t seed);

}  // namespace ksense

#endif  // KSENSE_FIXTURES_HPP_
