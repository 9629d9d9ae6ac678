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

#include "ksense/fixtures.hpp"

#include <cmath>
#include <string>

#include "ksense/error.hpp"

namespace ksense {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kUnsupportedVersion: return "unsupported version";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kNonFinite: return "non-finite value";
    case FormatErrorKind::kInvalidRecord: return "invalid record";
    case FormatErrorKind::kCountMismatch: return "post count mismatch";
  }
  return "unknown";
}

FormatError::FormatError(FormatErrorKind kind, std::uint64_t offset,
                         const std::string& detail)
    : Error(std::string(to_string(kind)) + " at byte offset " +
            std::to_string(offset) + (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      offset_(offset) {}

void DatasetManifest::validate() const {
  if (d_h == 0 || d_k == 0 || n_relations == 0 || n_classes == 0) {
    throw ConfigError("manifest: d_h, d_k, n_relations, n_classes must be >= 1");
  }
  if (n_classes > 256) {
    throw ConfigError("manifest: n_classes must fit in one byte");
  }
  if (class_prior.size() != n_classes) {
    throw ConfigError("manifest: class_prior has " +
                      std::to_string(class_prior.size()) +
                      " entries, expected n_classes=" +
                      std::to_string(n_classes));
  }
  double sum = 0.0;
  for (double p : class_prior) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("manifest: class_prior entries must lie in [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("manifest: class_prior must sum to 1 (got " +
                      std::to_string(sum) + ")");
  }
}

std::span<const double> EmbeddingFixture::relation(std::size_t sentence,
                                                   std::size_t rel,
                                                   std::size_t n_relations,
                                                   std::size_t d_k) const {
  const std::size_t offset = (sentence * n_relations + rel) * d_k;
  return std::span<const double>(knowledge).subspan(offset, d_k);
}

void Dataset::validate() const {
  manifest.validate();
  if (fixtures.size() != manifest.post_count) {
    throw ConfigError("dataset: manifest post_count " +
                      std::to_string(manifest.post_count) + " but " +
                      std::to_string(fixtures.size()) + " fixtures");
  }
  const auto& m = manifest;
  for (const auto& f : fixtures) {
    const std::string where = "post '" + f.post_id + "': ";
    if (f.label >= m.n_classes) {
      throw ConfigError(where + "label " + std::to_string(f.label) +
                        " out of range");
    }
    if (f.n_sentences == 0) throw ConfigError(where + "no sentences");
    if (f.post_embedding.size() != m.d_h) {
      throw ConfigError(where + "post embedding has " +
                        std::to_string(f.post_embedding.size()) +
                        " values, expected d_h=" + std::to_string(m.d_h));
    }
    if (f.knowledge.size() != f.n_sentences * m.n_relations * m.d_k) {
      throw ConfigError(where + "knowledge size does not match n_sentences x "
                                "n_relations x d_k");
    }
    for (double v : f.post_embedding) {
      if (!std::isfinite(v)) throw ConfigError(where + "non-finite embedding");
    }
    for (double v : f.knowledge) {
      if (!std::isfinite(v)) throw ConfigError(where + "non-finite knowledge");
    }
  }
}

std::vector<std::uint32_t> Dataset::labels() const {
  std::vector<std::uint32_t> out;
  out.reserve(fixtures.size());
  for (const auto& f : fixtures) out.push_back(f.label);
  return out;
}

}  // namespace ksense
