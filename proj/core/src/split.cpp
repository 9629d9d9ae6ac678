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
#include <string>

#include "ksense/error.hpp"
#include "ksense/fixtures.hpp"
#include "ksense/rng.hpp"

namespace ksense {

SplitAssignment stratified_split(std::span<const std::uint32_t> labels,
                                 std::size_t n_classes,
                                 const SplitRatios& ratios,
                                 std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0)) {
    throw ConfigError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) {
      throw ConfigError("label " + std::to_string(labels[i]) +
                        " out of range for stratification");
    }
    by_class[labels[i]].push_back(i);
  }

  SplitAssignment out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw ConfigError("cannot stratify: class " + std::to_string(c) +
                        " has only " + std::to_string(members.size()) +
                        " example(s), need at least 3");
    }
    Xoshiro256 rng(derive_seed({seed, 0x5350u, c}));
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    const auto n_val = static_cast<std::size_t>(std::llround(n * ratios.val));
    const auto n_test = static_cast<std::size_t>(std::llround(n * ratios.test));
    std::size_t k = 0;
    for (; k < n_val; ++k) out.val.push_back(members[k]);
    for (; k < n_val + n_test; ++k) out.test.push_back(members[k]);
    for (; k < members.size(); ++k) out.train.push_back(members[k]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace ksense
