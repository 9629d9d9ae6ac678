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

#ifndef KSENSE_TOOLS_CONFIG_HPP_
#define KSENSE_TOOLS_CONFIG_HPP_

// Plain-text experiment configuration: one `key=value` per line, `#` starts
// a comment. Keys are grouped by prefix (synth., split., model., ablation.,
// train.); unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ksense/fixtures.hpp"
#include "ksense/model.hpp"
#include "ksense/training.hpp"

namespace ksense::cli {

struct ExperimentConfig {
  SyntheticSpec synth;
  SplitRatios split;
  std::uint64_t split_seed = 0;
  Preset preset = Preset::kFull;
  // ablation.* toggles other than the preset, applied on top of it.
  std::vector<std::pair<std::string, std::string>> ablation_overrides;
  double dropout_p = 0.1;
  double head_dropout_p = 0.1;
  TrainConfig train;
  std::set<std::string> keys_present;

  bool has(std::string_view key) const {
    return keys_present.count(std::string(key)) > 0;
  }
  // Preset, then overrides, then model-level dropout rates.
  AblationConfig ablation_for(Preset preset) const;
  AblationConfig ablation() const { return ablation_for(preset); }
};

// Throws ConfigError naming the offending line or key.
ExperimentConfig parse_config(std::string_view text);

// Every key with its default value, itself a valid config.
std::string defaults_text();

// "1,2,3" -> {1, 2, 3}.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace ksense::cli

#endif  // KSENSE_TOOLS_CONFIG_HPP_
