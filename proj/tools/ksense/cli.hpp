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

#ifndef KSENSE_TOOLS_CLI_HPP_
#define KSENSE_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ksense/config.hpp"
#include "ksense/evaluation.hpp"

namespace ksense::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,  // bad flags, bad or missing config, mismatched inputs
  kExitIo = 3,     // unreadable or corrupt files
  kExitNumerical = 4,
};

// Entry point shared by main() and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct RunOverrides {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> preset;
  std::optional<double> lr;
  bool quiet = false;
};

// The commands throw ksense::Error subclasses; run() maps them to exit codes.
void cmd_synth(const std::filesystem::path& config_path,
               const std::filesystem::path& out_path, std::ostream& out);
void cmd_train(const std::filesystem::path& fixture_path,
               const std::optional<std::filesystem::path>& config_path,
               const std::filesystem::path& out_dir, const RunOverrides& overrides,
               std::ostream& out);
void cmd_ablate(const std::filesystem::path& fixture_path,
                const std::optional<std::filesystem::path>& config_path,
                const std::filesystem::path& out_dir, const RunOverrides& overrides,
                std::ostream& out);
void cmd_compare(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                 std::size_t n_resamples, std::ostream& out);
void cmd_repquality(const std::filesystem::path& run_dir, std::ostream& out);

// Artifact formats, exposed for tests.
void write_predictions_csv(const std::filesystem::path& path, const PredictionSet& p);
PredictionSet read_predictions_csv(const std::filesystem::path& path);

struct TraceTable {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> labels;
  PointSet points;
};
TraceTable read_trace_csv(const std::filesystem::path& path);

}  // namespace ksense::cli

#endif  // KSENSE_TOOLS_CLI_HPP_
