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

#include "ksense/cli.hpp"

#include <CLI11.hpp>

#include "ksense/error.hpp"

namespace ksense::cli {

namespace fs = std::filesystem;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ksense: knowledge-guided fusion experiments on embedding fixtures",
               "ksense"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string seeds_arg;
  std::string preset_arg;
  double lr_override = 0.0;
  bool quiet = false;
  std::string fixture;
  std::string run_a;
  std::string run_b;
  std::size_t resamples = 10000;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture file");
  synth->add_option("--config", config_path, "Config file")->required();
  synth->add_option("--out", out_path, "Output fixture path")->required();

  auto add_run_flags = [&](CLI::App* cmd, bool with_preset) {
    cmd->add_option("fixture", fixture, "Fixture file")->required();
    cmd->add_option("--config", config_path, "Config file");
    cmd->add_option("--out", out_path, "Output directory")->required();
    cmd->add_option("--seeds", seeds_arg, "Comma-separated seed list");
    if (with_preset) cmd->add_option("--preset", preset_arg, "Preset key or row label");
    cmd->add_option("--lr-override", lr_override, "Base learning rate");
    cmd->add_flag("--quiet", quiet, "Suppress per-epoch progress");
  };
  auto* train = app.add_subcommand("train", "Train one preset over all seeds");
  add_run_flags(train, true);
  auto* ablate = app.add_subcommand("ablate", "Run every ablation row");
  add_run_flags(ablate, true);

  auto* compare = app.add_subcommand("compare", "Paired bootstrap between two runs");
  compare->add_option("run_a", run_a, "Candidate run directory")->required();
  compare->add_option("run_b", run_b, "Reference run directory")->required();
  compare->add_option("--resamples", resamples, "Bootstrap resamples")
      ->check(CLI::PositiveNumber);

  auto* repq = app.add_subcommand("repquality", "Cluster quality before/after training");
  repq->add_option("run", run_a, "Run directory")->required();

  auto* defaults = app.add_subcommand("defaults", "Print every config key with its default");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ksense: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    RunOverrides ov;
    ov.quiet = quiet;
    if (!seeds_arg.empty()) ov.seeds = parse_seed_list(seeds_arg);
    if (!preset_arg.empty()) ov.preset = preset_arg;
    auto lr_opt = [&](CLI::App* cmd) {
      if (cmd->count("--lr-override")) {
        if (!(lr_override > 0.0)) throw ConfigError("--lr-override must be positive");
        ov.lr = lr_override;
      }
    };
    std::optional<fs::path> cfg;
    if (!config_path.empty()) cfg = config_path;

    if (synth->parsed()) {
      cmd_synth(config_path, out_path, out);
    } else if (train->parsed()) {
      lr_opt(train);
      cmd_train(fixture, cfg, out_path, ov, out);
    } else if (ablate->parsed()) {
      lr_opt(ablate);
      cmd_ablate(fixture, cfg, out_path, ov, out);
    } else if (compare->parsed()) {
      cmd_compare(run_a, run_b, resamples, out);
    } else if (repq->parsed()) {
      cmd_repquality(run_a, out);
    } else if (defaults->parsed()) {
      out << defaults_text();
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "ksense: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "ksense: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "ksense: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "ksense: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "ksense: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateBatchError& e) {
    err << "ksense: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "ksense: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace ksense::cli
