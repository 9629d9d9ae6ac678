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
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ksense/cli.hpp"
#include "ksense/error.hpp"
#include "ksense/rng.hpp"
#include "ksense/snapshot.hpp"
#include "ksense/training.hpp"

namespace ksense::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kBootstrapTag = 0x424F4F54;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string signed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.4f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::vector<std::string> csv_rows(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw IoError(path.string() + ": empty file");
  return rows;
}

double parse_double_field(const std::string& s, const fs::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError(path.string() + ": bad number '" + s + "'");
  }
  return v;
}

std::uint32_t parse_label_field(const std::string& s, const fs::path& path) {
  const double v = parse_double_field(s, path);
  if (v < 0 || v != static_cast<double>(static_cast<std::uint32_t>(v))) {
    throw IoError(path.string() + ": bad label '" + s + "'");
  }
  return static_cast<std::uint32_t>(v);
}

void write_trace_csv(const fs::path& path, const std::vector<ForwardTrace>& traces,
                     const Dataset& dataset, const std::vector<std::size_t>& indices) {
  std::ostringstream os;
  os << "id,label";
  const std::size_t dim = traces.empty() ? 0 : traces.front().projected.size();
  for (std::size_t k = 0; k < dim; ++k) os << ",p" << k;
  os << "\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& f = dataset.fixtures[indices[i]];
    os << csv_field(f.post_id) << "," << f.label;
    for (double v : traces[i].projected) os << "," << g17(v);
    os << "\n";
  }
  write_text(path, os.str());
}

struct Loaded {
  std::string config_text;
  ExperimentConfig config;
};

Loaded load_config(const std::optional<fs::path>& path) {
  Loaded l;
  if (path) {
    l.config_text = read_text(*path);
  } else {
    l.config_text = "# no config file given; built-in defaults\n";
  }
  l.config = parse_config(l.config_text);
  return l;
}

void apply_overrides(ExperimentConfig& cfg, const RunOverrides& o) {
  if (o.seeds) cfg.train.seeds = *o.seeds;
  if (o.lr) cfg.train.base_lr = *o.lr;
  if (o.preset) {
    const auto p = parse_preset(*o.preset);
    if (!p) throw ConfigError("--preset: unknown preset '" + *o.preset + "'");
    cfg.preset = *p;
  }
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    s += (i ? "," : "") + std::to_string(seeds[i]);
  }
  return s;
}

std::string resolved_text(const fs::path& fixture, const Dataset& dataset,
                          const ExperimentConfig& cfg, Preset preset,
                          const AblationConfig& ablation, const SplitAssignment& s) {
  std::ostringstream os;
  os << "fixture=" << fixture.filename().string() << "\n"
     << "dataset=" << dataset.manifest.name << "\n"
     << "preset=" << preset_key(preset) << "\n"
     << "preset_label=" << preset_label(preset) << "\n"
     << "split.seed=" << cfg.split_seed << "\n"
     << "split.sizes=" << s.train.size() << "," << s.val.size() << "," << s.test.size()
     << "\n\n[ablation]\n"
     << ablation.to_text() << "\n[train]\n"
     << cfg.train.to_text();
  return os.str();
}

struct Prepared {
  Dataset dataset;
  SplitAssignment splits;
};

Prepared prepare(const fs::path& fixture_path, const ExperimentConfig& cfg) {
  Prepared p;
  p.dataset = load_fixture_file(fixture_path);
  p.splits = stratified_split(p.dataset.labels(), p.dataset.manifest.n_classes,
                              cfg.split, cfg.split_seed);
  return p;
}

// Runs every seed of one preset into `dir` and returns the summary.
MultiSeedSummary run_preset(const fs::path& fixture_path, const Prepared& prep,
                            const Loaded& loaded, Preset preset, const fs::path& dir,
                            bool quiet, std::ostream& out) {
  const ExperimentConfig& cfg = loaded.config;
  const AblationConfig ablation = cfg.ablation_for(preset);
  cfg.train.validate(ablation, prep.dataset.manifest.n_classes);
  make_dir(dir);
  write_text(dir / "config.txt", loaded.config_text);
  write_text(dir / "resolved.txt",
             resolved_text(fixture_path, prep.dataset, cfg, preset, ablation, prep.splits));

  std::map<std::uint64_t, std::ostringstream> logs;
  auto sinks = [&](std::uint64_t seed) -> MetricsSink {
    logs[seed].str("");
    return [&, seed](const EpochRecord& rec) {
      const std::string line = format_epoch_record(rec);
      logs[seed] << line << "\n";
      if (!quiet) out << "[" << preset_key(preset) << " seed " << seed << "] " << line << "\n";
    };
  };
  MultiSeedSummary summary =
      run_multi_seed(prep.dataset, prep.splits, ablation, cfg.train, sinks);

  const std::size_t threads = resolve_eval_threads(cfg.train.eval_threads);
  std::ostringstream sum;
  sum << "preset=" << preset_key(preset) << "\n"
      << "preset_label=" << preset_label(preset) << "\n"
      << "seeds=" << seeds_text(cfg.train.seeds) << "\n"
      << "test_f1=" << format_mean_std(summary.test_f1) << "\n"
      << "test_macro_f1=" << format_mean_std(summary.test_macro_f1) << "\n";
  for (const RunResult& r : summary.runs) {
    const fs::path sd = dir / ("seed_" + std::to_string(r.seed));
    make_dir(sd);
    write_text(sd / "metrics.log", logs[r.seed].str());
    write_predictions_csv(sd / "predictions.csv", r.test_predictions);
    write_snapshot(r.initial_params, sd / "params_init.ksep");
    write_snapshot(r.final_params, sd / "params_best.ksep");
    if (ablation.use_projection) {
      std::vector<ForwardTrace> init_traces;
      predict(prep.dataset, prep.splits.val, r.initial_params, ablation, threads,
              &init_traces);
      write_trace_csv(sd / "traces_init.csv", init_traces, prep.dataset, prep.splits.val);
      write_trace_csv(sd / "traces_best.csv", r.traces, prep.dataset, prep.splits.val);
    }
    if (ablation.use_knowledge) {
      std::vector<const EmbeddingFixture*> fx;
      for (std::size_t i : prep.splits.val) fx.push_back(&prep.dataset.fixtures[i]);
      write_text(sd / "attention.txt",
                 to_key_value(attention_report(r.traces, fx, r.final_params.dims())));
    }
    sum << "seed=" << r.seed << " test_f1=" << f4(r.test_f1)
        << " test_macro_f1=" << f4(r.test_macro_f1) << " best_epoch=" << r.best_epoch
        << " best_val_f1=" << f4(r.best_val_f1) << " epochs=" << r.history.size() << "\n";
  }
  write_text(dir / "summary.txt", sum.str());
  return summary;
}

}  // namespace

void write_predictions_csv(const fs::path& path, const PredictionSet& p) {
  p.validate();
  std::ostringstream os;
  const std::size_t n_logits = p.logits.empty() ? 0 : p.logits.front().size();
  os << "id,gold,predicted";
  for (std::size_t c = 0; c < n_logits; ++c) os << ",logit_" << c;
  os << "\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << csv_field(p.ids[i]) << "," << p.gold[i] << "," << p.predicted[i];
    for (double v : p.logits[i]) os << "," << g17(v);
    os << "\n";
  }
  write_text(path, os.str());
}

PredictionSet read_predictions_csv(const fs::path& path) {
  const auto rows = csv_rows(path);
  const auto header = csv_split(rows.front());
  if (header.size() < 3 || header[0] != "id" || header[1] != "gold" ||
      header[2] != "predicted") {
    throw IoError(path.string() + ": not a predictions file");
  }
  PredictionSet p;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = csv_split(rows[r]);
    if (f.size() != header.size()) {
      throw IoError(path.string() + ": row " + std::to_string(r) + " has " +
                    std::to_string(f.size()) + " fields");
    }
    p.ids.push_back(f[0]);
    p.gold.push_back(parse_label_field(f[1], path));
    p.predicted.push_back(parse_label_field(f[2], path));
    std::vector<double> logits;
    for (std::size_t c = 3; c < f.size(); ++c) logits.push_back(parse_double_field(f[c], path));
    p.logits.push_back(std::move(logits));
  }
  p.validate();
  return p;
}

TraceTable read_trace_csv(const fs::path& path) {
  const auto rows = csv_rows(path);
  const auto header = csv_split(rows.front());
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw IoError(path.string() + ": not a trace file");
  }
  TraceTable t;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = csv_split(rows[r]);
    if (f.size() != header.size()) {
      throw IoError(path.string() + ": row " + std::to_string(r) + " is ragged");
    }
    t.ids.push_back(f[0]);
    t.labels.push_back(parse_label_field(f[1], path));
    std::vector<double> v;
    for (std::size_t k = 2; k < f.size(); ++k) v.push_back(parse_double_field(f[k], path));
    t.points.push_back(std::move(v));
  }
  return t;
}

void cmd_synth(const fs::path& config_path, const fs::path& out_path, std::ostream& out) {
  const ExperimentConfig cfg = parse_config(read_text(config_path));
  for (const char* key : {"synth.post_count", "synth.seed"}) {
    if (!cfg.has(key)) throw ConfigError(std::string("missing required key ") + key);
  }
  const SyntheticDataset synth = generate_synthetic(cfg.synth);
  const std::uint64_t bytes = write_fixture_file(synth.dataset, out_path);
  out << "wrote " << out_path.string() << " (" << bytes << " bytes)\n"
      << manifest_to_text(synth.dataset.manifest);
}

void cmd_train(const fs::path& fixture_path, const std::optional<fs::path>& config_path,
               const fs::path& out_dir, const RunOverrides& overrides, std::ostream& out) {
  Loaded loaded = load_config(config_path);
  apply_overrides(loaded.config, overrides);
  const Prepared prep = prepare(fixture_path, loaded.config);
  const MultiSeedSummary s = run_preset(fixture_path, prep, loaded, loaded.config.preset,
                                        out_dir, overrides.quiet, out);
  out << "test_f1=" << format_mean_std(s.test_f1) << "\n";
}

void cmd_ablate(const fs::path& fixture_path, const std::optional<fs::path>& config_path,
                const fs::path& out_dir, const RunOverrides& overrides, std::ostream& out) {
  Loaded loaded = load_config(config_path);
  if (!loaded.config.ablation_overrides.empty()) {
    throw ConfigError("ablate: ablation.* toggles would alter every table row; "
                      "remove them from the config");
  }
  if (overrides.preset) throw ConfigError("ablate: --preset does not apply");
  apply_overrides(loaded.config, overrides);
  const Prepared prep = prepare(fixture_path, loaded.config);
  make_dir(out_dir);
  write_text(out_dir / "config.txt", loaded.config_text);

  std::ostringstream table;
  char line[256];
  table << "# test F1, mean ± std over seeds " << seeds_text(loaded.config.train.seeds)
        << "; dataset " << prep.dataset.manifest.name << "\n";
  std::snprintf(line, sizeof(line), "%-4s %-32s %-20s %s\n", "row", "configuration",
                "F1", "macro-F1");
  table << line;
  std::size_t row = 0;
  for (Preset p : kAllPresets) {
    const MultiSeedSummary s = run_preset(fixture_path, prep, loaded, p,
                                          out_dir / std::string(preset_key(p)),
                                          overrides.quiet, out);
    std::snprintf(line, sizeof(line), "%-4zu %-32s %-20s %s\n", ++row,
                  std::string(preset_label(p)).c_str(), format_mean_std(s.test_f1).c_str(),
                  format_mean_std(s.test_macro_f1).c_str());
    table << line;
  }
  write_text(out_dir / "ablation_table.txt", table.str());
  out << table.str();
}

namespace {

std::map<std::uint64_t, fs::path> seed_dirs(const fs::path& run) {
  std::map<std::uint64_t, fs::path> dirs;
  std::error_code ec;
  if (!fs::is_directory(run, ec)) throw IoError("not a run directory: " + run.string());
  for (const auto& entry : fs::directory_iterator(run)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
    char* end = nullptr;
    const auto seed = std::strtoull(name.c_str() + 5, &end, 10);
    if (*end == '\0' && end != name.c_str() + 5) dirs[seed] = entry.path();
  }
  return dirs;
}

// Orders by id so two runs can be paired.
PredictionSet sorted_by_id(const PredictionSet& p) {
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p.ids[a] < p.ids[b]; });
  PredictionSet s;
  for (std::size_t i : order) {
    s.ids.push_back(p.ids[i]);
    s.gold.push_back(p.gold[i]);
    s.predicted.push_back(p.predicted[i]);
    s.logits.push_back(p.logits[i]);
  }
  return s;
}

std::string dataset_name(const fs::path& run) {
  const fs::path resolved = run / "resolved.txt";
  std::error_code ec;
  if (!fs::exists(resolved, ec)) return "-";
  std::istringstream in(read_text(resolved));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("dataset=", 0) == 0) return line.substr(8);
  }
  return "-";
}

}  // namespace

void cmd_compare(const fs::path& run_a, const fs::path& run_b, std::size_t n_resamples,
                 std::ostream& out) {
  const auto dirs_a = seed_dirs(run_a);
  const auto dirs_b = seed_dirs(run_b);
  std::vector<std::uint64_t> common;
  for (const auto& [seed, _] : dirs_a) {
    if (dirs_b.count(seed)) common.push_back(seed);
  }
  if (common.empty()) throw ConfigError("compare: the runs share no seed");

  std::vector<std::uint32_t> pooled_a, pooled_b, pooled_gold;
  std::ostringstream os;
  char line[160];
  os << "# paired bootstrap, candidate = " << run_a.filename().string()
     << ", resamples = " << n_resamples << ", positive class 1\n";
  std::snprintf(line, sizeof(line), "%-10s %-8s %-8s %s\n", "seed", "f1_a", "f1_b", "p_value");
  os << line;
  for (std::uint64_t seed : common) {
    const PredictionSet a =
        sorted_by_id(read_predictions_csv(dirs_a.at(seed) / "predictions.csv"));
    const PredictionSet b =
        sorted_by_id(read_predictions_csv(dirs_b.at(seed) / "predictions.csv"));
    if (a.ids != b.ids) {
      throw ConfigError("compare: seed " + std::to_string(seed) +
                        " test sets hold different ids");
    }
    if (a.gold != b.gold) {
      throw ConfigError("compare: seed " + std::to_string(seed) + " gold labels differ");
    }
    const double p = paired_bootstrap(a.predicted, b.predicted, a.gold, n_resamples,
                                      derive_seed({kBootstrapTag, seed}));
    std::snprintf(line, sizeof(line), "%-10llu %-8.4f %-8.4f %.4f\n",
                  static_cast<unsigned long long>(seed), f1_binary(a.predicted, a.gold),
                  f1_binary(b.predicted, b.gold), p);
    os << line;
    pooled_a.insert(pooled_a.end(), a.predicted.begin(), a.predicted.end());
    pooled_b.insert(pooled_b.end(), b.predicted.begin(), b.predicted.end());
    pooled_gold.insert(pooled_gold.end(), a.gold.begin(), a.gold.end());
  }
  const double pooled =
      paired_bootstrap(pooled_a, pooled_b, pooled_gold, n_resamples, kBootstrapTag);
  std::snprintf(line, sizeof(line), "%-10s %-8.4f %-8.4f %.4f\n", "pooled",
                f1_binary(pooled_a, pooled_gold), f1_binary(pooled_b, pooled_gold), pooled);
  os << line;
  out << os.str();
}

void cmd_repquality(const fs::path& run_dir, std::ostream& out) {
  const auto dirs = seed_dirs(run_dir);
  std::vector<std::pair<std::uint64_t, std::pair<RepQualityReport, RepQualityReport>>> rows;
  for (const auto& [seed, dir] : dirs) {
    std::error_code ec;
    if (!fs::exists(dir / "traces_init.csv", ec) || !fs::exists(dir / "traces_best.csv", ec)) {
      continue;
    }
    const TraceTable before = read_trace_csv(dir / "traces_init.csv");
    const TraceTable after = read_trace_csv(dir / "traces_best.csv");
    rows.push_back({seed,
                    {representation_quality(before.points, before.labels),
                     representation_quality(after.points, after.labels)}});
  }
  if (rows.empty()) {
    throw ConfigError("repquality: no trace dumps under " + run_dir.string() +
                      " (the preset needs the projection layer)");
  }
  double sb = 0, sa = 0, db_b = 0, db_a = 0;
  for (const auto& [_, r] : rows) {
    sb += r.first.silhouette;
    sa += r.second.silhouette;
    db_b += r.first.davies_bouldin;
    db_a += r.second.davies_bouldin;
  }
  const double n = static_cast<double>(rows.size());
  sb /= n;
  sa /= n;
  db_b /= n;
  db_a /= n;
  const std::string name = dataset_name(run_dir);
  std::ostringstream os;
  char line[200];
  os << "# projected anchors on the validation split, mean over " << rows.size()
     << " seed(s)\n";
  std::snprintf(line, sizeof(line), "%-16s %-16s %-8s %-8s %s\n", "Metric", "Dataset",
                "Before", "After", "Change");
  os << line;
  std::snprintf(line, sizeof(line), "%-16s %-16s %-8s %-8s %s\n", "Silhouette",
                name.c_str(), f4(sb).c_str(), f4(sa).c_str(), signed4(sa - sb).c_str());
  os << line;
  std::snprintf(line, sizeof(line), "%-16s %-16s %-8s %-8s %s\n", "Davies-Bouldin",
                name.c_str(), f4(db_b).c_str(), f4(db_a).c_str(),
                signed4(db_a - db_b).c_str());
  os << line;
  for (const auto& [seed, r] : rows) {
    os << "seed=" << seed << " silhouette_before=" << f4(r.first.silhouette)
       << " silhouette_after=" << f4(r.second.silhouette)
       << " davies_bouldin_before=" << f4(r.first.davies_bouldin)
       << " davies_bouldin_after=" << f4(r.second.davies_bouldin) << "\n";
  }
  out << os.str();
}

}  // namespace ksense::cli
