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

#include "ksense/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "ksense/error.hpp"

namespace ksense::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw ConfigError("config key " + std::string(key) + ": expected " +
                    std::string(expected) + ", got '" + std::string(value) + "'");
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_commas(std::string_view v) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    parts.push_back(trim(v.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Shortest form that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    if constexpr (std::is_floating_point_v<T>) {
      os << fmt_double(xs[i]);
    } else {
      os << xs[i];
    }
  }
  return os.str();
}

struct KeyDef {
  std::function<void(ExperimentConfig&, std::string_view key, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define KSENSE_SIZE(field) \
  {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.field = to_size(k, v); }, \
   [](const ExperimentConfig& c) { return std::to_string(c.field); }}
#define KSENSE_U32(field) \
  {[](ExperimentConfig& c, std::string_view k, std::string_view v) { \
     const auto x = to_u64(k, v); \
     if (x > 0xFFFFFFFFu) bad_value(k, v, "a 32-bit integer"); \
     c.field = static_cast<std::uint32_t>(x); }, \
   [](const ExperimentConfig& c) { return std::to_string(c.field); }}
#define KSENSE_U64(field) \
  {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.field = to_u64(k, v); }, \
   [](const ExperimentConfig& c) { return std::to_string(c.field); }}
#define KSENSE_DOUBLE(field) \
  {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.field = to_double(k, v); }, \
   [](const ExperimentConfig& c) { return fmt_double(c.field); }}
#define KSENSE_BOOL(field) \
  {[](ExperimentConfig& c, std::string_view k, std::string_view v) { c.field = to_bool(k, v); }, \
   [](const ExperimentConfig& c) { return fmt_bool(c.field); }}

KeyDef ablation_toggle(std::string name, std::string default_value) {
  return {[name](ExperimentConfig& c, std::string_view, std::string_view v) {
            c.ablation_overrides.emplace_back(name, std::string(v));
          },
          [default_value](const ExperimentConfig&) { return default_value; }};
}

const std::map<std::string, KeyDef, std::less<>>& key_table() {
  static const std::map<std::string, KeyDef, std::less<>> table = [] {
    std::map<std::string, KeyDef, std::less<>> t;
    t["synth.name"] = {[](ExperimentConfig& c, std::string_view, std::string_view v) {
                         c.synth.name = std::string(v);
                       },
                       [](const ExperimentConfig& c) { return c.synth.name; }};
    t["synth.post_count"] = KSENSE_SIZE(synth.post_count);
    t["synth.min_sentences"] = KSENSE_U32(synth.min_sentences);
    t["synth.max_sentences"] = KSENSE_U32(synth.max_sentences);
    t["synth.relevant_relation"] = KSENSE_SIZE(synth.relevant_relation);
    t["synth.class_separation"] = KSENSE_DOUBLE(synth.class_separation);
    t["synth.knowledge_separation"] = KSENSE_DOUBLE(synth.knowledge_separation);
    t["synth.noise_scale"] = KSENSE_DOUBLE(synth.noise_scale);
    t["synth.temporal_task"] = KSENSE_BOOL(synth.temporal_task);
    t["synth.distractor_sentence"] = KSENSE_BOOL(synth.distractor_sentence);
    t["synth.distractor_scale"] = KSENSE_DOUBLE(synth.distractor_scale);
    t["synth.d_h"] = KSENSE_SIZE(synth.d_h);
    t["synth.d_k"] = KSENSE_SIZE(synth.d_k);
    t["synth.n_classes"] = KSENSE_SIZE(synth.n_classes);
    t["synth.class_prior"] = {
        [](ExperimentConfig& c, std::string_view k, std::string_view v) {
          c.synth.class_prior.clear();
          for (auto part : split_commas(v)) c.synth.class_prior.push_back(to_double(k, part));
        },
        [](const ExperimentConfig& c) { return join(c.synth.class_prior); }};
    t["synth.seed"] = KSENSE_U64(synth.seed);

    t["split.train"] = KSENSE_DOUBLE(split.train);
    t["split.val"] = KSENSE_DOUBLE(split.val);
    t["split.test"] = KSENSE_DOUBLE(split.test);
    t["split.seed"] = KSENSE_U64(split_seed);

    t["model.dropout_p"] = KSENSE_DOUBLE(dropout_p);
    t["model.head_dropout_p"] = KSENSE_DOUBLE(head_dropout_p);
    t["model.gru_hidden"] = KSENSE_SIZE(train.gru_hidden);
    t["model.mlp_hidden"] = KSENSE_SIZE(train.mlp_hidden);

    t["ablation.preset"] = {
        [](ExperimentConfig& c, std::string_view k, std::string_view v) {
          const auto p = parse_preset(v);
          if (!p) bad_value(k, v, "a preset key or table row label");
          c.preset = *p;
        },
        [](const ExperimentConfig& c) { return std::string(preset_key(c.preset)); }};
    for (const char* name : {"use_knowledge", "use_projection", "use_self_aug",
                             "use_scl", "anchor_as_query"}) {
      t[std::string("ablation.") + name] = ablation_toggle(name, "");
    }
    t["ablation.temporal_mode"] = ablation_toggle("temporal_mode", "");
    t["ablation.scl_target"] = ablation_toggle("scl_target", "");

    t["train.alpha"] = KSENSE_DOUBLE(train.alpha);
    t["train.tau"] = KSENSE_DOUBLE(train.tau);
    t["train.base_lr"] = KSENSE_DOUBLE(train.base_lr);
    t["train.weight_decay"] = KSENSE_DOUBLE(train.weight_decay);
    t["train.warmup_frac"] = KSENSE_DOUBLE(train.warmup_frac);
    t["train.batch_size"] = KSENSE_SIZE(train.batch_size);
    t["train.max_epochs"] = KSENSE_SIZE(train.max_epochs);
    t["train.patience"] = KSENSE_SIZE(train.patience);
    t["train.seeds"] = {
        [](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.train.seeds = parse_seed_list(v);
        },
        [](const ExperimentConfig& c) { return join(c.train.seeds); }};
    t["train.class_weighting"] = KSENSE_BOOL(train.class_weighting);
    t["train.cosine_similarity"] = KSENSE_BOOL(train.cosine_similarity);
    t["train.eval_threads"] = KSENSE_SIZE(train.eval_threads);
    return t;
  }();
  return table;
}

#undef KSENSE_SIZE
#undef KSENSE_U32
#undef KSENSE_U64
#undef KSENSE_DOUBLE
#undef KSENSE_BOOL

void apply_override(AblationConfig& a, const std::string& name, std::string_view v) {
  const std::string key = "ablation." + name;
  if (name == "use_knowledge") {
    a.use_knowledge = to_bool(key, v);
  } else if (name == "use_projection") {
    a.use_projection = to_bool(key, v);
  } else if (name == "use_self_aug") {
    a.use_self_aug = to_bool(key, v);
  } else if (name == "use_scl") {
    a.use_scl = to_bool(key, v);
  } else if (name == "anchor_as_query") {
    a.anchor_as_query = to_bool(key, v);
  } else if (name == "temporal_mode") {
    if (v == "gru") {
      a.temporal_mode = TemporalMode::kGru;
    } else if (v == "mean_pool") {
      a.temporal_mode = TemporalMode::kMeanPool;
    } else if (v == "flat") {
      a.temporal_mode = TemporalMode::kFlat;
    } else {
      bad_value(key, v, "gru, mean_pool or flat");
    }
  } else if (name == "scl_target") {
    if (v == "anchor") {
      a.scl_target = SclTarget::kAnchor;
    } else if (v == "single_pass") {
      a.scl_target = SclTarget::kSinglePass;
    } else {
      bad_value(key, v, "anchor or single_pass");
    }
  }
}

}  // namespace

AblationConfig ExperimentConfig::ablation_for(Preset p) const {
  AblationConfig a = preset_config(p);
  for (const auto& [name, value] : ablation_overrides) apply_override(a, name, value);
  a.dropout_p = dropout_p;
  a.head_dropout_p = head_dropout_p;
  a.validate();
  return a;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (auto part : split_commas(trim(text))) seeds.push_back(to_u64("seeds", part));
  if (seeds.empty()) throw ConfigError("seeds: empty list");
  return seeds;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  const auto& table = key_table();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " +
                        std::string(key));
    }
    if (!cfg.keys_present.insert(std::string(key)).second) {
      throw ConfigError("config key " + std::string(key) + " given twice");
    }
    it->second.set(cfg, key, value);
  }
  // Surface bad toggle values at parse time.
  (void)cfg.ablation();
  return cfg;
}

std::string defaults_text() {
  const ExperimentConfig defaults;
  std::ostringstream os;
  os << "# ksense defaults; synth.post_count and synth.seed are required by synth\n";
  std::string group;
  for (const auto& [key, def] : key_table()) {
    const std::string g = key.substr(0, key.find('.'));
    if (g != group) {
      if (!group.empty()) os << "\n";
      group = g;
    }
    const std::string value = def.get(defaults);
    if (value.empty()) {
      os << "# " << key << "=  (preset value)\n";
    } else {
      os << key << "=" << value << "\n";
    }
  }
  return os.str();
}

}  // namespace ksense::cli
