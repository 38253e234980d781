// Copyright 2026 The sysfault Authors.
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

#include "sysfault/campaign.h"

#include <json.hpp>

#include <fmt/format.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"

namespace sysfault {
namespace fs = std::filesystem;
using nlohmann::json;

const BaselineMetric* BaselineBac::find(std::string_view name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::vector<std::string> BaselineBac::names() const {
  std::vector<std::string> out;
  for (const auto& m : metrics) out.push_back(m.name);
  return out;
}

void CampaignConfig::validate() const {
  if (schema_version != kCampaignSchemaVersion) {
    throw ConfigError(fmt::format("unsupported campaign schema_version {} (this build reads {})", schema_version,
                                  kCampaignSchemaVersion));
  }
  if (probes < 1) throw ConfigError("probes must be at least 1");
  if (!(command_timeout_s > 0)) throw ConfigError("command_timeout_s must be positive");
  if (checker_interval_s < 0 || inter_experiment_pause_s < 0) throw ConfigError("negative interval or pause");
  if (backend == BackendKind::Replay) {
    if (trace.empty()) throw ConfigError("replay campaign needs a trace");
  } else {
    if (checker_cmd.empty() || post_inspect_cmd.empty() || restart_cmd.empty()) {
      throw ConfigError("live campaign needs checker_cmd, post_inspect_cmd and restart_cmd");
    }
    if (target_command.empty()) {
      for (const auto& e : experiments) {
        if (e.process.kind() == ProcessSelector::Kind::Any) {
          throw ConfigError("live experiment without target_command must select a pid or process name");
        }
      }
    }
  }
  for (const auto& m : baseline.metrics) {
    if (m.name.empty()) throw ConfigError("baseline metric with empty name");
  }
  for (const auto& e : experiments) e.validate();
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

struct ExperimentDefaults {
  double duration_s = 60.0;
  std::optional<std::int64_t> budget;
  bool successful_only = true;
  std::uint64_t seed = 1;
  ProcessSelector process;
};

void apply_overrides(ExperimentSpec& spec, const json& j) {
  if (j.contains("duration_s")) spec.duration_s = j.at("duration_s").get<double>();
  if (j.contains("budget")) {
    spec.budget = j.at("budget").is_null() ? std::nullopt : std::optional(j.at("budget").get<std::int64_t>());
  }
  if (j.contains("successful_only")) spec.successful_only = j.at("successful_only").get<bool>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("process")) spec.process = ProcessSelector::parse(j.at("process").get<std::string>());
}

ExperimentSpec from_defaults(ErrorModel model, const ExperimentDefaults& d, std::size_t index) {
  ExperimentSpec spec;
  spec.model = std::move(model);
  spec.duration_s = d.duration_s;
  spec.budget = d.budget;
  spec.successful_only = d.successful_only;
  // Distinct, reproducible streams per experiment.
  spec.seed = d.seed + index;
  spec.process = d.process;
  return spec;
}

}  // namespace

CampaignConfig parse_campaign(std::string_view json_text, const fs::path& base_dir,
                              const std::optional<fs::path>& models_override) {
  CampaignConfig cfg;
  cfg.base_dir = base_dir;
  try {
    const json doc = json::parse(json_text);
    if (!doc.is_object()) throw ConfigError("campaign document must be a JSON object");
    if (!doc.contains("schema_version")) throw ConfigError("campaign lacks schema_version");
    cfg.schema_version = doc.at("schema_version").get<int>();
    if (cfg.schema_version != kCampaignSchemaVersion) cfg.validate();

    const auto backend = get_or<std::string>(doc, "backend", "replay");
    if (backend == "replay") {
      cfg.backend = BackendKind::Replay;
    } else if (backend == "live") {
      cfg.backend = BackendKind::Live;
    } else {
      throw ConfigError(fmt::format("unknown backend '{}' (want replay|live)", backend));
    }
    if (doc.contains("trace")) cfg.trace = resolve(base_dir, doc.at("trace").get<std::string>());
    cfg.checker_cmd = get_or<std::string>(doc, "checker_cmd", "");
    cfg.post_inspect_cmd = get_or<std::string>(doc, "post_inspect_cmd", "");
    cfg.restart_cmd = get_or<std::string>(doc, "restart_cmd", "");
    cfg.probes = get_or<int>(doc, "probes", 1);
    cfg.checker_interval_s = get_or<double>(doc, "checker_interval_s", 5.0);
    cfg.command_timeout_s = get_or<double>(doc, "command_timeout_s", 60.0);
    cfg.inter_experiment_pause_s = get_or<double>(doc, "inter_experiment_pause_s", 0.0);
    if (doc.contains("target_command")) cfg.target_command = doc.at("target_command").get<std::vector<std::string>>();

    if (doc.contains("baseline")) {
      for (const auto& [name, spec] : doc.at("baseline").items()) {
        BaselineMetric m;
        m.name = name;
        if (spec.is_number()) {
          m.threshold = spec.get<double>();
        } else {
          m.threshold = spec.at("threshold").get<double>();
          const auto sev = get_or<std::string>(spec, "severity", "degrade");
          if (sev == "degrade") {
            m.severity = MetricSeverity::Degrade;
          } else if (sev == "crash") {
            m.severity = MetricSeverity::Crash;
          } else {
            throw ConfigError(fmt::format("baseline metric {}: unknown severity '{}'", name, sev));
          }
        }
        cfg.baseline.metrics.push_back(std::move(m));
      }
    }

    ExperimentDefaults defaults;
    if (doc.contains("defaults")) {
      const auto& d = doc.at("defaults");
      defaults.duration_s = get_or<double>(d, "duration_s", defaults.duration_s);
      if (d.contains("budget") && !d.at("budget").is_null()) defaults.budget = d.at("budget").get<std::int64_t>();
      defaults.successful_only = get_or<bool>(d, "successful_only", true);
      defaults.seed = get_or<std::uint64_t>(d, "seed", defaults.seed);
      defaults.process = ProcessSelector::parse(get_or<std::string>(d, "process", "any"));
    }

    std::optional<fs::path> models_file = models_override;
    if (!models_file && doc.contains("models_file")) {
      models_file = resolve(base_dir, doc.at("models_file").get<std::string>());
    }
    if (models_file) {
      for (auto& model : read_models_csv(*models_file)) {
        cfg.experiments.push_back(from_defaults(std::move(model), defaults, cfg.experiments.size()));
      }
    }
    if (doc.contains("experiments")) {
      for (const auto& e : doc.at("experiments")) {
        ErrorModel model;
        model.syscall = e.at("syscall").get<std::string>();
        const auto err = get_or<std::string>(e, "errno", "RANDOM");
        if (err != "RANDOM") model.code = errno_lookup(err);
        model.rate = e.at("rate").get<double>();
        model.case_label = model.code ? parse_case_label(get_or<std::string>(e, "case", "Steady")) : CaseLabel::Random;
        auto spec = from_defaults(std::move(model), defaults, cfg.experiments.size());
        apply_overrides(spec, e);
        cfg.experiments.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("campaign: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

CampaignConfig load_campaign(const fs::path& path, const std::optional<fs::path>& models_override) {
  try {
    return parse_campaign(read_file(path), path.parent_path(), models_override);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace sysfault
