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

#pragma once

#include <sys/types.h>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysfault/domain.h"

namespace sysfault {

inline constexpr int kCampaignSchemaVersion = 1;

// Exceeding a Degrade metric marks the run Degraded; exceeding a Crash metric
// counts as an observed crash and marks it Severe.
enum class MetricSeverity { Degrade, Crash };

struct BaselineMetric {
  std::string name;
  double threshold = 0.0;
  MetricSeverity severity = MetricSeverity::Degrade;
};

// Behavioural assessment criteria measured without injection.
struct BaselineBac {
  std::vector<BaselineMetric> metrics;

  const BaselineMetric* find(std::string_view name) const;
  std::vector<std::string> names() const;
};

enum class BackendKind { Replay, Live };

struct CampaignConfig {
  int schema_version = kCampaignSchemaVersion;
  BackendKind backend = BackendKind::Replay;
  std::vector<ExperimentSpec> experiments;
  std::string checker_cmd;
  std::string post_inspect_cmd;
  std::string restart_cmd;
  int probes = 1;
  double checker_interval_s = 5.0;
  double command_timeout_s = 60.0;
  double inter_experiment_pause_s = 0.0;
  BaselineBac baseline;
  // Replay input trace.
  std::filesystem::path trace;
  // Live: launched once per experiment when set; otherwise the experiment's
  // process selector names a running process to attach to.
  std::vector<std::string> target_command;
  // Working directory for checker, post-inspect and restart commands.
  std::filesystem::path base_dir;

  void validate() const;
};

// Parses a campaign document. Relative paths resolve against `base_dir`.
// When `models_override` is set it replaces the document's models_file.
CampaignConfig parse_campaign(std::string_view json_text, const std::filesystem::path& base_dir,
                              const std::optional<std::filesystem::path>& models_override = std::nullopt);
CampaignConfig load_campaign(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& models_override = std::nullopt);

}  // namespace sysfault
