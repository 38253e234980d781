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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sysfault/campaign.h"
#include "sysfault/domain.h"

namespace sysfault {

class MetricsStore;

// Parses one checker result line "NAME=value;NAME=value". Throws
// sysfault::Error on a malformed or empty line.
BacResults parse_bac_line(std::string_view line);
// Uses the last non-empty line of a checker's output.
BacResults parse_checker_output(std::string_view output);
// Per-metric mean over probes, in order of first appearance.
BacResults aggregate_probes(const std::vector<BacResults>& probes);

// True when a Crash-severity metric exceeds its threshold. Throws
// ConfigError for a metric absent from the baseline.
bool metrics_indicate_crash(const BacResults& bac, const BaselineBac& baseline);

// Severe on a crash (observed or indicated by metrics) or state corruption;
// otherwise Degraded when any metric exceeds its threshold; else Resilient.
// Throws ConfigError for a metric absent from the baseline.
Classification classify(const BacResults& bac, bool crash_observed, bool state_corrupted, const BaselineBac& baseline);

std::string format_bac(const BacResults& bac);
BacResults parse_bac(std::string_view text);

inline constexpr std::string_view kOutcomesHeader =
    "index,syscall,errno,rate,case,injected,natural_errors,status,crash,co,classification,seed,duration_s,"
    "budget,successful_only,process,bac";

struct OutcomeRow {
  std::size_t index = 0;
  ExperimentOutcome outcome;
};

std::string format_outcomes_csv(const std::vector<OutcomeRow>& rows);
std::vector<OutcomeRow> parse_outcomes_csv(std::string_view text, const std::string& source);
std::vector<OutcomeRow> read_outcomes_csv(const std::filesystem::path& path);

struct CampaignResult {
  std::vector<OutcomeRow> outcomes;
  bool aborted = false;
  std::string abort_reason;
};

// Runs experiments strictly one after another; each one attaches the
// injector, probes the checker, detaches, post-inspects, then classifies.
// Writes under `out_dir`:
//   journal.log              one line per step
//   outcomes.csv             rewritten after every experiment
//   exp-NN-<syscall>-<errno>/ per-experiment trace and decision log
class Orchestrator {
 public:
  Orchestrator(CampaignConfig config, std::filesystem::path out_dir, MetricsStore* store = nullptr);

  ExperimentOutcome run_experiment(const ExperimentSpec& spec, std::size_t index);
  CampaignResult run_campaign();

  const std::vector<std::string>& journal() const { return journal_; }
  const CampaignConfig& config() const { return config_; }
  std::filesystem::path experiment_dir(const ExperimentSpec& spec, std::size_t index) const;

  // Timestamp source for store records; wall clock by default.
  void set_clock(std::function<std::int64_t()> clock) { clock_ = std::move(clock); }

 private:
  ExperimentOutcome run_replay(const ExperimentSpec& spec, std::size_t index);
  ExperimentOutcome run_live(const ExperimentSpec& spec, std::size_t index);
  bool probe_checker(const ExperimentSpec& spec, const std::filesystem::path& dir, int probe, pid_t pid,
                     std::vector<BacResults>& probes, std::string& note);
  void post_inspect(const ExperimentSpec& spec, const std::filesystem::path& dir, pid_t pid, ExperimentOutcome& o);
  void finish(ExperimentOutcome& o, const std::vector<BacResults>& probes);
  void step(std::string_view what, std::size_t index, std::string_view detail = {});
  std::vector<std::pair<std::string, std::string>> environment(const ExperimentSpec& spec,
                                                               const std::filesystem::path& dir, int probe,
                                                               pid_t pid) const;

  CampaignConfig config_;
  std::filesystem::path out_dir_;
  MetricsStore* store_;
  std::vector<std::string> journal_;
  std::function<std::int64_t()> clock_;
  bool target_lost_ = false;
};

}  // namespace sysfault
