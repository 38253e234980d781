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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sysfault/errno.h"

namespace sysfault {

// One observed syscall invocation. `ret` is the raw return value: a
// negative value -E encodes errno E.
struct SyscallEvent {
  std::int64_t timestamp_ns = 0;
  std::int32_t pid = 0;
  std::string comm;
  std::string syscall;
  std::int64_t ret = 0;
  std::int64_t duration_ns = 0;

  bool failed() const { return ret < 0; }
  // Only meaningful when failed().
  ErrnoCode error() const { return errno_lookup(static_cast<int>(-ret)); }

  friend bool operator==(const SyscallEvent&, const SyscallEvent&) = default;
};

// Replaces every character outside [A-Za-z0-9_.-] with '_'.
std::string sanitize_comm(std::string_view comm);

// Per-syscall counters of one closed monitoring interval.
struct IntervalStats {
  std::int64_t interval_index = 0;
  double interval_len_s = 15.0;
  std::string syscall;
  std::int64_t total_count = 0;
  std::map<ErrnoCode, std::int64_t> error_counts;

  std::int64_t error_total() const;
  std::int64_t success_count() const { return total_count - error_total(); }
  // Absent when the syscall was never invoked in the interval.
  std::optional<double> rate(const ErrnoCode& code) const;

  friend bool operator==(const IntervalStats&, const IntervalStats&) = default;
};

// Distribution of one (syscall, errno) error-rate series across intervals.
// For SUCCESS rows only the counts are meaningful.
struct RateSummary {
  std::string syscall;
  ErrnoCode code;
  std::int64_t n_intervals = 0;
  std::int64_t total_errors = 0;
  std::int64_t total_calls = 0;
  double r_min = 0.0;
  double r_mean = 0.0;
  double r_max = 0.0;
  double r_var = 0.0;

  bool is_success() const { return sysfault::is_success(code); }
  // Bounds every summary must satisfy, including ones loaded from files:
  // 0 <= r_min <= r_max <= 1, r_var >= 0, counts consistent.
  void validate() const;

  friend bool operator==(const RateSummary&, const RateSummary&) = default;
};

enum class CaseLabel { Sporadic, Fluctuating, Steady, Random };

std::string_view to_string(CaseLabel label);
CaseLabel parse_case_label(std::string_view text);
// Sporadic 1, Fluctuating 2, Steady 3; 0 for Random.
int case_number(CaseLabel label);

// The (syscall, errno, rate) triple. An empty `code` is the RANDOM baseline:
// the injector draws an errno uniformly from errno_table() per injection.
struct ErrorModel {
  std::string syscall;
  std::optional<ErrnoCode> code;
  double rate = 0.0;
  CaseLabel case_label = CaseLabel::Steady;
  std::optional<RateSummary> source;

  bool is_random() const { return !code.has_value(); }
  std::string errno_symbol() const;
  void validate() const;

  friend bool operator==(const ErrorModel&, const ErrorModel&) = default;
};

struct SynthesizerConfig {
  double boundary = 0.05;
  double sporadic_rate = 0.05;
  double variance_threshold = 0.001;
  double factor = 1.2;

  void validate() const;
};

class ProcessSelector {
 public:
  enum class Kind { Any, Pid, Comm };

  ProcessSelector() = default;
  static ProcessSelector any() { return {}; }
  static ProcessSelector by_pid(pid_t pid);
  static ProcessSelector by_comm(std::string comm);
  // "any", "pid:<n>", "comm:<name>", or a bare number / name.
  static ProcessSelector parse(std::string_view text);

  Kind kind() const { return kind_; }
  pid_t pid() const { return pid_; }
  const std::string& comm() const { return comm_; }
  bool matches(std::int32_t pid, std::string_view comm) const;
  std::string to_string() const;

  friend bool operator==(const ProcessSelector&, const ProcessSelector&) = default;

 private:
  Kind kind_ = Kind::Any;
  pid_t pid_ = 0;
  std::string comm_;
};

struct ExperimentSpec {
  ErrorModel model;
  double duration_s = 60.0;
  std::optional<std::int64_t> budget;
  bool successful_only = true;
  std::uint64_t seed = 0;
  ProcessSelector process;

  void validate() const;

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

enum class Classification { Resilient, Degraded, Severe };

// Completed experiments carry a classification; the other states are
// reported separately and never counted as resilient.
enum class ExperimentStatus { Completed, NoInjection, Inconclusive };

std::string_view to_string(Classification c);
Classification parse_classification(std::string_view text);
std::string_view to_string(ExperimentStatus s);
ExperimentStatus parse_experiment_status(std::string_view text);

using BacResults = std::vector<std::pair<std::string, double>>;

struct ExperimentOutcome {
  ExperimentSpec spec;
  std::int64_t injected_count = 0;
  std::int64_t natural_error_count = 0;
  BacResults bac_results;
  bool crash_observed = false;
  bool state_corrupted = false;
  Classification classification = Classification::Resilient;
  ExperimentStatus status = ExperimentStatus::Completed;
  std::string note;

  friend bool operator==(const ExperimentOutcome&, const ExperimentOutcome&) = default;
};

}  // namespace sysfault
