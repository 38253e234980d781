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

#include "sysfault/domain.h"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {

std::string sanitize_comm(std::string_view comm) {
  std::string out(comm);
  for (char& c : out) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

std::int64_t IntervalStats::error_total() const {
  std::int64_t sum = 0;
  for (const auto& [code, n] : error_counts) sum += n;
  return sum;
}

std::optional<double> IntervalStats::rate(const ErrnoCode& code) const {
  if (total_count == 0) return std::nullopt;
  std::int64_t n = 0;
  if (is_success(code)) {
    n = success_count();
  } else if (auto it = error_counts.find(code); it != error_counts.end()) {
    n = it->second;
  }
  return static_cast<double>(n) / static_cast<double>(total_count);
}

void RateSummary::validate() const {
  auto where = [&] { return fmt::format("{}:{}", syscall, code.symbol); };
  if (syscall.empty()) throw Error("rate summary without syscall name");
  if (n_intervals < 0 || total_errors < 0 || total_calls < 0) {
    throw Error(fmt::format("{}: negative counts", where()));
  }
  if (total_errors > total_calls) {
    throw Error(fmt::format("{}: {} errors exceed {} calls", where(), total_errors, total_calls));
  }
  if (is_success()) return;
  for (double v : {r_min, r_mean, r_max}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(fmt::format("{}: rate {} outside [0,1]", where(), v));
  }
  if (r_min > r_max) throw Error(fmt::format("{}: r_min {} > r_max {}", where(), r_min, r_max));
  if (!(r_var >= 0.0)) throw Error(fmt::format("{}: negative variance {}", where(), r_var));
}

std::string_view to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::Sporadic: return "Sporadic";
    case CaseLabel::Fluctuating: return "Fluctuating";
    case CaseLabel::Steady: return "Steady";
    case CaseLabel::Random: return "Random";
  }
  return "?";
}

CaseLabel parse_case_label(std::string_view text) {
  for (auto label : {CaseLabel::Sporadic, CaseLabel::Fluctuating, CaseLabel::Steady, CaseLabel::Random}) {
    if (text == to_string(label)) return label;
  }
  throw Error(fmt::format("unknown case label '{}'", text));
}

int case_number(CaseLabel label) {
  switch (label) {
    case CaseLabel::Sporadic: return 1;
    case CaseLabel::Fluctuating: return 2;
    case CaseLabel::Steady: return 3;
    case CaseLabel::Random: return 0;
  }
  return 0;
}

std::string ErrorModel::errno_symbol() const { return code ? code->symbol : "RANDOM"; }

void ErrorModel::validate() const {
  if (syscall.empty()) throw Error("error model without syscall name");
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw Error(fmt::format("{}:{}: rate {} outside (0,1]", syscall, errno_symbol(), rate));
  }
}

void SynthesizerConfig::validate() const {
  if (!(boundary > 0.0 && boundary < 1.0)) throw ConfigError(fmt::format("boundary {} not in (0,1)", boundary));
  if (!(sporadic_rate > 0.0 && sporadic_rate <= 1.0)) {
    throw ConfigError(fmt::format("sporadic rate {} not in (0,1]", sporadic_rate));
  }
  if (!(variance_threshold > 0.0)) {
    throw ConfigError(fmt::format("variance threshold {} must be positive", variance_threshold));
  }
  if (!(factor >= 1.0)) throw ConfigError(fmt::format("amplification factor {} must be >= 1", factor));
}

ProcessSelector ProcessSelector::by_pid(pid_t pid) {
  if (pid <= 0) throw Error(fmt::format("invalid pid {}", pid));
  ProcessSelector s;
  s.kind_ = Kind::Pid;
  s.pid_ = pid;
  return s;
}

ProcessSelector ProcessSelector::by_comm(std::string comm) {
  if (comm.empty()) throw Error("empty process name selector");
  ProcessSelector s;
  s.kind_ = Kind::Comm;
  s.comm_ = sanitize_comm(comm);
  return s;
}

ProcessSelector ProcessSelector::parse(std::string_view text) {
  if (text.empty() || text == "any") return any();
  if (text.starts_with("comm:")) return by_comm(std::string(text.substr(5)));
  std::string_view digits = text.starts_with("pid:") ? text.substr(4) : text;
  pid_t pid = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), pid);
  if (ec == std::errc{} && ptr == digits.data() + digits.size()) return by_pid(pid);
  if (text.starts_with("pid:")) throw Error(fmt::format("malformed pid selector '{}'", text));
  return by_comm(std::string(text));
}

bool ProcessSelector::matches(std::int32_t pid, std::string_view comm) const {
  switch (kind_) {
    case Kind::Any: return true;
    case Kind::Pid: return pid == pid_;
    case Kind::Comm: return comm == comm_;
  }
  return false;
}

std::string ProcessSelector::to_string() const {
  switch (kind_) {
    case Kind::Any: return "any";
    case Kind::Pid: return fmt::format("pid:{}", pid_);
    case Kind::Comm: return "comm:" + comm_;
  }
  return "any";
}

void ExperimentSpec::validate() const {
  model.validate();
  if (!(duration_s > 0.0)) throw ConfigError(fmt::format("experiment duration {} must be positive", duration_s));
  if (budget && *budget <= 0) throw ConfigError(fmt::format("injection budget {} must be positive", *budget));
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::Resilient: return "Resilient";
    case Classification::Degraded: return "Degraded";
    case Classification::Severe: return "Severe";
  }
  return "?";
}

Classification parse_classification(std::string_view text) {
  for (auto c : {Classification::Resilient, Classification::Degraded, Classification::Severe}) {
    if (text == to_string(c)) return c;
  }
  throw Error(fmt::format("unknown classification '{}'", text));
}

std::string_view to_string(ExperimentStatus s) {
  switch (s) {
    case ExperimentStatus::Completed: return "completed";
    case ExperimentStatus::NoInjection: return "no-injection";
    case ExperimentStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

ExperimentStatus parse_experiment_status(std::string_view text) {
  for (auto s : {ExperimentStatus::Completed, ExperimentStatus::NoInjection, ExperimentStatus::Inconclusive}) {
    if (text == to_string(s)) return s;
  }
  throw Error(fmt::format("unknown experiment status '{}'", text));
}

}  // namespace sysfault
