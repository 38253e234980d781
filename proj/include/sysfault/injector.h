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

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "sysfault/domain.h"

namespace sysfault {

enum class DecisionReason { RateMiss, BudgetExhausted, NaturalErrorSkipped, SelectorMiss, Injected };
inline constexpr std::size_t kDecisionReasonCount = 5;

std::string_view to_string(DecisionReason reason);
DecisionReason parse_decision_reason(std::string_view text);

struct InjectionDecision {
  bool inject = false;
  std::optional<std::int64_t> override_ret;
  DecisionReason reason = DecisionReason::SelectorMiss;
  std::optional<double> p_drawn;
};

// A syscall-exit as seen by the injector, before the return value is
// delivered to the application.
struct EventContext {
  std::int64_t timestamp_ns = 0;
  std::int32_t pid = 0;
  std::string_view comm;
  std::string_view syscall;
  std::int64_t pending_ret = 0;
};

struct SessionStats {
  std::int64_t injected_count = 0;
  std::int64_t natural_error_count = 0;
  std::array<std::int64_t, kDecisionReasonCount> by_reason{};

  std::int64_t count(DecisionReason r) const { return by_reason[static_cast<std::size_t>(r)]; }
};

// Identifier of the generator and its output mapping, recorded in decision
// logs. p = ((x >> 11) + 1) * 2^-53 for each 64-bit output x, so p is in (0, 1].
inline constexpr std::string_view kRngAlgorithm = "mt19937_64/p=((x>>11)+1)*2^-53";

// Per-experiment injection state. Decisions depend on call order through the
// generator and the budget, so a session must be driven from one thread.
class InjectionSession {
 public:
  explicit InjectionSession(ExperimentSpec spec);

  // Injects iff the process and syscall match, the pending return is a
  // success, the budget is not exhausted, and a fresh draw p <= rate.
  // Exactly one p is drawn for events that pass the first four checks.
  InjectionDecision decide(const EventContext& ctx);

  void close() { closed_ = true; }
  bool closed() const { return closed_; }
  const ExperimentSpec& spec() const { return spec_; }
  const SessionStats& stats() const { return stats_; }

 private:
  double draw_unit();
  std::size_t draw_index(std::size_t n);

  ExperimentSpec spec_;
  std::mt19937_64 rng_;
  SessionStats stats_;
  bool closed_ = false;
};

inline constexpr std::string_view kDecisionLogHeader =
    "seq,timestamp_ns,pid,syscall,pending_ret,decision,override_ret,p_drawn";

// CSV log of every decision. The first line is a comment naming the
// generator, seed and model so two logs can be compared meaningfully.
class DecisionLogWriter {
 public:
  DecisionLogWriter(const std::filesystem::path& path, const ExperimentSpec& spec);

  void append(const EventContext& ctx, const InjectionDecision& decision);
  void finish();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::int64_t seq_ = 0;
};

std::string format_decision_line(std::int64_t seq, const EventContext& ctx, const InjectionDecision& d);

}  // namespace sysfault
