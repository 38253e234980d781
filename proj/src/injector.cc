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

#include "sysfault/injector.h"

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {

std::string_view to_string(DecisionReason reason) {
  switch (reason) {
    case DecisionReason::RateMiss: return "RateMiss";
    case DecisionReason::BudgetExhausted: return "BudgetExhausted";
    case DecisionReason::NaturalErrorSkipped: return "NaturalErrorSkipped";
    case DecisionReason::SelectorMiss: return "SelectorMiss";
    case DecisionReason::Injected: return "Injected";
  }
  return "?";
}

DecisionReason parse_decision_reason(std::string_view text) {
  for (auto r : {DecisionReason::RateMiss, DecisionReason::BudgetExhausted, DecisionReason::NaturalErrorSkipped,
                 DecisionReason::SelectorMiss, DecisionReason::Injected}) {
    if (text == to_string(r)) return r;
  }
  throw Error(fmt::format("unknown decision '{}'", text));
}

InjectionSession::InjectionSession(ExperimentSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
  spec_.validate();
}

double InjectionSession::draw_unit() {
  return static_cast<double>((rng_() >> 11) + 1) * 0x1p-53;
}

std::size_t InjectionSession::draw_index(std::size_t n) {
  // Rejection sampling keeps the draw exactly uniform and independent of the
  // standard library's distribution implementation.
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
  std::uint64_t x;
  do {
    x = rng_();
  } while (x < threshold);
  return static_cast<std::size_t>(x % n);
}

InjectionDecision InjectionSession::decide(const EventContext& ctx) {
  if (closed_) throw Error("decide() called on a closed injection session");
  InjectionDecision d;
  auto finish = [&](DecisionReason r) {
    d.reason = r;
    ++stats_.by_reason[static_cast<std::size_t>(r)];
    return d;
  };

  if (!spec_.process.matches(ctx.pid, ctx.comm) || ctx.syscall != spec_.model.syscall) {
    return finish(DecisionReason::SelectorMiss);
  }
  // Natural errors are never overwritten, whatever successful_only says.
  if (ctx.pending_ret < 0) {
    ++stats_.natural_error_count;
    return finish(DecisionReason::NaturalErrorSkipped);
  }
  if (spec_.budget && stats_.injected_count >= *spec_.budget) return finish(DecisionReason::BudgetExhausted);

  const double p = draw_unit();
  d.p_drawn = p;
  if (p > spec_.model.rate) return finish(DecisionReason::RateMiss);

  int number;
  if (spec_.model.code) {
    number = spec_.model.code->number;
  } else {
    const auto table = errno_table();
    number = table[draw_index(table.size())].number;
  }
  d.inject = true;
  d.override_ret = -static_cast<std::int64_t>(number);
  ++stats_.injected_count;
  return finish(DecisionReason::Injected);
}

DecisionLogWriter::DecisionLogWriter(const std::filesystem::path& path, const ExperimentSpec& spec)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError(fmt::format("{}: cannot open decision log: {}", path.string(), std::strerror(errno)));
  out_ << fmt::format("# rng={};seed={};model={}:{}:{};process={}\n", kRngAlgorithm, spec.seed, spec.model.syscall,
                      spec.model.errno_symbol(), spec.model.rate, spec.process.to_string());
  out_ << kDecisionLogHeader << '\n';
}

std::string format_decision_line(std::int64_t seq, const EventContext& ctx, const InjectionDecision& d) {
  return fmt::format("{},{},{},{},{},{},{},{}", seq, ctx.timestamp_ns, ctx.pid, ctx.syscall, ctx.pending_ret,
                     to_string(d.reason), d.override_ret ? fmt::format("{}", *d.override_ret) : std::string(),
                     d.p_drawn ? fmt::format("{:.17g}", *d.p_drawn) : std::string());
}

void DecisionLogWriter::append(const EventContext& ctx, const InjectionDecision& decision) {
  out_ << format_decision_line(seq_++, ctx, decision) << '\n';
}

void DecisionLogWriter::finish() {
  out_.flush();
  if (!out_) throw IoError(fmt::format("{}: write failed", path_.string()));
  out_.close();
}

}  // namespace sysfault
