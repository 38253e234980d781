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

#include <cerrno>
#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/injector.h"
#include "sysfault/replay.h"
#include "test_util.h"

namespace sysfault {
namespace {

using testing::TempDir;

ExperimentSpec spec_for(const std::string& syscall, const std::string& err, double rate, std::uint64_t seed = 1) {
  ExperimentSpec spec;
  spec.model.syscall = syscall;
  if (err != "RANDOM") spec.model.code = errno_lookup(err);
  spec.model.rate = rate;
  spec.seed = seed;
  return spec;
}

EventContext ctx(std::string_view syscall, std::int64_t ret = 0, std::int32_t pid = 7, std::string_view comm = "app") {
  return {1, pid, comm, syscall, ret};
}

TEST(Session, SelectorAndSyscallFilter) {
  auto spec = spec_for("read", "EAGAIN", 1.0);
  spec.process = ProcessSelector::by_comm("app");
  InjectionSession s(spec);
  EXPECT_EQ(s.decide(ctx("write")).reason, DecisionReason::SelectorMiss);
  EXPECT_EQ(s.decide(ctx("read", 0, 7, "other")).reason, DecisionReason::SelectorMiss);
  const auto d = s.decide(ctx("read"));
  EXPECT_TRUE(d.inject);
  EXPECT_EQ(*d.override_ret, -EAGAIN);
  EXPECT_FALSE(s.decide(ctx("write")).p_drawn.has_value());
}

TEST(Session, NaturalErrorsAreCountedAndKept) {
  InjectionSession s(spec_for("read", "EAGAIN", 1.0));
  const auto d = s.decide(ctx("read", -ECONNRESET));
  EXPECT_FALSE(d.inject);
  EXPECT_EQ(d.reason, DecisionReason::NaturalErrorSkipped);
  EXPECT_FALSE(d.p_drawn.has_value());
  EXPECT_EQ(s.stats().natural_error_count, 1);
}

TEST(Session, RateOneAlwaysInjects) {
  InjectionSession s(spec_for("read", "EIO", 1.0, 12345));
  for (int i = 0; i < 10000; ++i) ASSERT_TRUE(s.decide(ctx("read")).inject);
}

TEST(Session, DrawsInUnitInterval) {
  InjectionSession s(spec_for("read", "EIO", 0.5, 3));
  for (int i = 0; i < 10000; ++i) {
    const auto p = *s.decide(ctx("read")).p_drawn;
    ASSERT_GT(p, 0.0);
    ASSERT_LE(p, 1.0);
  }
}

TEST(Session, IneligibleEventsDoNotConsumeDraws) {
  InjectionSession a(spec_for("read", "EIO", 0.3, 9));
  InjectionSession b(spec_for("read", "EIO", 0.3, 9));
  for (int i = 0; i < 2000; ++i) {
    b.decide(ctx("write"));
    b.decide(ctx("read", -EINTR));
    const auto da = a.decide(ctx("read"));
    const auto db = b.decide(ctx("read"));
    ASSERT_EQ(da.p_drawn, db.p_drawn);
    ASSERT_EQ(da.inject, db.inject);
  }
}

TEST(Session, BudgetIsExact) {
  auto spec = spec_for("read", "EAGAIN", 0.5, 77);
  spec.budget = 10;
  InjectionSession s(spec);
  for (int i = 0; i < 10000; ++i) s.decide(ctx("read"));
  EXPECT_EQ(s.stats().injected_count, 10);
  EXPECT_EQ(s.decide(ctx("read")).reason, DecisionReason::BudgetExhausted);
}

TEST(Session, ClosedSessionRefusesDecisions) {
  InjectionSession s(spec_for("read", "EAGAIN", 0.5));
  s.close();
  EXPECT_THROW(s.decide(ctx("read")), Error);
}

TEST(Session, RandomErrnoIsUniformOverTable) {
  InjectionSession s(spec_for("read", "RANDOM", 1.0, 2718));
  const auto table = errno_table();
  std::map<std::int64_t, double> counts;
  const int n = 131 * 400;
  for (int i = 0; i < n; ++i) ++counts[*s.decide(ctx("read")).override_ret];
  ASSERT_EQ(counts.size(), table.size());
  const double expected = static_cast<double>(n) / table.size();
  double chi2 = 0.0;
  for (const auto& code : table) {
    const double o = counts[-code.number];
    chi2 += (o - expected) * (o - expected) / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(table.size() - 1));
  EXPECT_LT(chi2, boost::math::quantile(dist, 0.999));
}

TEST(DecisionLog, HeaderNamesGeneratorAndSeed) {
  TempDir dir;
  auto spec = spec_for("read", "EAGAIN", 0.05, 42);
  {
    DecisionLogWriter log(dir / "d.csv", spec);
    InjectionSession s(spec);
    const auto c = ctx("read");
    log.append(c, s.decide(c));
    log.finish();
  }
  const auto text = testing::slurp(dir / "d.csv");
  EXPECT_NE(text.find(std::string(kRngAlgorithm)), std::string::npos);
  EXPECT_NE(text.find("seed=42"), std::string::npos);
  EXPECT_NE(text.find(std::string(kDecisionLogHeader)), std::string::npos);
}

TEST(Replay, CopiesUntouchedLinesAndRewritesInjected) {
  TempDir dir;
  auto events = testing::successful_events("read", 500);
  events[10].ret = -EPIPE;
  events.push_back({2'000'000'000, 1, "other", "futex", 0, 5});
  write_trace(dir / "in.csv", events);

  InjectionSession s(spec_for("read", "EAGAIN", 0.2, 5));
  const auto r = replay_run(dir / "in.csv", s, dir / "out.csv", dir / "d.csv");
  EXPECT_EQ(r.events, 501);
  const auto out = read_trace(dir / "out.csv");
  ASSERT_EQ(out.size(), events.size());
  std::int64_t injected = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == events[i]) continue;
    ++injected;
    EXPECT_EQ(out[i].ret, -EAGAIN);
    auto restored = out[i];
    restored.ret = events[i].ret;
    EXPECT_EQ(restored, events[i]);
  }
  EXPECT_EQ(injected, r.stats.injected_count);
  EXPECT_EQ(out[10].ret, -EPIPE);
  EXPECT_EQ(r.stats.natural_error_count, 1);
}

TEST(Replay, PreservesMissingFinalNewline) {
  TempDir dir;
  testing::spit(dir / "in.csv", std::string(kTraceHeader) + "\n1,2,a,read,0,5\n2,2,a,read,0,5");
  InjectionSession s(spec_for("read", "EAGAIN", 1.0));
  replay_run(dir / "in.csv", s, dir / "out.csv", dir / "d.csv");
  EXPECT_EQ(testing::slurp(dir / "out.csv"), std::string(kTraceHeader) + "\n1,2,a,read,-11,5\n2,2,a,read,-11,5");
}

TEST(Replay, WindowLimitsInjection) {
  TempDir dir;
  write_trace(dir / "in.csv", testing::successful_events("read", 3000));  // 3 s of events
  InjectionSession s(spec_for("read", "EAGAIN", 1.0));
  const auto r = replay_run(dir / "in.csv", s, dir / "out.csv", dir / "d.csv", ReplayOptions{1.0});
  EXPECT_EQ(r.events_in_window, 1000);
  EXPECT_EQ(r.stats.injected_count, 1000);
}

TEST(Replay, MalformedInputRemovesOutputs) {
  TempDir dir;
  testing::spit(dir / "in.csv", std::string(kTraceHeader) + "\n1,2,a,read,0,5\nbroken\n");
  InjectionSession s(spec_for("read", "EAGAIN", 1.0));
  EXPECT_THROW(replay_run(dir / "in.csv", s, dir / "out.csv", dir / "d.csv"), ParseError);
  EXPECT_FALSE(std::filesystem::exists(dir / "out.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "d.csv"));
}

TEST(Replay, Capabilities) {
  const auto caps = replay_capabilities();
  EXPECT_TRUE(caps.can_override);
  EXPECT_EQ(caps.clock, BackendCapabilities::Clock::TraceTime);
}

}  // namespace
}  // namespace sysfault
