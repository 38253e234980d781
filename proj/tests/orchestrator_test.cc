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

#include <gtest/gtest.h>

#include <random>

#include <fmt/format.h>

#include "oracles.h"
#include "sysfault/campaign.h"
#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/orchestrator.h"
#include "sysfault/store.h"
#include "test_util.h"

namespace sysfault {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

BaselineBac baseline(std::initializer_list<BaselineMetric> metrics) { return {std::vector<BaselineMetric>(metrics)}; }

TEST(Classification, ReferenceExperiments) {
  const auto server = baseline({{"SF", 0.0, MetricSeverity::Degrade},
                                {"FF", 0.0, MetricSeverity::Degrade},
                                {"VF", 0.05, MetricSeverity::Degrade},
                                {"SC", 0.0, MetricSeverity::Crash}});
  EXPECT_EQ(classify({{"SF", 40}, {"FF", 20}, {"VF", 0}, {"SC", 0}}, false, false, server), Classification::Degraded);
  EXPECT_EQ(classify({{"SF", 0}, {"FF", 0}, {"VF", 0}, {"SC", 33}}, false, false, server), Classification::Severe);
  EXPECT_EQ(classify({{"SF", 0}, {"FF", 0}, {"VF", 0}, {"SC", 0}}, false, false, server), Classification::Resilient);
  EXPECT_TRUE(metrics_indicate_crash({{"SC", 33}}, server));

  const auto client = baseline({{"ST", 3.0, MetricSeverity::Degrade},
                                {"VF", 0.0, MetricSeverity::Crash},
                                {"CR", 0.0, MetricSeverity::Crash}});
  EXPECT_EQ(classify({{"ST", 100}, {"VF", 0}, {"CR", 0}}, false, false, client), Classification::Degraded);
  EXPECT_EQ(classify({{"ST", 0}, {"VF", 0}, {"CR", 0}}, false, false, client), Classification::Resilient);
  EXPECT_EQ(classify({{"ST", 0}, {"VF", 0}, {"CR", 0}}, false, true, client), Classification::Severe);
  EXPECT_EQ(classify({{"ST", 0}}, true, false, client), Classification::Severe);
}

TEST(Classification, AgreesWithOracle) {
  std::mt19937_64 rng(31);
  const auto b = baseline({{"A", 1.0, MetricSeverity::Degrade}, {"B", 0.0, MetricSeverity::Crash}});
  const std::map<std::string, oracle::Threshold> ob{{"A", {1.0, false}}, {"B", {0.0, true}}};
  for (int i = 0; i < 2000; ++i) {
    const double a = static_cast<double>(rng() % 4) * 0.5, c = static_cast<double>(rng() % 3) * 0.5;
    const bool co = rng() % 5 == 0;
    ASSERT_EQ(classify({{"A", a}, {"B", c}}, false, co, b), oracle::classify({{"A", a}, {"B", c}}, co, ob));
  }
}

TEST(Classification, MetricMissingFromBaselineThrows) {
  EXPECT_THROW(classify({{"ZZ", 1}}, false, false, baseline({{"SF", 0.0, MetricSeverity::Degrade}})), ConfigError);
}

TEST(CheckerOutput, Parsing) {
  EXPECT_EQ(parse_bac_line("SF=40;FF=20.5"), (BacResults{{"SF", 40}, {"FF", 20.5}}));
  EXPECT_EQ(parse_checker_output("noise\nSF=1\n\n"), (BacResults{{"SF", 1}}));
  EXPECT_THROW(parse_bac_line(""), Error);
  EXPECT_THROW(parse_bac_line("SF=1;SF=2"), Error);
  EXPECT_THROW(parse_bac_line("S F=1"), Error);
  EXPECT_THROW(parse_bac_line("SF=abc"), Error);
  EXPECT_EQ(aggregate_probes({{{"SF", 1}, {"FF", 4}}, {{"SF", 3}}}), (BacResults{{"SF", 2}, {"FF", 4}}));
}

TEST(OutcomesCsv, RoundTrip) {
  ExperimentOutcome o;
  o.spec.model.syscall = "connect";
  o.spec.model.code = errno_lookup("EINTR");
  o.spec.model.rate = 0.125;
  o.spec.seed = 9;
  o.injected_count = 12;
  o.bac_results = {{"ST", 100}};
  o.classification = Classification::Degraded;
  const std::vector<OutcomeRow> rows{{0, o}};
  const auto text = format_outcomes_csv(rows);
  EXPECT_EQ(text.substr(0, kOutcomesHeader.size()), kOutcomesHeader);
  EXPECT_EQ(parse_outcomes_csv(text, "t")[0].outcome, o);
}

// A replay campaign over 2 s of read calls. The checker reports how many
// errors the experiment injected.
struct ReplayFixture {
  TempDir dir;
  std::string checker = R"(awk -F, '!/^#/ && NR > 2 && $7 != "" { n++ } END { print "SF=" n + 0 }' "$SYSFAULT_DECISION_LOG")";

  ReplayFixture() { write_trace(dir / "trace.csv", testing::successful_events("read", 2000)); }

  CampaignConfig config(const std::string& extra, const std::string& experiments) {
    const auto doc = fmt::format(R"({{"schema_version": 1, "backend": "replay", "trace": "trace.csv",
      "baseline": {{"SF": {{"threshold": 0, "severity": "degrade"}}}}, {} "experiments": [{}]}})",
                                 extra, experiments);
    return parse_campaign(doc, dir.path());
  }
  std::string cmd(const std::string& key, const std::string& value) {
    return fmt::format("\"{}\": {},", key, json_quote(value));
  }
  static std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
};

TEST(Orchestrator, ReplayCampaignClassifiesAndJournals) {
  ReplayFixture f;
  auto cfg = f.config(f.cmd("checker_cmd", f.checker) + f.cmd("post_inspect_cmd", "true"),
                      R"({"syscall": "read", "errno": "EAGAIN", "rate": 0.5, "seed": 4, "duration_s": 1},
                         {"syscall": "write", "errno": "EIO", "rate": 0.5},
                         {"syscall": "openat", "errno": "EIO", "rate": 0.5, "budget": 5})");
  MetricsStore store(f.dir / "store");
  Orchestrator orch(cfg, f.dir / "out", &store);
  std::int64_t t = 0;
  orch.set_clock([&t] { return t += 10; });
  const auto result = orch.run_campaign();
  ASSERT_FALSE(result.aborted);
  ASSERT_EQ(result.outcomes.size(), 3u);

  const auto& read = result.outcomes[0].outcome;
  EXPECT_EQ(read.status, ExperimentStatus::Completed);
  EXPECT_GT(read.injected_count, 400);
  EXPECT_LT(read.injected_count, 600);  // only the first second of the trace is in the window
  ASSERT_EQ(read.bac_results.size(), 1u);
  EXPECT_EQ(read.bac_results[0].second, static_cast<double>(read.injected_count));
  EXPECT_EQ(read.classification, Classification::Degraded);
  EXPECT_EQ(result.outcomes[1].outcome.status, ExperimentStatus::NoInjection);
  EXPECT_EQ(result.outcomes[2].outcome.status, ExperimentStatus::NoInjection);

  const auto on_disk = read_outcomes_csv(f.dir / "out" / "outcomes.csv");
  ASSERT_EQ(on_disk.size(), result.outcomes.size());
  for (std::size_t i = 0; i < on_disk.size(); ++i) {
    EXPECT_EQ(on_disk[i].index, i);
    auto expected = result.outcomes[i].outcome;
    expected.note.clear();  // notes go to the journal, not the CSV
    EXPECT_EQ(on_disk[i].outcome, expected);
  }
  EXPECT_EQ(store.query_outcomes().size(), 3u);

  std::vector<std::string> steps;
  for (const auto& line : orch.journal()) {
    if (line.rfind("exp=00 ", 0) == 0) steps.push_back(line.substr(7, line.find(' ', 7) - 7));
  }
  EXPECT_EQ(steps, (std::vector<std::string>{"attach", "detach", "probe", "post_inspect", "classify"}));
  EXPECT_TRUE(fs::exists(f.dir / "out" / "exp-00-read-EAGAIN" / "decisions.csv"));
  EXPECT_TRUE(fs::exists(f.dir / "out" / "journal.log"));
}

TEST(Orchestrator, ProbesAreAveraged) {
  ReplayFixture f;
  auto cfg = f.config(f.cmd("checker_cmd", "echo SF=$SYSFAULT_PROBE") + R"("probes": 3,)",
                      R"({"syscall": "read", "errno": "EAGAIN", "rate": 1.0})");
  Orchestrator orch(cfg, f.dir / "out");
  const auto o = orch.run_experiment(orch.config().experiments[0], 0);
  EXPECT_EQ(o.bac_results, (BacResults{{"SF", 2.0}}));
}

TEST(Orchestrator, StateCorruptionIsSevereAndFailedRestartAborts) {
  ReplayFixture f;
  auto cfg = f.config(f.cmd("checker_cmd", "echo SF=0") + f.cmd("post_inspect_cmd", "exit 1") +
                          f.cmd("restart_cmd", "exit 3"),
                      R"({"syscall": "read", "errno": "EAGAIN", "rate": 0.5},
                         {"syscall": "read", "errno": "EIO", "rate": 0.5})");
  Orchestrator orch(cfg, f.dir / "out");
  const auto result = orch.run_campaign();
  EXPECT_TRUE(result.aborted);
  ASSERT_EQ(result.outcomes.size(), 1u);
  EXPECT_TRUE(result.outcomes[0].outcome.state_corrupted);
  EXPECT_EQ(result.outcomes[0].outcome.classification, Classification::Severe);
  EXPECT_EQ(read_outcomes_csv(f.dir / "out" / "outcomes.csv").size(), 1u);
}

TEST(Orchestrator, SuccessfulRestartContinues) {
  ReplayFixture f;
  auto cfg = f.config(f.cmd("post_inspect_cmd", "exit 1") + f.cmd("restart_cmd", "touch restarted"),
                      R"({"syscall": "read", "errno": "EAGAIN", "rate": 0.5},
                         {"syscall": "read", "errno": "EIO", "rate": 0.5})");
  Orchestrator orch(cfg, f.dir / "out");
  const auto result = orch.run_campaign();
  EXPECT_FALSE(result.aborted);
  EXPECT_EQ(result.outcomes.size(), 2u);
  EXPECT_TRUE(fs::exists(f.dir / "restarted"));  // commands run in the campaign directory
}

TEST(Orchestrator, InconclusiveOutcomes) {
  ReplayFixture f;
  const std::string exp = R"({"syscall": "read", "errno": "EAGAIN", "rate": 0.5})";
  struct Case {
    std::string extra;
    std::string why;
  };
  const std::vector<Case> cases{
      {f.cmd("checker_cmd", "echo ZZ=1"), "metric missing from baseline"},
      {f.cmd("checker_cmd", "echo not-a-metric"), "malformed checker output"},
      {f.cmd("checker_cmd", "exit 2"), "checker failure"},
      {f.cmd("post_inspect_cmd", "kill -9 $$"), "post-inspect crashed"},
      {f.cmd("post_inspect_cmd", "sleep 5") + R"("command_timeout_s": 0.3,)", "post-inspect timed out"},
      {f.cmd("post_inspect_cmd", "/nonexistent/inspect"), "post-inspect not runnable"},
  };
  for (const auto& c : cases) {
    Orchestrator orch(f.config(c.extra, exp), f.dir / "out");
    const auto o = orch.run_experiment(orch.config().experiments[0], 0);
    EXPECT_EQ(o.status, ExperimentStatus::Inconclusive) << c.why;
    EXPECT_FALSE(o.note.empty()) << c.why;
  }
}

TEST(Orchestrator, CommandsSeeExperimentEnvironment) {
  ReplayFixture f;
  auto cfg = f.config(
      f.cmd("checker_cmd",
            "test \"$SYSFAULT_SYSCALL:$SYSFAULT_ERRNO:$SYSFAULT_RATE\" = read:EAGAIN:0.25 && test -f \"$SYSFAULT_TRACE_OUT\" "
            "&& echo SF=0"),
      R"({"syscall": "read", "errno": "EAGAIN", "rate": 0.25})");
  Orchestrator orch(cfg, f.dir / "out");
  const auto o = orch.run_experiment(orch.config().experiments[0], 0);
  EXPECT_EQ(o.status, ExperimentStatus::Completed) << o.note;
  EXPECT_EQ(o.classification, Classification::Resilient);
}

TEST(Orchestrator, LiveSpawnedTarget) {
  TempDir dir;
  const auto doc = R"({"schema_version": 1, "backend": "live", "target_command": ["/bin/sh", "-c", "while :; do cat /etc/hostname >/dev/null; done"],
    "checker_cmd": "echo SF=0", "post_inspect_cmd": "true", "restart_cmd": "true", "checker_interval_s": 0.2,
    "baseline": {"SF": {"threshold": 0}},
    "experiments": [{"syscall": "openat", "errno": "EACCES", "rate": 0.5, "duration_s": 0.6, "process": "comm:cat"}]})";
  Orchestrator orch(parse_campaign(doc, dir.path()), dir / "out");
  ExperimentOutcome o;
  try {
    o = orch.run_experiment(orch.config().experiments[0], 0);
  } catch (const CapabilityError&) {
    GTEST_SKIP() << "ptrace unavailable";
  }
  EXPECT_EQ(o.status, ExperimentStatus::Completed) << o.note;
  EXPECT_GT(o.injected_count, 0);
  EXPECT_FALSE(o.crash_observed);
  EXPECT_EQ(o.classification, Classification::Resilient);
}

TEST(Orchestrator, LiveTargetCrashIsSevere) {
  TempDir dir;
  // The target exits non-zero as soon as a read fails.
  const auto doc = R"({"schema_version": 1, "backend": "live",
    "target_command": ["/bin/sh", "-c", "sleep 0.3; while cat /etc/hostname >/dev/null; do :; done; exit 4"],
    "checker_cmd": "echo SF=0", "post_inspect_cmd": "true", "restart_cmd": "true", "checker_interval_s": 0.1,
    "baseline": {"SF": {"threshold": 0}},
    "experiments": [{"syscall": "read", "errno": "EIO", "rate": 1.0, "duration_s": 3, "process": "comm:cat"}]})";
  Orchestrator orch(parse_campaign(doc, dir.path()), dir / "out");
  ExperimentOutcome o;
  try {
    o = orch.run_experiment(orch.config().experiments[0], 0);
  } catch (const CapabilityError&) {
    GTEST_SKIP() << "ptrace unavailable";
  }
  EXPECT_TRUE(o.crash_observed) << o.note;
  EXPECT_EQ(o.classification, Classification::Severe);
}

}  // namespace
}  // namespace sysfault
