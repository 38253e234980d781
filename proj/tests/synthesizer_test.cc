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

#include <map>
#include <random>

#include <gtest/gtest.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/synthesizer.h"
#include "test_util.h"

namespace sysfault {
namespace {

std::map<std::string, ErrorModel> by_key(const std::vector<ErrorModel>& models) {
  std::map<std::string, ErrorModel> out;
  for (const auto& m : models) out.emplace(m.syscall + ":" + m.errno_symbol(), m);
  return out;
}

RateSummary row(double r_max, double r_var) {
  RateSummary s;
  s.syscall = "read";
  s.code = errno_lookup("EIO");
  s.n_intervals = 10;
  s.total_errors = 10;
  s.total_calls = 100;
  s.r_min = 0.0;
  s.r_mean = r_max / 2;
  s.r_max = r_max;
  s.r_var = r_var;
  return s;
}

TEST(Classify, Boundaries) {
  const SynthesizerConfig cfg;
  EXPECT_EQ(classify(row(0.0499, 0.5), cfg), CaseLabel::Sporadic);
  EXPECT_EQ(classify(row(0.05, 0.001), cfg), CaseLabel::Steady);
  EXPECT_EQ(classify(row(0.05, 0.0011), cfg), CaseLabel::Fluctuating);
}

TEST(Synthesize, RatesPerCase) {
  const SynthesizerConfig cfg;
  EXPECT_EQ(synthesize_one(row(0.01, 0), cfg).rate, 0.05);
  EXPECT_EQ(synthesize_one(row(0.3, 0.01), cfg).rate, 0.3);
  EXPECT_DOUBLE_EQ(synthesize_one(row(0.5, 0.0), cfg).rate, 0.6);
  EXPECT_EQ(synthesize_one(row(0.9, 0.0), cfg).rate, 1.0);
}

TEST(Synthesize, HedwigFixture) {
  const auto rows = read_summary_csv(testing::data_path("hedwig_summary.csv"));
  const auto models = by_key(synthesize_all(rows, {}));
  ASSERT_EQ(models.size(), 13u);
  EXPECT_NEAR(models.at("futex:ETIMEDOUT").rate, 0.588, 1e-3);
  EXPECT_EQ(models.at("futex:EAGAIN").case_label, CaseLabel::Sporadic);
  EXPECT_EQ(models.at("accept:EAGAIN").case_label, CaseLabel::Fluctuating);
  EXPECT_EQ(models.at("stat:ENOENT").case_label, CaseLabel::Steady);
}

TEST(Synthesize, TTorrentFixture) {
  const auto rows = read_summary_csv(testing::data_path("ttorrent_summary.csv"));
  const auto models = by_key(synthesize_all(rows, {}));
  ASSERT_EQ(models.size(), 16u);
  EXPECT_NEAR(models.at("getsockname:ENOTSOCK").rate, 0.333, 1e-3);
  EXPECT_NEAR(models.at("futex:ETIMEDOUT").rate, 0.493, 1e-3);
  EXPECT_EQ(models.at("epoll_ctl:ENOENT").case_label, CaseLabel::Sporadic);
  EXPECT_EQ(models.at("unlink:ENOENT").rate, 1.0);
}

TEST(Synthesize, SkipsSuccessAndRejectsDuplicates) {
  auto rows = read_summary_csv(testing::data_path("hedwig_summary.csv"));
  rows.push_back(rows.front());
  EXPECT_THROW(synthesize_all(rows, {}), Error);
}

TEST(Synthesize, InvalidConfigRejected) {
  SynthesizerConfig cfg;
  cfg.factor = 0.5;
  EXPECT_THROW(synthesize_all(std::vector<RateSummary>{}, cfg), ConfigError);
}

TEST(Synthesize, RandomSummariesYieldValidModels) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SynthesizerConfig cfg;
  for (int i = 0; i < 5000; ++i) {
    const double a = u(rng), b = u(rng);
    auto s = row(std::max(a, b), u(rng) * 0.01);
    s.r_min = std::min(a, b);
    const auto m = synthesize_one(s, cfg);
    ASSERT_GT(m.rate, 0.0);
    ASSERT_LE(m.rate, 1.0);
    // Amplification never goes below the observed maximum, except for the
    // fixed sporadic rate below the boundary.
    if (m.case_label != CaseLabel::Sporadic) ASSERT_GE(m.rate, s.r_max);
    ASSERT_EQ(m.source, s);
  }
}

TEST(RandomBaseline, HasNoFixedErrno) {
  const auto m = random_baseline_model("futex");
  EXPECT_TRUE(m.is_random());
  EXPECT_EQ(m.errno_symbol(), "RANDOM");
  EXPECT_EQ(m.rate, 0.5);
}

}  // namespace
}  // namespace sysfault
