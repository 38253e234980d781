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
#include <random>

#include <gtest/gtest.h>

#include "sysfault/error.h"
#include "sysfault/monitor.h"
#include "sysfault/store.h"
#include "test_util.h"

namespace sysfault {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

IntervalRecord rec(std::int64_t ts, const std::string& syscall = "futex", const std::string& err = "ETIMEDOUT",
                   std::int64_t count = 3, std::int64_t total = 10) {
  IntervalRecord r;
  r.timestamp_ns = ts;
  r.interval_index = ts / 15;
  r.syscall = syscall;
  r.code = parse_return_class(err);
  r.count = count;
  r.total = total;
  r.rate = static_cast<double>(count) / static_cast<double>(total);
  return r;
}

TEST(Store, EmptyStoreQueriesEmpty) {
  TempDir dir;
  MetricsStore store(dir / "s");
  EXPECT_TRUE(store.query(std::nullopt, std::nullopt).empty());
  EXPECT_TRUE(store.query_outcomes().empty());
}

TEST(Store, ReadYourWritesAndReopen) {
  TempDir dir;
  {
    MetricsStore store(dir / "s");
    store.append(rec(100));
    store.flush();
    const auto got = store.query("futex", "ETIMEDOUT", 100, 100);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], rec(100));
  }
  MetricsStore again(dir / "s");
  EXPECT_EQ(again.query(std::nullopt, std::nullopt).size(), 1u);
  EXPECT_THROW(again.append(rec(99)), Error);
}

TEST(Store, ConservationAcrossSegments) {
  TempDir dir;
  MetricsStore store(dir / "s", {.segment_rows = 512, .sync_on_flush = false});
  for (int i = 0; i < 10000; ++i) store.append(rec(i, i % 2 ? "read" : "futex"));
  store.flush();
  EXPECT_EQ(store.query(std::nullopt, std::nullopt).size(), 10000u);
  const auto segs = store.interval_segments();
  ASSERT_EQ(segs.size(), 20u);
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    EXPECT_TRUE(segs[i].sealed);
    EXPECT_EQ(segs[i].rows, 512);
    EXPECT_LT(segs[i].last_ts, segs[i + 1].first_ts);
  }
  MetricsStore reopened(dir / "s");
  EXPECT_EQ(reopened.query(std::nullopt, std::nullopt).size(), 10000u);
}

TEST(Store, OutOfOrderIsPerStream) {
  TempDir dir;
  MetricsStore store(dir / "s");
  store.append(rec(50, "read", "EAGAIN"));
  EXPECT_NO_THROW(store.append(rec(10, "futex", "EAGAIN")));
  EXPECT_THROW(store.append(rec(49, "read", "EAGAIN")), Error);
  EXPECT_NO_THROW(store.append(rec(50, "read", "EAGAIN")));
}

TEST(Store, QueryMatchesLinearScanOracle) {
  TempDir dir;
  MetricsStore store(dir / "s", {.segment_rows = 64, .sync_on_flush = false});
  std::mt19937_64 rng(11);
  const std::vector<std::string> syscalls{"read", "futex", "stat"};
  const std::vector<std::string> errs{"EAGAIN", "ENOENT", "SUCCESS"};
  std::map<std::string, std::int64_t> clock;
  std::vector<IntervalRecord> all;
  for (int i = 0; i < 3000; ++i) {
    const auto& s = syscalls[rng() % 3];
    const auto& e = errs[rng() % 3];
    auto& t = clock[s + e];
    t += static_cast<std::int64_t>(rng() % 5);
    all.push_back(rec(t, s, e, static_cast<std::int64_t>(rng() % 10), 10));
    store.append(all.back());
  }
  for (int q = 0; q < 200; ++q) {
    std::optional<std::string> sc, er;
    if (rng() % 2) sc = syscalls[rng() % 3];
    if (rng() % 2) er = errs[rng() % 3];
    std::int64_t a = static_cast<std::int64_t>(rng() % 2000), b = static_cast<std::int64_t>(rng() % 2000);
    if (a > b) std::swap(a, b);
    std::vector<IntervalRecord> want;
    for (const auto& r : all) {
      if ((!sc || r.syscall == *sc) && (!er || r.code.symbol == *er) && r.timestamp_ns >= a && r.timestamp_ns <= b) {
        want.push_back(r);
      }
    }
    std::stable_sort(want.begin(), want.end(), [](const auto& x, const auto& y) { return x.timestamp_ns < y.timestamp_ns; });
    ASSERT_EQ(store.query(sc, er, a, b), want);
  }
}

// Cuts the single segment at every byte offset; reopening must recover
// exactly the records whose lines were complete.
void check_truncation(std::int64_t segment_rows) {
  TempDir dir;
  const auto pristine = dir / "pristine";
  std::vector<IntervalRecord> written;
  {
    MetricsStore store(pristine, {.segment_rows = segment_rows, .sync_on_flush = false});
    for (int i = 0; i < 100; ++i) {
      written.push_back(rec(i * 15, "read", "EAGAIN", i % 7, 10));
      store.append(written.back());
    }
  }
  const auto bytes = testing::slurp(pristine / "intervals" / "seg-00000001.log");
  std::vector<std::size_t> line_ends;
  for (std::size_t i = 0; i < bytes.size() && line_ends.size() < written.size(); ++i) {
    if (bytes[i] == '\n') line_ends.push_back(i + 1);
  }
  ASSERT_EQ(line_ends.size(), written.size());
  for (std::size_t cut = 0; cut <= bytes.size(); ++cut) {
    const auto trial = dir / "trial";
    fs::remove_all(trial);
    fs::create_directories(trial / "intervals");
    testing::spit(trial / "intervals" / "seg-00000001.log", bytes.substr(0, cut));
    MetricsStore store(trial);
    const auto got = store.query(std::nullopt, std::nullopt);
    const auto complete = static_cast<std::size_t>(
        std::upper_bound(line_ends.begin(), line_ends.end(), cut) - line_ends.begin());
    ASSERT_EQ(got.size(), complete) << "cut at " << cut;
    ASSERT_TRUE(std::equal(got.begin(), got.end(), written.begin())) << "cut at " << cut;
    // The store stays appendable after recovery.
    store.append(rec(100 * 15, "read", "EAGAIN"));
    ASSERT_EQ(store.query(std::nullopt, std::nullopt).size(), complete + 1);
  }
}

TEST(Store, TruncationAtEveryOffsetOfOpenSegment) { check_truncation(1000); }
TEST(Store, TruncationAtEveryOffsetOfSealedSegment) { check_truncation(100); }

TEST(Store, CorruptSealedSegmentIsAnError) {
  TempDir dir;
  {
    MetricsStore store(dir / "s", {.segment_rows = 10, .sync_on_flush = false});
    for (int i = 0; i < 25; ++i) store.append(rec(i));
  }
  const auto seg = dir / "s" / "intervals" / "seg-00000001.log";
  auto bytes = testing::slurp(seg);
  bytes[20] = bytes[20] == '1' ? '2' : '1';
  testing::spit(seg, bytes);
  EXPECT_THROW(MetricsStore(dir / "s"), Error);
}

TEST(Store, OutcomesRoundTrip) {
  TempDir dir;
  ExperimentOutcome o;
  o.spec.model.syscall = "futex";
  o.spec.model.code = errno_lookup("EAGAIN");
  o.spec.model.rate = 0.05;
  o.injected_count = 80;
  o.bac_results = {{"SC", 33.0}};
  o.crash_observed = true;
  o.classification = Classification::Severe;
  {
    MetricsStore store(dir / "s");
    store.append(to_record(o, 1000));
  }
  MetricsStore store(dir / "s");
  const auto got = store.query_outcomes();
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], to_record(o, 1000));
  EXPECT_EQ(got[0].bac, "SC=33");
}

TEST(Store, RecordsReproduceMonitorSummaries) {
  std::mt19937_64 rng(8);
  Monitor m({1.0, 0, SeriesMode::InvokedIntervals});
  for (int i = 0; i < 5000; ++i) {
    const auto ts = static_cast<std::int64_t>(rng() % 30'000'000'000ULL);
    const std::int64_t ret = rng() % 5 == 0 ? -EAGAIN : (rng() % 9 == 0 ? -ENOENT : 0);
    m.ingest({ts, 1, "a", rng() % 2 ? "read" : "openat", ret, 1});
  }
  auto closed = m.close_all();
  std::sort(closed.begin(), closed.end(), [](const auto& a, const auto& b) { return a.interval_index < b.interval_index; });
  TempDir dir;
  MetricsStore store(dir / "s");
  for (const auto& s : closed) store.append(s, 0);
  const auto records = store.query(std::nullopt, std::nullopt);
  EXPECT_EQ(summaries_from_records(records, SeriesMode::InvokedIntervals), m.summaries());
}

}  // namespace
}  // namespace sysfault
