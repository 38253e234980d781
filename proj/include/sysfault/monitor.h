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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sysfault/domain.h"

namespace sysfault {

// Which intervals contribute a point to a (syscall, errno) rate series.
enum class SeriesMode {
  // Every interval in which the syscall was invoked; intervals without the
  // error contribute a rate of 0.
  InvokedIntervals,
  // Only intervals in which the error itself occurred.
  ErrorIntervals,
};

std::string_view to_string(SeriesMode mode);
SeriesMode parse_series_mode(std::string_view text);

struct MonitorConfig {
  double interval_len_s = 15.0;
  std::int64_t clock_origin_ns = 0;
  SeriesMode series_mode = SeriesMode::InvokedIntervals;

  void validate() const;
  std::int64_t interval_len_ns() const;
};

struct RateSeries {
  std::string syscall;
  ErrnoCode code;
  std::vector<std::pair<std::int64_t, double>> points;  // (interval_index, rate)
  std::int64_t total_errors = 0;
  std::int64_t total_calls = 0;
};

struct RateStats {
  double min = 0.0;   // 5th percentile
  double mean = 0.0;
  double max = 0.0;   // 95th percentile
  double var = 0.0;   // population variance
};

// Closed-interval counters of one syscall.
struct SyscallCounts {
  std::map<std::int64_t, std::int64_t> totals;                         // interval -> calls
  std::map<ErrnoCode, std::map<std::int64_t, std::int64_t>> errors;    // errno -> interval -> errors
};

// Rate series for every errno of `syscall` plus its SUCCESS series, sorted
// by errno symbol. Series without any point and without errors are dropped.
std::vector<RateSeries> build_series(const std::string& syscall, const SyscallCounts& counts, SeriesMode mode);

// Nearest-rank percentile on an ascending sample: element ceil(p/100 * n),
// 1-based, clamped to [1, n].
double nearest_rank(std::span<const double> sorted, double percentile);
RateStats rate_stats(std::span<const double> rates);
// Throws sysfault::Error on an empty series.
RateSummary summarize(const RateSeries& series);

// Aggregates syscall events into fixed-length monitoring intervals.
// Single writer: ingest() and close_interval() must not race each other.
class Monitor {
 public:
  explicit Monitor(MonitorConfig config = {});

  const MonitorConfig& config() const { return config_; }
  std::int64_t interval_of(std::int64_t timestamp_ns) const;

  // Rejects events before the clock origin and events for closed intervals.
  void ingest(const SyscallEvent& event);

  // Emits one IntervalStats per syscall seen in the interval, ordered by
  // syscall name. Closing twice returns the cached result.
  const std::vector<IntervalStats>& close_interval(std::int64_t index);
  // Closes every open interval with index <= `up_to`.
  std::vector<IntervalStats> close_through(std::int64_t up_to);
  std::vector<IntervalStats> close_all();

  std::vector<std::int64_t> open_intervals() const;
  bool is_closed(std::int64_t index) const { return closed_.contains(index); }
  std::int64_t events_ingested() const { return events_ingested_; }

  // Series over closed intervals for every (syscall, errno) seen, including
  // SUCCESS, sorted by syscall then errno symbol.
  std::vector<RateSeries> all_series() const;
  std::vector<RateSummary> summaries() const;

 private:
  struct OpenInterval {
    std::map<std::string, std::int64_t> totals;
    std::map<std::pair<std::string, ErrnoCode>, std::int64_t> errors;
  };

  MonitorConfig config_;
  std::int64_t interval_ns_;
  std::map<std::int64_t, OpenInterval> open_;
  std::map<std::int64_t, std::vector<IntervalStats>> closed_;
  std::map<std::string, SyscallCounts> history_;
  std::int64_t events_ingested_ = 0;
};

}  // namespace sysfault
