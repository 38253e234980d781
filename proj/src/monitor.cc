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

#include "sysfault/monitor.h"

#include <algorithm>
#include <cmath>
#include <iterator>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {

std::string_view to_string(SeriesMode mode) {
  return mode == SeriesMode::InvokedIntervals ? "invoked" : "errors";
}

SeriesMode parse_series_mode(std::string_view text) {
  if (text == "invoked") return SeriesMode::InvokedIntervals;
  if (text == "errors") return SeriesMode::ErrorIntervals;
  throw ConfigError(fmt::format("unknown series mode '{}' (want invoked|errors)", text));
}

void MonitorConfig::validate() const {
  if (!(interval_len_s > 0.0) || interval_len_ns() <= 0) {
    throw ConfigError(fmt::format("interval length {} s must be positive", interval_len_s));
  }
}

std::int64_t MonitorConfig::interval_len_ns() const {
  return static_cast<std::int64_t>(std::llround(interval_len_s * 1e9));
}

double nearest_rank(std::span<const double> sorted, double percentile) {
  if (sorted.empty()) throw Error("percentile of an empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::int64_t>(std::ceil(percentile * n / 100.0));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

RateStats rate_stats(std::span<const double> rates) {
  if (rates.empty()) throw Error("cannot summarize an empty rate series");
  std::vector<double> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  RateStats s;
  s.min = nearest_rank(sorted, 5.0);
  s.max = nearest_rank(sorted, 95.0);
  const auto n = static_cast<double>(rates.size());
  double sum = 0.0;
  for (double r : rates) sum += r;
  s.mean = sum / n;
  double sq = 0.0;
  for (double r : rates) sq += (r - s.mean) * (r - s.mean);
  s.var = sq / n;
  return s;
}

RateSummary summarize(const RateSeries& series) {
  if (series.points.empty()) {
    throw Error(fmt::format("{}:{}: empty rate series", series.syscall, series.code.symbol));
  }
  std::vector<double> rates;
  rates.reserve(series.points.size());
  for (const auto& [idx, r] : series.points) rates.push_back(r);
  const auto s = rate_stats(rates);
  RateSummary out;
  out.syscall = series.syscall;
  out.code = series.code;
  out.n_intervals = static_cast<std::int64_t>(series.points.size());
  out.total_errors = series.total_errors;
  out.total_calls = series.total_calls;
  out.r_min = s.min;
  out.r_mean = s.mean;
  out.r_max = s.max;
  out.r_var = s.var;
  return out;
}

std::vector<RateSeries> build_series(const std::string& syscall, const SyscallCounts& counts, SeriesMode mode) {
  std::int64_t calls = 0;
  for (const auto& [idx, total] : counts.totals) calls += total;

  auto build = [&](const ErrnoCode& code, auto&& count_in) {
    RateSeries series;
    series.syscall = syscall;
    series.code = code;
    series.total_calls = calls;
    for (const auto& [idx, total] : counts.totals) {
      const std::int64_t n = count_in(idx);
      series.total_errors += n;
      if (n == 0 && mode == SeriesMode::ErrorIntervals) continue;
      series.points.emplace_back(idx, static_cast<double>(n) / static_cast<double>(total));
    }
    return series;
  };

  std::vector<RateSeries> rows;
  for (const auto& [code, per_interval] : counts.errors) {
    rows.push_back(build(code, [&](std::int64_t idx) {
      auto it = per_interval.find(idx);
      return it == per_interval.end() ? std::int64_t{0} : it->second;
    }));
  }
  rows.push_back(build(success_code(), [&](std::int64_t idx) {
    std::int64_t n = counts.totals.at(idx);
    for (const auto& [code, per_interval] : counts.errors) {
      if (auto it = per_interval.find(idx); it != per_interval.end()) n -= it->second;
    }
    return n;
  }));
  std::sort(rows.begin(), rows.end(),
            [](const RateSeries& a, const RateSeries& b) { return a.code.symbol < b.code.symbol; });
  std::vector<RateSeries> out;
  for (auto& r : rows) {
    if (r.total_errors > 0 || !r.points.empty()) out.push_back(std::move(r));
  }
  return out;
}

Monitor::Monitor(MonitorConfig config) : config_(config) {
  config_.validate();
  interval_ns_ = config_.interval_len_ns();
}

std::int64_t Monitor::interval_of(std::int64_t timestamp_ns) const {
  return (timestamp_ns - config_.clock_origin_ns) / interval_ns_;
}

void Monitor::ingest(const SyscallEvent& event) {
  if (event.timestamp_ns < config_.clock_origin_ns) {
    throw Error(fmt::format("event at {} ns precedes the clock origin {} ns", event.timestamp_ns,
                            config_.clock_origin_ns));
  }
  const auto idx = interval_of(event.timestamp_ns);
  if (closed_.contains(idx)) {
    throw Error(fmt::format("event at {} ns falls in interval {} which is already closed", event.timestamp_ns, idx));
  }
  auto& open = open_[idx];
  ++open.totals[event.syscall];
  if (event.failed()) ++open.errors[{event.syscall, event.error()}];
  ++events_ingested_;
}

const std::vector<IntervalStats>& Monitor::close_interval(std::int64_t index) {
  if (auto it = closed_.find(index); it != closed_.end()) return it->second;

  std::vector<IntervalStats> stats;
  if (auto it = open_.find(index); it != open_.end()) {
    for (const auto& [syscall, total] : it->second.totals) {
      IntervalStats s;
      s.interval_index = index;
      s.interval_len_s = config_.interval_len_s;
      s.syscall = syscall;
      s.total_count = total;
      history_[syscall].totals[index] = total;
      stats.push_back(std::move(s));
    }
    for (const auto& [key, n] : it->second.errors) {
      auto pos = std::find_if(stats.begin(), stats.end(), [&](const IntervalStats& s) { return s.syscall == key.first; });
      pos->error_counts[key.second] = n;
      history_[key.first].errors[key.second][index] = n;
    }
    open_.erase(it);
  }
  return closed_.emplace(index, std::move(stats)).first->second;
}

std::vector<IntervalStats> Monitor::close_through(std::int64_t up_to) {
  std::vector<IntervalStats> out;
  while (!open_.empty() && open_.begin()->first <= up_to) {
    const auto& s = close_interval(open_.begin()->first);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::vector<IntervalStats> Monitor::close_all() {
  if (open_.empty()) return {};
  return close_through(open_.rbegin()->first);
}

std::vector<std::int64_t> Monitor::open_intervals() const {
  std::vector<std::int64_t> out;
  for (const auto& [idx, _] : open_) out.push_back(idx);
  return out;
}

std::vector<RateSeries> Monitor::all_series() const {
  std::vector<RateSeries> out;
  for (const auto& [syscall, counts] : history_) {
    auto rows = build_series(syscall, counts, config_.series_mode);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<RateSummary> Monitor::summaries() const {
  std::vector<RateSummary> out;
  for (const auto& series : all_series()) {
    if (series.points.empty()) continue;
    out.push_back(summarize(series));
  }
  return out;
}

}  // namespace sysfault
