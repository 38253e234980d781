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
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sysfault/domain.h"
#include "sysfault/monitor.h"

namespace sysfault {

// One (interval, syscall, errno) row. Every interval in which a syscall was
// invoked has a SUCCESS row, so per-interval totals survive without errors.
struct IntervalRecord {
  std::int64_t timestamp_ns = 0;  // interval start
  std::int64_t interval_index = 0;
  double interval_len_s = 15.0;
  std::string syscall;
  ErrnoCode code;
  std::int64_t count = 0;
  std::int64_t total = 0;
  double rate = 0.0;

  friend bool operator==(const IntervalRecord&, const IntervalRecord&) = default;
};

struct OutcomeRecord {
  std::int64_t timestamp_ns = 0;
  std::string syscall;
  std::string errno_symbol;
  double rate = 0.0;
  std::int64_t injected = 0;
  ExperimentStatus status = ExperimentStatus::Completed;
  Classification classification = Classification::Resilient;
  bool crash = false;
  bool state_corrupted = false;
  std::string bac;  // "NAME=value;NAME=value"

  friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

std::vector<IntervalRecord> to_records(const IntervalStats& stats, std::int64_t clock_origin_ns);
OutcomeRecord to_record(const ExperimentOutcome& outcome, std::int64_t timestamp_ns);
std::vector<RateSummary> summaries_from_records(std::span<const IntervalRecord> records, SeriesMode mode);

struct StoreSegment {
  std::filesystem::path path;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
  std::int64_t rows = 0;
  std::uint32_t checksum = 0;  // CRC-32 over the segment's record lines
  bool sealed = false;
};

struct StoreOptions {
  std::int64_t segment_rows = 4096;
  bool sync_on_flush = true;
};

// Append-only store under one directory:
//   <dir>/intervals/seg-NNNNNNNN.log
//   <dir>/outcomes/seg-NNNNNNNN.log
// Each line is "<crc32 hex>|<payload>\n". A segment is sealed by a trailing
// "#SEAL" line once it holds segment_rows records; sealed segments never
// change. Opening the store truncates a torn tail of the newest segment, so
// after any crash the store holds a prefix of the appended records.
class MetricsStore {
 public:
  static constexpr std::int64_t kMinTime = std::numeric_limits<std::int64_t>::min();
  static constexpr std::int64_t kMaxTime = std::numeric_limits<std::int64_t>::max();

  explicit MetricsStore(const std::filesystem::path& dir, StoreOptions options = {});
  ~MetricsStore();
  MetricsStore(MetricsStore&&) noexcept;
  MetricsStore& operator=(MetricsStore&&) noexcept;

  // Rejects a record older than the last one of the same stream: a
  // (syscall, errno) pair for intervals, the single outcome stream otherwise.
  void append(const IntervalRecord& record);
  void append(const OutcomeRecord& record);
  void append(const IntervalStats& stats, std::int64_t clock_origin_ns);
  void flush();

  // Inclusive time range; results ordered by time, then append order.
  std::vector<IntervalRecord> query(const std::optional<std::string>& syscall, const std::optional<std::string>& errno_symbol,
                                    std::int64_t t_from = kMinTime, std::int64_t t_to = kMaxTime) const;
  std::vector<OutcomeRecord> query_outcomes(std::int64_t t_from = kMinTime, std::int64_t t_to = kMaxTime) const;

  std::vector<StoreSegment> interval_segments() const;
  std::vector<StoreSegment> outcome_segments() const;
  // Bytes discarded from torn tails when the store was opened.
  std::int64_t recovered_bytes_dropped() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  class Log;
  std::filesystem::path dir_;
  std::unique_ptr<Log> intervals_;
  std::unique_ptr<Log> outcomes_;
  std::map<std::string, std::int64_t> last_ts_;
};

}  // namespace sysfault
