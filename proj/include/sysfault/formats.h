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

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sysfault/domain.h"

namespace sysfault {

inline constexpr std::string_view kTraceHeader = "timestamp_ns,pid,comm,syscall,ret,duration_ns";
inline constexpr std::string_view kSummaryHeader =
    "syscall,errno,n_intervals,total_errors,total_calls,r_min,r_mean,r_max,r_var";
inline constexpr std::string_view kModelsHeader = "syscall,errno,rate,case,source_r_max,source_r_var";

std::vector<std::string_view> split_csv(std::string_view line, char sep = ',');

// Trace files. Lines are LF terminated, fields never quoted.
SyscallEvent parse_trace_line(std::string_view line);
std::string format_trace_line(const SyscallEvent& e);

// Reads a trace line by line; throws ParseError carrying the line number.
class TraceReader {
 public:
  explicit TraceReader(const std::filesystem::path& path);

  // Returns false at end of file. `raw` receives the line without its LF.
  bool next(SyscallEvent& event, std::string& raw);
  // Whether the last line returned by next() was terminated by LF.
  bool last_line_terminated() const { return terminated_; }
  std::int64_t line_number() const { return line_no_; }
  const std::string& header() const { return header_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string header_;
  std::int64_t line_no_ = 0;
  bool terminated_ = true;
};

std::vector<SyscallEvent> read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, std::span<const SyscallEvent> events);
// Stable sort by timestamp.
void canonical_sort(std::vector<SyscallEvent>& events);

// Summary CSV. Rates carry five decimals; SUCCESS rows leave them empty.
std::string format_summary_csv(std::span<const RateSummary> rows);
std::vector<RateSummary> parse_summary_csv(std::string_view text, const std::string& source = "<summary>");
void write_summary_csv(const std::filesystem::path& path, std::span<const RateSummary> rows);
std::vector<RateSummary> read_summary_csv(const std::filesystem::path& path);

// Models CSV.
std::string format_models_csv(std::span<const ErrorModel> models);
std::vector<ErrorModel> parse_models_csv(std::string_view text, const std::string& source = "<models>");
void write_models_csv(const std::filesystem::path& path, std::span<const ErrorModel> models);
std::vector<ErrorModel> read_models_csv(const std::filesystem::path& path);

// Whole-file helpers with path context in errors. write_file_atomic writes a
// sibling temporary and renames it into place.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace sysfault
