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

#include "sysfault/formats.h"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <sstream>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {
namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(std::string_view field, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(fmt::format("invalid {} '{}'", what, field));
  }
  return value;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

// Shortest text that parses back to the same double, so summaries survive
// a write/read cycle without drift.
std::string exact(double v) { return fmt::format("{}", v); }

// Up to ten significant digits: exact for rates derived from five-decimal
// summaries, without printing binary noise.
std::string rate_sig(double v) { return fmt::format("{:.10g}", v); }

}  // namespace

std::vector<std::string_view> split_csv(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

SyscallEvent parse_trace_line(std::string_view line) {
  auto f = split_csv(line);
  if (f.size() != 6) throw Error(fmt::format("expected 6 fields, got {}", f.size()));
  SyscallEvent e;
  e.timestamp_ns = parse_number<std::int64_t>(f[0], "timestamp_ns");
  e.pid = parse_number<std::int32_t>(f[1], "pid");
  e.comm = std::string(f[2]);
  if (e.comm != sanitize_comm(e.comm)) throw Error(fmt::format("comm '{}' has characters outside [A-Za-z0-9_.-]", e.comm));
  e.syscall = std::string(f[3]);
  if (e.syscall.empty()) throw Error("empty syscall name");
  e.ret = parse_number<std::int64_t>(f[4], "ret");
  e.duration_ns = parse_number<std::int64_t>(f[5], "duration_ns");
  if (e.duration_ns < 0) throw Error(fmt::format("negative duration_ns {}", e.duration_ns));
  return e;
}

std::string format_trace_line(const SyscallEvent& e) {
  return fmt::format("{},{},{},{},{},{}", e.timestamp_ns, e.pid, sanitize_comm(e.comm), e.syscall, e.ret,
                     e.duration_ns);
}

TraceReader::TraceReader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError(fmt::format("{}: cannot open trace: {}", path.string(), std::strerror(errno)));
  if (!std::getline(in_, header_)) throw ParseError(path.string(), 1, "empty trace file, header missing");
  line_no_ = 1;
  if (header_ != kTraceHeader) {
    throw ParseError(path.string(), 1, fmt::format("unexpected header '{}', want '{}'", header_, kTraceHeader));
  }
}

bool TraceReader::next(SyscallEvent& event, std::string& raw) {
  while (true) {
    if (!std::getline(in_, raw)) return false;
    terminated_ = !in_.eof();
    ++line_no_;
    if (raw.empty()) {
      if (!terminated_) return false;
      throw ParseError(path_.string(), line_no_, "empty line");
    }
    try {
      event = parse_trace_line(raw);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path_.string(), line_no_, e.what());
    }
    return true;
  }
}

std::vector<SyscallEvent> read_trace(const fs::path& path) {
  TraceReader reader(path);
  std::vector<SyscallEvent> events;
  SyscallEvent e;
  std::string raw;
  while (reader.next(e, raw)) events.push_back(std::move(e));
  return events;
}

void write_trace(const fs::path& path, std::span<const SyscallEvent> events) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& e : events) {
    out += format_trace_line(e);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void canonical_sort(std::vector<SyscallEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const SyscallEvent& a, const SyscallEvent& b) { return a.timestamp_ns < b.timestamp_ns; });
}

std::string format_summary_csv(std::span<const RateSummary> rows) {
  std::vector<const RateSummary*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const RateSummary* a, const RateSummary* b) {
    return std::tie(a->syscall, a->code.symbol) < std::tie(b->syscall, b->code.symbol);
  });
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto* r : sorted) {
    if (r->is_success()) {
      out += fmt::format("{},{},{},{},{},,,,\n", r->syscall, r->code.symbol, r->n_intervals, r->total_errors,
                         r->total_calls);
    } else {
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r->syscall, r->code.symbol, r->n_intervals,
                         r->total_errors, r->total_calls, exact(r->r_min), exact(r->r_mean), exact(r->r_max),
                         exact(r->r_var));
    }
  }
  return out;
}

std::vector<RateSummary> parse_summary_csv(std::string_view text, const std::string& source) {
  auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kSummaryHeader) {
    throw ParseError(source, 1, fmt::format("expected header '{}'", kSummaryHeader));
  }
  std::vector<RateSummary> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line_no = static_cast<std::int64_t>(i + 1);
    if (lines[i].empty()) continue;
    try {
      auto f = split_csv(lines[i]);
      if (f.size() != 9) throw Error(fmt::format("expected 9 fields, got {}", f.size()));
      RateSummary r;
      r.syscall = std::string(f[0]);
      r.code = parse_return_class(f[1]);
      r.n_intervals = parse_number<std::int64_t>(f[2], "n_intervals");
      r.total_errors = parse_number<std::int64_t>(f[3], "total_errors");
      r.total_calls = parse_number<std::int64_t>(f[4], "total_calls");
      if (!r.is_success()) {
        r.r_min = parse_number<double>(f[5], "r_min");
        r.r_mean = parse_number<double>(f[6], "r_mean");
        r.r_max = parse_number<double>(f[7], "r_max");
        r.r_var = parse_number<double>(f[8], "r_var");
      }
      r.validate();
      rows.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return rows;
}

void write_summary_csv(const fs::path& path, std::span<const RateSummary> rows) {
  write_file_atomic(path, format_summary_csv(rows));
}

std::vector<RateSummary> read_summary_csv(const fs::path& path) {
  return parse_summary_csv(read_file(path), path.string());
}

std::string format_models_csv(std::span<const ErrorModel> models) {
  std::string out(kModelsHeader);
  out += '\n';
  for (const auto& m : models) {
    std::string r_max, r_var;
    if (m.source) {
      r_max = exact(m.source->r_max);
      r_var = exact(m.source->r_var);
    }
    out += fmt::format("{},{},{},{},{},{}\n", m.syscall, m.errno_symbol(), rate_sig(m.rate), to_string(m.case_label),
                       r_max, r_var);
  }
  return out;
}

std::vector<ErrorModel> parse_models_csv(std::string_view text, const std::string& source) {
  auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kModelsHeader) {
    throw ParseError(source, 1, fmt::format("expected header '{}'", kModelsHeader));
  }
  std::vector<ErrorModel> models;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      auto f = split_csv(lines[i]);
      if (f.size() != 6) throw Error(fmt::format("expected 6 fields, got {}", f.size()));
      ErrorModel m;
      m.syscall = std::string(f[0]);
      if (f[1] != "RANDOM") m.code = errno_lookup(f[1]);
      m.rate = parse_number<double>(f[2], "rate");
      m.case_label = parse_case_label(f[3]);
      if (!f[4].empty() || !f[5].empty()) {
        RateSummary src;
        src.syscall = m.syscall;
        if (m.code) src.code = *m.code;
        src.r_max = parse_number<double>(f[4], "source_r_max");
        src.r_var = parse_number<double>(f[5], "source_r_var");
        m.source = src;
      }
      m.validate();
      models.push_back(std::move(m));
    } catch (const Error& e) {
      throw ParseError(source, static_cast<std::int64_t>(i + 1), e.what());
    }
  }
  return models;
}

void write_models_csv(const fs::path& path, std::span<const ErrorModel> models) {
  write_file_atomic(path, format_models_csv(models));
}

std::vector<ErrorModel> read_models_csv(const fs::path& path) {
  return parse_models_csv(read_file(path), path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open: {}", path.string(), std::strerror(errno)));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("{}: read failed", path.string()));
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("{}: cannot create directory: {}", path.parent_path().string(), ec.message()));
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("{}: cannot open for writing: {}", tmp.string(), std::strerror(errno)));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError(fmt::format("{}: write failed", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(fmt::format("{}: cannot move into place: {}", path.string(), ec.message()));
  }
}

}  // namespace sysfault
