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

#include "sysfault/store.h"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

#include <fmt/format.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"

namespace sysfault {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSealTag = "#SEAL";

std::uint32_t crc_of(std::string_view data, std::uint32_t seed = 0) {
  return static_cast<std::uint32_t>(
      ::crc32(seed, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

template <typename T>
T num(std::string_view field) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(fmt::format("invalid number '{}' in store record", field));
  }
  return value;
}

std::string frame(std::string_view payload) {
  return fmt::format("{:08x}|{}\n", crc_of(payload), payload);
}

std::int64_t payload_ts(std::string_view payload) {
  auto f = split_csv(payload);
  if (f.size() < 2) throw Error("store record without timestamp");
  return num<std::int64_t>(f[1]);
}

std::string encode(const IntervalRecord& r) {
  return fmt::format("I,{},{},{:.17g},{},{},{},{},{:.17g}", r.timestamp_ns, r.interval_index, r.interval_len_s,
                     r.syscall, r.code.symbol, r.count, r.total, r.rate);
}

IntervalRecord decode_interval(std::string_view payload) {
  auto f = split_csv(payload);
  if (f.size() != 9 || f[0] != "I") throw Error(fmt::format("malformed interval record '{}'", payload));
  IntervalRecord r;
  r.timestamp_ns = num<std::int64_t>(f[1]);
  r.interval_index = num<std::int64_t>(f[2]);
  r.interval_len_s = num<double>(f[3]);
  r.syscall = std::string(f[4]);
  r.code = parse_return_class(f[5]);
  r.count = num<std::int64_t>(f[6]);
  r.total = num<std::int64_t>(f[7]);
  r.rate = num<double>(f[8]);
  return r;
}

std::string encode(const OutcomeRecord& r) {
  return fmt::format("O,{},{},{},{:.17g},{},{},{},{},{},{}", r.timestamp_ns, r.syscall, r.errno_symbol, r.rate,
                     r.injected, to_string(r.status), to_string(r.classification), r.crash ? 1 : 0,
                     r.state_corrupted ? 1 : 0, r.bac);
}

OutcomeRecord decode_outcome(std::string_view payload) {
  auto f = split_csv(payload);
  if (f.size() != 11 || f[0] != "O") throw Error(fmt::format("malformed outcome record '{}'", payload));
  OutcomeRecord r;
  r.timestamp_ns = num<std::int64_t>(f[1]);
  r.syscall = std::string(f[2]);
  r.errno_symbol = std::string(f[3]);
  r.rate = num<double>(f[4]);
  r.injected = num<std::int64_t>(f[5]);
  r.status = parse_experiment_status(f[6]);
  r.classification = parse_classification(f[7]);
  r.crash = f[8] == "1";
  r.state_corrupted = f[9] == "1";
  r.bac = std::string(f[10]);
  return r;
}

struct SegmentScan {
  StoreSegment info;
  std::vector<std::string> payloads;
  std::int64_t valid_bytes = 0;
  std::int64_t file_bytes = 0;
};

// Reads committed lines up to the first torn or corrupt one.
SegmentScan scan_segment(const fs::path& path) {
  SegmentScan scan;
  scan.info.path = path;
  const std::string data = read_file(path);
  scan.file_bytes = static_cast<std::int64_t>(data.size());
  std::size_t pos = 0;
  std::uint32_t running = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string_view line(data.data() + pos, nl - pos);
    if (scan.info.sealed || line.size() < 9 || line[8] != '|') break;
    std::uint32_t crc = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + 8, crc, 16);
    if (ec != std::errc{} || ptr != line.data() + 8) break;
    const auto payload = line.substr(9);
    if (crc_of(payload) != crc) break;

    if (payload.starts_with(kSealTag)) {
      auto f = split_csv(payload);
      if (f.size() != 5) break;
      try {
        if (num<std::int64_t>(f[1]) != scan.info.rows || num<std::uint32_t>(f[4]) != running) break;
      } catch (const Error&) {
        break;
      }
      scan.info.sealed = true;
    } else {
      std::int64_t ts = 0;
      try {
        ts = payload_ts(payload);
      } catch (const Error&) {
        break;
      }
      if (scan.info.rows == 0) scan.info.first_ts = ts;
      scan.info.first_ts = std::min(scan.info.first_ts, ts);
      scan.info.last_ts = std::max(scan.info.last_ts, ts);
      if (scan.info.rows == 0) scan.info.last_ts = ts;
      ++scan.info.rows;
      running = crc_of(std::string_view(data.data() + pos, nl - pos + 1), running);
      scan.payloads.emplace_back(payload);
    }
    pos = nl + 1;
    scan.valid_bytes = static_cast<std::int64_t>(pos);
  }
  scan.info.checksum = running;
  return scan;
}

}  // namespace

class MetricsStore::Log {
 public:
  Log(fs::path dir, StoreOptions options) : dir_(std::move(dir)), options_(options) {
    if (options_.segment_rows < 1) throw ConfigError("segment_rows must be at least 1");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError(fmt::format("{}: cannot create store directory: {}", dir_.string(), ec.message()));

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const auto name = entry.path().filename().string();
      if (name.starts_with("seg-") && name.ends_with(".log")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
      auto scan = scan_segment(files[i]);
      const bool newest = i + 1 == files.size();
      if (!newest && (!scan.info.sealed || scan.valid_bytes != scan.file_bytes)) {
        throw Error(fmt::format("{}: sealed segment is corrupt", files[i].string()));
      }
      if (newest && scan.valid_bytes != scan.file_bytes) {
        dropped_ = scan.file_bytes - scan.valid_bytes;
        if (truncate(files[i].c_str(), scan.valid_bytes) != 0) {
          throw IoError(fmt::format("{}: cannot truncate torn tail: {}", files[i].string(), std::strerror(errno)));
        }
      }
      segments_.push_back(scan.info);
    }
    next_index_ = files.empty() ? 1 : index_of(files.back()) + 1;
    // A crash between the last record and its seal leaves a full open segment.
    if (!segments_.empty() && !segments_.back().sealed && segments_.back().rows >= options_.segment_rows) {
      open_active();
      seal();
    }
  }

  ~Log() {
    if (fd_ >= 0) close(fd_);
  }

  void append(std::string_view payload, std::int64_t ts) {
    if (segments_.empty() || segments_.back().sealed) start_segment();
    if (fd_ < 0) open_active();
    const auto line = frame(payload);
    write_all(line);
    auto& seg = segments_.back();
    if (seg.rows == 0) {
      seg.first_ts = seg.last_ts = ts;
    } else {
      seg.first_ts = std::min(seg.first_ts, ts);
      seg.last_ts = std::max(seg.last_ts, ts);
    }
    ++seg.rows;
    seg.checksum = crc_of(line, seg.checksum);
    if (seg.rows >= options_.segment_rows) seal();
  }

  void flush() {
    if (fd_ >= 0 && options_.sync_on_flush && fdatasync(fd_) != 0) {
      throw IoError(fmt::format("{}: fdatasync failed: {}", segments_.back().path.string(), std::strerror(errno)));
    }
  }

  template <typename Fn>
  void scan(Fn&& fn) const {
    for (const auto& seg : segments_) {
      for (const auto& payload : scan_segment(seg.path).payloads) fn(payload);
    }
  }

  const std::vector<StoreSegment>& segments() const { return segments_; }
  std::int64_t dropped() const { return dropped_; }

 private:
  static std::int64_t index_of(const fs::path& p) {
    const auto name = p.filename().string();
    return num<std::int64_t>(std::string_view(name).substr(4, name.size() - 8));
  }

  void start_segment() {
    if (fd_ >= 0) {
      close(fd_);
      fd_ = -1;
    }
    StoreSegment seg;
    seg.path = dir_ / fmt::format("seg-{:08d}.log", next_index_++);
    segments_.push_back(seg);
    open_active();
  }

  void open_active() {
    const auto& path = segments_.back().path;
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(fmt::format("{}: cannot open segment: {}", path.string(), std::strerror(errno)));
  }

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::write(fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(fmt::format("{}: write failed: {}", segments_.back().path.string(), std::strerror(errno)));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  void seal() {
    auto& seg = segments_.back();
    write_all(frame(fmt::format("{},{},{},{},{}", kSealTag, seg.rows, seg.first_ts, seg.last_ts, seg.checksum)));
    flush();
    seg.sealed = true;
    close(fd_);
    fd_ = -1;
  }

  fs::path dir_;
  StoreOptions options_;
  std::vector<StoreSegment> segments_;
  std::int64_t next_index_ = 1;
  std::int64_t dropped_ = 0;
  int fd_ = -1;
};

std::vector<IntervalRecord> to_records(const IntervalStats& stats, std::int64_t clock_origin_ns) {
  const auto start =
      clock_origin_ns + static_cast<std::int64_t>(std::llround(stats.interval_len_s * 1e9)) * stats.interval_index;
  std::vector<IntervalRecord> out;
  auto make = [&](const ErrnoCode& code, std::int64_t count) {
    IntervalRecord r;
    r.timestamp_ns = start;
    r.interval_index = stats.interval_index;
    r.interval_len_s = stats.interval_len_s;
    r.syscall = stats.syscall;
    r.code = code;
    r.count = count;
    r.total = stats.total_count;
    r.rate = stats.total_count ? static_cast<double>(count) / static_cast<double>(stats.total_count) : 0.0;
    return r;
  };
  for (const auto& [code, n] : stats.error_counts) out.push_back(make(code, n));
  out.push_back(make(success_code(), stats.success_count()));
  return out;
}

OutcomeRecord to_record(const ExperimentOutcome& o, std::int64_t timestamp_ns) {
  OutcomeRecord r;
  r.timestamp_ns = timestamp_ns;
  r.syscall = o.spec.model.syscall;
  r.errno_symbol = o.spec.model.errno_symbol();
  r.rate = o.spec.model.rate;
  r.injected = o.injected_count;
  r.status = o.status;
  r.classification = o.classification;
  r.crash = o.crash_observed;
  r.state_corrupted = o.state_corrupted;
  for (const auto& [name, value] : o.bac_results) {
    if (!r.bac.empty()) r.bac += ';';
    r.bac += fmt::format("{}={:.17g}", name, value);
  }
  return r;
}

std::vector<RateSummary> summaries_from_records(std::span<const IntervalRecord> records, SeriesMode mode) {
  std::map<std::string, SyscallCounts> by_syscall;
  for (const auto& r : records) {
    auto& counts = by_syscall[r.syscall];
    counts.totals[r.interval_index] = r.total;
    if (!is_success(r.code)) counts.errors[r.code][r.interval_index] = r.count;
  }
  std::vector<RateSummary> out;
  for (const auto& [syscall, counts] : by_syscall) {
    for (const auto& series : build_series(syscall, counts, mode)) {
      if (!series.points.empty()) out.push_back(summarize(series));
    }
  }
  return out;
}

MetricsStore::MetricsStore(const fs::path& dir, StoreOptions options)
    : dir_(dir),
      intervals_(std::make_unique<Log>(dir / "intervals", options)),
      outcomes_(std::make_unique<Log>(dir / "outcomes", options)) {
  intervals_->scan([&](std::string_view payload) {
    auto r = decode_interval(payload);
    auto& last = last_ts_.try_emplace(r.syscall + ":" + r.code.symbol, r.timestamp_ns).first->second;
    last = std::max(last, r.timestamp_ns);
  });
  outcomes_->scan([&](std::string_view payload) {
    auto& last = last_ts_.try_emplace("#outcome", payload_ts(payload)).first->second;
    last = std::max(last, payload_ts(payload));
  });
}

MetricsStore::~MetricsStore() = default;
MetricsStore::MetricsStore(MetricsStore&&) noexcept = default;
MetricsStore& MetricsStore::operator=(MetricsStore&&) noexcept = default;

void MetricsStore::append(const IntervalRecord& record) {
  const auto key = record.syscall + ":" + record.code.symbol;
  if (auto it = last_ts_.find(key); it != last_ts_.end() && record.timestamp_ns < it->second) {
    throw Error(fmt::format("out-of-order append for {}: {} < {}", key, record.timestamp_ns, it->second));
  }
  intervals_->append(encode(record), record.timestamp_ns);
  last_ts_[key] = record.timestamp_ns;
}

void MetricsStore::append(const OutcomeRecord& record) {
  if (auto it = last_ts_.find("#outcome"); it != last_ts_.end() && record.timestamp_ns < it->second) {
    throw Error(fmt::format("out-of-order outcome append: {} < {}", record.timestamp_ns, it->second));
  }
  outcomes_->append(encode(record), record.timestamp_ns);
  last_ts_["#outcome"] = record.timestamp_ns;
}

void MetricsStore::append(const IntervalStats& stats, std::int64_t clock_origin_ns) {
  for (const auto& r : to_records(stats, clock_origin_ns)) append(r);
}

void MetricsStore::flush() {
  intervals_->flush();
  outcomes_->flush();
}

std::vector<IntervalRecord> MetricsStore::query(const std::optional<std::string>& syscall,
                                                const std::optional<std::string>& errno_symbol, std::int64_t t_from,
                                                std::int64_t t_to) const {
  std::vector<IntervalRecord> out;
  if (t_from > t_to) return out;
  intervals_->scan([&](std::string_view payload) {
    auto r = decode_interval(payload);
    if (syscall && r.syscall != *syscall) return;
    if (errno_symbol && r.code.symbol != *errno_symbol) return;
    if (r.timestamp_ns < t_from || r.timestamp_ns > t_to) return;
    out.push_back(std::move(r));
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const IntervalRecord& a, const IntervalRecord& b) { return a.timestamp_ns < b.timestamp_ns; });
  return out;
}

std::vector<OutcomeRecord> MetricsStore::query_outcomes(std::int64_t t_from, std::int64_t t_to) const {
  std::vector<OutcomeRecord> out;
  if (t_from > t_to) return out;
  outcomes_->scan([&](std::string_view payload) {
    auto r = decode_outcome(payload);
    if (r.timestamp_ns < t_from || r.timestamp_ns > t_to) return;
    out.push_back(std::move(r));
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const OutcomeRecord& a, const OutcomeRecord& b) { return a.timestamp_ns < b.timestamp_ns; });
  return out;
}

std::vector<StoreSegment> MetricsStore::interval_segments() const { return intervals_->segments(); }
std::vector<StoreSegment> MetricsStore::outcome_segments() const { return outcomes_->segments(); }

std::int64_t MetricsStore::recovered_bytes_dropped() const { return intervals_->dropped() + outcomes_->dropped(); }

}  // namespace sysfault
