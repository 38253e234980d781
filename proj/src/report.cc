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

#include "sysfault/report.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/synthesizer.h"

namespace sysfault {
namespace fs = std::filesystem;

namespace {

enum class Align { Left, Right };

std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string render_text_table(const std::vector<std::string>& header, const std::vector<Align>& align,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto widen = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  };
  widen(header);
  for (const auto& r : rows) widen(r);

  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string pad(width[i] - display_width(row[i]), ' ');
      if (i > 0) out += "  ";
      out += align[i] == Align::Left ? row[i] + pad : pad + row[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + '\n';
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string rate5(double v) { return fmt::format("{:.5f}", v); }

std::string metric_cell(double v) { return v == 0.0 ? "-" : fmt::format("{:.3g}%", v); }

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text") return ReportFormat::Text;
  if (text == "csv") return ReportFormat::Csv;
  throw UsageError(fmt::format("unknown report format '{}' (want text|csv)", text));
}

std::string abbreviate_count(std::int64_t n) {
  if (n < 0) return "-" + abbreviate_count(-n);
  if (n < 1000) return std::to_string(n);
  static constexpr std::pair<double, char> kUnits[] = {{1e3, 'K'}, {1e6, 'M'}, {1e9, 'G'}, {1e12, 'T'}};
  std::size_t u = n < 1000000 ? 0 : n < 1000000000 ? 1 : n < 1000000000000 ? 2 : 3;
  std::string digits;
  while (true) {
    const double v = static_cast<double>(n) / kUnits[u].first;
    const int before = v < 10 ? 1 : v < 100 ? 2 : 3;
    digits = fmt::format("{:.{}f}", v, 3 - before);
    // 999.6K rounds to "1000"; promote to the next unit.
    if (std::stod(digits) >= 1000.0 && u + 1 < std::size(kUnits)) {
      ++u;
      continue;
    }
    break;
  }
  if (digits.find('.') != std::string::npos) {
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
  }
  return digits + kUnits[u].second;
}

std::string format_percent(std::int64_t part, std::int64_t whole) {
  if (whole <= 0) return "0.00%";
  const auto s = fmt::format("{:.2f}", 100.0 * static_cast<double>(part) / static_cast<double>(whole));
  if (part > 0 && s == "0.00") return "<0.01%";
  return s + "%";
}

std::string format_variance(double v) { return v < 1e-5 ? "<1e-5" : rate5(v); }

std::string errno_label(std::string_view symbol, bool abbreviate) {
  if (!abbreviate || symbol.size() <= 3) return std::string(symbol);
  return fmt::format("{}.", symbol.substr(0, 3));
}

std::string_view glyph(Classification c) {
  switch (c) {
    case Classification::Resilient:
      return "✓";
    case Classification::Degraded:
      return "-";
    case Classification::Severe:
      return "!";
  }
  return "?";
}

std::string render_natural_errors(std::span<const RateSummary> input, ReportFormat format,
                                  const NaturalReportOptions& options) {
  std::vector<const RateSummary*> rows;
  for (const auto& r : input) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const RateSummary* a, const RateSummary* b) {
    return std::make_tuple(a->syscall, a->is_success(), a->code.symbol) <
           std::make_tuple(b->syscall, b->is_success(), b->code.symbol);
  });

  if (format == ReportFormat::Csv) {
    std::string out = "syscall,errno,count,total_calls,pct,r_min,r_mean,r_max,r_var,case\n";
    for (const auto* r : rows) {
      const auto pct = r->total_calls ? 100.0 * static_cast<double>(r->total_errors) / r->total_calls : 0.0;
      if (r->is_success()) {
        out += fmt::format("{},{},{},{},{:.2f},,,,,\n", r->syscall, r->code.symbol, r->total_errors, r->total_calls,
                           pct);
      } else {
        out += fmt::format("{},{},{},{},{:.2f},{},{},{},{},{}\n", r->syscall, r->code.symbol, r->total_errors,
                           r->total_calls, pct, rate5(r->r_min), rate5(r->r_mean), rate5(r->r_max), rate5(r->r_var),
                           case_number(classify(*r, options.synthesizer)));
      }
    }
    return out;
  }

  std::vector<std::vector<std::string>> table;
  for (const auto* r : rows) {
    std::vector<std::string> row{
        fmt::format("{}:{}", r->syscall, errno_label(r->code.symbol, options.abbreviate)),
        fmt::format("{} ({})", abbreviate_count(r->total_errors), format_percent(r->total_errors, r->total_calls)),
        "",
        "",
    };
    if (!r->is_success()) {
      row[2] = fmt::format("{}, {}, {}, {},", rate5(r->r_min), rate5(r->r_mean), rate5(r->r_max),
                           format_variance(r->r_var));
      row[3] = std::to_string(case_number(classify(*r, options.synthesizer)));
    }
    table.push_back(std::move(row));
  }
  return render_text_table({"Syscall:Errno", "Count", "Error rate (min, mean, max, var)", "Case"},
                           {Align::Left, Align::Right, Align::Left, Align::Right}, table);
}

std::string render_campaign(const std::vector<OutcomeRow>& outcomes, const std::vector<std::string>& metric_names,
                            ReportFormat format) {
  std::vector<std::string> metrics = metric_names;
  for (const auto& row : outcomes) {
    for (const auto& [name, _] : row.outcome.bac_results) {
      if (std::find(metrics.begin(), metrics.end(), name) == metrics.end()) metrics.push_back(name);
    }
  }
  auto value_of = [](const ExperimentOutcome& o, const std::string& name) -> std::optional<double> {
    for (const auto& [n, v] : o.bac_results) {
      if (n == name) return v;
    }
    return std::nullopt;
  };

  if (format == ReportFormat::Csv) {
    std::string out = "index,target,errno,rate,injected";
    for (const auto& m : metrics) out += "," + m;
    out += ",co,status,classification\n";
    for (const auto& [index, o] : outcomes) {
      out += fmt::format("{},{},{},{},{}", index, o.spec.model.syscall, o.spec.model.errno_symbol(), o.spec.model.rate,
                         o.injected_count);
      for (const auto& m : metrics) {
        const auto v = value_of(o, m);
        out += v ? fmt::format(",{}", *v) : std::string(",");
      }
      out += fmt::format(",{},{},{}\n", o.state_corrupted ? "T" : "F", to_string(o.status),
                         o.status == ExperimentStatus::Completed ? to_string(o.classification) : "");
    }
    return out;
  }

  std::vector<std::string> header{"Target:Error", "Rate", "Inj."};
  header.insert(header.end(), metrics.begin(), metrics.end());
  header.push_back("CO");
  header.push_back("");
  std::vector<Align> align(header.size(), Align::Right);
  align[0] = Align::Left;

  std::vector<std::vector<std::string>> table;
  std::int64_t no_injection = 0;
  std::int64_t inconclusive = 0;
  for (const auto& [index, o] : outcomes) {
    if (o.status == ExperimentStatus::NoInjection) {
      ++no_injection;
      continue;
    }
    if (o.status == ExperimentStatus::Inconclusive) {
      ++inconclusive;
      continue;
    }
    std::vector<std::string> row{fmt::format("{}:{}", o.spec.model.syscall, o.spec.model.errno_symbol()),
                                 fmt::format("{}", o.spec.model.rate), abbreviate_count(o.injected_count)};
    for (const auto& m : metrics) {
      const auto v = value_of(o, m);
      row.push_back(v ? metric_cell(*v) : "n/a");
    }
    row.push_back(o.state_corrupted ? "T" : "F");
    row.emplace_back(glyph(o.classification));
    table.push_back(std::move(row));
  }
  std::string out = render_text_table(header, align, table);
  out += fmt::format("\n{} experiment(s) omitted: no error injected.\n", no_injection);
  if (inconclusive > 0) out += fmt::format("{} experiment(s) omitted: inconclusive (see journal.log).\n", inconclusive);
  out += "✓ resilient, - degraded during injection, ! crash or state corruption.\n";
  return out;
}

std::vector<fs::path> emit_plot_series(std::span<const IntervalRecord> records, const fs::path& out_dir) {
  std::map<std::string, std::string> files;
  for (const auto& r : records) {
    auto& body = files[fmt::format("{}-{}.dat", r.syscall, r.code.symbol)];
    body += fmt::format("{} {}\n", r.timestamp_ns, r.rate);
  }
  std::vector<fs::path> written;
  for (const auto& [name, body] : files) {
    written.push_back(out_dir / name);
    write_file_atomic(written.back(), body);
  }
  return written;
}

PlotSeries read_plot_series(const fs::path& path) {
  PlotSeries out;
  const auto text = read_file(path);
  std::int64_t line_no = 0;
  for (auto line : split_csv(text, '\n')) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto space = line.find(' ');
    if (space == std::string_view::npos) throw ParseError(path.string(), line_no, "expected '<timestamp_ns> <rate>'");
    std::int64_t ts = 0;
    double rate = 0.0;
    const auto a = line.substr(0, space);
    const auto b = line.substr(space + 1);
    auto r1 = std::from_chars(a.data(), a.data() + a.size(), ts);
    auto r2 = std::from_chars(b.data(), b.data() + b.size(), rate);
    if (r1.ec != std::errc{} || r1.ptr != a.data() + a.size() || r2.ec != std::errc{} ||
        r2.ptr != b.data() + b.size()) {
      throw ParseError(path.string(), line_no, fmt::format("malformed plot line '{}'", line));
    }
    out.emplace_back(ts, rate);
  }
  return out;
}

}  // namespace sysfault
