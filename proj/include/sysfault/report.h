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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sysfault/domain.h"
#include "sysfault/orchestrator.h"
#include "sysfault/store.h"

namespace sysfault {

enum class ReportFormat { Text, Csv };
ReportFormat parse_report_format(std::string_view text);

// 370 -> "370", 21000 -> "21K", 2064 -> "2.06K", 73120000 -> "73.1M":
// three significant digits, trailing zeros dropped.
std::string abbreviate_count(std::int64_t n);
// Two decimals; "<0.01%" for a non-zero share that would print as 0.00%.
std::string format_percent(std::int64_t part, std::int64_t whole);
// Five decimals; "<1e-5" below 1e-5.
std::string format_variance(double v);
// "ETIMEDOUT" -> "ETI." when abbreviating.
std::string errno_label(std::string_view symbol, bool abbreviate);
// Resilient "✓", Degraded "-", Severe "!".
std::string_view glyph(Classification c);

struct NaturalReportOptions {
  SynthesizerConfig synthesizer;
  bool abbreviate = false;
};

// One row per (syscall, errno) with count and share of the syscall's calls;
// error rows add the rate summary and the synthesis case. Rows are grouped
// by syscall with errors before SUCCESS.
std::string render_natural_errors(std::span<const RateSummary> rows, ReportFormat format,
                                  const NaturalReportOptions& options = {});

// Metric columns follow `metric_names`, then any other metric seen in the
// outcomes. Only completed experiments are listed; the footnote counts
// no-injection and inconclusive runs.
std::string render_campaign(const std::vector<OutcomeRow>& outcomes, const std::vector<std::string>& metric_names,
                            ReportFormat format);

using PlotSeries = std::vector<std::pair<std::int64_t, double>>;  // (timestamp_ns, rate)

// Writes "<syscall>-<errno>.dat" per stream, each line "<timestamp_ns> <rate>".
// Returns the files written, sorted by name.
std::vector<std::filesystem::path> emit_plot_series(std::span<const IntervalRecord> records,
                                                    const std::filesystem::path& out_dir);
PlotSeries read_plot_series(const std::filesystem::path& path);

}  // namespace sysfault
