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

#include "sysfault/synthesizer.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {

CaseLabel classify(const RateSummary& summary, const SynthesizerConfig& cfg) {
  if (summary.r_max < cfg.boundary) return CaseLabel::Sporadic;
  if (summary.r_var > cfg.variance_threshold) return CaseLabel::Fluctuating;
  return CaseLabel::Steady;
}

ErrorModel synthesize_one(const RateSummary& summary, const SynthesizerConfig& cfg) {
  ErrorModel model;
  model.syscall = summary.syscall;
  model.code = summary.code;
  model.case_label = classify(summary, cfg);
  switch (model.case_label) {
    case CaseLabel::Sporadic:
      model.rate = cfg.sporadic_rate;
      break;
    case CaseLabel::Fluctuating:
      model.rate = summary.r_max;
      break;
    case CaseLabel::Steady:
      model.rate = summary.r_max * cfg.factor < 1.0 ? summary.r_max * cfg.factor : 1.0;
      break;
    case CaseLabel::Random:
      break;
  }
  model.source = summary;
  return model;
}

std::vector<ErrorModel> synthesize_all(std::span<const RateSummary> summaries, const SynthesizerConfig& cfg) {
  cfg.validate();
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<ErrorModel> models;
  for (const auto& s : summaries) {
    if (!seen.emplace(s.syscall, s.code.symbol).second) {
      throw Error(fmt::format("duplicate summary row {}:{}", s.syscall, s.code.symbol));
    }
    if (s.is_success() || s.total_errors < 1) continue;
    s.validate();
    auto model = synthesize_one(s, cfg);
    model.validate();
    models.push_back(std::move(model));
  }
  std::sort(models.begin(), models.end(), [](const ErrorModel& a, const ErrorModel& b) {
    return std::tie(a.syscall, a.code->symbol) < std::tie(b.syscall, b.code->symbol);
  });
  return models;
}

ErrorModel random_baseline_model(std::string syscall) {
  if (syscall.empty()) throw Error("random baseline model needs a syscall name");
  ErrorModel model;
  model.syscall = std::move(syscall);
  model.rate = 0.5;
  model.case_label = CaseLabel::Random;
  return model;
}

}  // namespace sysfault
