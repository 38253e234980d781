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

#include <span>
#include <string>
#include <vector>

#include "sysfault/domain.h"

namespace sysfault {

// Sporadic when r_max < boundary; otherwise Fluctuating when the variance
// exceeds the threshold; otherwise Steady. Only r_max and r_var are read.
CaseLabel classify(const RateSummary& summary, const SynthesizerConfig& cfg);

// Sporadic -> sporadic_rate, Fluctuating -> r_max,
// Steady -> min(r_max * factor, 1).
ErrorModel synthesize_one(const RateSummary& summary, const SynthesizerConfig& cfg);

// One model per error row with at least one observed error; SUCCESS rows are
// skipped. Output is sorted by syscall then errno symbol. Throws on
// duplicate (syscall, errno) rows.
std::vector<ErrorModel> synthesize_all(std::span<const RateSummary> summaries, const SynthesizerConfig& cfg);

// Baseline that fails half of the invocations with an errno drawn uniformly
// from the whole table at each injection.
ErrorModel random_baseline_model(std::string syscall);

}  // namespace sysfault
