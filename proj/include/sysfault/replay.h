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
#include <optional>

#include "sysfault/injector.h"

namespace sysfault {

struct BackendCapabilities {
  enum class Clock { TraceTime, WallTime };

  bool can_override = false;
  bool can_filter_pid = false;
  Clock clock = Clock::TraceTime;
};

BackendCapabilities replay_capabilities();

struct ReplayOptions {
  // Events at or after first_timestamp + window are copied through without
  // consulting the injector. Unset means the whole trace.
  std::optional<double> active_window_s;
};

struct ReplayResult {
  std::int64_t events = 0;
  std::int64_t events_in_window = 0;
  SessionStats stats;
};

// Feeds every trace event to the session in file order and writes the output
// trace (input lines copied byte for byte, except injected events whose ret
// is replaced) and the decision log. On error both outputs are removed.
ReplayResult replay_run(const std::filesystem::path& trace_in, InjectionSession& session,
                        const std::filesystem::path& trace_out, const std::filesystem::path& decision_log,
                        const ReplayOptions& options = {});

}  // namespace sysfault
