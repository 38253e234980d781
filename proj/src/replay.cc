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

#include "sysfault/replay.h"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"

namespace sysfault {
namespace fs = std::filesystem;

BackendCapabilities replay_capabilities() {
  return BackendCapabilities{true, true, BackendCapabilities::Clock::TraceTime};
}

namespace {

ReplayResult replay_into(const fs::path& trace_in, InjectionSession& session, const fs::path& trace_out,
                         const fs::path& decision_log, const ReplayOptions& options) {
  TraceReader reader(trace_in);
  std::ofstream out(trace_out, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open output trace: {}", trace_out.string(), std::strerror(errno)));
  DecisionLogWriter log(decision_log, session.spec());

  out << reader.header() << '\n';
  ReplayResult result;
  std::optional<std::int64_t> window_end;
  SyscallEvent e;
  std::string raw;
  while (reader.next(e, raw)) {
    ++result.events;
    if (!window_end && options.active_window_s) {
      window_end = e.timestamp_ns + static_cast<std::int64_t>(*options.active_window_s * 1e9);
    }
    const bool active = !window_end || e.timestamp_ns < *window_end;
    if (active) {
      ++result.events_in_window;
      EventContext ctx{e.timestamp_ns, e.pid, e.comm, e.syscall, e.ret};
      const auto d = session.decide(ctx);
      log.append(ctx, d);
      if (d.inject) {
        e.ret = *d.override_ret;
        raw = format_trace_line(e);
      }
    }
    out << raw;
    if (reader.last_line_terminated()) out << '\n';
  }
  out.flush();
  if (!out) throw IoError(fmt::format("{}: write failed", trace_out.string()));
  log.finish();
  result.stats = session.stats();
  return result;
}

}  // namespace

ReplayResult replay_run(const fs::path& trace_in, InjectionSession& session, const fs::path& trace_out,
                        const fs::path& decision_log, const ReplayOptions& options) {
  try {
    return replay_into(trace_in, session, trace_out, decision_log, options);
  } catch (...) {
    std::error_code ec;
    fs::remove(trace_out, ec);
    fs::remove(decision_log, ec);
    throw;
  }
}

}  // namespace sysfault
