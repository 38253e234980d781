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

#include <sys/types.h>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sysfault/domain.h"
#include "sysfault/injector.h"
#include "sysfault/replay.h"

namespace sysfault {

// Throws CapabilityError when this build or platform cannot trace syscalls.
BackendCapabilities live_capabilities();

// Symbolic name for a native syscall number, or "sys_<n>" when unknown.
std::string syscall_name(long number);

// Either an existing process (all of its threads are attached) or a command
// launched under tracing.
struct LiveTarget {
  std::optional<pid_t> pid;
  std::vector<std::string> command;
};

struct LiveOptions {
  // Monitor-only when unset.
  std::optional<ExperimentSpec> injection;
  // Invoked on the tracer thread for every completed syscall, with the return
  // value the application observes.
  std::function<void(const SyscallEvent&)> sink;
  std::function<void(const EventContext&, const InjectionDecision&)> on_decision;
};

// Traces a target with ptrace, reporting each syscall exit and, when an
// injection spec is given, overriding return values per the injector. All
// ptrace calls and injector decisions run on one tracer thread, so events
// reach the sink in the order the tracer observed them.
class LiveTracer {
 public:
  // Attaches synchronously; attach failures are rethrown here. A dead pid
  // gives sysfault::Error, missing permissions give CapabilityError.
  static std::unique_ptr<LiveTracer> attach(LiveTarget target, LiveOptions options);

  ~LiveTracer();
  LiveTracer(const LiveTracer&) = delete;
  LiveTracer& operator=(const LiveTracer&) = delete;

  pid_t target_pid() const { return target_pid_; }
  bool spawned() const { return spawned_; }

  // Stops tracing every thread and lets the target run untouched.
  void detach();
  // True once every traced task has exited or been detached.
  bool finished() const { return finished_.load(); }
  // Blocks until the tracer stops (target exit or detach). Returns the wait
  // status of a spawned target if it exited while traced.
  std::optional<int> join();
  // For a spawned target that was detached: reaps it and returns its status.
  std::optional<int> wait_spawned_exit();

  std::int64_t events_seen() const { return events_seen_.load(); }
  // Valid after join().
  std::optional<SessionStats> injection_stats() const;
  // Failure raised on the tracer thread after attach, if any.
  std::optional<std::string> error() const;

 private:
  struct Impl;
  LiveTracer() = default;

  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  pid_t target_pid_ = 0;
  bool spawned_ = false;
  std::atomic<bool> stop_requested_{false};
  std::atomic<bool> finished_{false};
  std::atomic<std::int64_t> events_seen_{0};
};

}  // namespace sysfault
