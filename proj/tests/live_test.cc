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

#include <sys/wait.h>

#include <mutex>

#include <gtest/gtest.h>

#include "sysfault/error.h"
#include "sysfault/live.h"

namespace sysfault {
namespace {

// Skips when this kernel or container forbids ptrace.
std::unique_ptr<LiveTracer> attach_or_skip(LiveTarget target, LiveOptions options) {
  try {
    return LiveTracer::attach(std::move(target), std::move(options));
  } catch (const CapabilityError& e) {
    return nullptr;
  }
}

TEST(Live, SyscallNames) {
  EXPECT_EQ(syscall_name(-12345), "sys_-12345");
  EXPECT_NE(syscall_name(0), "sys_0");
}

TEST(Live, MonitorsSpawnedCommand) {
  std::mutex mu;
  std::vector<SyscallEvent> events;
  LiveOptions options;
  options.sink = [&](const SyscallEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
  };
  auto tracer = attach_or_skip({std::nullopt, {"/bin/cat", "/etc/passwd"}}, std::move(options));
  if (!tracer) GTEST_SKIP() << "ptrace unavailable";
  const auto status = tracer->join();
  ASSERT_TRUE(status.has_value());
  EXPECT_TRUE(WIFEXITED(*status));
  EXPECT_EQ(WEXITSTATUS(*status), 0);
  bool saw_read = false;
  for (const auto& e : events) {
    if (e.syscall == "read" && e.ret > 0) saw_read = true;
    EXPECT_GE(e.duration_ns, 0);
  }
  EXPECT_TRUE(saw_read);
  EXPECT_EQ(tracer->events_seen(), static_cast<std::int64_t>(events.size()));
}

TEST(Live, InjectsIntoSpawnedCommand) {
  ExperimentSpec spec;
  spec.model.syscall = "read";
  spec.model.code = errno_lookup("EIO");
  spec.model.rate = 1.0;
  spec.seed = 3;
  std::vector<InjectionDecision> decisions;
  LiveOptions options;
  options.injection = spec;
  options.on_decision = [&](const EventContext&, const InjectionDecision& d) { decisions.push_back(d); };
  // The dynamic loader's reads fail as well, so cat may die before its own read.
  auto tracer = attach_or_skip({std::nullopt, {"/bin/cat", "/etc/passwd"}}, std::move(options));
  if (!tracer) GTEST_SKIP() << "ptrace unavailable";
  const auto status = tracer->join();
  ASSERT_TRUE(status.has_value());
  EXPECT_TRUE(WIFEXITED(*status));
  EXPECT_NE(WEXITSTATUS(*status), 0);
  const auto stats = tracer->injection_stats();
  ASSERT_TRUE(stats.has_value());
  EXPECT_GT(stats->injected_count, 0);
  std::int64_t injected = 0;
  for (const auto& d : decisions) injected += d.inject;
  EXPECT_EQ(injected, stats->injected_count);
}

TEST(Live, MissingProcessIsADomainError) {
  try {
    LiveTracer::attach({999999999, {}}, {});
    FAIL() << "attach to a missing pid succeeded";
  } catch (const CapabilityError&) {
    GTEST_SKIP() << "ptrace unavailable";
  } catch (const Error&) {
    SUCCEED();
  }
}

}  // namespace
}  // namespace sysfault
