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

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sysfault {

struct CommandResult {
  int exit_code = -1;     // valid when exited normally
  int term_signal = 0;    // non-zero when killed by a signal
  bool timed_out = false;
  std::string output;     // captured stdout

  bool exited_normally() const { return !timed_out && term_signal == 0 && exit_code >= 0; }
  bool ok() const { return exited_normally() && exit_code == 0; }
};

using Environment = std::vector<std::pair<std::string, std::string>>;

// Runs `command` through /bin/sh -c with extra environment variables. The
// child gets its own process group, which is killed on timeout. A non-empty
// `cwd` is the child's working directory.
CommandResult run_command(const std::string& command, const Environment& env, std::chrono::milliseconds timeout,
                          const std::filesystem::path& cwd = {});

}  // namespace sysfault
