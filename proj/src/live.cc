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

#include "sysfault/live.h"

#include <signal.h>
#include <sys/ptrace.h>
#include <sys/syscall.h>
#include <sys/uio.h>
#include <sys/user.h>
#include <sys/wait.h>
#include <unistd.h>
#include <elf.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <unordered_map>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {
namespace fs = std::filesystem;

namespace {

#if defined(__x86_64__) || defined(__aarch64__)
constexpr bool kArchSupported = true;
#else
constexpr bool kArchSupported = false;
#endif

const std::unordered_map<long, std::string>& syscall_names() {
  static const auto* names = [] {
    auto* m = new std::unordered_map<long, std::string>();
#define SYSFAULT_SYSCALL(name) m->emplace(SYS_##name, #name);
#include "syscall_table.inc"
#undef SYSFAULT_SYSCALL
    return m;
  }();
  return *names;
}

std::int64_t clock_ns(clockid_t id) {
  timespec ts{};
  clock_gettime(id, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

std::string read_comm(pid_t pid) {
  std::ifstream in(fmt::format("/proc/{}/comm", pid));
  std::string comm;
  std::getline(in, comm);
  return sanitize_comm(comm.empty() ? "unknown" : comm);
}

bool set_return_value(pid_t tid, std::int64_t value) {
#if defined(__x86_64__)
  user_regs_struct regs{};
  if (ptrace(PTRACE_GETREGS, tid, nullptr, &regs) != 0) return false;
  regs.rax = static_cast<unsigned long long>(value);
  return ptrace(PTRACE_SETREGS, tid, nullptr, &regs) == 0;
#elif defined(__aarch64__)
  user_regs_struct regs{};
  iovec iov{&regs, sizeof(regs)};
  if (ptrace(PTRACE_GETREGSET, tid, NT_PRSTATUS, &iov) != 0) return false;
  regs.regs[0] = static_cast<unsigned long long>(value);
  return ptrace(PTRACE_SETREGSET, tid, NT_PRSTATUS, &iov) == 0;
#else
  (void)tid;
  (void)value;
  return false;
#endif
}

}  // namespace

BackendCapabilities live_capabilities() {
  if (!kArchSupported) {
    throw CapabilityError("live backend needs ptrace register access, available on x86_64 and aarch64 only");
  }
  return BackendCapabilities{true, true, BackendCapabilities::Clock::WallTime};
}

std::string syscall_name(long number) {
  const auto& names = syscall_names();
  if (auto it = names.find(number); it != names.end()) return it->second;
  return fmt::format("sys_{}", number);
}

struct LiveTracer::Impl {
  struct Task {
    pid_t tgid = 0;
    bool in_syscall = false;
    long nr = -1;
    std::int64_t enter_mono_ns = 0;
    bool options_set = false;
    bool expect_initial_stop = false;
  };

  LiveOptions options;
  std::optional<InjectionSession> session;
  std::unordered_map<pid_t, Task> tasks;
  std::unordered_map<pid_t, std::string> comms;  // by tgid
  std::optional<int> exit_status;
  std::optional<SessionStats> final_stats;
  mutable std::mutex mu;
  std::optional<std::string> error;
  unsigned long ptrace_options = PTRACE_O_TRACESYSGOOD | PTRACE_O_TRACECLONE | PTRACE_O_TRACEFORK |
                                 PTRACE_O_TRACEVFORK | PTRACE_O_TRACEEXEC;

  const std::string& comm_of(pid_t tgid) {
    auto it = comms.find(tgid);
    if (it == comms.end()) it = comms.emplace(tgid, read_comm(tgid)).first;
    return it->second;
  }

  void set_error(std::string what) {
    std::lock_guard lock(mu);
    if (!error) error = std::move(what);
  }
};

std::unique_ptr<LiveTracer> LiveTracer::attach(LiveTarget target, LiveOptions options) {
  live_capabilities();
  if (!target.pid && target.command.empty()) throw UsageError("live target needs a pid or a command");
  if (target.pid && *target.pid <= 0) throw Error(fmt::format("invalid pid {}", *target.pid));

  std::unique_ptr<LiveTracer> tracer(new LiveTracer());
  tracer->impl_ = std::make_unique<Impl>();
  auto& impl = *tracer->impl_;
  impl.options = std::move(options);
  if (impl.options.injection) impl.session.emplace(*impl.options.injection);
  tracer->spawned_ = !target.pid.has_value();

  std::promise<pid_t> attached;
  auto attached_future = attached.get_future();
  LiveTracer* self = tracer.get();

  tracer->thread_ = std::thread([self, target = std::move(target), attached = std::move(attached)]() mutable {
    auto& impl = *self->impl_;
    auto resume = [](pid_t tid, int sig) { ptrace(PTRACE_SYSCALL, tid, nullptr, reinterpret_cast<void*>(static_cast<long>(sig))); };

    // Attach phase: everything that can fail synchronously reports through
    // the promise.
    pid_t root = 0;
    try {
      if (target.pid) {
        root = *target.pid;
        if (kill(root, 0) != 0 && errno == ESRCH) throw Error(fmt::format("no such process: {}", root));
        std::vector<pid_t> tids;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(fmt::format("/proc/{}/task", root), ec)) {
          tids.push_back(static_cast<pid_t>(std::stol(entry.path().filename().string())));
        }
        if (ec || tids.empty()) throw Error(fmt::format("no such process: {}", root));
        for (pid_t tid : tids) {
          if (ptrace(PTRACE_ATTACH, tid, nullptr, nullptr) != 0) {
            const int err = errno;
            if (err == ESRCH && tid != root) continue;  // thread exited meanwhile
            for (const auto& [t, _] : impl.tasks) ptrace(PTRACE_DETACH, t, nullptr, nullptr);
            if (err == ESRCH) throw Error(fmt::format("no such process: {}", root));
            throw CapabilityError(fmt::format("ptrace(PTRACE_ATTACH) on {} failed: {}; tracing needs CAP_SYS_PTRACE or "
                                              "a permissive kernel.yama.ptrace_scope",
                                              tid, std::strerror(err)));
          }
          impl.tasks[tid] = Impl::Task{root, false, -1, 0, false, true};
        }
      } else {
        std::vector<std::string> args = target.command;
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        const pid_t child = fork();
        if (child < 0) throw Error(fmt::format("fork failed: {}", std::strerror(errno)));
        if (child == 0) {
          if (ptrace(PTRACE_TRACEME, 0, nullptr, nullptr) != 0) _exit(126);
          raise(SIGSTOP);
          execvp(argv[0], argv.data());
          _exit(127);
        }
        root = child;
        int status = 0;
        if (waitpid(child, &status, __WALL) != child || !WIFSTOPPED(status)) {
          throw CapabilityError(fmt::format("tracing '{}' failed: child did not stop under ptrace", args[0]));
        }
        if (ptrace(PTRACE_SETOPTIONS, child, nullptr, impl.ptrace_options | PTRACE_O_EXITKILL) != 0) {
          const int err = errno;
          kill(child, SIGKILL);
          waitpid(child, &status, __WALL);
          throw CapabilityError(fmt::format("ptrace(PTRACE_SETOPTIONS) failed: {}", std::strerror(err)));
        }
        impl.tasks[child] = Impl::Task{child, false, -1, 0, true, false};
        resume(child, 0);
      }
      self->target_pid_ = root;
      attached.set_value(root);
    } catch (...) {
      self->finished_ = true;
      attached.set_exception(std::current_exception());
      return;
    }

    bool stopping = false;
    // Polls known tasks only: waitpid(-1) would also reap unrelated children
    // of this process, such as checker commands run during an experiment.
    auto handle = [&](pid_t tid, int status) {
      if (WIFEXITED(status) || WIFSIGNALED(status)) {
        impl.tasks.erase(tid);
        if (tid == root) impl.exit_status = status;
        return;
      }
      if (!WIFSTOPPED(status)) return;

      auto& task = impl.tasks[tid];
      if (!task.options_set) {
        ptrace(PTRACE_SETOPTIONS, tid, nullptr, impl.ptrace_options);
        task.options_set = true;
      }

      const int sig = WSTOPSIG(status);
      const int event = status >> 16;

      if (sig == (SIGTRAP | 0x80)) {
        __ptrace_syscall_info info{};
        if (ptrace(PTRACE_GET_SYSCALL_INFO, tid, sizeof(info), &info) <= 0) {
          impl.set_error(fmt::format("ptrace(PTRACE_GET_SYSCALL_INFO) failed: {} (needs Linux >= 5.3)",
                                     std::strerror(errno)));
          self->stop_requested_ = true;
          resume(tid, 0);
          return;
        }
        if (info.op == PTRACE_SYSCALL_INFO_ENTRY) {
          task.in_syscall = true;
          task.nr = static_cast<long>(info.entry.nr);
          task.enter_mono_ns = clock_ns(CLOCK_MONOTONIC);
        } else if (info.op == PTRACE_SYSCALL_INFO_EXIT && task.in_syscall) {
          task.in_syscall = false;
          SyscallEvent ev;
          ev.timestamp_ns = clock_ns(CLOCK_REALTIME);
          ev.pid = task.tgid;
          ev.comm = impl.comm_of(task.tgid);
          ev.syscall = syscall_name(task.nr);
          ev.ret = static_cast<std::int64_t>(info.exit.rval);
          ev.duration_ns = std::max<std::int64_t>(0, clock_ns(CLOCK_MONOTONIC) - task.enter_mono_ns);
          if (impl.session && !stopping) {
            EventContext ctx{ev.timestamp_ns, ev.pid, ev.comm, ev.syscall, ev.ret};
            auto decision = impl.session->decide(ctx);
            if (decision.inject) {
              if (set_return_value(tid, *decision.override_ret)) {
                ev.ret = *decision.override_ret;
              } else {
                impl.set_error(fmt::format("cannot override return value of tid {}: {}", tid, std::strerror(errno)));
              }
            }
            if (impl.options.on_decision) impl.options.on_decision(ctx, decision);
          }
          ++self->events_seen_;
          if (impl.options.sink) impl.options.sink(ev);
        }
        resume(tid, 0);
        return;
      }

      if (event != 0) {
        if (event == PTRACE_EVENT_CLONE || event == PTRACE_EVENT_FORK || event == PTRACE_EVENT_VFORK) {
          unsigned long child = 0;
          ptrace(PTRACE_GETEVENTMSG, tid, nullptr, &child);
          auto [cit, fresh] = impl.tasks.try_emplace(static_cast<pid_t>(child));
          if (fresh) {
            cit->second.tgid = event == PTRACE_EVENT_CLONE ? task.tgid : static_cast<pid_t>(child);
            cit->second.expect_initial_stop = true;
            if (stopping) syscall(SYS_tgkill, cit->second.tgid, child, SIGSTOP);
          }
        } else if (event == PTRACE_EVENT_EXEC) {
          task.in_syscall = false;
          impl.comms.erase(task.tgid);
        }
        resume(tid, 0);
        return;
      }

      if (sig == SIGSTOP) {
        if (stopping) {
          ptrace(PTRACE_DETACH, tid, nullptr, nullptr);
          impl.tasks.erase(tid);
          return;
        }
        // Initial stops of newly attached tasks, and group-stop reports,
        // are swallowed.
        task.expect_initial_stop = false;
        resume(tid, 0);
        return;
      }
      resume(tid, sig);
    };

    std::vector<pid_t> snapshot;
    while (!impl.tasks.empty()) {
      if (self->stop_requested_.load() && !stopping) {
        stopping = true;
        for (const auto& [tid, task] : impl.tasks) syscall(SYS_tgkill, task.tgid, tid, SIGSTOP);
      }
      snapshot.clear();
      for (const auto& [tid, _] : impl.tasks) snapshot.push_back(tid);
      bool progressed = false;
      for (pid_t tid : snapshot) {
        int status = 0;
        const pid_t r = waitpid(tid, &status, __WALL | WNOHANG);
        if (r == 0) continue;
        if (r < 0) {
          if (errno == ECHILD) impl.tasks.erase(tid);
          continue;
        }
        progressed = true;
        handle(tid, status);
      }
      if (!progressed) std::this_thread::sleep_for(std::chrono::microseconds(100));
    }

    if (impl.session) {
      impl.session->close();
      impl.final_stats = impl.session->stats();
    }
    self->finished_ = true;
  });

  try {
    attached_future.get();
  } catch (...) {
    tracer->thread_.join();
    throw;
  }
  return tracer;
}

LiveTracer::~LiveTracer() {
  if (thread_.joinable()) {
    detach();
    thread_.join();
  }
  if (spawned_ && target_pid_ > 0 && impl_ && !impl_->exit_status) {
    // A detached spawned child is left running; reap it if it already exited.
    int status = 0;
    waitpid(target_pid_, &status, WNOHANG);
  }
}

void LiveTracer::detach() { stop_requested_ = true; }

std::optional<int> LiveTracer::join() {
  if (thread_.joinable()) thread_.join();
  return impl_->exit_status;
}

std::optional<int> LiveTracer::wait_spawned_exit() {
  join();
  if (impl_->exit_status) return impl_->exit_status;
  if (!spawned_) return std::nullopt;
  int status = 0;
  if (waitpid(target_pid_, &status, 0) == target_pid_) {
    impl_->exit_status = status;
    return status;
  }
  return std::nullopt;
}

std::optional<SessionStats> LiveTracer::injection_stats() const {
  if (!finished_) return std::nullopt;
  return impl_->final_stats;
}

std::optional<std::string> LiveTracer::error() const {
  std::lock_guard lock(impl_->mu);
  return impl_->error;
}

}  // namespace sysfault
