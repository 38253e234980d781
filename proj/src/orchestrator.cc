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

#include "sysfault/orchestrator.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/injector.h"
#include "sysfault/live.h"
#include "sysfault/replay.h"
#include "sysfault/store.h"
#include "sysfault/subprocess.h"

namespace sysfault {
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool valid_metric_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error(fmt::format("invalid {} '{}'", what, text));
  return v;
}

template <typename T>
T parse_int(std::string_view text, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error(fmt::format("invalid {} '{}'", what, text));
  return v;
}

const BaselineMetric& require_metric(const BaselineBac& baseline, const std::string& name) {
  const auto* m = baseline.find(name);
  if (!m) throw ConfigError(fmt::format("metric '{}' reported by the checker has no baseline threshold", name));
  return *m;
}

std::string describe_failure(const CommandResult& r, std::string_view who) {
  if (r.timed_out) return fmt::format("{} timed out", who);
  if (r.term_signal) return fmt::format("{} killed by signal {}", who, r.term_signal);
  return fmt::format("{} exited with status {}", who, r.exit_code);
}

std::optional<pid_t> find_pid_by_comm(const std::string& comm) {
  std::optional<pid_t> best;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator("/proc", ec)) {
    const auto name = entry.path().filename().string();
    pid_t pid = 0;
    auto [ptr, err] = std::from_chars(name.data(), name.data() + name.size(), pid);
    if (err != std::errc{} || ptr != name.data() + name.size() || pid == getpid()) continue;
    std::ifstream in(entry.path() / "comm");
    std::string line;
    if (!std::getline(in, line) || sanitize_comm(line) != comm) continue;
    if (!best || pid < *best) best = pid;
  }
  return best;
}

// Terminates a spawned target that outlived its experiment.
void stop_spawned(pid_t pid) {
  if (pid <= 0) return;
  kill(pid, SIGTERM);
  const auto deadline = Clock::now() + std::chrono::seconds(5);
  int status = 0;
  while (Clock::now() < deadline) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid || r < 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  kill(pid, SIGKILL);
  waitpid(pid, &status, 0);
}

}  // namespace

BacResults parse_bac_line(std::string_view line) {
  line = trim(line);
  if (line.empty()) throw Error("empty checker result line");
  BacResults out;
  for (auto item : split_csv(line, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(fmt::format("checker result item '{}' lacks '='", item));
    const auto name = trim(item.substr(0, eq));
    if (!valid_metric_name(name)) throw Error(fmt::format("invalid metric name '{}'", name));
    const auto value = parse_double(trim(item.substr(eq + 1)), "metric value");
    for (const auto& [existing, _] : out) {
      if (existing == name) throw Error(fmt::format("metric '{}' reported twice", name));
    }
    out.emplace_back(std::string(name), value);
  }
  if (out.empty()) throw Error("checker result line has no metrics");
  return out;
}

BacResults parse_checker_output(std::string_view output) {
  std::string_view last;
  for (auto line : split_csv(output, '\n')) {
    if (!trim(line).empty()) last = line;
  }
  if (last.empty()) throw Error("checker printed no result line");
  return parse_bac_line(last);
}

BacResults aggregate_probes(const std::vector<BacResults>& probes) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto& probe : probes) {
    for (const auto& [name, value] : probe) {
      auto [it, fresh] = sums.try_emplace(name, 0.0, 0);
      if (fresh) order.push_back(name);
      it->second.first += value;
      ++it->second.second;
    }
  }
  BacResults out;
  for (const auto& name : order) {
    const auto& [sum, n] = sums.at(name);
    out.emplace_back(name, sum / n);
  }
  return out;
}

bool metrics_indicate_crash(const BacResults& bac, const BaselineBac& baseline) {
  bool crash = false;
  for (const auto& [name, value] : bac) {
    const auto& m = require_metric(baseline, name);
    if (m.severity == MetricSeverity::Crash && value > m.threshold) crash = true;
  }
  return crash;
}

Classification classify(const BacResults& bac, bool crash_observed, bool state_corrupted,
                        const BaselineBac& baseline) {
  bool degraded = false;
  bool crash = crash_observed;
  for (const auto& [name, value] : bac) {
    const auto& m = require_metric(baseline, name);
    if (value <= m.threshold) continue;
    if (m.severity == MetricSeverity::Crash) {
      crash = true;
    } else {
      degraded = true;
    }
  }
  if (crash || state_corrupted) return Classification::Severe;
  return degraded ? Classification::Degraded : Classification::Resilient;
}

std::string format_bac(const BacResults& bac) {
  std::string out;
  for (const auto& [name, value] : bac) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}={}", name, value);
  }
  return out;
}

BacResults parse_bac(std::string_view text) {
  if (trim(text).empty()) return {};
  return parse_bac_line(text);
}

std::string format_outcomes_csv(const std::vector<OutcomeRow>& rows) {
  std::string out(kOutcomesHeader);
  out += '\n';
  for (const auto& [index, o] : rows) {
    const auto& m = o.spec.model;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", index, m.syscall, m.errno_symbol(),
                       m.rate, to_string(m.case_label), o.injected_count, o.natural_error_count, to_string(o.status),
                       o.crash_observed ? 1 : 0, o.state_corrupted ? 1 : 0, to_string(o.classification), o.spec.seed,
                       o.spec.duration_s, o.spec.budget ? std::to_string(*o.spec.budget) : std::string(),
                       o.spec.successful_only ? 1 : 0, o.spec.process.to_string(), format_bac(o.bac_results));
  }
  return out;
}

std::vector<OutcomeRow> parse_outcomes_csv(std::string_view text, const std::string& source) {
  auto lines = split_csv(text, '\n');
  if (lines.empty() || trim(lines[0]) != kOutcomesHeader) {
    throw ParseError(source, 1, fmt::format("expected header '{}'", kOutcomesHeader));
  }
  std::vector<OutcomeRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    try {
      auto f = split_csv(line);
      if (f.size() != 17) throw Error(fmt::format("expected 17 fields, got {}", f.size()));
      OutcomeRow row;
      row.index = parse_int<std::size_t>(f[0], "index");
      auto& o = row.outcome;
      o.spec.model.syscall = std::string(f[1]);
      if (f[2] != "RANDOM") o.spec.model.code = errno_lookup(f[2]);
      o.spec.model.rate = parse_double(f[3], "rate");
      o.spec.model.case_label = parse_case_label(f[4]);
      o.injected_count = parse_int<std::int64_t>(f[5], "injected");
      o.natural_error_count = parse_int<std::int64_t>(f[6], "natural_errors");
      o.status = parse_experiment_status(f[7]);
      o.crash_observed = f[8] == "1";
      o.state_corrupted = f[9] == "1";
      o.classification = parse_classification(f[10]);
      o.spec.seed = parse_int<std::uint64_t>(f[11], "seed");
      o.spec.duration_s = parse_double(f[12], "duration_s");
      if (!f[13].empty()) o.spec.budget = parse_int<std::int64_t>(f[13], "budget");
      o.spec.successful_only = f[14] == "1";
      o.spec.process = ProcessSelector::parse(f[15]);
      o.bac_results = parse_bac(f[16]);
      rows.push_back(std::move(row));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, static_cast<std::int64_t>(i + 1), e.what());
    }
  }
  return rows;
}

std::vector<OutcomeRow> read_outcomes_csv(const fs::path& path) {
  return parse_outcomes_csv(read_file(path), path.string());
}

Orchestrator::Orchestrator(CampaignConfig config, fs::path out_dir, MetricsStore* store)
    : config_(std::move(config)), out_dir_(std::move(out_dir)), store_(store) {
  config_.validate();
  clock_ = [] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

fs::path Orchestrator::experiment_dir(const ExperimentSpec& spec, std::size_t index) const {
  return out_dir_ / fmt::format("exp-{:02d}-{}-{}", index, spec.model.syscall, spec.model.errno_symbol());
}

void Orchestrator::step(std::string_view what, std::size_t index, std::string_view detail) {
  auto line = fmt::format("exp={:02d} {}", index, what);
  if (!detail.empty()) line += fmt::format(" {}", detail);
  spdlog::info("{}", line);
  journal_.push_back(line);
  std::ofstream out(out_dir_ / "journal.log", std::ios::app);
  out << line << '\n';
}

std::vector<std::pair<std::string, std::string>> Orchestrator::environment(const ExperimentSpec& spec,
                                                                           const fs::path& dir, int probe,
                                                                           pid_t pid) const {
  Environment env{
      {"SYSFAULT_SYSCALL", spec.model.syscall},
      {"SYSFAULT_ERRNO", spec.model.errno_symbol()},
      {"SYSFAULT_RATE", fmt::format("{}", spec.model.rate)},
      {"SYSFAULT_EXPERIMENT_DIR", fs::absolute(dir).string()},
      {"SYSFAULT_DECISION_LOG", fs::absolute(dir / "decisions.csv").string()},
      {"SYSFAULT_PROBE", std::to_string(probe)},
  };
  if (config_.backend == BackendKind::Replay) {
    env.emplace_back("SYSFAULT_TRACE_IN", fs::absolute(config_.trace).string());
    env.emplace_back("SYSFAULT_TRACE_OUT", fs::absolute(dir / "trace.csv").string());
  }
  if (pid > 0) env.emplace_back("SYSFAULT_TARGET_PID", std::to_string(pid));
  return env;
}

bool Orchestrator::probe_checker(const ExperimentSpec& spec, const fs::path& dir, int probe, pid_t pid,
                                 std::vector<BacResults>& probes, std::string& note) {
  if (config_.checker_cmd.empty()) return true;
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config_.command_timeout_s * 1000));
  const auto r = run_command(config_.checker_cmd, environment(spec, dir, probe, pid), timeout, config_.base_dir);
  if (!r.ok()) {
    note = describe_failure(r, "checker");
    return false;
  }
  try {
    probes.push_back(parse_checker_output(r.output));
  } catch (const Error& e) {
    note = fmt::format("checker output: {}", e.what());
    return false;
  }
  return true;
}

void Orchestrator::post_inspect(const ExperimentSpec& spec, const fs::path& dir, pid_t pid, ExperimentOutcome& o) {
  if (config_.post_inspect_cmd.empty()) return;
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config_.command_timeout_s * 1000));
  const auto r = run_command(config_.post_inspect_cmd, environment(spec, dir, 0, pid), timeout, config_.base_dir);
  // 126/127: the shell could not run the command at all.
  if (!r.exited_normally() || r.exit_code == 126 || r.exit_code == 127) {
    o.status = ExperimentStatus::Inconclusive;
    if (o.note.empty()) o.note = describe_failure(r, "post-inspect");
    return;
  }
  o.state_corrupted = r.exit_code != 0;
}

void Orchestrator::finish(ExperimentOutcome& o, const std::vector<BacResults>& probes) {
  o.bac_results = aggregate_probes(probes);
  try {
    o.crash_observed = o.crash_observed || metrics_indicate_crash(o.bac_results, config_.baseline);
    o.classification = classify(o.bac_results, o.crash_observed, o.state_corrupted, config_.baseline);
  } catch (const ConfigError& e) {
    o.status = ExperimentStatus::Inconclusive;
    if (o.note.empty()) o.note = e.what();
  }
  if (o.status == ExperimentStatus::Completed && o.injected_count == 0) {
    o.status = ExperimentStatus::NoInjection;
    o.note = "no error was injected";
  }
}

ExperimentOutcome Orchestrator::run_experiment(const ExperimentSpec& spec, std::size_t index) {
  spec.validate();
  fs::create_directories(out_dir_);
  return config_.backend == BackendKind::Replay ? run_replay(spec, index) : run_live(spec, index);
}

ExperimentOutcome Orchestrator::run_replay(const ExperimentSpec& spec, std::size_t index) {
  const auto dir = experiment_dir(spec, index);
  fs::create_directories(dir);
  ExperimentOutcome o;
  o.spec = spec;

  const auto model = fmt::format("{}:{}:{}", spec.model.syscall, spec.model.errno_symbol(), spec.model.rate);
  step("attach", index, model);
  InjectionSession session(spec);
  ReplayResult result;
  try {
    result = replay_run(config_.trace, session, dir / "trace.csv", dir / "decisions.csv",
                        ReplayOptions{spec.duration_s});
  } catch (const Error& e) {
    session.close();
    step("detach", index, "replay failed");
    o.status = ExperimentStatus::Inconclusive;
    o.note = e.what();
    return o;
  }
  session.close();
  o.injected_count = result.stats.injected_count;
  o.natural_error_count = result.stats.natural_error_count;
  step("detach", index, fmt::format("injected={} natural_errors={}", o.injected_count, o.natural_error_count));

  std::vector<BacResults> probes;
  for (int p = 1; p <= config_.probes; ++p) {
    step("probe", index, std::to_string(p));
    if (!probe_checker(spec, dir, p, 0, probes, o.note)) {
      o.status = ExperimentStatus::Inconclusive;
      break;
    }
  }
  step("post_inspect", index);
  post_inspect(spec, dir, 0, o);
  finish(o, probes);
  step("classify", index,
       fmt::format("{} {}", to_string(o.status),
                   o.status == ExperimentStatus::Completed ? to_string(o.classification) : o.note));
  return o;
}

ExperimentOutcome Orchestrator::run_live(const ExperimentSpec& spec, std::size_t index) {
  const auto dir = experiment_dir(spec, index);
  fs::create_directories(dir);
  ExperimentOutcome o;
  o.spec = spec;

  LiveTarget target;
  if (!config_.target_command.empty()) {
    target.command = config_.target_command;
  } else if (spec.process.kind() == ProcessSelector::Kind::Pid) {
    target.pid = spec.process.pid();
  } else {
    target.pid = find_pid_by_comm(spec.process.comm());
    if (!target.pid) {
      o.status = ExperimentStatus::Inconclusive;
      o.note = fmt::format("no running process named '{}'", spec.process.comm());
      target_lost_ = true;
      step("attach", index, o.note);
      return o;
    }
  }

  DecisionLogWriter log(dir / "decisions.csv", spec);
  LiveOptions options;
  options.injection = spec;
  options.on_decision = [&log](const EventContext& ctx, const InjectionDecision& d) { log.append(ctx, d); };

  std::unique_ptr<LiveTracer> tracer;
  try {
    tracer = LiveTracer::attach(target, std::move(options));
  } catch (const CapabilityError&) {
    throw;
  } catch (const Error& e) {
    o.status = ExperimentStatus::Inconclusive;
    o.note = e.what();
    target_lost_ = true;
    step("attach", index, fmt::format("failed: {}", e.what()));
    return o;
  }
  const pid_t pid = tracer->target_pid();
  step("attach", index,
       fmt::format("pid={} {}:{}:{}", pid, spec.model.syscall, spec.model.errno_symbol(), spec.model.rate));

  std::vector<BacResults> probes;
  const auto start = Clock::now();
  const auto end = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(spec.duration_s));
  const auto interval =
      std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config_.checker_interval_s));
  auto next_probe = start + interval;
  int probe = 0;
  bool checker_ok = true;
  while (Clock::now() < end && !tracer->finished()) {
    if (checker_ok && Clock::now() >= next_probe) {
      step("probe", index, std::to_string(++probe));
      checker_ok = probe_checker(spec, dir, probe, pid, probes, o.note);
      next_probe += interval;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  if (checker_ok && probe == 0 && !tracer->finished()) {
    step("probe", index, std::to_string(++probe));
    checker_ok = probe_checker(spec, dir, probe, pid, probes, o.note);
  }
  const bool died = tracer->finished();
  tracer->detach();
  const auto status = tracer->join();
  log.finish();
  if (auto stats = tracer->injection_stats()) {
    o.injected_count = stats->injected_count;
    o.natural_error_count = stats->natural_error_count;
  }
  step("detach", index, fmt::format("injected={} natural_errors={}", o.injected_count, o.natural_error_count));

  if (!checker_ok) o.status = ExperimentStatus::Inconclusive;
  if (auto err = tracer->error()) {
    o.status = ExperimentStatus::Inconclusive;
    if (o.note.empty()) o.note = *err;
  }
  if (died) {
    // A spawned target that exits cleanly has finished its work.
    const bool clean = status && WIFEXITED(*status) && WEXITSTATUS(*status) == 0;
    if (!clean) {
      o.crash_observed = true;
      target_lost_ = true;
      if (o.note.empty()) o.note = "target terminated during injection";
    }
  }

  step("post_inspect", index);
  post_inspect(spec, dir, pid, o);
  if (tracer->spawned() && !died) stop_spawned(pid);
  finish(o, probes);
  step("classify", index,
       fmt::format("{} {}", to_string(o.status),
                   o.status == ExperimentStatus::Completed ? to_string(o.classification) : o.note));
  return o;
}

CampaignResult Orchestrator::run_campaign() {
  fs::create_directories(out_dir_);
  CampaignResult result;
  const auto outcomes_path = out_dir_ / "outcomes.csv";
  write_file_atomic(outcomes_path, format_outcomes_csv(result.outcomes));
  std::int64_t last_ts = 0;
  for (std::size_t i = 0; i < config_.experiments.size(); ++i) {
    if (i > 0 && config_.inter_experiment_pause_s > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(config_.inter_experiment_pause_s));
    }
    const auto& spec = config_.experiments[i];
    auto outcome = run_experiment(spec, i);
    result.outcomes.push_back({i, outcome});
    write_file_atomic(outcomes_path, format_outcomes_csv(result.outcomes));
    if (store_) {
      last_ts = std::max(clock_(), last_ts + 1);
      store_->append(to_record(outcome, last_ts));
      store_->flush();
    }

    if (outcome.state_corrupted || target_lost_) {
      target_lost_ = false;
      if (config_.restart_cmd.empty()) {
        if (config_.backend == BackendKind::Live) {
          result.aborted = true;
          result.abort_reason = fmt::format("experiment {} left the target unusable and no restart command is set", i);
          step("abort", i, result.abort_reason);
          break;
        }
        continue;
      }
      step("restart", i);
      const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config_.command_timeout_s * 1000));
      const auto r = run_command(config_.restart_cmd, environment(spec, experiment_dir(spec, i), 0, 0), timeout,
                                 config_.base_dir);
      if (!r.ok()) {
        result.aborted = true;
        result.abort_reason = fmt::format("restart after experiment {} failed: {}", i, describe_failure(r, "restart"));
        step("abort", i, result.abort_reason);
        break;
      }
    }
  }
  return result;
}

}  // namespace sysfault
