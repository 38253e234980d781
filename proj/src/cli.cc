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

#include "sysfault/cli.h"

#include <signal.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sysfault/campaign.h"
#include "sysfault/error.h"
#include "sysfault/formats.h"
#include "sysfault/injector.h"
#include "sysfault/live.h"
#include "sysfault/monitor.h"
#include "sysfault/orchestrator.h"
#include "sysfault/replay.h"
#include "sysfault/report.h"
#include "sysfault/store.h"
#include "sysfault/synthesizer.h"

namespace sysfault {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kStoreEnv = "SYSFAULT_STORE_DIR";

struct LiveArgs {
  std::optional<pid_t> pid;
  std::vector<std::string> cmd;
  std::optional<double> duration_s;

  void add_to(CLI::App* app) {
    app->add_option("--pid", pid, "Attach to a running process");
    app->add_option("--cmd", cmd, "Launch and trace a command (all remaining arguments)")->allow_extra_args();
  }
  LiveTarget target() const {
    if (pid && !cmd.empty()) throw UsageError("--pid and --cmd are mutually exclusive");
    if (!pid && cmd.empty()) throw UsageError("live mode needs --pid or --cmd");
    LiveTarget t;
    t.pid = pid;
    t.command = cmd;
    return t;
  }
};

struct MonitorArgs {
  fs::path trace;
  bool live = false;
  LiveArgs target;
  fs::path trace_out;
  double interval_s = 15.0;
  std::optional<std::int64_t> origin_ns;
  std::string series_mode = "invoked";
  fs::path out;
  fs::path store;
};

struct SynthesizeArgs {
  fs::path summary;
  fs::path out;
  SynthesizerConfig cfg;
  bool with_random = false;
};

struct InjectArgs {
  bool replay = false;
  bool live = false;
  LiveArgs target;
  fs::path trace;
  fs::path out;
  fs::path decisions;
  std::string model;
  fs::path models;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> budget;
  std::string process = "any";
  std::optional<double> duration_s;
};

struct OrchestrateArgs {
  fs::path campaign;
  fs::path out;
  std::optional<fs::path> models;
  fs::path store;
};

struct StoreArgs {
  fs::path dir;
  bool csv = false;
  fs::path out;
  std::string series_mode = "invoked";
  std::optional<std::string> syscall;
  std::optional<std::string> errno_symbol;
  std::int64_t from = MetricsStore::kMinTime;
  std::int64_t to = MetricsStore::kMaxTime;
  bool outcomes = false;
};

struct ReportArgs {
  fs::path in;
  fs::path out;
  std::string format = "text";
  bool abbrev = false;
  SynthesizerConfig cfg;
  std::optional<std::string> syscall;
  std::optional<std::string> errno_symbol;
  std::int64_t from = MetricsStore::kMinTime;
  std::int64_t to = MetricsStore::kMaxTime;
};

void require(const fs::path& value, std::string_view flag) {
  if (value.empty()) throw UsageError(fmt::format("{} is required", flag));
}

fs::path store_dir(const fs::path& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(std::string(kStoreEnv).c_str()); env && *env) return env;
  return {};
}

void emit(const fs::path& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    write_file_atomic(out, content);
    spdlog::info("wrote {}", out.string());
  }
}

// "read:EAGAIN:0.05", "read:RANDOM:0.5" or, with require_rate false, "read:EAGAIN".
ErrorModel parse_model_arg(std::string_view text, bool require_rate) {
  auto f = split_csv(text, ':');
  if (f.size() < 2 || f.size() > 3 || f[0].empty()) {
    throw UsageError(fmt::format("model '{}' must look like syscall:ERRNO[:rate]", text));
  }
  ErrorModel m;
  m.syscall = std::string(f[0]);
  if (f[1] == "RANDOM") {
    m.case_label = CaseLabel::Random;
  } else {
    m.code = errno_lookup(f[1]);
  }
  if (f.size() == 3) {
    try {
      m.rate = std::stod(std::string(f[2]));
    } catch (const std::exception&) {
      throw UsageError(fmt::format("model '{}': invalid rate '{}'", text, f[2]));
    }
  } else if (require_rate) {
    throw UsageError(fmt::format("model '{}' lacks a rate; use syscall:ERRNO:rate or --models", text));
  }
  return m;
}

// Runs a live tracer until the target ends or `duration_s` elapses, then
// detaches; a spawned target still running afterwards is terminated.
void run_live(LiveTracer& tracer, std::optional<double> duration_s) {
  const auto start = std::chrono::steady_clock::now();
  while (!tracer.finished()) {
    if (duration_s && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(*duration_s)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const bool ended = tracer.finished();
  tracer.detach();
  tracer.join();
  if (tracer.spawned() && !ended) {
    kill(tracer.target_pid(), SIGTERM);
    tracer.wait_spawned_exit();
  }
  if (auto err = tracer.error()) throw Error(*err);
}

int run_monitor(const MonitorArgs& a) {
  require(a.out, "--out");
  MonitorConfig cfg;
  cfg.interval_len_s = a.interval_s;
  cfg.series_mode = parse_series_mode(a.series_mode);

  std::vector<SyscallEvent> events;
  if (a.live) {
    if (!a.trace.empty()) throw UsageError("--trace and --live are mutually exclusive");
    std::mutex mu;
    LiveOptions options;
    options.sink = [&](const SyscallEvent& e) {
      std::lock_guard lock(mu);
      events.push_back(e);
    };
    auto tracer = LiveTracer::attach(a.target.target(), std::move(options));
    spdlog::info("tracing pid {}", tracer->target_pid());
    run_live(*tracer, a.target.duration_s);
    canonical_sort(events);
    if (!a.trace_out.empty()) write_trace(a.trace_out, events);
  } else {
    require(a.trace, "--trace");
    events = read_trace(a.trace);
  }

  if (a.origin_ns) {
    cfg.clock_origin_ns = *a.origin_ns;
  } else if (!events.empty()) {
    cfg.clock_origin_ns = std::min_element(events.begin(), events.end(), [](const auto& x, const auto& y) {
                            return x.timestamp_ns < y.timestamp_ns;
                          })->timestamp_ns;
  }
  Monitor monitor(cfg);
  for (const auto& e : events) monitor.ingest(e);
  const auto closed = monitor.close_all();

  if (const auto dir = store_dir(a.store); !dir.empty()) {
    MetricsStore store(dir);
    std::vector<const IntervalStats*> ordered;
    for (const auto& s : closed) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(), [](const IntervalStats* x, const IntervalStats* y) {
      return x->interval_index < y->interval_index;
    });
    for (const auto* s : ordered) store.append(*s, cfg.clock_origin_ns);
    store.flush();
    spdlog::info("appended {} interval stats to {}", ordered.size(), dir.string());
  }

  const auto summaries = monitor.summaries();
  fs::create_directories(a.out);
  write_summary_csv(a.out / "summary.csv", summaries);
  std::set<std::int64_t> intervals;
  for (const auto& s : closed) intervals.insert(s.interval_index);
  spdlog::info("{} events, {} intervals, {} summary rows -> {}", monitor.events_ingested(), intervals.size(),
               summaries.size(), (a.out / "summary.csv").string());
  return 0;
}

int run_synthesize(const SynthesizeArgs& a) {
  require(a.summary, "--summary");
  require(a.out, "--out");
  const auto summaries = read_summary_csv(a.summary);
  auto models = synthesize_all(summaries, a.cfg);
  if (a.with_random) {
    std::set<std::string> syscalls;
    for (const auto& m : models) syscalls.insert(m.syscall);
    for (const auto& s : syscalls) models.push_back(random_baseline_model(s));
  }
  write_models_csv(a.out, models);
  spdlog::info("synthesized {} models -> {}", models.size(), a.out.string());
  return 0;
}

ExperimentSpec inject_spec(const InjectArgs& a) {
  ExperimentSpec spec;
  if (!a.models.empty()) {
    if (a.model.empty()) throw UsageError("--models needs --model syscall:ERRNO to pick one row");
    const auto want = parse_model_arg(a.model, false);
    bool found = false;
    for (auto& m : read_models_csv(a.models)) {
      if (m.syscall == want.syscall && m.errno_symbol() == want.errno_symbol()) {
        spec.model = std::move(m);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(fmt::format("{}: no model for {}", a.models.string(), a.model));
  } else {
    if (a.model.empty()) throw UsageError("--model syscall:ERRNO:rate or --models is required");
    spec.model = parse_model_arg(a.model, true);
  }
  spec.seed = a.seed;
  spec.budget = a.budget;
  spec.process = ProcessSelector::parse(a.process);
  if (a.duration_s) spec.duration_s = *a.duration_s;
  spec.validate();
  return spec;
}

int run_inject(const InjectArgs& a) {
  if (a.replay && a.live) throw UsageError("--replay and --live are mutually exclusive");
  require(a.decisions, "--decisions");
  const auto spec = inject_spec(a);

  if (!a.live) {
    require(a.trace, "--trace");
    require(a.out, "--out");
    InjectionSession session(spec);
    ReplayOptions options;
    if (a.duration_s) options.active_window_s = *a.duration_s;
    const auto r = replay_run(a.trace, session, a.out, a.decisions, options);
    spdlog::info("{} events, {} injected, {} natural errors preserved", r.events, r.stats.injected_count,
                 r.stats.natural_error_count);
    return 0;
  }

  DecisionLogWriter log(a.decisions, spec);
  std::vector<SyscallEvent> events;
  LiveOptions options;
  options.injection = spec;
  options.on_decision = [&log](const EventContext& ctx, const InjectionDecision& d) { log.append(ctx, d); };
  if (!a.out.empty()) options.sink = [&events](const SyscallEvent& e) { events.push_back(e); };
  auto tracer = LiveTracer::attach(a.target.target(), std::move(options));
  run_live(*tracer, a.duration_s.value_or(spec.duration_s));
  log.finish();
  if (!a.out.empty()) write_trace(a.out, events);
  if (auto stats = tracer->injection_stats()) {
    spdlog::info("{} injected, {} natural errors preserved", stats->injected_count, stats->natural_error_count);
  }
  return 0;
}

void write_campaign_report(const fs::path& out, const std::vector<OutcomeRow>& rows,
                           const std::vector<std::string>& metrics) {
  write_file_atomic(out / "campaign.csv", render_campaign(rows, metrics, ReportFormat::Csv));
  write_file_atomic(out / "campaign.txt", render_campaign(rows, metrics, ReportFormat::Text));
}

int run_orchestrate(const OrchestrateArgs& a) {
  require(a.campaign, "--campaign");
  require(a.out, "--out");
  auto cfg = load_campaign(a.campaign, a.models);
  const auto metrics = cfg.baseline.names();
  std::optional<MetricsStore> store;
  if (const auto dir = store_dir(a.store); !dir.empty()) store.emplace(dir);
  Orchestrator orchestrator(std::move(cfg), a.out, store ? &*store : nullptr);
  const auto result = orchestrator.run_campaign();
  write_campaign_report(a.out, result.outcomes, metrics);
  std::cout << read_file(a.out / "campaign.txt");
  if (result.aborted) throw Error(fmt::format("campaign aborted: {} (partial report kept)", result.abort_reason));
  return 0;
}

fs::path require_store(const fs::path& flag) {
  auto dir = store_dir(flag);
  if (dir.empty()) throw UsageError(fmt::format("store directory needed: pass --dir or set {}", kStoreEnv));
  if (!fs::is_directory(dir)) throw IoError(fmt::format("{}: no such store directory", dir.string()));
  return dir;
}

int run_store_export(const StoreArgs& a) {
  if (!a.csv) throw UsageError("store export supports --csv only");
  MetricsStore store(require_store(a.dir));
  const auto records = store.query(a.syscall, a.errno_symbol, a.from, a.to);
  const auto summaries = summaries_from_records(records, parse_series_mode(a.series_mode));
  emit(a.out, format_summary_csv(summaries));
  return 0;
}

int run_store_query(const StoreArgs& a) {
  if (a.from > a.to) throw UsageError("--from must not exceed --to");
  MetricsStore store(require_store(a.dir));
  std::string out;
  if (a.outcomes) {
    out = "timestamp_ns,syscall,errno,rate,injected,status,classification,crash,co,bac\n";
    for (const auto& r : store.query_outcomes(a.from, a.to)) {
      out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.timestamp_ns, r.syscall, r.errno_symbol, r.rate,
                         r.injected, to_string(r.status), to_string(r.classification), r.crash ? 1 : 0,
                         r.state_corrupted ? 1 : 0, r.bac);
    }
  } else {
    out = "timestamp_ns,interval_index,interval_len_s,syscall,errno,count,total,rate\n";
    for (const auto& r : store.query(a.syscall, a.errno_symbol, a.from, a.to)) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.timestamp_ns, r.interval_index, r.interval_len_s, r.syscall,
                         r.code.symbol, r.count, r.total, r.rate);
    }
  }
  emit(a.out, out);
  return 0;
}

fs::path report_target(const ReportArgs& a, std::string_view stem, ReportFormat format) {
  if (a.out.empty() || a.out == "-") return a.out;
  return a.out / fmt::format("{}.{}", stem, format == ReportFormat::Csv ? "csv" : "txt");
}

int run_report_natural(const ReportArgs& a) {
  require(a.in, "--in");
  const auto format = parse_report_format(a.format);
  const auto path = fs::is_directory(a.in) ? a.in / "summary.csv" : a.in;
  const auto rows = read_summary_csv(path);
  NaturalReportOptions options;
  options.synthesizer = a.cfg;
  options.abbreviate = a.abbrev;
  emit(report_target(a, "natural", format), render_natural_errors(rows, format, options));
  return 0;
}

int run_report_campaign(const ReportArgs& a) {
  require(a.in, "--in");
  const auto format = parse_report_format(a.format);
  const auto path = fs::is_directory(a.in) ? a.in / "outcomes.csv" : a.in;
  emit(report_target(a, "campaign", format), render_campaign(read_outcomes_csv(path), {}, format));
  return 0;
}

int run_report_plots(const ReportArgs& a) {
  require(a.out, "--out");
  MetricsStore store(require_store(a.in));
  const auto records = store.query(a.syscall, a.errno_symbol, a.from, a.to);
  const auto files = emit_plot_series(records, a.out);
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

void add_synth_options(CLI::App* app, SynthesizerConfig& cfg) {
  app->add_option("--boundary", cfg.boundary, "Sporadic/other boundary on the maximum rate")->capture_default_str();
  app->add_option("--sporadic-rate", cfg.sporadic_rate, "Injection rate for sporadic errors")->capture_default_str();
  app->add_option("--variance-threshold", cfg.variance_threshold, "Variance separating fluctuating from steady")
      ->capture_default_str();
  app->add_option("--factor", cfg.factor, "Amplification factor for steady errors")->capture_default_str();
}

void add_filter_options(CLI::App* app, std::optional<std::string>& syscall, std::optional<std::string>& errno_symbol,
                        std::int64_t& from, std::int64_t& to) {
  app->add_option("--syscall", syscall, "Only this syscall");
  app->add_option("--errno", errno_symbol, "Only this errno symbol (or SUCCESS)");
  app->add_option("--from", from, "Earliest timestamp_ns, inclusive");
  app->add_option("--to", to, "Latest timestamp_ns, inclusive");
}

void configure_logging(const std::string& level) {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("sysfault");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
  });
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") throw UsageError(fmt::format("unknown log level '{}'", level));
  spdlog::set_level(lvl);
}

int run(int argc, char** argv) {
  CLI::App app{"Syscall error monitoring, error-model synthesis and fault-injection campaigns", "sysfault"};
  app.set_version_flag("--version", SYSFAULT_VERSION);
  app.set_config("--config", "", "Read options from a TOML file; flags take precedence");
  bool show_config = false;
  app.add_flag("--show-config", show_config, "Print the effective configuration, including defaults, and exit");
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();
  app.require_subcommand(0, 1);

  MonitorArgs mon;
  auto* monitor = app.add_subcommand("monitor", "Aggregate syscall events into per-interval error-rate summaries");
  monitor->add_option("--trace", mon.trace, "Input trace CSV");
  monitor->add_flag("--live", mon.live, "Trace a process instead of reading a trace file");
  mon.target.add_to(monitor);
  monitor->add_option("--duration-s", mon.target.duration_s, "Live: stop tracing after this many seconds");
  monitor->add_option("--trace-out", mon.trace_out, "Live: also write the captured trace");
  monitor->add_option("--interval-s", mon.interval_s, "Monitoring interval length")->capture_default_str();
  monitor->add_option("--origin-ns", mon.origin_ns, "Interval clock origin (default: first event)");
  monitor->add_option("--series-mode", mon.series_mode, "invoked|errors")->capture_default_str();
  monitor->add_option("--out", mon.out, "Output directory (summary.csv)");
  monitor->add_option("--store", mon.store, fmt::format("Metrics store directory (default: ${})", kStoreEnv));

  SynthesizeArgs syn;
  auto* synthesize = app.add_subcommand("synthesize", "Derive error-injection models from a summary CSV");
  synthesize->add_option("--summary", syn.summary, "Summary CSV from monitor");
  synthesize->add_option("--out", syn.out, "Output models CSV");
  add_synth_options(synthesize, syn.cfg);
  synthesize->add_flag("--with-random", syn.with_random, "Append a RANDOM baseline model per syscall");

  InjectArgs inj;
  auto* inject = app.add_subcommand("inject", "Run one injection session against a trace or a process");
  inject->add_flag("--replay", inj.replay, "Replay a recorded trace (default)");
  inject->add_flag("--live", inj.live, "Inject into a live process");
  inj.target.add_to(inject);
  inject->add_option("--trace", inj.trace, "Replay: input trace CSV");
  inject->add_option("--out", inj.out, "Output trace CSV");
  inject->add_option("--decisions", inj.decisions, "Decision log CSV");
  inject->add_option("--model", inj.model, "syscall:ERRNO:rate, or syscall:ERRNO with --models");
  inject->add_option("--models", inj.models, "Models CSV to pick --model from");
  inject->add_option("--seed", inj.seed, "Generator seed")->capture_default_str();
  inject->add_option("--budget", inj.budget, "Maximum number of injections");
  inject->add_option("--process", inj.process, "any | pid:N | comm:NAME")->capture_default_str();
  inject->add_option("--duration-s", inj.duration_s, "Injection window from the first event (replay) or attach");

  OrchestrateArgs orc;
  auto* orchestrate = app.add_subcommand("orchestrate", "Run a campaign of injection experiments");
  orchestrate->add_option("--campaign", orc.campaign, "Campaign JSON file");
  orchestrate->add_option("--out", orc.out, "Output directory");
  orchestrate->add_option("--models", orc.models, "Models CSV replacing the campaign's models_file");
  orchestrate->add_option("--store", orc.store, fmt::format("Metrics store directory (default: ${})", kStoreEnv));

  StoreArgs st;
  auto* store = app.add_subcommand("store", "Inspect the metrics store");
  store->require_subcommand(1);
  store->add_option("--dir", st.dir, fmt::format("Store directory (default: ${})", kStoreEnv));
  auto* store_export = store->add_subcommand("export", "Export interval records as a summary CSV");
  store_export->add_flag("--csv", st.csv, "CSV output");
  store_export->add_option("--out", st.out, "Output file (default: stdout)");
  store_export->add_option("--series-mode", st.series_mode, "invoked|errors")->capture_default_str();
  add_filter_options(store_export, st.syscall, st.errno_symbol, st.from, st.to);
  auto* store_query = store->add_subcommand("query", "Print stored records in time order");
  store_query->add_flag("--outcomes", st.outcomes, "Query experiment outcomes instead of intervals");
  store_query->add_option("--out", st.out, "Output file (default: stdout)");
  add_filter_options(store_query, st.syscall, st.errno_symbol, st.from, st.to);

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Render tables and plot series");
  report->require_subcommand(1);
  auto add_report = [&](const char* name, const char* help) {
    auto* sub = report->add_subcommand(name, help);
    sub->add_option("--in", rep.in, "Input directory or file");
    sub->add_option("--out", rep.out, "Output directory (default: stdout)");
    sub->add_option("--format", rep.format, "text|csv")->capture_default_str();
    return sub;
  };
  auto* report_natural = add_report("natural", "Natural-error table from a summary");
  report_natural->add_flag("--abbrev", rep.abbrev, "Shorten errno names to three letters");
  add_synth_options(report_natural, rep.cfg);
  auto* report_campaign = add_report("campaign", "Experiment results table from outcomes.csv");
  auto* report_plots = add_report("plots", "One (time, rate) file per stream from a store directory");
  add_filter_options(report_plots, rep.syscall, rep.errno_symbol, rep.from, rep.to);

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  configure_logging(log_level);
  if (show_config) {
    std::cout << app.config_to_str(true, true);
    return 0;
  }

  if (monitor->parsed()) return run_monitor(mon);
  if (synthesize->parsed()) return run_synthesize(syn);
  if (inject->parsed()) return run_inject(inj);
  if (orchestrate->parsed()) return run_orchestrate(orc);
  if (store_export->parsed()) return run_store_export(st);
  if (store_query->parsed()) return run_store_query(st);
  if (report_natural->parsed()) return run_report_natural(rep);
  if (report_campaign->parsed()) return run_report_campaign(rep);
  if (report_plots->parsed()) return run_report_plots(rep);
  std::cerr << app.help();
  return 2;
}

}  // namespace

int dispatch(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "sysfault: usage error: " << e.what() << "\n";
    return 2;
  } catch (const CapabilityError& e) {
    std::cerr << "sysfault: unsupported here: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "sysfault: error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sysfault: error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("sysfault");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return dispatch(static_cast<int>(storage.size()), argv.data());
}

}  // namespace sysfault
