#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "procguard/detectors.hpp"
#include "procguard/distill.hpp"
#include "procguard/error.hpp"
#include "procguard/evaluation.hpp"
#include "procguard/monitor.hpp"
#include "procguard/scenario.hpp"
#include "procguard/trace_io.hpp"

namespace procguard {

namespace fs = std::filesystem;

namespace {

// Accepts "N" or "A-B".
std::pair<int, int> parse_range(const std::string& text, const char* what) {
  try {
    const auto dash = text.find('-');
    if (dash == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    const int lo = std::stoi(text.substr(0, dash)), hi = std::stoi(text.substr(dash + 1));
    if (lo > hi) throw ConfigError(std::string(what) + " range is reversed");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("bad ") + what + " value '" + text + "'");
  }
}

// "lo:hi:steps" or a comma-separated list.
std::vector<double> parse_grid(const std::string& text) {
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(text);
      for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
      if (parts.size() != 3) throw ConfigError("grid must be lo:hi:steps");
      return threshold_grid(std::stoi(parts[2]), std::stod(parts[0]), std::stod(parts[1]));
    }
    std::vector<double> grid;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
      const double v = std::stod(p);
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("threshold outside [0, 1]: " + p);
      grid.push_back(v);
    }
    if (grid.empty()) throw ConfigError("empty threshold grid");
    return grid;
  } catch (const std::logic_error&) {
    throw ConfigError("bad threshold grid '" + text + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

// A scenario directory (its traces.jsonl) or a trace file.
std::vector<ProcessTrace> load_traces(const std::string& path) {
  if (!fs::exists(path)) throw InputError("no such trace input: " + path);
  if (fs::is_directory(path)) return read_traces(fs::path(path) / kTracesFile);
  return read_traces(fs::path(path));
}

std::vector<Scenario> load_scenarios(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("no such scenario directory: " + dir);
  auto scenarios = read_scenarios(dir);
  if (scenarios.empty()) throw InputError("scenario directory holds no scenarios: " + dir);
  return scenarios;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct HyperFlags {
  Hyperparameters hp;
  std::string loss = "mse";
  std::string variant = "default";
  bool steep_sigmoid = false;
  std::size_t cap = 0;
  double lr = 1e-3;

  void add(CLI::App& cmd) {
    cmd.add_option("--hidden", hp.hidden_neurons, "hidden units per layer")->capture_default_str();
    cmd.add_option("--depth", hp.depth, "stacked GRU layers")->capture_default_str();
    cmd.add_option("--batch", hp.batch_size, "batch size (64, 128 or 256)")->capture_default_str();
    cmd.add_option("--epochs", hp.epochs)->capture_default_str();
    cmd.add_option("--dropout", hp.dropout_rate)->capture_default_str();
    cmd.add_option("--window", hp.window_size)->capture_default_str();
    cmd.add_option("--seed", hp.seed)->capture_default_str();
    add_loss(cmd);
  }
  void add_loss(CLI::App& cmd) {
    cmd.add_option("--loss", loss, "mse or modified")->capture_default_str();
    cmd.add_option("--variant", variant, "modified-loss reading: default, literal or prose")->capture_default_str();
    cmd.add_flag("--steep-sigmoid", steep_sigmoid, "smooth surrogate for the rounding gradient");
    cmd.add_option("--per-class", cap, "windows drawn per class (0: smaller class size)");
    cmd.add_option("--lr", lr, "Adam learning rate")->capture_default_str();
  }
  TrainingOptions training() const {
    TrainingOptions o;
    o.per_class_cap = cap;
    o.adam.learning_rate = lr;
    o.round_gradient = steep_sigmoid ? RoundGradient::kSteepSigmoid : RoundGradient::kStraightThrough;
    return o;
  }
  void resolve() {
    hp.loss_kind = parse_loss_kind(loss);
    hp.loss_variant = parse_loss_variant(variant);
  }
};

int cmd_generate(const std::string& library_path, const std::string& out_dir, int count, const std::string& benign,
                 const std::string& malicious, ScenarioConfig base, std::ostream& out) {
  const ArchetypeLibrary library = library_path.empty() ? default_library() : load_library(library_path);
  if (count < 1) throw ConfigError("need at least one scenario");
  const auto [b_lo, b_hi] = parse_range(benign, "benign count");
  const auto [m_lo, m_hi] = parse_range(malicious, "malicious count");
  std::mt19937_64 rng(base.seed);
  std::vector<Scenario> scenarios;
  for (int i = 0; i < count; ++i) {
    ScenarioConfig c = base;
    c.benign_app_count = std::uniform_int_distribution<int>(b_lo, b_hi)(rng);
    c.malicious_app_count = std::uniform_int_distribution<int>(m_lo, m_hi)(rng);
    c.seed = rng();
    scenarios.push_back(generate_scenario(c, library, "s" + std::to_string(i)));
  }
  write_scenarios(scenarios, out_dir);
  std::size_t apps = 0, processes = 0, malicious_procs = 0;
  for (const auto& s : scenarios) {
    apps += s.apps.size();
    processes += s.processes.size();
    for (const auto& p : s.processes) malicious_procs += p.label == Label::kMalicious ? 1 : 0;
  }
  out << "scenarios " << scenarios.size() << " apps " << apps << " processes " << processes << " malicious "
      << malicious_procs << "\n";
  return 0;
}

void write_training_log(const std::string& path, const TrainingLog& log) {
  auto out = open_out(path);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i)
    out << i + 1 << ',' << std::setprecision(17) << log.epoch_loss[i] << '\n';
}

struct EvaluateFlags {
  std::string scenarios, split = "test";
  std::string offline, online, distilled, direct;
  std::string csv, table, details;
  bool offline_verdicts = false;
  bool by_application = false;
};

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out) {
  if (f.offline.empty() && f.online.empty() && f.distilled.empty() && f.direct.empty())
    throw ConfigError("evaluate needs at least one model");
  const auto scenarios = load_scenarios(f.scenarios);
  const auto aggregation = f.by_application ? Aggregation::kApplication : Aggregation::kProcess;
  std::vector<EvaluationReport> reports;
  std::vector<DamageTally> damages;
  auto online_rows = [&](const GruClassifier& gru, const std::string& name) {
    const auto scored = score_scenarios(scenarios, gru);
    reports.push_back(evaluate_online(f.split, name + " (theta=0.50)", scored, 0.5, aggregation));
    damages.push_back(damage(scored, 0.5));
    reports.push_back(
        evaluate_online(f.split, name + " (best theta=" + fixed(gru.threshold, 2) + ")", scored, gru.threshold, aggregation));
    damages.push_back(damage(scored, gru.threshold));
  };
  auto forest_row = [&](const ForestClassifier& forest, const std::string& name) {
    const auto scored = score_scenarios(scenarios, forest);
    reports.push_back(evaluate_online(f.split, name, scored, 0.5, aggregation));
    damages.push_back(damage(scored, 0.5));
  };
  std::vector<EvaluationReport> offline_reports;
  for (const auto& [path, name] : {std::pair{f.offline, std::string("offline model")}, {f.online, "online model"}}) {
    if (path.empty()) continue;
    const auto gru = load_gru(path);
    online_rows(gru, name);
    if (f.offline_verdicts) {
      offline_reports.push_back(evaluate_offline(f.split, name + " offline verdict (theta=0.50)", gru, scenarios, 0.5, aggregation));
      offline_reports.push_back(evaluate_offline(f.split, name + " offline verdict (best theta=" + fixed(gru.threshold, 2) + ")",
                                                 gru, scenarios, gru.threshold, aggregation));
    }
  }
  if (!f.distilled.empty()) forest_row(load_forest(f.distilled), "distilled forest");
  if (!f.direct.empty()) forest_row(load_forest(f.direct), "direct forest");

  write_report_table(reports, out);
  for (std::size_t i = 0; i < reports.size(); ++i)
    out << "files modified [" << reports[i].model << "]: " << fixed(damages[i].with_detector, 0) << " of "
        << fixed(damages[i].unkilled, 0) << " unkilled (" << fixed(100.0 * damages[i].reduction(), 2)
        << "% prevented)\n";
  if (!offline_reports.empty()) {
    out << "\noffline verdicts (mean window score after the trace ends):\n";
    write_report_table(offline_reports, out);
  }
  std::vector<EvaluationReport> all = reports;
  all.insert(all.end(), offline_reports.begin(), offline_reports.end());
  for (const auto& r : all)
    for (const auto& w : r.warnings) out << "warning [" << r.model << "]: " << w << "\n";
  if (!f.csv.empty()) {
    auto o = open_out(f.csv);
    write_report_csv(all, o);
  }
  if (!f.table.empty()) {
    auto o = open_out(f.table);
    write_report_table(all, o);
  }
  if (!f.details.empty()) {
    auto o = open_out(f.details);
    write_process_details(all, o);
  }
  return 0;
}

std::atomic<bool> g_stop{false};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"procguard: run-time malicious process detection and kill engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "procguard 1.0");
  app.footer("exit codes: 0 ok, 2 configuration error, 3 missing or invalid input, 4 sampler failure");

  // generate
  auto* gen = app.add_subcommand("generate", "write seeded synthetic scenarios (traces + ground truth)");
  std::string library_path, gen_out, benign = "5", malicious = "1";
  int count = 1;
  ScenarioConfig scenario_config;
  gen->add_option("--library", library_path, "archetype library (default: built-in)");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--scenarios", count, "number of scenarios")->capture_default_str();
  gen->add_option("--benign", benign, "benign apps per scenario, N or A-B")->capture_default_str();
  gen->add_option("--malicious", malicious, "malicious apps per scenario, N or A-B")->capture_default_str();
  gen->add_option("--stagger", scenario_config.stagger_s, "seconds between launches")->capture_default_str();
  gen->add_option("--duration", scenario_config.duration_s, "scenario length in ticks")->capture_default_str();
  gen->add_option("--max-processes", scenario_config.max_processes)->capture_default_str();
  gen->add_option("--seed", scenario_config.seed)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a GRU classifier");
  std::string traces_path, model_out, log_path;
  HyperFlags train_flags;
  tr->add_option("--traces", traces_path, "trace file or scenario directory")->required();
  tr->add_option("--out", model_out, "model file")->required();
  tr->add_option("--log", log_path, "per-epoch loss CSV");
  train_flags.add(*tr);

  // search
  auto* se = app.add_subcommand("search", "random hyperparameter search");
  std::string validation_dir, objective = "online", grid_text = "0.5:1:51";
  int trials = 10;
  std::uint64_t search_seed = 0;
  SearchSpace space;
  HyperFlags search_flags;
  se->add_option("--traces", traces_path, "training trace file or scenario directory")->required();
  se->add_option("--validation", validation_dir, "validation scenario directory")->required();
  se->add_option("--out", model_out, "best model file")->required();
  se->add_option("--log", log_path, "per-trial CSV");
  se->add_option("--trials", trials)->capture_default_str();
  se->add_option("--objective", objective, "offline or online")->capture_default_str();
  se->add_option("--grid", grid_text, "thresholds for the online objective")->capture_default_str();
  se->add_option("--seed", search_seed)->capture_default_str();
  se->add_option("--hidden-max", space.hidden_max)->capture_default_str();
  se->add_option("--depth-max", space.depth_max)->capture_default_str();
  se->add_option("--epochs-max", space.epochs_max)->capture_default_str();
  se->add_option("--window-max", space.window_max)->capture_default_str();
  se->add_option("--dropout-tenths-max", space.dropout_tenths_max)->capture_default_str();
  search_flags.add_loss(*se);

  // sweep
  auto* sw = app.add_subcommand("sweep", "calibrate the decision threshold on validation scenarios");
  std::string model_path, sweep_csv;
  sw->add_option("--model", model_path, "GRU model file")->required();
  sw->add_option("--validation", validation_dir, "validation scenario directory")->required();
  sw->add_option("--grid", grid_text, "lo:hi:steps or a comma list")->capture_default_str();
  sw->add_option("--csv", sweep_csv, "sweep table output");
  sw->add_option("--out", model_out, "calibrated model (default: overwrite --model)");

  // distill
  auto* di = app.add_subcommand("distill", "distill a calibrated GRU into a random forest");
  DistillConfig distill_config;
  std::string report_path;
  bool direct = false;
  di->add_option("--model", model_path, "calibrated teacher");
  di->add_option("--traces", traces_path, "training trace file or scenario directory")->required();
  di->add_option("--out", model_out, "forest file")->required();
  di->add_option("--report", report_path, "agreement report (JSON)");
  di->add_option("--trees", distill_config.forest.n_trees)->capture_default_str();
  di->add_option("--max-depth", distill_config.forest.max_depth)->capture_default_str();
  di->add_option("--min-leaf", distill_config.forest.min_samples_leaf)->capture_default_str();
  di->add_option("--seed", distill_config.forest.seed)->capture_default_str();
  di->add_option("--holdout", distill_config.holdout_fraction, "share of traces held out")->capture_default_str();
  di->add_option("--stride", distill_config.position_stride, "keep every n-th window position")->capture_default_str();
  di->add_flag("--direct", direct, "train on ground-truth labels instead of a teacher");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score models on scenarios with killing in the loop");
  EvaluateFlags eval;
  ev->add_option("--scenarios", eval.scenarios, "scenario directory")->required();
  ev->add_option("--split", eval.split)->capture_default_str();
  ev->add_option("--offline", eval.offline, "MSE-trained GRU");
  ev->add_option("--online", eval.online, "GRU trained with the kill-aware loss");
  ev->add_option("--distilled", eval.distilled, "distilled forest");
  ev->add_option("--direct", eval.direct, "forest trained on ground truth");
  ev->add_option("--csv", eval.csv);
  ev->add_option("--table", eval.table);
  ev->add_option("--details", eval.details, "per-process JSONL");
  ev->add_flag("--offline-verdicts", eval.offline_verdicts, "also report mean-score verdicts for the GRUs");
  ev->add_flag("--by-application", eval.by_application, "accuracy per application instead of per process");

  // monitor
  auto* mo = app.add_subcommand("monitor", "watch this host at 1 Hz (dry run unless --enforce)");
  std::string forest_path, allowlist_path, events_path, proc_root = "/proc";
  MonitorOptions monitor;
  int interval_ms = 1000;
  Pid scope_pid = 0;
  bool no_priority = false;
  mo->add_option("--forest", forest_path, "distilled forest")->required();
  mo->add_option("--ticks", monitor.max_ticks, "stop after N sweeps (0: until interrupted)")->capture_default_str();
  mo->add_option("--interval-ms", interval_ms)->capture_default_str();
  mo->add_flag("--enforce", monitor.enforce, "actually kill flagged processes");
  mo->add_option("--allowlist", allowlist_path, "pids or process names never to kill");
  mo->add_option("--scope-pid", scope_pid, "only watch this process and its descendants");
  mo->add_option("--events", events_path, "JSONL event log");
  mo->add_option("--proc-root", proc_root)->capture_default_str();
  mo->add_flag("--no-priority", no_priority, "skip the high-priority scheduling request");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // Help and version requests come through here with exit code 0.
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*gen) return cmd_generate(library_path, gen_out, count, benign, malicious, scenario_config, out);

    if (*tr) {
      train_flags.resolve();
      validate(train_flags.hp);
      const auto traces = load_traces(traces_path);
      TrainingLog log;
      const auto model = train(traces, train_flags.hp, train_flags.training(), &log);
      save(model, model_out);
      if (!log_path.empty()) write_training_log(log_path, log);
      out << "trained on " << log.windows_per_class << " windows per class for " << train_flags.hp.epochs
          << " epochs";
      if (!log.epoch_loss.empty()) out << ", final loss " << fixed(log.epoch_loss.back(), 6);
      out << "\n";
      return 0;
    }

    if (*se) {
      search_flags.resolve();
      if (trials < 1) throw ConfigError("need at least one trial");
      if (!space.within_full_space()) throw ConfigError("search space exceeds the supported ranges");
      const auto traces = load_traces(traces_path);
      auto validation = load_scenarios(validation_dir);
      Objective fn;
      if (objective == "offline")
        fn = offline_objective(std::move(validation));
      else if (objective == "online")
        fn = online_objective(std::move(validation), parse_grid(grid_text));
      else
        throw ConfigError("objective must be offline or online");
      SearchOptions options;
      options.seed = search_seed;
      options.loss_kind = search_flags.hp.loss_kind;
      options.loss_variant = search_flags.hp.loss_variant;
      options.training = search_flags.training();
      const auto result = random_search(space, trials, traces, fn, options);
      save(result.best_model, model_out);
      if (!log_path.empty()) {
        auto o = open_out(log_path);
        o << "trial,hidden,depth,batch,epochs,dropout,window,seed,objective\n";
        for (const auto& t : result.trials)
          o << t.index << ',' << t.hyper.hidden_neurons << ',' << t.hyper.depth << ',' << t.hyper.batch_size << ','
            << t.hyper.epochs << ',' << t.hyper.dropout_rate << ',' << t.hyper.window_size << ',' << t.hyper.seed
            << ',' << std::setprecision(17) << t.objective << '\n';
      }
      out << "trials " << result.trials.size() << " best " << result.best_index << " objective "
          << fixed(result.trials[result.best_index].objective) << "\n";
      return 0;
    }

    if (*sw) {
      const auto grid = parse_grid(grid_text);
      auto model = load_gru(model_path);
      const auto validation = load_scenarios(validation_dir);
      const auto scored = score_scenarios(validation, model);
      const auto sweep = threshold_sweep(scored, grid);
      if (!sweep_csv.empty()) {
        auto o = open_out(sweep_csv);
        write_sweep_csv(sweep, o);
      }
      write_sweep_csv(sweep, out);
      model.threshold = sweep.best_threshold;
      save(model, model_out.empty() ? model_path : model_out);
      out << "best threshold " << fixed(sweep.best_threshold) << "\n";
      return 0;
    }

    if (*di) {
      const auto traces = load_traces(traces_path);
      ForestClassifier forest;
      nlohmann::ordered_json report;
      if (direct) {
        forest = train_forest_direct(traces, distill_config.forest);
        const auto rows = ground_truth_label(traces);
        report = {{"mode", "direct"}, {"rows", rows.size()}, {"train_accuracy", agreement(forest, rows)}};
        out << "direct forest: " << forest.trees.size() << " trees, training accuracy "
            << fixed(agreement(forest, rows)) << "\n";
      } else {
        if (model_path.empty()) throw ConfigError("distill needs --model unless --direct is given");
        const auto teacher = load_gru(model_path);
        DistillReport r;
        forest = distill(teacher, traces, distill_config, &r);
        report = {{"mode", "distilled"},
                  {"teacher_threshold", teacher.threshold},
                  {"train_rows", r.train_rows},
                  {"train_positive", r.train_positive},
                  {"train_agreement", r.train_agreement},
                  {"holdout_rows", r.holdout_rows},
                  {"holdout_positive", r.holdout_positive},
                  {"holdout_agreement", r.holdout_agreement}};
        out << "student: " << forest.trees.size() << " trees, hold-out agreement "
            << fixed(r.holdout_rows ? r.holdout_agreement : r.train_agreement) << " on "
            << (r.holdout_rows ? r.holdout_rows : r.train_rows) << " snapshots\n";
      }
      save(forest, model_out);
      if (!report_path.empty()) open_out(report_path) << report.dump(2) << "\n";
      return 0;
    }

    if (*ev) return cmd_evaluate(eval, out);

    if (*mo) {
      if (interval_ms <= 0) throw ConfigError("interval must be positive");
      const auto forest = load_forest(forest_path);
      monitor.interval = std::chrono::milliseconds(interval_ms);
      monitor.sampler.proc_root = proc_root;
      monitor.request_high_priority = !no_priority;
      if (scope_pid > 0) monitor.scope_pid = scope_pid;
      if (!allowlist_path.empty()) monitor.allowlist = load_allowlist(allowlist_path);
      std::ofstream events;
      if (!events_path.empty()) events = open_out(events_path);
      ForestDetector detector(forest);
      SignalKiller killer;
      g_stop = false;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      out << (monitor.enforce ? "enforcing" : "dry run") << ": sampling every " << interval_ms << " ms\n";
      const auto summary =
          run_monitor(monitor, detector, killer, out, events_path.empty() ? nullptr : &events, &g_stop);
      for (const auto& w : summary.warnings) err << "warning: " << w << "\n";
      out << "ticks " << summary.ticks << " mean interval " << fixed(summary.mean_interval(), 3) << " s, "
          << (monitor.enforce ? summary.kills : summary.would_kill) << (monitor.enforce ? " killed" : " would kill")
          << ", " << summary.skipped << " exempt\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kInput);
  } catch (const std::exception& e) {
    // A bug, not a user error: keep it apart from the documented codes.
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace procguard
