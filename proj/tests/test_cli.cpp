#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "procguard/error.hpp"
#include "procguard/monitor.hpp"
#include "procguard/scenario.hpp"
#include "support.hpp"

using namespace procguard;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.rc = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// Fast settings shared by the pipeline tests.
std::vector<std::string> small_training() {
  return {"--epochs", "2", "--window", "2", "--hidden", "50", "--per-class", "300", "--seed", "5"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Corpora generated once per process.
const fs::path& corpus() {
  static const fs::path dir = [] {
    auto d = testing::temp_dir("cli_corpus");
    REQUIRE(cli({"generate", "--out", (d / "tr").string(), "--scenarios", "3", "--seed", "1"}).rc == 0);
    REQUIRE(cli({"generate", "--out", (d / "va").string(), "--scenarios", "2", "--seed", "2"}).rc == 0);
    REQUIRE(cli({"generate", "--out", (d / "te").string(), "--scenarios", "2", "--seed", "3"}).rc == 0);
    return d;
  }();
  return dir;
}

// Fabricated /proc: each entry is pid, ppid, name.
void fake_proc(const fs::path& root, const std::vector<std::tuple<Pid, Pid, std::string>>& procs) {
  write_file(root / "uptime", "5000.00 100.00\n");
  for (const auto& [pid, ppid, name] : procs) {
    const auto dir = root / std::to_string(pid);
    std::ostringstream stat;
    stat << pid << " (" << name << ") S " << ppid << " 0 0 0 0 0 0 0 0 0 10 5 0 0 20 0 1 0 100 0 0";
    write_file(dir / "stat", stat.str());
    write_file(dir / "status", "Name:\t" + name + "\nVmSize:\t 100 kB\nVmRSS:\t 50 kB\nVmSwap:\t 0 kB\n");
    write_file(dir / "io", "syscr: 1\nsyscw: 1\nread_bytes: 0\nwrite_bytes: 0\n");
    write_file(dir / "comm", name + "\n");
    write_file(dir / "cmdline", name);
    fs::create_directories(dir / "fd");
  }
}

class FlagPids : public Detector {
 public:
  explicit FlagPids(std::set<Pid> pids) : pids_(std::move(pids)) {}
  double score(const ProcessSnapshot& s) override { return pids_.count(s.process_id) ? 1.0 : 0.0; }

 private:
  std::set<Pid> pids_;
};

class RecordingKiller : public ProcessKiller {
 public:
  bool terminate(Pid pid, std::string&) override {
    killed.push_back(pid);
    return true;
  }
  std::vector<Pid> killed;
};

MonitorOptions fast_monitor(const fs::path& root, std::int64_t ticks = 2) {
  MonitorOptions o;
  o.sampler.proc_root = root;
  o.interval = std::chrono::milliseconds(20);
  o.max_ticks = ticks;
  o.self_pid = 999999;
  o.request_high_priority = false;
  return o;
}

}  // namespace

TEST_CASE("generate") {
  const auto dir = testing::temp_dir("cli_generate");
  SUBCASE("fixed seeds give identical files") {
    REQUIRE(cli({"generate", "--out", (dir / "a").string(), "--scenarios", "2", "--seed", "11"}).rc == 0);
    REQUIRE(cli({"generate", "--out", (dir / "b").string(), "--scenarios", "2", "--seed", "11"}).rc == 0);
    CHECK(slurp(dir / "a" / "traces.jsonl") == slurp(dir / "b" / "traces.jsonl"));
    CHECK(slurp(dir / "a" / "truth.json") == slurp(dir / "b" / "truth.json"));
    REQUIRE(cli({"generate", "--out", (dir / "c").string(), "--scenarios", "2", "--seed", "12"}).rc == 0);
    CHECK(slurp(dir / "a" / "traces.jsonl") != slurp(dir / "c" / "traces.jsonl"));
  }
  SUBCASE("a full-size scenario") {
    const auto r = cli({"generate", "--out", (dir / "big").string(), "--scenarios", "1", "--benign", "34",
                        "--malicious", "2", "--seed", "4"});
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("scenarios 1 apps 36") != std::string::npos);
  }
  SUBCASE("bad inputs") {
    write_file(dir / "bad_library.json", "{\"not\": \"a library\"}");
    CHECK(cli({"generate", "--out", (dir / "x").string(), "--library", (dir / "bad_library.json").string()}).rc == 2);
    CHECK(cli({"generate", "--out", (dir / "x").string(), "--benign", "9-3"}).rc == 2);
    CHECK(cli({"generate"}).rc == 2);
    CHECK(cli({"frobnicate"}).rc == 2);
    CHECK(cli({"--help"}).rc == 0);
  }
}

TEST_CASE("train") {
  const auto dir = testing::temp_dir("cli_train");
  const auto tr = (corpus() / "tr").string();
  SUBCASE("fixed seed gives an identical model file") {
    REQUIRE(cli(concat({"train", "--traces", tr, "--out", (dir / "a.json").string()}, small_training())).rc == 0);
    REQUIRE(cli(concat({"train", "--traces", tr, "--out", (dir / "b.json").string()}, small_training())).rc == 0);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  }
  SUBCASE("zero epochs writes the initial model") {
    const auto r = cli({"train", "--traces", tr, "--out", (dir / "z.json").string(), "--epochs", "0", "--hidden",
                        "50", "--window", "2", "--log", (dir / "z.csv").string()});
    REQUIRE(r.rc == 0);
    const auto model = load_gru((dir / "z.json").string());
    Hyperparameters hp;
    hp.epochs = 0;
    hp.hidden_neurons = 50;
    hp.window_size = 2;
    CHECK(model.params == GruClassifier::initialise(hp, model.stats).params);
    CHECK(slurp(dir / "z.csv") == "epoch,loss\n");
  }
  SUBCASE("errors") {
    CHECK(cli({"train", "--traces", (dir / "missing").string(), "--out", (dir / "m.json").string()}).rc == 3);
    CHECK(cli({"train", "--traces", tr, "--out", (dir / "m.json").string(), "--hidden", "10"}).rc == 2);
    CHECK(cli({"train", "--traces", tr, "--out", (dir / "m.json").string(), "--loss", "hinge"}).rc == 2);
    // Benign-only traces.
    std::ifstream in(corpus() / "tr" / "traces.jsonl");
    std::ofstream benign(dir / "benign.jsonl");
    for (std::string line; std::getline(in, line);)
      if (line.find("\"benign\"") != std::string::npos) benign << line << '\n';
    benign.close();
    CHECK(cli(concat({"train", "--traces", (dir / "benign.jsonl").string(), "--out", (dir / "m.json").string()},
                     small_training()))
              .rc == 3);
  }
}

TEST_CASE("sweep, distill and evaluate") {
  const auto dir = testing::temp_dir("cli_pipeline");
  const auto tr = (corpus() / "tr").string(), va = (corpus() / "va").string(), te = (corpus() / "te").string();
  const auto model = (dir / "online.json").string();
  REQUIRE(cli(concat({"train", "--traces", tr, "--out", model, "--loss", "modified"}, small_training())).rc == 0);

  SUBCASE("a one-point grid gives one row") {
    const auto r = cli({"sweep", "--model", model, "--validation", va, "--grid", "0.5", "--csv",
                        (dir / "one.csv").string(), "--out", (dir / "one.json").string()});
    REQUIRE(r.rc == 0);
    const auto csv = slurp(dir / "one.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(load_gru((dir / "one.json").string()).threshold == 0.5);
  }
  SUBCASE("the FPR column never rises") {
    REQUIRE(cli({"sweep", "--model", model, "--validation", va, "--csv", (dir / "s.csv").string(), "--out",
                 (dir / "cal.json").string()})
                .rc == 0);
    std::ifstream in(dir / "s.csv");
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> cols;
    {
      std::stringstream h(header);
      for (std::string c; std::getline(h, c, ',');) cols.push_back(c);
    }
    const auto fpr_col = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "fpr") - cols.begin());
    REQUIRE(fpr_col < cols.size());
    double last = 2;
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream row(line);
      std::string cell;
      for (std::size_t i = 0; i <= fpr_col; ++i) std::getline(row, cell, ',');
      CHECK(std::stod(cell) <= last);
      last = std::stod(cell);
      ++rows;
    }
    CHECK(rows == 51);
  }
  SUBCASE("distill then evaluate") {
    REQUIRE(cli({"sweep", "--model", model, "--validation", va, "--out", (dir / "cal.json").string()}).rc == 0);
    const auto r = cli({"distill", "--model", (dir / "cal.json").string(), "--traces", tr, "--out",
                        (dir / "student.json").string(), "--report", (dir / "report.json").string(), "--trees",
                        "20"});
    REQUIRE(r.rc == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    const double agreement = report.at("holdout_agreement");
    CHECK(agreement >= 0.0);
    CHECK(agreement <= 1.0);
    REQUIRE(cli({"distill", "--direct", "--traces", tr, "--out", (dir / "direct.json").string(), "--trees", "20"}).rc ==
            0);
    CHECK(cli({"distill", "--traces", tr, "--out", (dir / "x.json").string()}).rc == 2);  // no teacher

    const auto ev = cli({"evaluate", "--scenarios", te, "--online", (dir / "cal.json").string(), "--distilled",
                         (dir / "student.json").string(), "--direct", (dir / "direct.json").string(), "--csv",
                         (dir / "eval.csv").string()});
    REQUIRE(ev.rc == 0);
    const auto csv = slurp(dir / "eval.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 2 GRU rows + 2 forests
    CHECK(ev.out.find("prevented") != std::string::npos);
    CHECK(cli({"evaluate", "--scenarios", te}).rc == 2);  // nothing to evaluate
    // Scenario directories need their ground-truth sidecar.
    write_file(dir / "lonely" / "traces.jsonl", slurp(corpus() / "te" / "traces.jsonl"));
    CHECK(cli({"evaluate", "--scenarios", (dir / "lonely").string(), "--direct", (dir / "direct.json").string()}).rc ==
          3);
    CHECK(cli({"sweep", "--model", model, "--validation", (dir / "lonely").string()}).rc == 3);
  }
}

TEST_CASE("allowlist parsing") {
  const auto list = parse_allowlist("# keep these\n42\n  sshd  \n\n7 # trailing\nsystemd-journald\n");
  CHECK(list.pids == std::set<Pid>{7, 42});
  CHECK(list.names == std::set<std::string>{"sshd", "systemd-journald"});
  CHECK(parse_allowlist("").empty());
  CHECK_THROWS_AS(load_allowlist("/nonexistent/allow"), InputError);
}

TEST_CASE("monitor") {
  const auto root = testing::temp_dir("monitor_proc");
  // 500 -> 501 -> 502, 500 -> 503 (named "keeper"), plus unrelated 600 and init.
  fake_proc(root, {{1, 0, "init"}, {500, 1, "parent"}, {501, 500, "child"}, {502, 501, "grandchild"},
                   {503, 500, "keeper"}, {600, 1, "other"}});
  RecordingKiller killer;
  std::ostringstream out, events;

  SUBCASE("a dry run never calls the killer") {
    FlagPids detector({500, 600});
    const auto summary = run_monitor(fast_monitor(root), detector, killer, out, &events);
    CHECK(killer.killed.empty());
    CHECK(summary.would_kill == 5);  // the 500 subtree and 600, once each
    CHECK(out.str().find("would kill pid 502") != std::string::npos);
    CHECK(events.str().find("\"would_kill\"") != std::string::npos);
  }
  SUBCASE("enforcement kills the flagged subtree once") {
    FlagPids detector({501});
    auto options = fast_monitor(root, 3);
    options.enforce = true;
    const auto summary = run_monitor(options, detector, killer, out, &events);
    CHECK(killer.killed == std::vector<Pid>{501, 502});
    CHECK(summary.kills == 2);
    CHECK(events.str().find("\"cascade\"") != std::string::npos);
  }
  SUBCASE("allowlisted, init and self are never killed") {
    FlagPids detector({1, 500, 600});
    auto options = fast_monitor(root);
    options.enforce = true;
    options.allowlist = parse_allowlist("keeper\n501\n");
    options.self_pid = 600;
    const auto summary = run_monitor(options, detector, killer, out, &events);
    for (Pid p : killer.killed) {
      CHECK(p != 1);
      CHECK(p != 501);
      CHECK(p != 503);
      CHECK(p != 600);
    }
    CHECK(killer.killed == std::vector<Pid>{500, 502});
    CHECK(summary.skipped == 4);
    CHECK(out.str().find("exempt pid 600 (self)") != std::string::npos);
    CHECK(out.str().find("exempt pid 503 (allowlist)") != std::string::npos);
  }
  SUBCASE("scope limits the watch to one subtree") {
    FlagPids detector({500, 600});
    auto options = fast_monitor(root);
    options.enforce = true;
    options.scope_pid = 501;
    run_monitor(options, detector, killer, out, &events);
    CHECK(killer.killed.empty());  // neither 500 nor 600 is inside the scope
    FlagPids inner({502});
    run_monitor(options, inner, killer, out, &events);
    CHECK(killer.killed == std::vector<Pid>{502});
  }
  SUBCASE("failed kills are reported, not fatal") {
    class Refuse : public ProcessKiller {
     public:
      bool terminate(Pid, std::string& error) override {
        error = "denied";
        return false;
      }
    } refuse;
    FlagPids detector({600});
    auto options = fast_monitor(root);
    options.enforce = true;
    const auto summary = run_monitor(options, detector, refuse, out, &events);
    CHECK(summary.kill_failures == 1);
    CHECK(summary.warnings.back().find("denied") != std::string::npos);
  }
  SUBCASE("a short interval keeps its cadence") {
    FlagPids detector({});
    auto options = fast_monitor(root, 11);
    options.interval = std::chrono::milliseconds(100);
    const auto summary = run_monitor(options, detector, killer, out);
    CHECK(summary.ticks == 11);
    CHECK(summary.mean_interval() == doctest::Approx(0.1).epsilon(0.1));
  }
  SUBCASE("bad options") {
    FlagPids detector({});
    auto options = fast_monitor(root);
    options.interval = std::chrono::milliseconds(0);
    CHECK_THROWS_AS(run_monitor(options, detector, killer, out), ConfigError);
    options = fast_monitor(root / "missing");
    CHECK_THROWS_AS(run_monitor(options, detector, killer, out), SamplerError);
  }
}

TEST_CASE("monitor at the default 1 Hz") {
  const auto root = testing::temp_dir("monitor_hz");
  fake_proc(root, {{700, 1, "idle"}});
  FlagPids detector({});
  RecordingKiller killer;
  std::ostringstream out;
  auto options = fast_monitor(root, 4);
  options.interval = std::chrono::milliseconds(1000);
  const auto summary = run_monitor(options, detector, killer, out);
  CHECK(summary.mean_interval() == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("monitor subcommand") {
  const auto dir = testing::temp_dir("cli_monitor");
  const auto root = dir / "proc";
  fake_proc(root, {{800, 1, "a"}, {801, 800, "b"}});
  const auto tr = (corpus() / "tr").string();
  REQUIRE(cli({"distill", "--direct", "--traces", tr, "--out", (dir / "f.json").string(), "--trees", "5"}).rc == 0);
  const auto r = cli({"monitor", "--forest", (dir / "f.json").string(), "--ticks", "2", "--interval-ms", "20",
                      "--proc-root", root.string(), "--no-priority", "--events", (dir / "ev.jsonl").string()});
  CHECK(r.rc == 0);
  CHECK(r.out.find("dry run") != std::string::npos);
  const auto events = slurp(dir / "ev.jsonl");
  CHECK(std::count(events.begin(), events.end(), '\n') >= 2);
  CHECK(cli({"monitor", "--forest", (dir / "f.json").string(), "--ticks", "1", "--proc-root",
             (dir / "nope").string(), "--no-priority"})
            .rc == 4);
  CHECK(cli({"monitor", "--forest", (dir / "missing.json").string(), "--ticks", "1"}).rc == 3);
  CHECK(cli({"monitor", "--forest", (dir / "f.json").string(), "--interval-ms", "0", "--proc-root", root.string()})
            .rc == 2);
}
