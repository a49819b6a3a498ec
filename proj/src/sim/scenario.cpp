#include "procguard/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "procguard/error.hpp"
#include "procguard/trace_io.hpp"

namespace procguard {

void validate(const ScenarioConfig& config) {
  if (config.benign_app_count < 1 || config.benign_app_count > 35)
    throw ConfigError("benign_app_count must lie in [1, 35]");
  if (config.malicious_app_count < 1 || config.malicious_app_count > 2)
    throw ConfigError("malicious_app_count must lie in [1, 2]");
  if (config.stagger_s < 0) throw ConfigError("stagger_s must be >= 0");
  if (config.duration_s < 1) throw ConfigError("duration_s must be >= 1");
  if (config.max_processes < 1) throw ConfigError("max_processes must be >= 1");
  const Tick last_launch = config.stagger_s * (config.benign_app_count + config.malicious_app_count - 1);
  if (last_launch >= config.duration_s) throw ConfigError("staggered launches do not fit in the scenario duration");
}

const AppRecord* Scenario::find_app(const std::string& app_id) const {
  for (const auto& a : apps)
    if (a.app_id == app_id) return &a;
  return nullptr;
}

const ProcessPlan* Scenario::find_process(Pid pid) const {
  for (const auto& p : processes)
    if (p.pid == pid) return &p;
  return nullptr;
}

namespace {

// Everything except CPU percentages is integral on a real host.
bool is_integral(std::size_t feature) {
  return feature != index(Feature::kCpuSystemPct) && feature != index(Feature::kCpuUserPct);
}

struct Candidate {
  std::size_t app = 0;
  std::size_t tmpl = 0;
  Tick birth = 0;
  Tick end = 0;
  int parent_candidate = -1;
};

void materialise(ProcessPlan& plan, const ProcessTemplate& tmpl, const std::vector<ProcessPlan>& all,
                 std::mt19937_64& rng) {
  const Tick duration = plan.unkilled_duration();
  std::vector<const ProcessPlan*> children;
  for (const auto& p : all)
    if (p.parent && *p.parent == plan.pid) children.push_back(&p);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> burst_left(tmpl.bursts.size(), 0);
  plan.features.assign(static_cast<std::size_t>(duration), FeatureVector{});
  for (Tick age = 1; age <= duration; ++age) {
    auto& v = plan.features[static_cast<std::size_t>(age - 1)];
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto& f = tmpl.profile[i];
      const double noise = gauss(rng);
      if (f.baseline == 0) continue;
      const double trend = std::max(0.0, 1.0 + f.drift * static_cast<double>(age));
      v[i] = f.baseline * trend * std::max(0.0, 1.0 + f.jitter * noise);
    }
    for (std::size_t b = 0; b < tmpl.bursts.size(); ++b) {
      const auto& burst = tmpl.bursts[b];
      const double draw = unit(rng);
      if (burst_left[b] == 0 && draw < burst.probability) burst_left[b] = burst.duration_s;
      if (burst_left[b] > 0) {
        for (auto feature : burst.features) v[index(feature)] *= burst.multiplier;
        --burst_left[b];
      }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      if (is_integral(i)) v[i] = std::round(v[i]);

    const Tick tick = plan.birth + age;
    double live_children = 0, max_child = 0;
    for (const auto* c : children)
      if (c->birth <= tick && tick < c->end) {
        live_children += 1;
        max_child = std::max(max_child, static_cast<double>(c->pid));
      }
    v[index(Feature::kChildProcessCount)] = live_children;
    v[index(Feature::kMaxChildProcessId)] = max_child;
    v[index(Feature::kSecondsSinceStart)] = static_cast<double>(age);
  }
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& config, const ArchetypeLibrary& library,
                           const std::string& scenario_id) {
  validate(config);
  validate(library);
  if (library.archetypes.empty()) throw ConfigError("archetype library is empty");
  std::vector<const AppArchetype*> pools[2];
  for (const auto& a : library.archetypes) pools[as_int(a.label)].push_back(&a);
  if (pools[0].empty() || pools[1].empty())
    throw ConfigError("archetype library needs both benign and malicious archetypes");

  std::mt19937_64 rng(config.seed);
  auto pick = [&](int label) {
    const auto& pool = pools[label];
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };
  std::vector<const AppArchetype*> chosen;
  for (int i = 0; i < config.benign_app_count; ++i) chosen.push_back(pick(0));
  for (int i = 0; i < config.malicious_app_count; ++i) chosen.push_back(pick(1));
  std::shuffle(chosen.begin(), chosen.end(), rng);

  Scenario scenario;
  scenario.id = scenario_id;
  scenario.config = config;

  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < chosen.size(); ++a) {
    const AppArchetype& arch = *chosen[a];
    char app_id[64];
    std::snprintf(app_id, sizeof app_id, "%s-a%02zu", scenario_id.c_str(), a);
    const Tick launch = static_cast<Tick>(a) * config.stagger_s;
    scenario.apps.push_back({app_id, arch.name, arch.label, launch, arch.damage});

    std::vector<int> slot(arch.processes.size(), -1);
    for (std::size_t t = 0; t < arch.processes.size(); ++t) {
      const auto& tmpl = arch.processes[t];
      std::uniform_int_distribution<Tick> dur(tmpl.duration_min_s, tmpl.duration_max_s);
      const Tick length = dur(rng);
      Candidate c;
      c.app = a;
      c.tmpl = t;
      if (tmpl.parent < 0) {
        c.birth = launch;
      } else {
        const int p = slot[static_cast<std::size_t>(tmpl.parent)];
        if (p < 0) continue;
        const Candidate& parent = candidates[static_cast<std::size_t>(p)];
        c.birth = parent.birth + tmpl.spawn_offset_s;
        // A process cannot spawn after its parent has exited.
        if (c.birth >= parent.end) continue;
        c.parent_candidate = p;
      }
      c.end = std::min(c.birth + length, config.duration_s);
      if (c.end - c.birth < 1) continue;
      slot[t] = static_cast<int>(candidates.size());
      candidates.push_back(c);
    }
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& a = candidates[x];
    const auto& b = candidates[y];
    if (a.birth != b.birth) return a.birth < b.birth;
    if (a.app != b.app) return a.app < b.app;
    return a.tmpl < b.tmpl;
  });

  std::vector<Pid> pid_of(candidates.size(), 0);
  std::vector<const ProcessTemplate*> tmpl_of;
  Pid next_pid = 1000;
  for (std::size_t i : order) {
    const auto& c = candidates[i];
    if (c.parent_candidate >= 0 && pid_of[static_cast<std::size_t>(c.parent_candidate)] == 0) continue;
    if (static_cast<int>(scenario.processes.size()) >= config.max_processes) continue;
    const AppArchetype& arch = *chosen[c.app];
    ProcessPlan plan;
    plan.pid = next_pid;
    next_pid += 4;
    pid_of[i] = plan.pid;
    if (c.parent_candidate >= 0) plan.parent = pid_of[static_cast<std::size_t>(c.parent_candidate)];
    plan.app_id = scenario.apps[c.app].app_id;
    plan.label = arch.label;
    plan.birth = c.birth;
    plan.end = c.end;
    plan.damaging = arch.processes[c.tmpl].damaging;
    scenario.processes.push_back(std::move(plan));
    tmpl_of.push_back(&arch.processes[c.tmpl]);
  }

  for (std::size_t i = 0; i < scenario.processes.size(); ++i)
    materialise(scenario.processes[i], *tmpl_of[i], scenario.processes, rng);
  return scenario;
}

std::vector<ProcessTrace> scenario_traces(const Scenario& scenario) {
  std::vector<ProcessTrace> traces;
  traces.reserve(scenario.processes.size());
  for (const auto& p : scenario.processes) {
    ProcessTrace t;
    t.process_id = p.pid;
    t.parent_id = p.parent;
    t.app_id = p.app_id;
    t.label = p.label;
    t.unkilled_duration_s = p.unkilled_duration();
    for (std::size_t k = 0; k < p.features.size(); ++k)
      t.snapshots.push_back({p.pid, p.parent, p.app_id, p.birth + 1 + static_cast<Tick>(k), p.features[k]});
    traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<ProcessTrace> scenario_traces(const std::vector<Scenario>& scenarios) {
  std::vector<ProcessTrace> all;
  for (const auto& s : scenarios) {
    auto t = scenario_traces(s);
    all.insert(all.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return all;
}

namespace {

using ordered_json = nlohmann::ordered_json;
constexpr const char* kTruthFormat = "procguard-truth/1";

}  // namespace

std::string serialize_truth(const std::vector<Scenario>& scenarios) {
  ordered_json root;
  root["format"] = kTruthFormat;
  ordered_json list = ordered_json::array();
  for (const auto& s : scenarios) {
    ordered_json js;
    js["id"] = s.id;
    js["config"] = {{"benign_app_count", s.config.benign_app_count},
                    {"malicious_app_count", s.config.malicious_app_count},
                    {"stagger_s", s.config.stagger_s},
                    {"duration_s", s.config.duration_s},
                    {"seed", s.config.seed},
                    {"max_processes", s.config.max_processes}};
    ordered_json apps = ordered_json::array();
    for (const auto& a : s.apps) {
      ordered_json ja;
      ja["app_id"] = a.app_id;
      ja["archetype"] = a.archetype;
      ja["label"] = std::string(to_string(a.label));
      ja["launch_tick"] = a.launch_tick;
      if (a.damage)
        ja["damage"] = {{"onset_delay_s", a.damage->onset_delay_s}, {"files_per_second", a.damage->files_per_second}};
      else
        ja["damage"] = nullptr;
      apps.push_back(std::move(ja));
    }
    js["apps"] = std::move(apps);
    ordered_json procs = ordered_json::array();
    for (const auto& p : s.processes) {
      ordered_json jp;
      jp["pid"] = p.pid;
      jp["ppid"] = p.parent ? ordered_json(*p.parent) : ordered_json(nullptr);
      jp["app_id"] = p.app_id;
      jp["label"] = std::string(to_string(p.label));
      jp["birth"] = p.birth;
      jp["end"] = p.end;
      jp["damaging"] = p.damaging;
      procs.push_back(std::move(jp));
    }
    js["processes"] = std::move(procs);
    list.push_back(std::move(js));
  }
  root["scenarios"] = std::move(list);
  return root.dump(1) + "\n";
}

void write_scenarios(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
  write_traces(scenario_traces(scenarios), dir / kTracesFile);
  std::ofstream out(dir / kTruthFile, std::ios::binary);
  if (!out) throw InputError("cannot write " + (dir / kTruthFile).string());
  out << serialize_truth(scenarios);
}

std::vector<Scenario> read_scenarios(const std::filesystem::path& dir) {
  const auto truth_path = dir / kTruthFile;
  std::ifstream in(truth_path, std::ios::binary);
  if (!in) throw InputError("missing ground-truth sidecar " + truth_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("sidecar is not valid JSON: ") + e.what());
  }
  if (root.value("format", "") != kTruthFormat)
    throw InputError(std::string("sidecar is not tagged ") + kTruthFormat);

  const auto traces = read_traces(dir / kTracesFile);
  std::map<std::pair<std::string, Pid>, const ProcessTrace*> by_key;
  for (const auto& t : traces) by_key[{t.app_id, t.process_id}] = &t;

  std::vector<Scenario> scenarios;
  try {
    for (const auto& js : root.at("scenarios")) {
      Scenario s;
      s.id = js.at("id").get<std::string>();
      const auto& jc = js.at("config");
      s.config.benign_app_count = jc.at("benign_app_count").get<int>();
      s.config.malicious_app_count = jc.at("malicious_app_count").get<int>();
      s.config.stagger_s = jc.at("stagger_s").get<Tick>();
      s.config.duration_s = jc.at("duration_s").get<Tick>();
      s.config.seed = jc.at("seed").get<std::uint64_t>();
      s.config.max_processes = jc.at("max_processes").get<int>();
      for (const auto& ja : js.at("apps")) {
        AppRecord a;
        a.app_id = ja.at("app_id").get<std::string>();
        a.archetype = ja.at("archetype").get<std::string>();
        a.label = parse_label(ja.at("label").get<std::string>());
        a.launch_tick = ja.at("launch_tick").get<Tick>();
        if (!ja.at("damage").is_null())
          a.damage = DamageSpec{ja["damage"].at("onset_delay_s").get<Tick>(),
                                ja["damage"].at("files_per_second").get<double>()};
        s.apps.push_back(std::move(a));
      }
      for (const auto& jp : js.at("processes")) {
        ProcessPlan p;
        p.pid = jp.at("pid").get<Pid>();
        if (!jp.at("ppid").is_null()) p.parent = jp.at("ppid").get<Pid>();
        p.app_id = jp.at("app_id").get<std::string>();
        p.label = parse_label(jp.at("label").get<std::string>());
        p.birth = jp.at("birth").get<Tick>();
        p.end = jp.at("end").get<Tick>();
        p.damaging = jp.at("damaging").get<bool>();
        auto it = by_key.find({p.app_id, p.pid});
        if (it == by_key.end())
          throw InputError("no trace for process " + p.app_id + "/" + std::to_string(p.pid));
        const auto& snaps = it->second->snapshots;
        if (static_cast<Tick>(snaps.size()) != p.unkilled_duration() || snaps.front().tick != p.birth + 1)
          throw InputError("trace of " + p.app_id + "/" + std::to_string(p.pid) +
                           " does not cover its scheduled lifetime");
        for (const auto& snap : snaps) p.features.push_back(snap.features);
        s.processes.push_back(std::move(p));
      }
      scenarios.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed sidecar: ") + e.what());
  }
  return scenarios;
}

}  // namespace procguard
