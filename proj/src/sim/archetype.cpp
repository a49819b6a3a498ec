#include "procguard/archetype.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "procguard/error.hpp"

namespace procguard {

namespace {

constexpr const char* kLibraryFormat = "procguard-archetypes/1";

using F = Feature;

struct Setting {
  F feature;
  FeatureProfile profile;
};

ProcessTemplate make_process(std::string name, int parent, Tick offset, Tick dmin, Tick dmax,
                             std::initializer_list<Setting> settings) {
  ProcessTemplate p;
  p.name = std::move(name);
  p.parent = parent;
  p.spawn_offset_s = offset;
  p.duration_min_s = dmin;
  p.duration_max_s = dmax;
  // Windows-style defaults: normal priority class, normal I/O priority.
  p.profile[index(F::kProcessPriority)] = {8, 0, 0};
  p.profile[index(F::kIoPriority)] = {2, 0, 0};
  for (const auto& s : settings) p.profile[index(s.feature)] = s.profile;
  return p;
}

BurstSpec write_burst(double probability, int duration, double multiplier) {
  return {probability, duration, multiplier,
          {F::kIoWriteBytes, F::kIoWriteCount, F::kIoReadBytes, F::kIoReadCount}};
}

}  // namespace

void validate(const ArchetypeLibrary& library) {
  for (const auto& a : library.archetypes) {
    const std::string who = "archetype '" + a.name + "'";
    if (a.processes.empty()) throw ConfigError(who + " has no processes");
    if (a.processes[0].parent != -1) throw ConfigError(who + ": first process must be the root");
    for (std::size_t i = 0; i < a.processes.size(); ++i) {
      const auto& p = a.processes[i];
      if (i > 0 && (p.parent < 0 || static_cast<std::size_t>(p.parent) >= i))
        throw ConfigError(who + ": process '" + p.name + "' must name an earlier parent");
      if (p.duration_min_s <= 0 || p.duration_max_s < p.duration_min_s)
        throw ConfigError(who + ": process '" + p.name + "' needs 0 < duration_min <= duration_max");
      if (p.spawn_offset_s < 0) throw ConfigError(who + ": negative spawn offset");
      for (const auto& b : p.bursts)
        if (b.probability < 0 || b.probability > 1 || b.duration_s < 1 || b.multiplier < 0)
          throw ConfigError(who + ": invalid burst");
    }
    if (a.damage && (a.damage->files_per_second < 0 || a.damage->onset_delay_s < 0))
      throw ConfigError(who + ": invalid damage spec");
  }
}

ArchetypeLibrary default_library() {
  ArchetypeLibrary lib;

  {
    AppArchetype a{"web_browser", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("browser", -1, 0, 40, 200,
                                       {{F::kCpuUserPct, {8, 0.5, 0}},
                                        {F::kCpuSystemPct, {2, 0.5, 0}},
                                        {F::kMemTotalBytes, {4.0e8, 0.05, 0.002}},
                                        {F::kMemPhysicalBytes, {2.5e8, 0.05, 0.002}},
                                        {F::kThreadCount, {40, 0.1, 0}},
                                        {F::kIoReadBytes, {2.0e5, 0.6, 0}},
                                        {F::kIoWriteBytes, {5.0e4, 0.6, 0}},
                                        {F::kIoReadCount, {50, 0.5, 0}},
                                        {F::kIoWriteCount, {20, 0.5, 0}},
                                        {F::kIoOtherCount, {10, 0.5, 0}},
                                        {F::kIoOtherBytes, {2.0e3, 0.5, 0}},
                                        {F::kCmdlineArgCount, {3, 0, 0}},
                                        {F::kHandleCount, {600, 0.05, 0}},
                                        {F::kTcpPacketCount, {80, 0.7, 0}},
                                        {F::kUdpPacketCount, {10, 0.7, 0}},
                                        {F::kOpenConnectionCount, {6, 0.3, 0}},
                                        {F::kPortStatusEstablished, {5, 0.3, 0}},
                                        {F::kPortStatusWait, {1, 0.5, 0}}}));
    for (Tick offset : {2, 5})
      a.processes.push_back(make_process("renderer", 0, offset, 20, 120,
                                         {{F::kCpuUserPct, {12, 0.6, 0}},
                                          {F::kCpuSystemPct, {1, 0.5, 0}},
                                          {F::kMemTotalBytes, {2.0e8, 0.05, 0.003}},
                                          {F::kMemPhysicalBytes, {1.2e8, 0.05, 0.003}},
                                          {F::kThreadCount, {18, 0.1, 0}},
                                          {F::kIoReadBytes, {3.0e4, 0.6, 0}},
                                          {F::kIoReadCount, {15, 0.5, 0}},
                                          {F::kIoOtherCount, {4, 0.5, 0}},
                                          {F::kCmdlineArgCount, {9, 0, 0}},
                                          {F::kHandleCount, {250, 0.05, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  {
    AppArchetype a{"text_editor", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("editor", -1, 0, 30, 300,
                                       {{F::kCpuUserPct, {1.5, 0.8, 0}},
                                        {F::kCpuSystemPct, {0.3, 0.8, 0}},
                                        {F::kMemTotalBytes, {6.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {3.0e7, 0.02, 0}},
                                        {F::kThreadCount, {6, 0.1, 0}},
                                        {F::kIoReadBytes, {4.0e3, 1.0, 0}},
                                        {F::kIoWriteBytes, {2.0e3, 1.0, 0}},
                                        {F::kIoReadCount, {3, 0.8, 0}},
                                        {F::kIoWriteCount, {1, 0.8, 0}},
                                        {F::kCmdlineArgCount, {2, 0, 0}},
                                        {F::kHandleCount, {120, 0.05, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  {
    // Benign app whose writes transiently look like bulk file encryption.
    AppArchetype a{"backup_tool", Label::kBenign, {}, std::nullopt};
    auto root = make_process("backup", -1, 0, 40, 180,
                             {{F::kCpuUserPct, {6, 0.4, 0}},
                              {F::kCpuSystemPct, {3, 0.4, 0}},
                              {F::kMemTotalBytes, {9.0e7, 0.03, 0}},
                              {F::kMemPhysicalBytes, {5.0e7, 0.03, 0}},
                              {F::kThreadCount, {10, 0.1, 0}},
                              {F::kIoReadBytes, {5.0e5, 0.4, 0}},
                              {F::kIoWriteBytes, {5.0e5, 0.4, 0}},
                              {F::kIoReadCount, {30, 0.4, 0}},
                              {F::kIoWriteCount, {30, 0.4, 0}},
                              {F::kIoOtherCount, {6, 0.5, 0}},
                              {F::kCmdlineArgCount, {4, 0, 0}},
                              {F::kHandleCount, {140, 0.05, 0}}});
    root.bursts.push_back(write_burst(0.06, 3, 10.0));
    a.processes.push_back(std::move(root));
    lib.archetypes.push_back(std::move(a));
  }
  {
    AppArchetype a{"media_player", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("player", -1, 0, 60, 240,
                                       {{F::kCpuUserPct, {15, 0.2, 0}},
                                        {F::kCpuSystemPct, {4, 0.3, 0}},
                                        {F::kMemTotalBytes, {1.5e8, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {9.0e7, 0.02, 0}},
                                        {F::kThreadCount, {22, 0.05, 0}},
                                        {F::kIoReadBytes, {1.2e6, 0.3, 0}},
                                        {F::kIoReadCount, {40, 0.3, 0}},
                                        {F::kIoOtherCount, {2, 0.5, 0}},
                                        {F::kProcessPriority, {10, 0, 0}},
                                        {F::kCmdlineArgCount, {2, 0, 0}},
                                        {F::kHandleCount, {300, 0.05, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  {
    AppArchetype a{"chat_client", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("chat", -1, 0, 60, 300,
                                       {{F::kCpuUserPct, {3, 0.6, 0}},
                                        {F::kCpuSystemPct, {1, 0.6, 0}},
                                        {F::kMemTotalBytes, {2.2e8, 0.03, 0.001}},
                                        {F::kMemPhysicalBytes, {1.4e8, 0.03, 0.001}},
                                        {F::kThreadCount, {30, 0.1, 0}},
                                        {F::kIoReadBytes, {2.0e4, 0.8, 0}},
                                        {F::kIoWriteBytes, {1.0e4, 0.8, 0}},
                                        {F::kIoReadCount, {8, 0.6, 0}},
                                        {F::kIoWriteCount, {5, 0.6, 0}},
                                        {F::kCmdlineArgCount, {2, 0, 0}},
                                        {F::kHandleCount, {450, 0.05, 0}},
                                        {F::kTcpPacketCount, {40, 0.8, 0}},
                                        {F::kUdpPacketCount, {60, 0.8, 0}},
                                        {F::kOpenConnectionCount, {4, 0.3, 0}},
                                        {F::kPortStatusEstablished, {3, 0.3, 0}},
                                        {F::kPortStatusOther, {1, 0.3, 0}}}));
    a.processes.push_back(make_process("voice_helper", 0, 3, 20, 200,
                                       {{F::kCpuUserPct, {2, 0.5, 0}},
                                        {F::kMemTotalBytes, {5.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {3.0e7, 0.02, 0}},
                                        {F::kThreadCount, {8, 0.1, 0}},
                                        {F::kCmdlineArgCount, {5, 0, 0}},
                                        {F::kHandleCount, {90, 0.05, 0}},
                                        {F::kUdpPacketCount, {100, 0.5, 0}},
                                        {F::kOpenConnectionCount, {2, 0.3, 0}},
                                        {F::kPortStatusOther, {2, 0.3, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  {
    AppArchetype a{"software_updater", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("updater", -1, 0, 30, 90,
                                       {{F::kCpuUserPct, {4, 0.5, 0}},
                                        {F::kCpuSystemPct, {2, 0.5, 0}},
                                        {F::kMemTotalBytes, {4.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {2.0e7, 0.02, 0}},
                                        {F::kThreadCount, {5, 0.1, 0}},
                                        {F::kIoWriteBytes, {3.0e5, 0.5, 0}},
                                        {F::kIoWriteCount, {12, 0.5, 0}},
                                        {F::kCmdlineArgCount, {3, 0, 0}},
                                        {F::kHandleCount, {110, 0.05, 0}},
                                        {F::kTcpPacketCount, {150, 0.5, 0}},
                                        {F::kOpenConnectionCount, {1, 0, 0}},
                                        {F::kPortStatusEstablished, {1, 0, 0}}}));
    auto installer = make_process("installer", 0, 8, 10, 40,
                                  {{F::kCpuUserPct, {20, 0.3, 0}},
                                   {F::kCpuSystemPct, {6, 0.3, 0}},
                                   {F::kMemTotalBytes, {8.0e7, 0.03, 0}},
                                   {F::kMemPhysicalBytes, {5.0e7, 0.03, 0}},
                                   {F::kThreadCount, {7, 0.1, 0}},
                                   {F::kIoReadBytes, {1.0e6, 0.5, 0}},
                                   {F::kIoWriteBytes, {1.5e6, 0.5, 0}},
                                   {F::kIoReadCount, {40, 0.4, 0}},
                                   {F::kIoWriteCount, {60, 0.4, 0}},
                                   {F::kIoOtherCount, {15, 0.4, 0}},
                                   {F::kCmdlineArgCount, {6, 0, 0}},
                                   {F::kHandleCount, {160, 0.05, 0}}});
    installer.bursts.push_back(write_burst(0.05, 2, 3.0));
    a.processes.push_back(std::move(installer));
    lib.archetypes.push_back(std::move(a));
  }
  {
    AppArchetype a{"office_suite", Label::kBenign, {}, std::nullopt};
    a.processes.push_back(make_process("office", -1, 0, 60, 300,
                                       {{F::kCpuUserPct, {5, 0.6, 0}},
                                        {F::kCpuSystemPct, {1, 0.6, 0}},
                                        {F::kMemTotalBytes, {3.0e8, 0.02, 0.001}},
                                        {F::kMemPhysicalBytes, {1.8e8, 0.02, 0.001}},
                                        {F::kThreadCount, {25, 0.1, 0}},
                                        {F::kIoReadBytes, {6.0e4, 0.8, 0}},
                                        {F::kIoWriteBytes, {3.0e4, 0.8, 0}},
                                        {F::kIoReadCount, {10, 0.6, 0}},
                                        {F::kIoWriteCount, {6, 0.6, 0}},
                                        {F::kIoOtherCount, {3, 0.6, 0}},
                                        {F::kCmdlineArgCount, {2, 0, 0}},
                                        {F::kHandleCount, {700, 0.05, 0}}}));
    a.processes.push_back(make_process("spellcheck", 0, 4, 20, 200,
                                       {{F::kCpuUserPct, {1, 0.6, 0}},
                                        {F::kMemTotalBytes, {3.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {1.5e7, 0.02, 0}},
                                        {F::kThreadCount, {3, 0, 0}},
                                        {F::kCmdlineArgCount, {4, 0, 0}},
                                        {F::kHandleCount, {60, 0.05, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }

  // Ransomware: a dropper that spawns an encryptor within a second and a
  // short shadow-copy wiper.
  {
    AppArchetype a{"ransomware_fast", Label::kMalicious, {}, DamageSpec{2, 8.0}};
    a.processes.push_back(make_process("dropper", -1, 0, 60, 150,
                                       {{F::kCpuUserPct, {18, 0.3, 0}},
                                        {F::kCpuSystemPct, {9, 0.3, 0}},
                                        {F::kMemTotalBytes, {3.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {1.8e7, 0.02, 0}},
                                        {F::kThreadCount, {4, 0.1, 0}},
                                        {F::kIoReadBytes, {8.0e5, 0.3, 0}},
                                        {F::kIoWriteBytes, {6.0e5, 0.3, 0}},
                                        {F::kIoReadCount, {60, 0.3, 0}},
                                        {F::kIoWriteCount, {45, 0.3, 0}},
                                        {F::kIoOtherCount, {90, 0.3, 0}},
                                        {F::kIoOtherBytes, {4.0e4, 0.3, 0}},
                                        {F::kCmdlineArgCount, {1, 0, 0}},
                                        {F::kHandleCount, {320, 0.05, 0}}}));
    auto encryptor = make_process("encryptor", 0, 1, 40, 120,
                                  {{F::kCpuUserPct, {65, 0.15, 0}},
                                   {F::kCpuSystemPct, {12, 0.2, 0}},
                                   {F::kMemTotalBytes, {5.0e7, 0.02, 0}},
                                   {F::kMemPhysicalBytes, {3.5e7, 0.02, 0}},
                                   {F::kThreadCount, {6, 0.1, 0}},
                                   {F::kIoReadBytes, {6.0e6, 0.3, 0}},
                                   {F::kIoWriteBytes, {6.0e6, 0.3, 0}},
                                   {F::kIoReadCount, {300, 0.3, 0}},
                                   {F::kIoWriteCount, {300, 0.3, 0}},
                                   {F::kIoOtherCount, {220, 0.3, 0}},
                                   {F::kIoOtherBytes, {9.0e4, 0.3, 0}},
                                   {F::kCmdlineArgCount, {2, 0, 0}},
                                   {F::kHandleCount, {400, 0.05, 0}}});
    encryptor.damaging = true;
    a.processes.push_back(std::move(encryptor));
    a.processes.push_back(make_process("shadow_wiper", 0, 3, 5, 12,
                                       {{F::kCpuUserPct, {5, 0.3, 0}},
                                        {F::kCpuSystemPct, {10, 0.3, 0}},
                                        {F::kMemTotalBytes, {1.0e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {6.0e6, 0.02, 0}},
                                        {F::kThreadCount, {3, 0, 0}},
                                        {F::kIoOtherCount, {150, 0.3, 0}},
                                        {F::kIoOtherBytes, {2.0e4, 0.3, 0}},
                                        {F::kCmdlineArgCount, {7, 0, 0}},
                                        {F::kHandleCount, {80, 0.05, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  {
    // Single-process locker that waits a few seconds before encrypting.
    AppArchetype a{"ransomware_locker", Label::kMalicious, {}, DamageSpec{5, 5.0}};
    auto locker = make_process("locker", -1, 0, 60, 150,
                               {{F::kCpuUserPct, {45, 0.2, 0}},
                                {F::kCpuSystemPct, {10, 0.2, 0}},
                                {F::kMemTotalBytes, {4.0e7, 0.02, 0}},
                                {F::kMemPhysicalBytes, {2.5e7, 0.02, 0}},
                                {F::kThreadCount, {5, 0.1, 0}},
                                {F::kIoReadBytes, {3.0e6, 0.3, 0}},
                                {F::kIoWriteBytes, {3.0e6, 0.3, 0}},
                                {F::kIoReadCount, {160, 0.3, 0}},
                                {F::kIoWriteCount, {160, 0.3, 0}},
                                {F::kIoOtherCount, {130, 0.3, 0}},
                                {F::kIoOtherBytes, {6.0e4, 0.3, 0}},
                                {F::kCmdlineArgCount, {1, 0, 0}},
                                {F::kHandleCount, {350, 0.05, 0}}});
    locker.damaging = true;
    a.processes.push_back(std::move(locker));
    a.processes.push_back(make_process("beacon", 0, 2, 30, 120,
                                       {{F::kCpuUserPct, {3, 0.3, 0}},
                                        {F::kCpuSystemPct, {4, 0.3, 0}},
                                        {F::kMemTotalBytes, {1.2e7, 0.02, 0}},
                                        {F::kMemPhysicalBytes, {7.0e6, 0.02, 0}},
                                        {F::kThreadCount, {2, 0, 0}},
                                        {F::kIoOtherCount, {70, 0.3, 0}},
                                        {F::kCmdlineArgCount, {1, 0, 0}},
                                        {F::kHandleCount, {300, 0.05, 0}},
                                        {F::kTcpPacketCount, {20, 0.5, 0}},
                                        {F::kOpenConnectionCount, {1, 0, 0}},
                                        {F::kPortStatusWait, {1, 0, 0}}}));
    lib.archetypes.push_back(std::move(a));
  }
  validate(lib);
  return lib;
}

namespace {

using ordered_json = nlohmann::ordered_json;

Feature feature_by_name(const std::string& name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  throw ConfigError("unknown feature name '" + name + "'");
}

}  // namespace

std::string serialize(const ArchetypeLibrary& library) {
  ordered_json root;
  root["format"] = kLibraryFormat;
  ordered_json list = ordered_json::array();
  for (const auto& a : library.archetypes) {
    ordered_json ja;
    ja["name"] = a.name;
    ja["label"] = std::string(to_string(a.label));
    if (a.damage)
      ja["damage"] = {{"onset_delay_s", a.damage->onset_delay_s}, {"files_per_second", a.damage->files_per_second}};
    else
      ja["damage"] = nullptr;
    ordered_json procs = ordered_json::array();
    for (const auto& p : a.processes) {
      ordered_json jp;
      jp["name"] = p.name;
      jp["parent"] = p.parent;
      jp["spawn_offset_s"] = p.spawn_offset_s;
      jp["duration_s"] = {p.duration_min_s, p.duration_max_s};
      jp["damaging"] = p.damaging;
      ordered_json feats = ordered_json::object();
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const auto& f = p.profile[i];
        if (f == FeatureProfile{}) continue;
        feats[std::string(kFeatureNames[i])] = {{"baseline", f.baseline}, {"jitter", f.jitter}, {"drift", f.drift}};
      }
      jp["features"] = std::move(feats);
      ordered_json bursts = ordered_json::array();
      for (const auto& b : p.bursts) {
        ordered_json names = ordered_json::array();
        for (auto f : b.features) names.push_back(std::string(kFeatureNames[index(f)]));
        bursts.push_back({{"probability", b.probability},
                          {"duration_s", b.duration_s},
                          {"multiplier", b.multiplier},
                          {"features", std::move(names)}});
      }
      jp["bursts"] = std::move(bursts);
      procs.push_back(std::move(jp));
    }
    ja["processes"] = std::move(procs);
    list.push_back(std::move(ja));
  }
  root["archetypes"] = std::move(list);
  return root.dump(2) + "\n";
}

ArchetypeLibrary parse_library(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("archetype library is not valid JSON: ") + e.what());
  }
  ArchetypeLibrary lib;
  try {
    if (root.value("format", "") != kLibraryFormat)
      throw ConfigError(std::string("archetype library is not tagged ") + kLibraryFormat);
    for (const auto& ja : root.at("archetypes")) {
      AppArchetype a;
      a.name = ja.at("name").get<std::string>();
      try {
        a.label = parse_label(ja.at("label").get<std::string>());
      } catch (const InputError& e) {
        throw ConfigError(e.what());
      }
      if (ja.contains("damage") && !ja["damage"].is_null())
        a.damage = DamageSpec{ja["damage"].at("onset_delay_s").get<Tick>(),
                              ja["damage"].at("files_per_second").get<double>()};
      for (const auto& jp : ja.at("processes")) {
        ProcessTemplate p;
        p.name = jp.at("name").get<std::string>();
        p.parent = jp.value("parent", -1);
        p.spawn_offset_s = jp.value("spawn_offset_s", Tick{0});
        const auto d = jp.at("duration_s").get<std::vector<Tick>>();
        if (d.size() != 2) throw ConfigError("duration_s must be [min, max]");
        p.duration_min_s = d[0];
        p.duration_max_s = d[1];
        p.damaging = jp.value("damaging", false);
        if (jp.contains("features"))
          for (const auto& [name, jf] : jp["features"].items())
            p.profile[index(feature_by_name(name))] = {jf.value("baseline", 0.0), jf.value("jitter", 0.0),
                                                       jf.value("drift", 0.0)};
        if (jp.contains("bursts"))
          for (const auto& jb : jp["bursts"]) {
            BurstSpec b;
            b.probability = jb.at("probability").get<double>();
            b.duration_s = jb.at("duration_s").get<int>();
            b.multiplier = jb.at("multiplier").get<double>();
            for (const auto& n : jb.at("features")) b.features.push_back(feature_by_name(n.get<std::string>()));
            p.bursts.push_back(std::move(b));
          }
        a.processes.push_back(std::move(p));
      }
      lib.archetypes.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed archetype library: ") + e.what());
  }
  validate(lib);
  return lib;
}

ArchetypeLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read archetype library " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_library(ss.str());
}

}  // namespace procguard
