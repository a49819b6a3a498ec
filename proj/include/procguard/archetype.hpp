#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "procguard/features.hpp"
#include "procguard/trace.hpp"

namespace procguard {

// value(age) = baseline * (1 + drift * age) * max(0, 1 + jitter * N(0, 1))
struct FeatureProfile {
  double baseline = 0;
  double jitter = 0;
  double drift = 0;

  bool operator==(const FeatureProfile&) const = default;
};

// While active, multiplies the listed features. Starts on any tick with the
// given probability and lasts duration_s ticks.
struct BurstSpec {
  double probability = 0;
  int duration_s = 1;
  double multiplier = 1;
  std::vector<Feature> features;

  bool operator==(const BurstSpec&) const = default;
};

struct ProcessTemplate {
  std::string name;
  int parent = -1;  // index of the parent template; -1 for the root
  Tick spawn_offset_s = 0;  // after the parent's birth
  Tick duration_min_s = 1;
  Tick duration_max_s = 1;
  bool damaging = false;  // accrues file damage when the app has a damage spec
  std::array<FeatureProfile, kFeatureCount> profile{};
  std::vector<BurstSpec> bursts;

  bool operator==(const ProcessTemplate&) const = default;
};

struct DamageSpec {
  Tick onset_delay_s = 0;
  double files_per_second = 0;

  bool operator==(const DamageSpec&) const = default;
};

struct AppArchetype {
  std::string name;
  Label label = Label::kBenign;
  std::vector<ProcessTemplate> processes;  // processes[0] is the root
  std::optional<DamageSpec> damage;

  bool operator==(const AppArchetype&) const = default;
};

struct ArchetypeLibrary {
  std::vector<AppArchetype> archetypes;

  bool operator==(const ArchetypeLibrary&) const = default;
};

// Throws ConfigError on broken invariants (durations > 0, offsets >= 0,
// parents precede children, files_per_second >= 0).
void validate(const ArchetypeLibrary& library);

// Built-in library: a handful of benign desktop applications (one with
// ransomware-like write bursts) and ransomware-style malicious applications.
ArchetypeLibrary default_library();

std::string serialize(const ArchetypeLibrary& library);
ArchetypeLibrary parse_library(const std::string& text);
ArchetypeLibrary load_library(const std::filesystem::path& path);

}  // namespace procguard
