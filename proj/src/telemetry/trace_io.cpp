#include "procguard/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <utility>

#include <json.hpp>

#include "procguard/error.hpp"

namespace procguard {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json snapshot_json(const ProcessSnapshot& s, Label label) {
  ordered_json j;
  j["app_id"] = s.app_id;
  j["pid"] = s.process_id;
  j["ppid"] = s.parent_id ? ordered_json(*s.parent_id) : ordered_json(nullptr);
  j["tick"] = s.tick;
  j["label"] = std::string(to_string(label));
  j["f"] = s.features;
  return j;
}

}  // namespace

std::string format_snapshot_record(const ProcessSnapshot& snapshot, Label label) {
  return snapshot_json(snapshot, label).dump();
}

void write_traces(std::span<const ProcessTrace> traces, std::ostream& out) {
  for (const auto& trace : traces)
    for (const auto& snap : trace.snapshots)
      out << format_snapshot_record(snap, trace.label) << '\n';
}

void write_traces(std::span<const ProcessTrace> traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_traces(traces, out);
  if (!out) throw InputError("write failed: " + path.string());
}

std::vector<ProcessTrace> read_traces(std::istream& in) {
  std::vector<ProcessTrace> traces;
  std::map<std::pair<std::string, Pid>, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(where + ": malformed record: " + e.what());
    }
    ProcessSnapshot snap;
    Label label{};
    try {
      snap.app_id = j.at("app_id").get<std::string>();
      snap.process_id = j.at("pid").get<Pid>();
      if (!j.at("ppid").is_null()) snap.parent_id = j.at("ppid").get<Pid>();
      snap.tick = j.at("tick").get<Tick>();
      label = parse_label(j.at("label").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": malformed record: " + e.what());
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    const auto& f = j.find("f");
    if (f == j.end() || !f->is_array())
      throw InputError(where + ": record " + snap.app_id + "/" + std::to_string(snap.process_id) +
                       " has no feature array");
    if (f->size() != kFeatureCount)
      throw InputError(where + ": record " + snap.app_id + "/" + std::to_string(snap.process_id) +
                       " has " + std::to_string(f->size()) + " features, expected " +
                       std::to_string(kFeatureCount));
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!(*f)[i].is_number())
        throw InputError(where + ": non-numeric feature " + std::to_string(i));
      snap.features[i] = (*f)[i].get<double>();
    }

    auto key = std::make_pair(snap.app_id, snap.process_id);
    auto [it, inserted] = slot.try_emplace(key, traces.size());
    if (inserted) {
      ProcessTrace t;
      t.process_id = snap.process_id;
      t.parent_id = snap.parent_id;
      t.app_id = snap.app_id;
      t.label = label;
      traces.push_back(std::move(t));
    }
    auto& trace = traces[it->second];
    if (trace.label != label)
      throw InputError(where + ": label changes within trace " + snap.app_id + "/" +
                       std::to_string(snap.process_id));
    trace.snapshots.push_back(std::move(snap));
  }

  for (auto& trace : traces) {
    std::stable_sort(trace.snapshots.begin(), trace.snapshots.end(),
                     [](const auto& a, const auto& b) { return a.tick < b.tick; });
    trace.unkilled_duration_s =
        trace.snapshots.back().tick - trace.snapshots.front().tick + 1;
    validate_trace(trace);
  }
  return traces;
}

std::vector<ProcessTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trace file " + path.string());
  return read_traces(in);
}

}  // namespace procguard
