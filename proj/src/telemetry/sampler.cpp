#include "procguard/sampler.hpp"

#include <sys/syscall.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include "procguard/error.hpp"

namespace procguard {

namespace fs = std::filesystem;

namespace {

struct RawProcess {
  Pid pid = 0;
  Pid ppid = 0;
  CounterSample counters;
  double priority = 0;
  double io_priority = 0;
  double threads = 0;
  double vm_size = 0;
  double vm_rss = 0;
  double vm_swap = 0;
  double cmdline_args = 0;
  double handles = 0;
  double seconds_since_start = 0;
  double connections = 0;
  std::array<double, 4> port_status{};
};

enum class PortClass { kListen, kEstablished, kWait, kOther };

std::optional<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return ss.str();
}

std::optional<Pid> parse_pid(std::string_view name) {
  Pid value = 0;
  auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size() || value <= 0) return std::nullopt;
  return value;
}

double status_kib(const std::string& status, std::string_view key) {
  auto pos = status.find(key);
  if (pos == std::string::npos) return 0;
  std::istringstream line(status.substr(pos + key.size()));
  double kib = 0;
  line >> kib;
  return kib * 1024.0;
}

double io_field(const std::string& io, std::string_view key) {
  auto pos = io.find(key);
  if (pos == std::string::npos) return 0;
  std::istringstream line(io.substr(pos + key.size()));
  double v = 0;
  line >> v;
  return v;
}

PortClass tcp_state_class(unsigned st) {
  switch (st) {
    case 0x0A: return PortClass::kListen;
    case 0x01: return PortClass::kEstablished;
    case 0x04:  // FIN_WAIT1
    case 0x05:  // FIN_WAIT2
    case 0x06:  // TIME_WAIT
    case 0x08:  // CLOSE_WAIT
    case 0x09:  // LAST_ACK
    case 0x0B:  // CLOSING
      return PortClass::kWait;
    default: return PortClass::kOther;
  }
}

// inode -> port class for every inet socket on the host.
std::unordered_map<unsigned long long, PortClass> socket_table(const fs::path& proc_root) {
  std::unordered_map<unsigned long long, PortClass> table;
  auto load = [&](const char* name, bool tcp) {
    auto text = slurp(proc_root / "net" / name);
    if (!text) return;
    std::istringstream in(*text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string sl, local, remote, st, queues, timer, retr;
      unsigned long long uid = 0, timeout = 0, inode = 0;
      if (!(row >> sl >> local >> remote >> st >> queues >> timer >> retr >> uid >> timeout >> inode))
        continue;
      const unsigned state = static_cast<unsigned>(std::stoul(st, nullptr, 16));
      table[inode] = tcp ? tcp_state_class(state) : PortClass::kOther;
    }
  };
  load("tcp", true);
  load("tcp6", true);
  load("udp", false);
  load("udp6", false);
  return table;
}

double read_uptime(const fs::path& proc_root) {
  auto text = slurp(proc_root / "uptime");
  if (!text) return 0;
  std::istringstream in(*text);
  double up = 0;
  in >> up;
  return up;
}

std::optional<RawProcess> read_process(const fs::path& dir, Pid pid, const SamplerOptions& options,
                                       const std::unordered_map<unsigned long long, PortClass>& sockets,
                                       double uptime, double clk_tck, std::string& why) {
  RawProcess p;
  p.pid = pid;

  auto stat = slurp(dir / "stat");
  auto status = slurp(dir / "status");
  auto io = slurp(dir / "io");
  if (!stat) { why = "stat unreadable"; return std::nullopt; }
  if (!status) { why = "status unreadable"; return std::nullopt; }
  if (!io) { why = "io counters unreadable"; return std::nullopt; }

  // Fields after the parenthesised command name, starting at field 3 (state).
  auto close = stat->rfind(')');
  if (close == std::string::npos) { why = "malformed stat"; return std::nullopt; }
  std::istringstream rest(stat->substr(close + 1));
  std::vector<std::string> f;
  for (std::string tok; rest >> tok;) f.push_back(tok);
  if (f.size() < 20) { why = "short stat"; return std::nullopt; }
  // f[0] = field 3.
  auto field = [&](int n) { return std::stod(f[static_cast<std::size_t>(n - 3)]); };
  p.ppid = static_cast<Pid>(field(4));
  p.counters.cpu_user_ticks = field(14);
  p.counters.cpu_system_ticks = field(15);
  p.priority = field(18);
  p.threads = field(20);
  p.counters.start_time = static_cast<unsigned long long>(field(22));
  p.seconds_since_start = std::max(0.0, uptime - field(22) / clk_tck);

  p.vm_size = status_kib(*status, "VmSize:");
  p.vm_rss = status_kib(*status, "VmRSS:");
  p.vm_swap = status_kib(*status, "VmSwap:");

  p.counters.io_read_bytes = io_field(*io, "read_bytes:");
  p.counters.io_write_bytes = io_field(*io, "write_bytes:");
  p.counters.io_read_count = io_field(*io, "syscr:");
  p.counters.io_write_count = io_field(*io, "syscw:");
  // Linux exposes no per-process "other" I/O or packet counters; those stay 0.

  if (auto cmd = slurp(dir / "cmdline")) {
    p.cmdline_args = static_cast<double>(std::count(cmd->begin(), cmd->end(), '\0'));
  }

  std::error_code ec;
  fs::directory_iterator fds(dir / "fd", ec);
  if (ec) { why = "fd table unreadable"; return std::nullopt; }
  for (const auto& entry : fds) {
    p.handles += 1;
    auto target = fs::read_symlink(entry.path(), ec);
    if (ec) continue;
    const std::string t = target.string();
    if (t.rfind("socket:[", 0) != 0) continue;
    const auto inode = std::stoull(t.substr(8));
    auto it = sockets.find(inode);
    if (it == sockets.end()) continue;
    p.connections += 1;
    p.port_status[static_cast<std::size_t>(it->second)] += 1;
  }

  if (options.proc_root == "/proc") {
    constexpr int kIoprioWhoProcess = 1;
    long prio = syscall(SYS_ioprio_get, kIoprioWhoProcess, static_cast<int>(pid));
    if (prio >= 0) p.io_priority = static_cast<double>(prio);
  }
  return p;
}

}  // namespace

std::vector<ProcessSnapshot> sample_processes(SamplerState& state, const SamplerOptions& options) {
  std::error_code ec;
  fs::directory_iterator listing(options.proc_root, ec);
  if (ec) throw SamplerError("cannot enumerate " + options.proc_root.string() + ": " + ec.message());

  const double clk_tck = static_cast<double>(sysconf(_SC_CLK_TCK));
  const double uptime = read_uptime(options.proc_root);
  const auto sockets = socket_table(options.proc_root);
  state.tick += 1;
  state.warnings.clear();

  std::vector<RawProcess> seen;
  for (const auto& entry : listing) {
    auto pid = parse_pid(entry.path().filename().string());
    if (!pid) continue;
    std::string why;
    std::optional<RawProcess> raw;
    try {
      raw = read_process(entry.path(), *pid, options, sockets, uptime, clk_tck, why);
    } catch (const std::exception& e) {
      why = std::string("unparsable process files: ") + e.what();
    }
    if (!raw) {
      // Processes that exit mid-sweep look the same as permission denials.
      if (fs::exists(entry.path(), ec))
        state.warnings.push_back("pid " + std::to_string(*pid) + ": " + why);
      continue;
    }
    raw->counters.wall_seconds = uptime;
    seen.push_back(std::move(*raw));
  }
  std::sort(seen.begin(), seen.end(), [](const auto& a, const auto& b) { return a.pid < b.pid; });

  std::unordered_map<Pid, std::pair<double, Pid>> children;  // count, max child pid
  for (const auto& p : seen) {
    auto& c = children[p.ppid];
    c.first += 1;
    c.second = std::max(c.second, p.pid);
  }

  std::vector<ProcessSnapshot> out;
  std::map<Pid, CounterSample> next;
  for (const auto& p : seen) {
    ProcessSnapshot snap;
    snap.process_id = p.pid;
    if (p.ppid > 0 && p.ppid != p.pid) snap.parent_id = p.ppid;
    snap.app_id = options.app_id;
    snap.tick = state.tick;
    auto& v = snap.features;

    auto prev_it = state.previous.find(p.pid);
    const CounterSample* prev = nullptr;
    if (prev_it != state.previous.end() && prev_it->second.start_time == p.counters.start_time)
      prev = &prev_it->second;
    auto delta = [&](double now, double before) { return prev ? std::max(0.0, now - before) : 0.0; };

    if (prev) {
      const double wall = p.counters.wall_seconds - prev->wall_seconds;
      if (wall > 0) {
        v[index(Feature::kCpuSystemPct)] =
            100.0 * std::max(0.0, p.counters.cpu_system_ticks - prev->cpu_system_ticks) / clk_tck / wall;
        v[index(Feature::kCpuUserPct)] =
            100.0 * std::max(0.0, p.counters.cpu_user_ticks - prev->cpu_user_ticks) / clk_tck / wall;
      }
    }
    v[index(Feature::kMemTotalBytes)] = p.vm_size;
    v[index(Feature::kMemPhysicalBytes)] = p.vm_rss;
    v[index(Feature::kMemSwapBytes)] = p.vm_swap;
    if (auto c = children.find(p.pid); c != children.end()) {
      v[index(Feature::kChildProcessCount)] = c->second.first;
      v[index(Feature::kMaxChildProcessId)] = static_cast<double>(c->second.second);
    }
    v[index(Feature::kThreadCount)] = p.threads;
    v[index(Feature::kIoReadBytes)] = delta(p.counters.io_read_bytes, prev ? prev->io_read_bytes : 0);
    v[index(Feature::kIoWriteBytes)] = delta(p.counters.io_write_bytes, prev ? prev->io_write_bytes : 0);
    v[index(Feature::kIoOtherBytes)] = delta(p.counters.io_other_bytes, prev ? prev->io_other_bytes : 0);
    v[index(Feature::kIoReadCount)] = delta(p.counters.io_read_count, prev ? prev->io_read_count : 0);
    v[index(Feature::kIoWriteCount)] = delta(p.counters.io_write_count, prev ? prev->io_write_count : 0);
    v[index(Feature::kIoOtherCount)] = delta(p.counters.io_other_count, prev ? prev->io_other_count : 0);
    v[index(Feature::kProcessPriority)] = p.priority;
    v[index(Feature::kIoPriority)] = p.io_priority;
    v[index(Feature::kCmdlineArgCount)] = p.cmdline_args;
    v[index(Feature::kHandleCount)] = p.handles;
    v[index(Feature::kSecondsSinceStart)] = p.seconds_since_start;
    v[index(Feature::kTcpPacketCount)] = delta(p.counters.tcp_packets, prev ? prev->tcp_packets : 0);
    v[index(Feature::kUdpPacketCount)] = delta(p.counters.udp_packets, prev ? prev->udp_packets : 0);
    v[index(Feature::kOpenConnectionCount)] = p.connections;
    for (std::size_t k = 0; k < 4; ++k) v[index(Feature::kPortStatusListen) + k] = p.port_status[k];

    next[p.pid] = p.counters;
    out.push_back(std::move(snap));
  }

  state.terminated.clear();
  for (const auto& [pid, counters] : state.previous) {
    auto it = next.find(pid);
    if (it == next.end() || it->second.start_time != counters.start_time) state.terminated.insert(pid);
  }
  state.previous = std::move(next);
  return out;
}

}  // namespace procguard
