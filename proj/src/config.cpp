#include "ticketforge/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ticketforge {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

double parse_double(const std::string& field, const std::string& value) {
  if (value == "inf") return INFINITY;
  try {
    std::size_t used = 0;
    double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(field, "expected a number, got '" + value + "'");
  }
}

std::int64_t parse_int(const std::string& field, const std::string& value) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(field, "expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& field, const std::string& value) {
  const std::int64_t v = parse_int(field, value);
  if (v < 0) throw ConfigError(field, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& field, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(field, "expected true/false, got '" + value + "'");
}

Micros parse_ms(const std::string& field, const std::string& value) {
  const double ms = parse_double(field, value);
  if (std::isinf(ms)) return kForever;
  return static_cast<Micros>(std::llround(ms * kMicrosPerMilli));
}

Micros parse_us(const std::string& field, const std::string& value) {
  return static_cast<Micros>(std::llround(parse_double(field, value)));
}

std::vector<NodeId> parse_nodes(const std::string& field, const std::string& value) {
  std::vector<NodeId> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<NodeId>(parse_int(field, item)));
  }
  return out;
}

std::vector<std::uint8_t> parse_hex(const std::string& field, std::string value) {
  if (value.starts_with("0x")) value = value.substr(2);
  if (value.size() % 2 != 0) throw ConfigError(field, "hex string must have even length");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < value.size(); i += 2) {
    unsigned byte = 0;
    auto [ptr, ec] = std::from_chars(value.data() + i, value.data() + i + 2, byte, 16);
    if (ec != std::errc() || ptr != value.data() + i + 2) {
      throw ConfigError(field, "invalid hex digit");
    }
    out.push_back(static_cast<std::uint8_t>(byte));
  }
  return out;
}

std::string format_ms(Micros us) {
  if (us >= kForever) return "inf";
  std::string out = std::to_string(us / kMicrosPerMilli);
  const Micros frac = std::abs(us % kMicrosPerMilli);
  if (frac != 0) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ".%03lld", static_cast<long long>(frac));
    std::string tail(buf);
    while (tail.back() == '0') tail.pop_back();
    out += tail;
  }
  return out;
}

std::string format_double(double d) {
  std::ostringstream out;
  out << d;
  return out.str();
}

std::string join_nodes(const std::vector<NodeId>& nodes) {
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(nodes[i]);
  }
  return out;
}

RegimeKind parse_regime(const std::string& value) {
  if (value == "utr") return RegimeKind::Utr;
  if (value == "mtr") return RegimeKind::Mtr;
  if (value == "htr") return RegimeKind::Htr;
  throw ConfigError("regime", "expected utr, mtr or htr, got '" + value + "'");
}

void set_top(ScenarioConfig& c, const std::string& key, const std::string& v) {
  if (key == "name") c.name = v;
  else if (key == "n") c.n = static_cast<int>(parse_int(key, v));
  else if (key == "f") c.f = static_cast<int>(parse_int(key, v));
  else if (key == "L") c.L = parse_uint(key, v);
  else if (key == "K") c.K = parse_uint(key, v);
  else if (key == "gsw") c.gsw = parse_uint(key, v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "election_seed") c.election_seed = parse_hex(key, v);
  else if (key == "duration_ms") c.duration = parse_ms(key, v);
  else if (key == "gst_ms") c.gst = parse_ms(key, v);
  else if (key == "timeout_ms") c.timeout = parse_ms(key, v);
  else if (key == "fallback_ms") c.fallback = parse_ms(key, v);
  else if (key == "regime") c.regime = parse_regime(v);
  else if (key == "candidates") c.candidates = parse_nodes(key, v);
  else if (key == "batch") c.batch = static_cast<std::uint32_t>(parse_uint(key, v));
  else if (key == "mtr_server") c.mtr_server = static_cast<NodeId>(parse_int(key, v));
  else if (key == "payload_size") c.payload_size = static_cast<std::uint32_t>(parse_uint(key, v));
  else if (key == "report_phase_ms") c.report_phase = parse_ms(key, v);
  else if (key == "assert_guarantees") c.assert_guarantees = parse_bool(key, v);
  else throw ConfigError(key, "unknown key");
}

void set_net(NetProfile& net, const std::string& key, const std::string& v) {
  const std::string field = "net." + key;
  if (key == "base_ms") net.base = parse_ms(field, v);
  else if (key == "jitter_ms") net.jitter = parse_ms(field, v);
  else if (key == "delta_ms") net.delta = parse_ms(field, v);
  else if (key == "pre_gst_extra_ms") net.pre_gst_extra = parse_ms(field, v);
  else if (key == "pre_gst_loss") net.pre_gst_loss = parse_bool(field, v);
  else throw ConfigError(field, "unknown key");
}

void set_cpu(CpuCosts& cpu, const std::string& key, const std::string& v) {
  const std::string field = "cpu." + key;
  if (key == "process_us") cpu.process = parse_us(field, v);
  else if (key == "catchup_us") cpu.catchup = parse_us(field, v);
  else if (key == "propose_us") cpu.propose = parse_us(field, v);
  else if (key == "grant_us") cpu.grant = parse_us(field, v);
  else if (key == "serialize_us") cpu.serialize = parse_us(field, v);
  else throw ConfigError(field, "unknown key");
}

struct NodeEntry {
  NodeId id = kNoNode;
  NodeProfile profile;
};

void set_node(NodeEntry& node, const std::string& key, const std::string& v) {
  const std::string field = "node." + key;
  if (key == "id") {
    node.id = static_cast<NodeId>(parse_int(field, v));
  } else if (key == "serialization_multiplier") {
    node.profile.serialization_multiplier = parse_double(field, v);
  } else if (key == "supply") {
    if (v == "unbounded") {
      node.profile.supply = Supply{};
    } else {
      node.profile.supply = Supply{false, parse_double(field, v)};
    }
  } else {
    throw ConfigError(field, "unknown key");
  }
}

void set_phase(SlowPhase& phase, const std::string& key, const std::string& v) {
  const std::string field = "phase." + key;
  if (key == "node") phase.node = static_cast<NodeId>(parse_int(field, v));
  else if (key == "from_ms") phase.from = parse_ms(field, v);
  else if (key == "to_ms") phase.to = parse_ms(field, v);
  else if (key == "multiplier") phase.multiplier = parse_double(field, v);
  else throw ConfigError(field, "unknown key");
}

void set_fault(FaultSpec& fault, const std::string& key, const std::string& v) {
  const std::string field = "fault." + key;
  if (key == "kind") {
    if (v == "crash") fault.kind = FaultKind::Crash;
    else if (v == "silent") fault.kind = FaultKind::SilentTicketHolder;
    else if (v == "byz_server") fault.kind = FaultKind::ByzServer;
    else throw ConfigError(field, "expected crash, silent or byz_server");
  } else if (key == "node") {
    fault.node = static_cast<NodeId>(parse_int(field, v));
  } else if (key == "at_ms" || key == "from_ms") {
    fault.from = parse_ms(field, v);
  } else if (key == "to_ms") {
    fault.to = parse_ms(field, v);
  } else if (key == "from_slot") {
    fault.from_slot = parse_uint(field, v);
  } else if (key == "to_slot") {
    fault.to_slot = parse_uint(field, v);
  } else if (key == "mode") {
    if (v == "starve") fault.mode.behavior = ServerBehavior::Starve;
    else if (v == "collude") fault.mode.behavior = ServerBehavior::ColludeOnly;
    else if (v == "double_grant") fault.mode.behavior = ServerBehavior::DoubleGrant;
    else if (v == "correct") fault.mode.behavior = ServerBehavior::Correct;
    else throw ConfigError(field, "expected starve, collude, double_grant or correct");
  } else if (key == "colluders") {
    fault.mode.colluders = parse_nodes(field, v);
  } else {
    throw ConfigError(field, "unknown key");
  }
}

const char* mode_name(ServerBehavior b) {
  switch (b) {
    case ServerBehavior::Correct: return "correct";
    case ServerBehavior::Starve: return "starve";
    case ServerBehavior::ColludeOnly: return "collude";
    case ServerBehavior::DoubleGrant: return "double_grant";
  }
  return "?";
}

}  // namespace

const char* regime_name(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::Utr: return "utr";
    case RegimeKind::Mtr: return "mtr";
    case RegimeKind::Htr: return "htr";
  }
  return "?";
}

const char* fault_kind_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::Crash: return "crash";
    case FaultKind::SilentTicketHolder: return "silent";
    case FaultKind::ByzServer: return "byz_server";
  }
  return "?";
}

std::uint64_t ScenarioConfig::msw() const { return K >= 2 ? (K - 1) * L : L; }

std::uint64_t ScenarioConfig::effective_window() const { return std::min(gsw, msw()); }

std::vector<NodeId> ScenarioConfig::byzantine_nodes() const {
  std::set<NodeId> out;
  for (const auto& fault : faults) {
    if (fault.kind != FaultKind::ByzServer) continue;
    out.insert(fault.node);
    out.insert(fault.mode.colluders.begin(), fault.mode.colluders.end());
  }
  return {out.begin(), out.end()};
}

std::vector<NodeId> ScenarioConfig::crashed_nodes() const {
  std::set<NodeId> out;
  for (const auto& fault : faults) {
    if (fault.kind == FaultKind::Crash) out.insert(fault.node);
  }
  return {out.begin(), out.end()};
}

std::vector<std::uint8_t> ScenarioConfig::election_seed_bytes() const {
  if (!election_seed.empty()) return election_seed;
  std::vector<std::uint8_t> out;
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(seed >> shift));
  return out;
}

void validate(ScenarioConfig& c) {
  auto in_range = [&](NodeId id) { return id >= 0 && id < c.n; };
  if (c.n < 1) throw ConfigError("n", "must be at least 1");
  if (c.f < 0) throw ConfigError("f", "must be non-negative");
  if (c.n < 3 * c.f + 1) throw ConfigError("n", "must be at least 3f+1");
  if (c.L < static_cast<std::uint64_t>(2 * c.f + 1)) {
    throw ConfigError("L", "epoch length must be at least 2f+1 = " + std::to_string(2 * c.f + 1));
  }
  if (c.K < 1) throw ConfigError("K", "must be at least 1");
  if (c.gsw < 1) throw ConfigError("gsw", "must be at least 1");
  if (c.regime != RegimeKind::Mtr && c.gsw > c.msw()) {
    throw ConfigError("gsw", "exceeds the maximum sliding window " + std::to_string(c.msw()));
  }
  if (c.duration < 0) throw ConfigError("duration_ms", "must be non-negative");
  if (c.gst < 0) throw ConfigError("gst_ms", "must be non-negative");
  if (c.net.delta <= 0) throw ConfigError("net.delta_ms", "must be positive");
  if (c.net.base < 0 || c.net.jitter < 0 || c.net.pre_gst_extra < 0) {
    throw ConfigError("net", "delays must be non-negative");
  }
  if (c.timeout <= c.net.delta) {
    throw ConfigError("timeout_ms", "slot timeout must exceed net.delta_ms");
  }
  if (c.fallback < -1) throw ConfigError("fallback_ms", "must be non-negative");
  if (c.batch < 1) throw ConfigError("batch", "must be at least 1");
  if (!in_range(c.mtr_server)) throw ConfigError("mtr_server", "node id out of range");
  std::set<NodeId> seen;
  for (NodeId id : c.candidates) {
    if (!in_range(id)) throw ConfigError("candidates", "node id out of range");
    if (!seen.insert(id).second) throw ConfigError("candidates", "duplicate node id");
  }
  if (c.cpu.process < 0 || c.cpu.catchup < 0 || c.cpu.propose < 0 || c.cpu.grant < 0 ||
      c.cpu.serialize < 0) {
    throw ConfigError("cpu", "costs must be non-negative");
  }
  if (c.nodes.size() > static_cast<std::size_t>(c.n)) {
    throw ConfigError("node.id", "more node tables than nodes");
  }
  c.nodes.resize(static_cast<std::size_t>(c.n));
  for (const auto& node : c.nodes) {
    if (node.serialization_multiplier <= 0) {
      throw ConfigError("node.serialization_multiplier", "must be positive");
    }
    if (!node.supply.unbounded && node.supply.blocks_per_second < 0) {
      throw ConfigError("node.supply", "rate must be non-negative");
    }
  }
  for (const auto& phase : c.phases) {
    if (!in_range(phase.node)) throw ConfigError("phase.node", "node id out of range");
    if (phase.multiplier <= 0) throw ConfigError("phase.multiplier", "must be positive");
    if (phase.to < phase.from) throw ConfigError("phase.to_ms", "ends before it starts");
  }
  std::set<NodeId> faulty;
  for (const auto& fault : c.faults) {
    if (!in_range(fault.node)) throw ConfigError("fault.node", "node id out of range");
    if (fault.to < fault.from) throw ConfigError("fault.to_ms", "ends before it starts");
    for (NodeId id : fault.mode.colluders) {
      if (!in_range(id)) throw ConfigError("fault.colluders", "node id out of range");
    }
    if (fault.kind == FaultKind::Crash) faulty.insert(fault.node);
  }
  for (NodeId id : c.byzantine_nodes()) faulty.insert(id);
  if (c.assert_guarantees && faulty.size() > static_cast<std::size_t>(c.f)) {
    throw ConfigError("fault", "schedule has " + std::to_string(faulty.size()) +
                                   " crashed or Byzantine nodes, more than f = " +
                                   std::to_string(c.f));
  }
}

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig config;
  std::vector<NodeEntry> nodes;
  enum class Table { Top, Net, Cpu, Node, Phase, Fault } table = Table::Top;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line == "[net]") { table = Table::Net; continue; }
    if (line == "[cpu]") { table = Table::Cpu; continue; }
    if (line == "[[node]]") { table = Table::Node; nodes.emplace_back(); continue; }
    if (line == "[[phase]]") { table = Table::Phase; config.phases.emplace_back(); continue; }
    if (line == "[[fault]]") { table = Table::Fault; config.faults.emplace_back(); continue; }
    if (line.front() == '[') {
      throw ConfigError("line " + std::to_string(line_no), "unknown table " + line);
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    switch (table) {
      case Table::Top: set_top(config, key, value); break;
      case Table::Net: set_net(config.net, key, value); break;
      case Table::Cpu: set_cpu(config.cpu, key, value); break;
      case Table::Node: set_node(nodes.back(), key, value); break;
      case Table::Phase: set_phase(config.phases.back(), key, value); break;
      case Table::Fault: set_fault(config.faults.back(), key, value); break;
    }
  }
  for (const auto& node : nodes) {
    if (node.id < 0 || node.id >= config.n) throw ConfigError("node.id", "node id out of range");
    if (config.nodes.size() <= static_cast<std::size_t>(node.id)) {
      config.nodes.resize(static_cast<std::size_t>(node.id) + 1);
    }
    config.nodes[static_cast<std::size_t>(node.id)] = node.profile;
  }
  validate(config);
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_text(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "name = " << c.name << "\n"
      << "n = " << c.n << "\n"
      << "f = " << c.f << "\n"
      << "L = " << c.L << "\n"
      << "K = " << c.K << "\n"
      << "gsw = " << c.gsw << "\n"
      << "seed = " << c.seed << "\n";
  if (!c.election_seed.empty()) {
    out << "election_seed = ";
    static constexpr char kHex[] = "0123456789abcdef";
    for (auto b : c.election_seed) out << kHex[b >> 4] << kHex[b & 0xf];
    out << "\n";
  }
  out << "duration_ms = " << format_ms(c.duration) << "\n"
      << "gst_ms = " << format_ms(c.gst) << "\n"
      << "timeout_ms = " << format_ms(c.timeout) << "\n";
  if (c.fallback >= 0) out << "fallback_ms = " << format_ms(c.fallback) << "\n";
  out << "regime = " << regime_name(c.regime) << "\n";
  if (!c.candidates.empty()) out << "candidates = " << join_nodes(c.candidates) << "\n";
  out << "batch = " << c.batch << "\n"
      << "mtr_server = " << c.mtr_server << "\n"
      << "payload_size = " << c.payload_size << "\n"
      << "report_phase_ms = " << format_ms(c.report_phase) << "\n"
      << "assert_guarantees = " << (c.assert_guarantees ? "true" : "false") << "\n"
      << "\n[net]\n"
      << "base_ms = " << format_ms(c.net.base) << "\n"
      << "jitter_ms = " << format_ms(c.net.jitter) << "\n"
      << "delta_ms = " << format_ms(c.net.delta) << "\n"
      << "pre_gst_extra_ms = " << format_ms(c.net.pre_gst_extra) << "\n"
      << "pre_gst_loss = " << (c.net.pre_gst_loss ? "true" : "false") << "\n"
      << "\n[cpu]\n"
      << "process_us = " << c.cpu.process << "\n"
      << "catchup_us = " << c.cpu.catchup << "\n"
      << "propose_us = " << c.cpu.propose << "\n"
      << "grant_us = " << c.cpu.grant << "\n"
      << "serialize_us = " << c.cpu.serialize << "\n";
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const auto& node = c.nodes[i];
    if (node.serialization_multiplier == 1.0 && node.supply.unbounded) continue;
    out << "\n[[node]]\nid = " << i << "\n"
        << "serialization_multiplier = " << format_double(node.serialization_multiplier) << "\n"
        << "supply = "
        << (node.supply.unbounded ? std::string("unbounded")
                                  : format_double(node.supply.blocks_per_second))
        << "\n";
  }
  for (const auto& phase : c.phases) {
    out << "\n[[phase]]\nnode = " << phase.node << "\n"
        << "from_ms = " << format_ms(phase.from) << "\n"
        << "to_ms = " << format_ms(phase.to) << "\n"
        << "multiplier = " << format_double(phase.multiplier) << "\n";
  }
  for (const auto& fault : c.faults) {
    out << "\n[[fault]]\nkind = " << fault_kind_name(fault.kind) << "\n"
        << "node = " << fault.node << "\n"
        << "from_ms = " << format_ms(fault.from) << "\n"
        << "to_ms = " << format_ms(fault.to) << "\n";
    if (fault.from_slot || fault.to_slot) {
      out << "from_slot = " << fault.from_slot << "\n"
          << "to_slot = " << fault.to_slot << "\n";
    }
    if (fault.kind == FaultKind::ByzServer) {
      out << "mode = " << mode_name(fault.mode.behavior) << "\n";
      if (!fault.mode.colluders.empty()) {
        out << "colluders = " << join_nodes(fault.mode.colluders) << "\n";
      }
    }
  }
  return out.str();
}

void apply_override(ScenarioConfig& config, const std::string& key, const std::string& value) {
  if (key.starts_with("net.")) {
    set_net(config.net, key.substr(4), value);
  } else if (key.starts_with("cpu.")) {
    set_cpu(config.cpu, key.substr(4), value);
  } else {
    set_top(config, key, value);
  }
}

}  // namespace ticketforge
