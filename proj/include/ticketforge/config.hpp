#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ticketforge/core_log.hpp"
#include "ticketforge/ticketing.hpp"

namespace ticketforge {

enum class RegimeKind : std::uint8_t { Utr, Mtr, Htr };
const char* regime_name(RegimeKind kind);

// Message delay model. Post-GST delays are clamped to `delta`.
struct NetProfile {
  Micros base = 50;
  Micros jitter = 25;
  Micros delta = 1000;
  Micros pre_gst_extra = 20000;  // uniform extra delay before GST
  bool pre_gst_loss = false;     // drop instead of delaying before GST
};

// Per-job processing costs at multiplier 1.
struct CpuCosts {
  Micros process = 60;    // validate and vote on a received proposal
  Micros catchup = 6;     // apply a slot whose decision is already known
  Micros propose = 40;    // create a proposal
  Micros grant = 6;       // handle a ticket request or reply
  Micros serialize = 15;  // NIC time per outgoing message
};

struct Supply {
  bool unbounded = true;
  double blocks_per_second = 0.0;
};

struct NodeProfile {
  double serialization_multiplier = 1.0;
  Supply supply;
};

// Correct-but-slow window: all of the node's CPU costs are scaled.
struct SlowPhase {
  NodeId node = kNoNode;
  Micros from = 0;
  Micros to = kForever;
  double multiplier = 1.0;
};

enum class FaultKind : std::uint8_t { Crash, SilentTicketHolder, ByzServer };
const char* fault_kind_name(FaultKind kind);

struct FaultSpec {
  FaultKind kind = FaultKind::Crash;
  NodeId node = kNoNode;
  Micros from = 0;        // crash time for Crash
  Micros to = kForever;
  SlotNumber from_slot = 0;  // optional slot window for SilentTicketHolder
  SlotNumber to_slot = 0;
  ServerMode mode;           // ByzServer

  bool active_at(Micros now) const { return now >= from && now < to; }
};

struct ScenarioConfig {
  std::string name = "scenario";
  int n = 4;
  int f = 1;
  std::uint64_t L = 50;
  std::uint64_t K = 2;
  std::uint64_t gsw = 50;
  std::uint64_t seed = 1;
  std::vector<std::uint8_t> election_seed;  // defaults to seed, 8 bytes BE
  Micros duration = 1000 * kMicrosPerMilli;
  Micros gst = 0;
  Micros timeout = 10 * kMicrosPerMilli;
  Micros fallback = -1;  // -1: 2 * net.delta
  RegimeKind regime = RegimeKind::Htr;
  std::vector<NodeId> candidates;  // UTR; empty = all nodes
  std::uint32_t batch = 10;
  NodeId mtr_server = 0;
  std::uint32_t payload_size = 2;
  Micros report_phase = 0;  // 0 = one phase spanning the run
  bool assert_guarantees = true;
  NetProfile net;
  CpuCosts cpu;
  std::vector<NodeProfile> nodes;  // size n after validate()
  std::vector<SlowPhase> phases;
  std::vector<FaultSpec> faults;

  std::uint64_t msw() const;
  std::uint64_t effective_window() const;
  Micros fallback_latency() const { return fallback >= 0 ? fallback : 2 * net.delta; }
  std::vector<NodeId> byzantine_nodes() const;
  std::vector<NodeId> crashed_nodes() const;
  bool has_byzantine() const { return !byzantine_nodes().empty(); }
  std::vector<std::uint8_t> election_seed_bytes() const;
};

// Fills per-node defaults and checks every invariant. Throws ConfigError
// naming the offending field.
void validate(ScenarioConfig& config);

// Flat `key = value` text with [net], [cpu] tables and repeated [[node]],
// [[phase]], [[fault]] tables. Times are in milliseconds.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string to_text(const ScenarioConfig& config);

// Applies a single `key=value` override (dotted keys address tables, e.g.
// net.base_ms). Used by sweeps and the CLI.
void apply_override(ScenarioConfig& config, const std::string& key, const std::string& value);

}  // namespace ticketforge
