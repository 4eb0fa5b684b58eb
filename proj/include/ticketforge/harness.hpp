#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ticketforge/config.hpp"
#include "ticketforge/core_log.hpp"
#include "ticketforge/ticketing.hpp"
#include "ticketforge/trace.hpp"

namespace ticketforge {

struct WindowPolicy {
  std::uint64_t gsw = 1;
  std::uint64_t msw = 1;
  std::uint64_t effective = 1;
  bool mtr_gated = false;  // pure MTR: batch gating instead of a window

  static WindowPolicy from_config(const ScenarioConfig& config);

  // Highest slot that may be proposed or timed with the given frontier.
  SlotNumber limit(SlotNumber frontier) const;
};

bool may_propose(const WindowPolicy& window, SlotNumber frontier, SlotNumber sn);

// Proposer-side bookkeeping of one node.
struct ProposerState {
  NodeId self = kNoNode;
  SlotNumber rr_cursor = 0;  // round-robin slots up to here were considered
  std::map<SlotNumber, ServerGrant> held;
};

struct StepContext {
  const LogView& log;
  const EpochBook& book;
  const WindowPolicy& window;
  std::function<bool(SlotNumber)> silent;  // suppress the broadcast for this slot
  std::function<bool()> take_payload;      // false when the supply is empty
};

struct PlannedProposal {
  SlotNumber slot = 0;
  TicketProof proof;
};

// Proposals a node should broadcast now: owned round-robin slots and held
// grants inside the window. Slots that are silenced or lack a payload are
// given up (they will be filled by the fallback).
std::vector<PlannedProposal> plan_proposals(ProposerState& state, const StepContext& ctx);

struct PhaseMetrics {
  std::size_t phase = 0;
  Micros from = 0;
  Micros to = 0;
  double finality_ms = 0.0;
  double commit_ms = 0.0;
  double throughput_bps = 0.0;
  std::uint64_t skipped = 0;
  std::uint64_t committed_blocks = 0;
  std::vector<std::uint64_t> proposed_by;
};

struct MetricsRecord {
  std::string scenario;
  std::string regime;
  int n = 0;
  std::vector<PhaseMetrics> phases;
};

inline constexpr int kMetricsSchemaVersion = 1;

MetricsRecord collect_metrics(const Trace& trace, const ScenarioConfig& config);

std::string metrics_csv_header(int n);
std::string metrics_csv_rows(const MetricsRecord& record);
std::string metrics_csv(const std::vector<MetricsRecord>& records);
nlohmann::ordered_json metrics_json(const MetricsRecord& record);

}  // namespace ticketforge
