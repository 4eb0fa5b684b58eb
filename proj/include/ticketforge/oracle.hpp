#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ticketforge/config.hpp"
#include "ticketforge/trace.hpp"

namespace ticketforge {

struct PropertyVerdict {
  std::string name;
  bool pass = true;
  bool applicable = true;  // false: property scope excludes this trace
  std::vector<std::string> witness;  // offending trace lines when failing
  std::optional<double> bound_used;
  std::optional<double> measured;
  std::string note;
};

// Which nodes the checks treat as correct, taken from the fault schedule.
struct NodeRoles {
  std::vector<bool> correct;  // never scheduled as Byzantine
  std::vector<bool> live;     // correct and never crashed

  static NodeRoles from_config(const ScenarioConfig& config);
};

PropertyVerdict check_consistency(const Trace& trace, const NodeRoles& roles);
PropertyVerdict check_epoch_consistency(const Trace& trace, const NodeRoles& roles);
PropertyVerdict check_ticket_agreement(const Trace& trace, const NodeRoles& roles);
PropertyVerdict check_slot_utilization(const Trace& trace, const ScenarioConfig& config);
PropertyVerdict check_chain_quality(const Trace& trace, const ScenarioConfig& config);
PropertyVerdict check_contention_free(const Trace& trace, const ScenarioConfig& config);
PropertyVerdict check_liveness(const Trace& trace, const NodeRoles& roles);

// K(fL + 2(f+1)L/n).
double slot_utilization_bound(int n, int f, std::uint64_t K, std::uint64_t L);
// (f+1)K correct-sender blocks per aligned window of 2K epochs.
std::uint64_t chain_quality_bound(int f, std::uint64_t K);

std::vector<PropertyVerdict> check_all(const Trace& trace, const ScenarioConfig& config);
bool all_pass(const std::vector<PropertyVerdict>& verdicts);

std::string render_text(const std::vector<PropertyVerdict>& verdicts);
nlohmann::ordered_json render_json(const std::vector<PropertyVerdict>& verdicts);

}  // namespace ticketforge
