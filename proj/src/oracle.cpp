#include "ticketforge/oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace ticketforge {
namespace {

bool is_correct(const NodeRoles& roles, NodeId id) {
  return id >= 0 && static_cast<std::size_t>(id) < roles.correct.size() &&
         roles.correct[static_cast<std::size_t>(id)];
}

NodeId value_sender(const std::string& value) {
  if (value.size() < 2 || value[0] != 'b' || value == "bot") return kNoNode;
  return static_cast<NodeId>(std::stol(value.substr(1, value.find('.') - 1)));
}

PropertyVerdict fail(PropertyVerdict v, std::vector<std::string> witness) {
  v.pass = false;
  v.witness = std::move(witness);
  return v;
}

// Earliest correct TIMER_START per epoch.
std::map<EpochNumber, Micros> epoch_starts(const Trace& trace, const NodeRoles& roles,
                                           std::uint64_t L) {
  std::map<EpochNumber, Micros> out;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::TimerStart || !is_correct(roles, e.node)) continue;
    const EpochNumber epoch = epoch_of(e.slot, L);
    auto [it, inserted] = out.try_emplace(epoch, e.at);
    if (!inserted) it->second = std::min(it->second, e.at);
  }
  return out;
}

// First committed value per slot over correct nodes.
std::unordered_map<SlotNumber, std::string> committed_values(const Trace& trace,
                                                             const NodeRoles& roles) {
  std::unordered_map<SlotNumber, std::string> out;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::Commit || !is_correct(roles, e.node)) continue;
    out.try_emplace(e.slot, e.get("v").value_or(""));
  }
  return out;
}

}  // namespace

NodeRoles NodeRoles::from_config(const ScenarioConfig& config) {
  NodeRoles roles;
  roles.correct.assign(static_cast<std::size_t>(config.n), true);
  for (NodeId id : config.byzantine_nodes()) roles.correct[static_cast<std::size_t>(id)] = false;
  roles.live = roles.correct;
  for (NodeId id : config.crashed_nodes()) roles.live[static_cast<std::size_t>(id)] = false;
  return roles;
}

double slot_utilization_bound(int n, int f, std::uint64_t K, std::uint64_t L) {
  const double l = static_cast<double>(L);
  return static_cast<double>(K) * (f * l + 2.0 * (f + 1) * l / n);
}

std::uint64_t chain_quality_bound(int f, std::uint64_t K) {
  return static_cast<std::uint64_t>(f + 1) * K;
}

PropertyVerdict check_consistency(const Trace& trace, const NodeRoles& roles) {
  PropertyVerdict v{"consistency"};
  std::unordered_map<SlotNumber, const TraceEvent*> first;
  std::map<std::pair<NodeId, SlotNumber>, const TraceEvent*> finalized;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::Commit && e.kind != TraceKind::Finalize) continue;
    if (!is_correct(roles, e.node)) continue;
    const auto value = e.get("v");
    auto [it, inserted] = first.try_emplace(e.slot, &e);
    if (!inserted && it->second->get("v") != value) {
      return fail(v, {format_event(*it->second), format_event(e)});
    }
    if (e.kind == TraceKind::Finalize) {
      auto [f, fresh] = finalized.try_emplace({e.node, e.slot}, &e);
      if (!fresh) return fail(v, {format_event(*f->second), format_event(e)});
    }
  }
  return v;
}

PropertyVerdict check_epoch_consistency(const Trace& trace, const NodeRoles& roles) {
  PropertyVerdict v{"epoch_consistency"};
  std::unordered_map<EpochNumber, const TraceEvent*> first;
  std::set<std::pair<NodeId, EpochNumber>> seen;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::EpochDecided || !is_correct(roles, e.node)) continue;
    auto [it, inserted] = first.try_emplace(e.slot, &e);
    if (!inserted && it->second->detail != e.detail) {
      return fail(v, {format_event(*it->second), format_event(e)});
    }
    if (!seen.insert({e.node, e.slot}).second) {
      return fail(v, {format_event(e)});
    }
  }
  v.measured = static_cast<double>(first.size());
  return v;
}

PropertyVerdict check_ticket_agreement(const Trace& trace, const NodeRoles& roles) {
  PropertyVerdict v{"ticket_agreement"};
  struct Seen {
    const TraceEvent* valid = nullptr;
    const TraceEvent* invalid = nullptr;
  };
  std::map<std::tuple<SlotNumber, std::string, std::string>, Seen> checks;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::TicketCheck || !is_correct(roles, e.node)) continue;
    const auto verdict = e.get("verdict").value_or("");
    if (verdict == "undefined") continue;
    auto& s = checks[{e.slot, e.get("p").value_or(""), e.get("proof").value_or("")}];
    (verdict == "valid" ? s.valid : s.invalid) = &e;
    if (s.valid && s.invalid) return fail(v, {format_event(*s.valid), format_event(*s.invalid)});
  }
  return v;
}

PropertyVerdict check_slot_utilization(const Trace& trace, const ScenarioConfig& config) {
  PropertyVerdict v{"slot_utilization"};
  if (config.regime != RegimeKind::Htr) {
    v.applicable = false;
    v.note = "bound holds for the hybrid regime only";
    return v;
  }
  if (config.has_byzantine()) {
    v.applicable = false;
    v.note = "schedule contains Byzantine faults";
    return v;
  }
  const NodeRoles roles = NodeRoles::from_config(config);
  const auto starts = epoch_starts(trace, roles, config.L);
  const double bound = slot_utilization_bound(config.n, config.f, config.K, config.L);
  v.bound_used = bound;
  std::uint64_t skipped = 0;
  std::vector<std::string> witness;
  std::set<SlotNumber> counted;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::Commit || !is_correct(roles, e.node)) continue;
    if (e.get("v") != "bot" || counted.contains(e.slot)) continue;
    auto it = starts.find(epoch_of(e.slot, config.L));
    if (it == starts.end() || it->second < config.gst) continue;
    counted.insert(e.slot);
    ++skipped;
    if (witness.size() < 8) witness.push_back(format_event(e));
  }
  v.measured = static_cast<double>(skipped);
  if (static_cast<double>(skipped) > bound) return fail(v, witness);
  return v;
}

PropertyVerdict check_chain_quality(const Trace& trace, const ScenarioConfig& config) {
  PropertyVerdict v{"chain_quality"};
  if (config.regime != RegimeKind::Htr) {
    v.applicable = false;
    v.note = "bound holds for the hybrid regime only";
    return v;
  }
  const NodeRoles roles = NodeRoles::from_config(config);
  const auto starts = epoch_starts(trace, roles, config.L);
  const auto values = committed_values(trace, roles);
  const std::uint64_t bound = chain_quality_bound(config.f, config.K);
  v.bound_used = static_cast<double>(bound);

  const std::uint64_t span = 2 * config.K;
  std::uint64_t windows = 0;
  std::uint64_t worst = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::string> witness;
  for (EpochNumber first = 1;; first += span) {
    const SlotNumber lo = first_slot_of(first, config.L);
    const SlotNumber hi = last_slot_of(first + span - 1, config.L);
    if (!values.contains(hi)) break;
    auto start = starts.find(first);
    const bool after_gst =
        config.gst == 0 || (start != starts.end() && start->second >= config.gst);
    if (!after_gst) continue;
    bool complete = true;
    std::uint64_t good = 0;
    for (SlotNumber sn = lo; sn <= hi; ++sn) {
      auto it = values.find(sn);
      if (it == values.end()) {
        complete = false;
        break;
      }
      if (is_correct(roles, value_sender(it->second))) ++good;
    }
    if (!complete) continue;
    ++windows;
    if (good < worst) {
      worst = good;
      witness = {"epochs " + std::to_string(first) + "-" + std::to_string(first + span - 1) +
                 ": " + std::to_string(good) + " correct-sender blocks"};
    }
  }
  if (windows == 0) {
    v.applicable = false;
    v.note = "no complete post-GST window";
    return v;
  }
  v.measured = static_cast<double>(worst);
  if (worst < bound) return fail(v, witness);
  return v;
}

PropertyVerdict check_contention_free(const Trace& trace, const ScenarioConfig& config) {
  PropertyVerdict v{"contention_free"};
  const NodeRoles roles = NodeRoles::from_config(config);
  std::unordered_map<EpochNumber, bool> in_scope;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::EpochDecided || !is_correct(roles, e.node)) continue;
    const int server = std::stoi(e.get("tr").value_or("-1"));
    in_scope.try_emplace(e.slot, server < 0 || is_correct(roles, server));
  }
  std::unordered_map<SlotNumber, std::pair<NodeId, const TraceEvent*>> holder;
  auto claim = [&](SlotNumber sn, NodeId who, const TraceEvent& e) -> bool {
    auto scope = in_scope.find(epoch_of(sn, config.L));
    if (scope == in_scope.end() || !scope->second) return true;
    auto [it, inserted] = holder.try_emplace(sn, who, &e);
    if (!inserted && it->second.first != who) {
      v.witness = {format_event(*it->second.second), format_event(e)};
      return false;
    }
    return true;
  };
  for (const auto& e : trace) {
    if (e.kind == TraceKind::TicketCheck && is_correct(roles, e.node) &&
        e.get("verdict") == "valid") {
      if (!claim(e.slot, std::stoi(e.get("p").value_or("-1")), e)) return fail(v, v.witness);
    } else if (e.kind == TraceKind::Grant && is_correct(roles, e.node)) {
      const NodeId grantee = std::stoi(e.get("grantee").value_or("-1"));
      const std::string slots = e.get("slots").value_or("");
      std::size_t pos = 0;
      while (pos < slots.size()) {
        auto end = slots.find(';', pos);
        if (end == std::string::npos) end = slots.size();
        const std::string range = slots.substr(pos, end - pos);
        const auto dash = range.find('-');
        const SlotNumber a = std::stoull(range.substr(0, dash));
        const SlotNumber b = dash == std::string::npos ? a : std::stoull(range.substr(dash + 1));
        for (SlotNumber sn = a; sn <= b; ++sn) {
          if (!claim(sn, grantee, e)) return fail(v, v.witness);
        }
        pos = end + 1;
      }
    }
  }
  return v;
}

PropertyVerdict check_liveness(const Trace& trace, const NodeRoles& roles) {
  PropertyVerdict v{"liveness"};
  auto live = [&](NodeId id) {
    return id >= 0 && static_cast<std::size_t>(id) < roles.live.size() &&
           roles.live[static_cast<std::size_t>(id)];
  };
  SlotNumber highest = 0;
  std::vector<std::set<SlotNumber>> finalized(roles.live.size());
  for (const auto& e : trace) {
    if (!live(e.node)) continue;
    if (e.kind == TraceKind::TimerStart) highest = std::max(highest, e.slot);
    if (e.kind == TraceKind::Finalize) finalized[static_cast<std::size_t>(e.node)].insert(e.slot);
  }
  v.measured = static_cast<double>(highest);
  for (std::size_t id = 0; id < roles.live.size(); ++id) {
    if (!roles.live[id]) continue;
    const auto& done = finalized[id];
    SlotNumber expect = 1;
    for (auto it = done.begin(); it != done.end() && *it == expect && expect <= highest; ++it) {
      ++expect;
    }
    if (expect <= highest) {
      return fail(v, {"node " + std::to_string(id) + " never finalized slot " +
                      std::to_string(expect) + " (timers started up to " +
                      std::to_string(highest) + ")"});
    }
  }
  return v;
}

std::vector<PropertyVerdict> check_all(const Trace& trace, const ScenarioConfig& config) {
  const NodeRoles roles = NodeRoles::from_config(config);
  return {
      check_consistency(trace, roles),
      check_epoch_consistency(trace, roles),
      check_ticket_agreement(trace, roles),
      check_contention_free(trace, config),
      check_slot_utilization(trace, config),
      check_chain_quality(trace, config),
      check_liveness(trace, roles),
  };
}

bool all_pass(const std::vector<PropertyVerdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const PropertyVerdict& v) { return v.pass; });
}

std::string render_text(const std::vector<PropertyVerdict>& verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    const char* status = !v.applicable ? "SKIP" : v.pass ? "PASS" : "FAIL";
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-18s", status, v.name.c_str());
    out += line;
    if (v.measured) out += " measured=" + std::to_string(static_cast<long long>(*v.measured));
    if (v.bound_used) {
      std::snprintf(line, sizeof line, " bound=%g", *v.bound_used);
      out += line;
    }
    if (!v.note.empty()) out += " (" + v.note + ")";
    out += "\n";
    for (const auto& w : v.witness) out += "     | " + w + "\n";
  }
  return out;
}

nlohmann::ordered_json render_json(const std::vector<PropertyVerdict>& verdicts) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& v : verdicts) {
    nlohmann::ordered_json j;
    j["name"] = v.name;
    j["pass"] = v.pass;
    j["applicable"] = v.applicable;
    if (v.bound_used) j["bound"] = *v.bound_used;
    if (v.measured) j["measured"] = *v.measured;
    if (!v.note.empty()) j["note"] = v.note;
    j["witness"] = v.witness;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace ticketforge
