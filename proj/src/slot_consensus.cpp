#include "ticketforge/slot_consensus.hpp"

#include <algorithm>

#include "ticketforge/ticketing.hpp"

namespace ticketforge {

const char* via_name(Via via) { return via == Via::Fast ? "fast" : "fallback"; }

void validate_pacemaker(Micros timeout, Micros delta) {
  if (timeout <= delta) {
    throw ConfigError("timeout_ms", "slot timeout must exceed the post-GST delay bound");
  }
}

Micros guaranteed_overlap(Micros timeout, Micros delta) {
  validate_pacemaker(timeout, delta);
  return timeout - delta;
}

SlotTimer start_pacemaker(SlotNumber sn, Micros now, Micros timeout) {
  if (timeout <= 0) throw ConfigError("timeout_ms", "must be positive");
  return SlotTimer{sn, now, timeout};
}

SlotConsensus::SlotConsensus(int n, int f) : n_(n), f_(f) {}

SlotConsensus::Instance& SlotConsensus::instance(SlotNumber sn) {
  auto [it, inserted] = instances_.try_emplace(sn);
  if (inserted) it->second.accepted.assign(static_cast<std::size_t>(n_), false);
  return it->second;
}

bool SlotConsensus::accept(SlotNumber sn, NodeId node, const BlockRef& block) {
  Instance& inst = instance(sn);
  auto idx = static_cast<std::size_t>(node);
  if (inst.accepted[idx] || !block) return false;
  inst.accepted[idx] = true;
  auto it = std::find_if(inst.candidates.begin(), inst.candidates.end(),
                         [&](const Candidate& c) { return c.block == block; });
  if (it == inst.candidates.end()) {
    inst.candidates.push_back(Candidate{block, {}});
    it = std::prev(inst.candidates.end());
  }
  it->acceptors.push_back(node);
  return it->acceptors.size() == static_cast<std::size_t>(quorum());
}

bool SlotConsensus::has_accepted(SlotNumber sn, NodeId node) const {
  auto it = instances_.find(sn);
  return it != instances_.end() && it->second.accepted[static_cast<std::size_t>(node)];
}

std::size_t SlotConsensus::accept_count(SlotNumber sn, NodeId sender) const {
  auto it = instances_.find(sn);
  if (it == instances_.end()) return 0;
  for (const auto& c : it->second.candidates) {
    if (c.block->sender == sender) return c.acceptors.size();
  }
  return 0;
}

std::optional<FinalizationDecision> SlotConsensus::decide_fast(SlotNumber sn,
                                                               const BlockRef& block,
                                                               Micros now) {
  Instance& inst = instance(sn);
  if (inst.decided || inst.ejected) return std::nullopt;
  inst.decided = FinalizationDecision{sn, block, now, Via::Fast};
  return inst.decided;
}

bool SlotConsensus::trigger_fallback(SlotNumber sn) {
  Instance& inst = instance(sn);
  if (inst.ejected || inst.decided) return false;
  inst.ejected = true;
  return true;
}

bool SlotConsensus::fallback_triggered(SlotNumber sn) const {
  auto it = instances_.find(sn);
  return it != instances_.end() && it->second.ejected;
}

std::optional<FinalizationDecision> SlotConsensus::decide_fallback(SlotNumber sn,
                                                                   Micros now) {
  Instance& inst = instance(sn);
  if (inst.decided) return std::nullopt;
  BlockRef winner;
  for (const auto& c : inst.candidates) {
    if (c.acceptors.size() < static_cast<std::size_t>(quorum())) continue;
    if (!winner || c.block->sender < winner->sender) winner = c.block;
  }
  inst.decided = FinalizationDecision{sn, winner, now, Via::Fallback};
  return inst.decided;
}

const FinalizationDecision* SlotConsensus::decision(SlotNumber sn) const {
  auto it = instances_.find(sn);
  if (it == instances_.end() || !it->second.decided) return nullptr;
  return &*it->second.decided;
}

void SlotConsensus::forget_through(SlotNumber sn) {
  std::erase_if(instances_, [&](const auto& entry) {
    return entry.first <= sn && entry.second.decided.has_value();
  });
}

}  // namespace ticketforge
