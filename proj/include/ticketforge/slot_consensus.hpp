#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ticketforge/core_log.hpp"

namespace ticketforge {

struct SlotTimer {
  SlotNumber slot = 0;
  Micros start = 0;
  Micros duration = 0;

  Micros expiry() const { return start + duration; }
};

enum class Via : std::uint8_t { Fast, Fallback };
const char* via_name(Via via);

struct FinalizationDecision {
  SlotNumber slot = 0;
  BlockRef value;  // null = ⊥
  Micros decided_at = 0;
  Via via = Via::Fast;
};

// Throws ConfigError unless timeout > delta.
void validate_pacemaker(Micros timeout, Micros delta);

// Minimum post-GST overlap of correct nodes' timers for the same slot when
// their start times differ by at most delta.
Micros guaranteed_overlap(Micros timeout, Micros delta);

SlotTimer start_pacemaker(SlotNumber sn, Micros now, Micros timeout);

// Black-box per-slot agreement. Each node accepts at most one proposal per
// slot; a proposal accepted by 2f+1 nodes can be decided on the fast path as
// long as no correct timer has expired, otherwise the fallback decides it (or
// ⊥ when no proposal reached a quorum). A slot is decided exactly once.
class SlotConsensus {
 public:
  SlotConsensus(int n, int f);

  int quorum() const { return 2 * f_ + 1; }

  // Records `node`'s acceptance. Returns true when this acceptance is the one
  // that completes a quorum for `block`.
  bool accept(SlotNumber sn, NodeId node, const BlockRef& block);
  bool has_accepted(SlotNumber sn, NodeId node) const;
  std::size_t accept_count(SlotNumber sn, NodeId sender) const;

  // Fast path completes only if the fallback has not been triggered.
  std::optional<FinalizationDecision> decide_fast(SlotNumber sn, const BlockRef& block,
                                                  Micros now);

  // Marks the slot ejected. Returns true the first time only.
  bool trigger_fallback(SlotNumber sn);
  bool fallback_triggered(SlotNumber sn) const;

  // Decides the proposal of the lowest sender holding a quorum, otherwise ⊥.
  // Returns nullopt if the slot is already decided.
  std::optional<FinalizationDecision> decide_fallback(SlotNumber sn, Micros now);

  const FinalizationDecision* decision(SlotNumber sn) const;

  // Drops per-slot bookkeeping for decided slots at or below `sn`.
  void forget_through(SlotNumber sn);

 private:
  struct Candidate {
    BlockRef block;
    std::vector<NodeId> acceptors;
  };
  struct Instance {
    std::vector<Candidate> candidates;
    std::vector<bool> accepted;  // per node
    bool ejected = false;
    std::optional<FinalizationDecision> decided;
  };

  Instance& instance(SlotNumber sn);

  int n_;
  int f_;
  std::unordered_map<SlotNumber, Instance> instances_;
};

}  // namespace ticketforge
