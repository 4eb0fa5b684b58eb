#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace ticketforge {

using NodeId = std::int32_t;
using SlotNumber = std::uint64_t;   // 1-indexed
using EpochNumber = std::uint64_t;  // 1-indexed
using Micros = std::int64_t;        // virtual time

inline constexpr NodeId kNoNode = -1;
inline constexpr Micros kMicrosPerMilli = 1000;
inline constexpr Micros kForever = INT64_MAX / 4;

// Epoch i covers slots [(i-1)L+1, iL].
EpochNumber epoch_of(SlotNumber sn, std::uint64_t epoch_length);
SlotNumber first_slot_of(EpochNumber epoch, std::uint64_t epoch_length);
SlotNumber last_slot_of(EpochNumber epoch, std::uint64_t epoch_length);

// Implicit ticket: the proposer's position in the round-robin rotation.
struct RoundRobinTicket {
  SlotNumber slot = 0;
  bool operator==(const RoundRobinTicket&) const = default;
};

// Explicit ticket minted by a ticketing server. `auth` can only be produced
// with the server's key (see Authenticator).
struct ServerGrant {
  SlotNumber slot = 0;
  NodeId grantee = kNoNode;
  NodeId server = kNoNode;
  std::uint64_t auth = 0;
  bool operator==(const ServerGrant&) const = default;
};

using TicketProof = std::variant<RoundRobinTicket, ServerGrant>;

SlotNumber ticket_slot(const TicketProof& proof);
std::string describe_proof(const TicketProof& proof);  // "rr" or "g<server>"

struct Block {
  NodeId sender = kNoNode;
  SlotNumber slot = 0;
  std::vector<std::uint8_t> payload;
  TicketProof ticket;
};

// Finalized values are shared read-only between node views. A null ref is ⊥.
using BlockRef = std::shared_ptr<const Block>;

// "bot" for ⊥, otherwise "b<sender>.<hex payload>".
std::string encode_value(const BlockRef& value);

enum class SlotPhase : std::uint8_t { Unwritten, Finalized, Committed };

struct SlotState {
  SlotPhase phase = SlotPhase::Unwritten;
  BlockRef value;
};

using CommitHandler = std::function<void(SlotNumber, const BlockRef&)>;

// One node's view of the replicated log. Slots may finalize out of order;
// the commit frontier only moves across a contiguous finalized prefix.
class LogView {
 public:
  const SlotState& at(SlotNumber sn) const;
  bool is_finalized(SlotNumber sn) const;  // Finalized or Committed

  // Returns false if the slot already holds this value. Throws
  // std::logic_error on an attempt to overwrite a finalized value.
  bool finalize(SlotNumber sn, BlockRef value);

  // Promotes every slot of the finalized prefix to Committed and fires
  // `on_commit` once per newly committed slot, in ascending order.
  SlotNumber advance(const CommitHandler& on_commit = {});

  SlotNumber commit_frontier() const { return frontier_; }
  SlotNumber highest_finalized() const { return highest_finalized_; }

 private:
  std::vector<SlotState> slots_;  // index sn - 1
  SlotNumber frontier_ = 0;
  SlotNumber highest_finalized_ = 0;
};

// Recomputes the frontier of `log`, promoting and notifying as LogView::advance.
SlotNumber commit_frontier(LogView& log, const CommitHandler& on_commit = {});

}  // namespace ticketforge
