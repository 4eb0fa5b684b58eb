#include "ticketforge/core_log.hpp"

#include <stdexcept>

namespace ticketforge {

EpochNumber epoch_of(SlotNumber sn, std::uint64_t epoch_length) {
  if (sn == 0 || epoch_length == 0) {
    throw std::invalid_argument("epoch_of: slot and epoch length must be >= 1");
  }
  return (sn + epoch_length - 1) / epoch_length;
}

SlotNumber first_slot_of(EpochNumber epoch, std::uint64_t epoch_length) {
  return (epoch - 1) * epoch_length + 1;
}

SlotNumber last_slot_of(EpochNumber epoch, std::uint64_t epoch_length) {
  return epoch * epoch_length;
}

SlotNumber ticket_slot(const TicketProof& proof) {
  return std::visit([](const auto& t) { return t.slot; }, proof);
}

std::string describe_proof(const TicketProof& proof) {
  if (const auto* grant = std::get_if<ServerGrant>(&proof)) {
    return "g" + std::to_string(grant->server);
  }
  return "rr";
}

std::string encode_value(const BlockRef& value) {
  if (!value) return "bot";
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "b" + std::to_string(value->sender) + ".";
  for (std::uint8_t byte : value->payload) {
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0xf]);
  }
  return out;
}

const SlotState& LogView::at(SlotNumber sn) const {
  static const SlotState kUnwritten{};
  if (sn == 0 || sn > slots_.size()) return kUnwritten;
  return slots_[sn - 1];
}

bool LogView::is_finalized(SlotNumber sn) const {
  return at(sn).phase != SlotPhase::Unwritten;
}

bool LogView::finalize(SlotNumber sn, BlockRef value) {
  if (sn == 0) throw std::invalid_argument("slot numbers start at 1");
  if (sn > slots_.size()) slots_.resize(sn);
  SlotState& slot = slots_[sn - 1];
  if (slot.phase != SlotPhase::Unwritten) {
    if (encode_value(slot.value) != encode_value(value)) {
      throw std::logic_error("slot " + std::to_string(sn) +
                             " already finalized with a different value");
    }
    return false;
  }
  slot.phase = SlotPhase::Finalized;
  slot.value = std::move(value);
  if (sn > highest_finalized_) highest_finalized_ = sn;
  return true;
}

SlotNumber LogView::advance(const CommitHandler& on_commit) {
  while (frontier_ < slots_.size() &&
         slots_[frontier_].phase == SlotPhase::Finalized) {
    SlotState& slot = slots_[frontier_];
    slot.phase = SlotPhase::Committed;
    ++frontier_;
    if (on_commit) on_commit(frontier_, slot.value);
  }
  return frontier_;
}

SlotNumber commit_frontier(LogView& log, const CommitHandler& on_commit) {
  return log.advance(on_commit);
}

}  // namespace ticketforge
