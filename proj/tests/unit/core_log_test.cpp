#include <stdexcept>

#include "doctest.h"
#include "ticketforge/core_log.hpp"

using namespace ticketforge;

namespace {

BlockRef block(NodeId sender, SlotNumber slot) {
  auto b = std::make_shared<Block>();
  b->sender = sender;
  b->slot = slot;
  b->payload = {0xab, static_cast<std::uint8_t>(slot)};
  b->ticket = RoundRobinTicket{slot};
  return b;
}

}  // namespace

TEST_CASE("epoch_of maps slots onto 1-indexed epochs") {
  CHECK(epoch_of(4, 4) == 1);
  CHECK(epoch_of(5, 4) == 2);
  CHECK(epoch_of(200, 50) == 4);
  CHECK(epoch_of(1, 50) == 1);
  CHECK(first_slot_of(2, 4) == 5);
  CHECK(last_slot_of(2, 4) == 8);
  for (SlotNumber sn = 1; sn <= 100; ++sn) {
    const EpochNumber e = epoch_of(sn, 7);
    CHECK(first_slot_of(e, 7) <= sn);
    CHECK(sn <= last_slot_of(e, 7));
  }
}

TEST_CASE("commit frontier stops at the first hole") {
  LogView log;
  log.finalize(1, block(0, 1));
  log.finalize(2, block(1, 2));
  log.finalize(4, block(3, 4));
  std::vector<SlotNumber> fired;
  CHECK(commit_frontier(log, [&](SlotNumber sn, const BlockRef&) { fired.push_back(sn); }) == 2);
  CHECK(fired == std::vector<SlotNumber>{1, 2});
  CHECK(log.at(4).phase == SlotPhase::Finalized);
  CHECK(log.at(1).phase == SlotPhase::Committed);
  CHECK(log.highest_finalized() == 4);
}

TEST_CASE("empty log has frontier zero") {
  LogView log;
  CHECK(commit_frontier(log) == 0);
  CHECK(log.at(17).phase == SlotPhase::Unwritten);
  CHECK_FALSE(log.is_finalized(1));
}

TEST_CASE("bottom slots commit and carry a null value") {
  LogView log;
  log.finalize(1, nullptr);
  log.finalize(2, block(2, 2));
  std::vector<std::pair<SlotNumber, bool>> fired;
  CHECK(commit_frontier(log, [&](SlotNumber sn, const BlockRef& v) {
          fired.emplace_back(sn, v == nullptr);
        }) == 2);
  REQUIRE(fired.size() == 2);
  CHECK(fired[0] == std::make_pair(SlotNumber{1}, true));
  CHECK(fired[1] == std::make_pair(SlotNumber{2}, false));
}

TEST_CASE("filling a hole commits the waiting suffix once, ascending") {
  LogView log;
  log.finalize(2, block(1, 2));
  log.finalize(3, block(2, 3));
  std::vector<SlotNumber> fired;
  auto record = [&](SlotNumber sn, const BlockRef&) { fired.push_back(sn); };
  CHECK(log.advance(record) == 0);
  log.finalize(1, nullptr);
  CHECK(log.advance(record) == 3);
  CHECK(log.advance(record) == 3);
  CHECK(fired == std::vector<SlotNumber>{1, 2, 3});
}

TEST_CASE("finalized values are immutable") {
  LogView log;
  const BlockRef b = block(0, 1);
  CHECK(log.finalize(1, b));
  CHECK_FALSE(log.finalize(1, b));
  CHECK_THROWS_AS(log.finalize(1, block(1, 1)), std::logic_error);
  CHECK_THROWS_AS(log.finalize(1, nullptr), std::logic_error);
  CHECK(log.at(1).value == b);
}

TEST_CASE("value encoding") {
  CHECK(encode_value(nullptr) == "bot");
  CHECK(encode_value(block(3, 7)) == "b3.ab07");
  CHECK(describe_proof(RoundRobinTicket{3}) == "rr");
  CHECK(describe_proof(ServerGrant{3, 1, 2, 0}) == "g2");
  CHECK(ticket_slot(ServerGrant{9, 1, 2, 0}) == 9);
}
