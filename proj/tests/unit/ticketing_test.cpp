#include <algorithm>
#include <stdexcept>

#include "doctest.h"
#include "ticketforge/core_log.hpp"
#include "ticketforge/ticketing.hpp"

using namespace ticketforge;

namespace {

const std::vector<std::uint8_t> kSeed{0x2A};

BlockRef block(NodeId sender, SlotNumber slot) {
  auto b = std::make_shared<Block>();
  b->sender = sender;
  b->slot = slot;
  return b;
}

std::vector<BlockRef> epoch_values(std::initializer_list<NodeId> senders, SlotNumber first) {
  std::vector<BlockRef> out;
  SlotNumber sn = first;
  for (NodeId s : senders) {
    out.push_back(s == kNoNode ? nullptr : block(s, sn));
    ++sn;
  }
  return out;
}

std::vector<NodeId> all4() { return {0, 1, 2, 3}; }

}  // namespace

TEST_CASE("election hash matches the reference recipe") {
  // Reference values computed independently from SHA-256(0x2A || epoch_be64).
  const std::uint64_t mod4[] = {1, 1, 3, 2, 2, 1, 1, 3};
  const std::uint64_t mod3[] = {0, 0, 1, 2, 1, 0, 0, 1};
  const std::uint64_t mod7[] = {0, 6, 4, 4, 5, 5, 6, 6};
  const std::vector<NodeId> c4{0, 1, 2, 3}, c3{0, 1, 2}, c7{0, 1, 2, 3, 4, 5, 6};
  for (EpochNumber e = 1; e <= 8; ++e) {
    CAPTURE(e);
    CHECK(get_ticketing_server(e, c4, kSeed) == static_cast<NodeId>(mod4[e - 1]));
    CHECK(get_ticketing_server(e, c3, kSeed) == static_cast<NodeId>(mod3[e - 1]));
    CHECK(get_ticketing_server(e, c7, kSeed) == static_cast<NodeId>(mod7[e - 1]));
  }
  CHECK(get_ticketing_server(3, c4, kSeed) == 3);
}

TEST_CASE("election sorts candidates and handles singletons") {
  const std::vector<NodeId> shuffled{3, 0, 2, 1};
  for (EpochNumber e = 1; e <= 8; ++e) {
    CHECK(get_ticketing_server(e, shuffled, kSeed) == get_ticketing_server(e, all4(), kSeed));
  }
  const std::vector<NodeId> single{5};
  CHECK(get_ticketing_server(11, single, kSeed) == 5);
  CHECK(get_ticketing_server(11, single, std::vector<std::uint8_t>{1, 2, 3}) == 5);
}

TEST_CASE("hybrid book starts with K round-robin epochs") {
  auto book = EpochBook::hybrid(4, 1, 4, 2, kSeed);
  for (EpochNumber e : {1, 2}) {
    const EpochState* st = book.find(e);
    REQUIRE(st != nullptr);
    CHECK(st->candidates == all4());
    CHECK(st->server == kUnmanaged);
  }
  CHECK(book.find(3) == nullptr);
  CHECK(book.highest_decided() == 2);
}

TEST_CASE("switching rule walks the six-epoch example") {
  auto book = EpochBook::hybrid(4, 1, 4, 2, kSeed);

  auto e3 = book.on_epoch_committed(1, epoch_values({0, 1, 2, 3}, 1));
  REQUIRE(e3);
  CHECK(e3->epoch == 3);
  CHECK(e3->server == 3);
  CHECK(e3->candidates == all4());

  auto e4 = book.on_epoch_committed(2, epoch_values({kNoNode, 1, 2, 3}, 5));
  REQUIRE(e4);
  CHECK(e4->server == kUnmanaged);
  CHECK(e4->candidates == std::vector<NodeId>{1, 2, 3});

  auto e5 = book.on_epoch_committed(3, epoch_values({kNoNode, kNoNode, kNoNode, kNoNode}, 9));
  REQUIRE(e5);
  CHECK(e5->server == kUnmanaged);
  CHECK(e5->candidates == all4());

  // Epoch 4 rotates over [1,2,3]; node 3's slot 15 is skipped.
  auto e6 = book.on_epoch_committed(4, epoch_values({1, 2, kNoNode, 1}, 13));
  REQUIRE(e6);
  CHECK(e6->server == kUnmanaged);
  CHECK(e6->candidates == all4());

  CHECK(*book.find(4) == *e4);
  CHECK_THROWS_AS(book.on_epoch_committed(4, epoch_values({1, 2, 3, 1}, 13)), std::logic_error);
}

TEST_CASE("managed epoch with few senders but no skips reverts to round robin") {
  auto book = EpochBook::hybrid(4, 1, 4, 1, kSeed);
  auto e2 = book.on_epoch_committed(1, epoch_values({0, 1, 2, 3}, 1));
  REQUIRE(e2);
  REQUIRE(e2->managed());
  auto e3 = book.on_epoch_committed(2, epoch_values({2, 2, 2, 2}, 5));
  REQUIRE(e3);
  CHECK(e3->server == kUnmanaged);
  CHECK(e3->candidates == e2->candidates);
}

TEST_CASE("managed epoch with a full house stays managed") {
  auto book = EpochBook::hybrid(4, 1, 4, 1, kSeed);
  auto e2 = book.on_epoch_committed(1, epoch_values({0, 1, 2, 3}, 1));
  auto e3 = book.on_epoch_committed(2, epoch_values({0, 1, 2, 0}, 5));
  REQUIRE(e3);
  CHECK(e3->managed());
  CHECK(e3->candidates == e2->candidates);
  CHECK(e3->server == get_ticketing_server(3, all4(), kSeed));
}

TEST_CASE("unmanaged epochs cannot lack skips and senders at once") {
  // Exhaustive over candidate sets of size >= 2f+1, epoch lengths and positions.
  for (int n : {4, 5, 7}) {
    const int f = (n - 1) / 3;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<NodeId> c;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) c.push_back(i);
      }
      if (static_cast<int>(c.size()) < 2 * f + 1) continue;
      for (std::uint64_t L = 2 * f + 1; L <= 9; ++L) {
        for (EpochNumber e = 1; e <= static_cast<EpochNumber>(c.size()) + 1; ++e) {
          std::vector<NodeId> senders;
          for (SlotNumber sn = first_slot_of(e, L); sn <= last_slot_of(e, L); ++sn) {
            senders.push_back(round_robin_owner(sn, c));
          }
          std::sort(senders.begin(), senders.end());
          senders.erase(std::unique(senders.begin(), senders.end()), senders.end());
          CHECK(static_cast<int>(senders.size()) >= 2 * f + 1);
        }
      }
    }
  }
}

TEST_CASE("active senders ignore bottom slots") {
  const auto values = epoch_values({2, kNoNode, 0, 2}, 1);
  CHECK(active_senders(values) == std::vector<NodeId>{0, 2});
}

TEST_CASE("verify_ticket under round robin") {
  Authenticator auth(1, 4);
  auto book = EpochBook::hybrid(4, 1, 4, 2, kSeed);
  CHECK(verify_ticket(book, 1, 0, RoundRobinTicket{1}, auth) == Verdict::Valid);
  CHECK(verify_ticket(book, 1, 1, RoundRobinTicket{1}, auth) == Verdict::Invalid);
  CHECK(verify_ticket(book, 6, 1, RoundRobinTicket{6}, auth) == Verdict::Valid);
  CHECK(verify_ticket(book, 9, 0, RoundRobinTicket{9}, auth) == Verdict::Undefined);
  CHECK(verify_ticket(book, 12, 3, RoundRobinTicket{12}, auth) == Verdict::Undefined);
  // A grant is no ticket in an unmanaged epoch.
  CHECK(verify_ticket(book, 1, 0, auth.signer_for(2).mint(1, 0), auth) == Verdict::Invalid);
  CHECK(verify_ticket(book, 2, 1, RoundRobinTicket{3}, auth) == Verdict::Invalid);
}

TEST_CASE("verify_ticket under a ticketing server") {
  Authenticator auth(9, 4);
  auto book = EpochBook::hybrid(4, 1, 4, 2, kSeed);
  book.on_epoch_committed(1, epoch_values({0, 1, 2, 3}, 1));
  REQUIRE(book.find(3)->server == 3);
  const ServerGrant good = auth.signer_for(3).mint(10, 1);
  CHECK(verify_ticket(book, 10, 1, good, auth) == Verdict::Valid);
  CHECK(verify_ticket(book, 10, 2, good, auth) == Verdict::Invalid);
  CHECK(verify_ticket(book, 11, 1, good, auth) == Verdict::Invalid);
  CHECK(verify_ticket(book, 10, 1, RoundRobinTicket{10}, auth) == Verdict::Invalid);
  // Minted by a node that is not the server of epoch 3.
  CHECK(verify_ticket(book, 10, 1, auth.signer_for(0).mint(10, 1), auth) == Verdict::Invalid);
  ServerGrant forged = good;
  forged.grantee = 2;
  CHECK(verify_ticket(book, 10, 2, forged, auth) == Verdict::Invalid);
  ServerGrant relabeled = auth.signer_for(0).mint(10, 1);
  relabeled.server = 3;
  CHECK(verify_ticket(book, 10, 1, relabeled, auth) == Verdict::Invalid);
}

TEST_CASE("static books") {
  Authenticator auth(2, 4);
  auto utr = EpochBook::unmanaged(4, 1, 50, 2, {0});
  CHECK(utr.kind() == BookKind::StaticUnmanaged);
  CHECK(verify_ticket(utr, 77, 0, RoundRobinTicket{77}, auth) == Verdict::Valid);
  CHECK(verify_ticket(utr, 77, 3, RoundRobinTicket{77}, auth) == Verdict::Invalid);
  auto mtr = EpochBook::managed(4, 1, 50, 2, 0);
  CHECK(mtr.find(1000)->server == 0);
  CHECK(verify_ticket(mtr, 500, 2, auth.signer_for(0).mint(500, 2), auth) == Verdict::Valid);
  CHECK(verify_ticket(mtr, 500, 2, RoundRobinTicket{500}, auth) == Verdict::Invalid);
  CHECK_FALSE(mtr.on_epoch_committed(1, epoch_values({0, 1, 2}, 1)));
}

TEST_CASE("round robin owner rotates over the candidate list") {
  const std::vector<NodeId> c{1, 2, 3};
  CHECK(round_robin_owner(13, c) == 1);
  CHECK(round_robin_owner(14, c) == 2);
  CHECK(round_robin_owner(15, c) == 3);
  CHECK(round_robin_owner(16, c) == 1);
  CHECK(round_robin_owner(1, all4()) == 0);
}

TEST_CASE("correct server hands out ascending batches") {
  Authenticator auth(3, 4);
  TicketServer server(0, 50, true);
  const ServerMode correct;
  auto a = server.grant(1, 10, correct, auth.signer_for(0));
  auto b = server.grant(2, 10, correct, auth.signer_for(0));
  auto c = server.grant(1, 10, correct, auth.signer_for(0));
  CHECK(a.slots().front() == 1);
  CHECK(a.slots().back() == 10);
  CHECK(b.slots().front() == 11);
  CHECK(c.slots().front() == 21);
  CHECK(c.slots().back() == 30);
  for (const auto& g : c.grants) {
    CHECK(g.grantee == 1);
    CHECK(auth.verify(g));
  }
}

TEST_CASE("served epochs bound the cursor of an elected server") {
  Authenticator auth(3, 4);
  TicketServer server(2, 4, false);
  const ServerMode correct;
  CHECK(server.grant(1, 3, correct, auth.signer_for(2)).empty());
  server.serve(3);
  server.serve(4);
  auto a = server.grant(1, 3, correct, auth.signer_for(2));
  auto b = server.grant(0, 3, correct, auth.signer_for(2));
  auto c = server.grant(3, 3, correct, auth.signer_for(2));
  CHECK(a.slots() == std::vector<SlotNumber>{9, 10, 11});
  CHECK(b.slots() == std::vector<SlotNumber>{12, 13, 14});
  CHECK(c.slots() == std::vector<SlotNumber>{15, 16});
  CHECK_FALSE(server.has_unassigned());
  CHECK(server.grant(1, 3, correct, auth.signer_for(2)).empty());
}

TEST_CASE("byzantine server modes") {
  Authenticator auth(3, 4);
  SUBCASE("starve") {
    TicketServer server(3, 50, true);
    ServerMode mode{ServerBehavior::Starve, {}};
    CHECK(server.grant(0, 10, mode, auth.signer_for(3)).empty());
  }
  SUBCASE("collude") {
    TicketServer server(3, 50, true);
    ServerMode mode{ServerBehavior::ColludeOnly, {3}};
    CHECK(server.grant(0, 10, mode, auth.signer_for(3)).empty());
    CHECK(server.grant(3, 10, mode, auth.signer_for(3)).slots().front() == 1);
  }
  SUBCASE("double grant") {
    TicketServer server(3, 50, true);
    ServerMode mode{ServerBehavior::DoubleGrant, {}};
    auto a = server.grant(0, 5, mode, auth.signer_for(3));
    auto b = server.grant(1, 5, mode, auth.signer_for(3));
    CHECK(a.slots() == b.slots());
    CHECK(b.grants.front().grantee == 1);
    CHECK(auth.verify(b.grants.front()));
  }
}

TEST_CASE("batch request gate watches finality") {
  LogView log;
  std::vector<SlotNumber> batch;
  CHECK(mtr_request_gate(log, batch));
  for (SlotNumber sn = 11; sn <= 20; ++sn) batch.push_back(sn);
  for (SlotNumber sn = 11; sn <= 19; ++sn) log.finalize(sn, block(1, sn));
  CHECK_FALSE(mtr_request_gate(log, batch));
  log.finalize(20, nullptr);
  CHECK(mtr_request_gate(log, batch));
}
