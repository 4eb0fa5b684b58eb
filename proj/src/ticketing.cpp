#include "ticketforge/ticketing.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <array>

namespace ticketforge {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<NodeId> all_nodes(int n) {
  std::vector<NodeId> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Valid: return "valid";
    case Verdict::Invalid: return "invalid";
    case Verdict::Undefined: return "undefined";
  }
  return "?";
}

std::vector<NodeId> active_senders(std::span<const BlockRef> committed_epoch) {
  std::vector<NodeId> senders;
  for (const auto& value : committed_epoch) {
    if (value) senders.push_back(value->sender);
  }
  std::sort(senders.begin(), senders.end());
  senders.erase(std::unique(senders.begin(), senders.end()), senders.end());
  return senders;
}

NodeId get_ticketing_server(EpochNumber epoch, std::span<const NodeId> candidates,
                            std::span<const std::uint8_t> seed) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate set");
  std::vector<std::uint8_t> message(seed.begin(), seed.end());
  for (int shift = 56; shift >= 0; shift -= 8) {
    message.push_back(static_cast<std::uint8_t>(epoch >> shift));
  }
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(message.data(), message.size(), digest.data());
  std::uint64_t k = 0;
  for (int i = 0; i < 8; ++i) k = (k << 8) | digest[static_cast<std::size_t>(i)];

  std::vector<NodeId> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[k % sorted.size()];
}

ServerGrant Authenticator::Signer::mint(SlotNumber slot, NodeId grantee) const {
  return ServerGrant{slot, grantee, node_, Authenticator::tag(key_, slot, grantee)};
}

Authenticator::Authenticator(std::uint64_t seed, int n) {
  std::uint64_t state = splitmix64(seed ^ 0x7469636b6574ULL);
  for (int i = 0; i < n; ++i) {
    state = splitmix64(state);
    keys_.push_back(state);
  }
}

Authenticator::Signer Authenticator::signer_for(NodeId node) const {
  return Signer(node, keys_.at(static_cast<std::size_t>(node)));
}

bool Authenticator::verify(const ServerGrant& grant) const {
  if (grant.server < 0 || static_cast<std::size_t>(grant.server) >= keys_.size()) {
    return false;
  }
  return grant.auth ==
         tag(keys_[static_cast<std::size_t>(grant.server)], grant.slot, grant.grantee);
}

std::uint64_t Authenticator::tag(std::uint64_t key, SlotNumber slot, NodeId grantee) {
  return splitmix64(key ^ splitmix64(slot * 0x100000001b3ULL +
                                     static_cast<std::uint64_t>(grantee)));
}

EpochBook EpochBook::hybrid(int n, int f, std::uint64_t L, std::uint64_t K,
                            std::vector<std::uint8_t> seed) {
  if (L < static_cast<std::uint64_t>(2 * f + 1)) {
    throw ConfigError("L", "epoch length must be at least 2f+1 = " +
                               std::to_string(2 * f + 1));
  }
  if (K < 1) throw ConfigError("K", "at least one concurrent epoch is required");
  EpochBook book(BookKind::Hybrid, n, f, L, K);
  book.seed_ = std::move(seed);
  for (EpochNumber e = 1; e <= K; ++e) {
    book.epochs_[e] = EpochState{e, all_nodes(n), kUnmanaged, true};
  }
  return book;
}

EpochBook EpochBook::unmanaged(int n, int f, std::uint64_t L, std::uint64_t K,
                               std::vector<NodeId> candidates) {
  if (candidates.empty()) candidates = all_nodes(n);
  std::sort(candidates.begin(), candidates.end());
  EpochBook book(BookKind::StaticUnmanaged, n, f, L, K);
  book.static_state_ = EpochState{0, std::move(candidates), kUnmanaged, true};
  return book;
}

EpochBook EpochBook::managed(int n, int f, std::uint64_t L, std::uint64_t K,
                             NodeId server) {
  EpochBook book(BookKind::StaticManaged, n, f, L, K);
  book.static_state_ = EpochState{0, all_nodes(n), server, true};
  return book;
}

const EpochState* EpochBook::find(EpochNumber epoch) const {
  if (kind_ != BookKind::Hybrid) {
    static_state_.epoch = epoch;
    return &static_state_;
  }
  auto it = epochs_.find(epoch);
  return it == epochs_.end() ? nullptr : &it->second;
}

EpochNumber EpochBook::highest_decided() const {
  if (kind_ != BookKind::Hybrid) return static_cast<EpochNumber>(kForever);
  return epochs_.empty() ? 0 : epochs_.rbegin()->first;
}

std::optional<EpochState> EpochBook::on_epoch_committed(EpochNumber i,
                                                        std::span<const BlockRef> values) {
  if (i <= last_processed_) {
    throw std::logic_error("epoch " + std::to_string(i) + " committed twice");
  }
  last_processed_ = i;
  if (kind_ != BookKind::Hybrid) return std::nullopt;

  const EpochState& current = epochs_.at(i);
  const std::size_t quorum = static_cast<std::size_t>(2 * f_ + 1);
  const std::vector<NodeId> senders = active_senders(values);
  const bool skipped = std::any_of(values.begin(), values.end(),
                                   [](const BlockRef& v) { return v == nullptr; });

  EpochState next;
  next.epoch = i + K_;
  next.decided = true;
  if (!current.managed()) {
    next.candidates = senders.size() < quorum ? all_nodes(n_) : senders;
  } else {
    next.candidates = current.candidates;
  }
  if (skipped || (senders.size() < quorum && current.managed())) {
    next.server = kUnmanaged;
  } else {
    next.server = get_ticketing_server(next.epoch, next.candidates, seed_);
  }
  epochs_[next.epoch] = next;
  return next;
}

NodeId round_robin_owner(SlotNumber sn, std::span<const NodeId> candidates) {
  return candidates[(sn - 1) % candidates.size()];
}

Verdict verify_ticket(const EpochBook& book, SlotNumber sn, NodeId proposer,
                      const TicketProof& proof, const Authenticator& auth) {
  const EpochState* state = book.find(epoch_of(sn, book.epoch_length()));
  if (state == nullptr) return Verdict::Undefined;
  if (ticket_slot(proof) != sn) return Verdict::Invalid;
  if (!state->managed()) {
    if (!std::holds_alternative<RoundRobinTicket>(proof)) return Verdict::Invalid;
    return round_robin_owner(sn, state->candidates) == proposer ? Verdict::Valid
                                                                 : Verdict::Invalid;
  }
  const auto* grant = std::get_if<ServerGrant>(&proof);
  if (grant == nullptr || grant->grantee != proposer || grant->server != state->server ||
      !auth.verify(*grant)) {
    return Verdict::Invalid;
  }
  return Verdict::Valid;
}

std::vector<SlotNumber> GrantBatch::slots() const {
  std::vector<SlotNumber> out;
  out.reserve(grants.size());
  for (const auto& g : grants) out.push_back(g.slot);
  return out;
}

TicketServer::TicketServer(NodeId self, std::uint64_t epoch_length, bool serve_all)
    : self_(self), L_(epoch_length), serve_all_(serve_all) {
  if (serve_all_) serve(1);
}

void TicketServer::serve(EpochNumber epoch) {
  if (next_.contains(epoch) || epoch <= max_served_) return;
  next_[epoch] = first_slot_of(epoch, L_);
  max_served_ = epoch;
}

bool TicketServer::serves(EpochNumber epoch) const {
  if (serve_all_) return true;
  return next_.contains(epoch);
}

bool TicketServer::has_unassigned() const {
  if (serve_all_) return true;
  for (const auto& [epoch, next] : next_) {
    if (next <= last_slot_of(epoch, L_)) return true;
  }
  return false;
}

std::vector<SlotNumber> TicketServer::take(std::uint32_t count) {
  std::vector<SlotNumber> out;
  auto it = next_.begin();
  while (out.size() < count) {
    if (it == next_.end()) {
      if (!serve_all_) break;
      serve(max_served_ + 1);
      it = next_.find(max_served_);
      continue;
    }
    const SlotNumber last = last_slot_of(it->first, L_);
    while (out.size() < count && it->second <= last) out.push_back(it->second++);
    if (it->second > last) {
      it = next_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

GrantBatch TicketServer::grant(NodeId requester, std::uint32_t batch_size,
                               const ServerMode& mode,
                               const Authenticator::Signer& signer) {
  GrantBatch batch{requester, self_, {}};
  std::vector<SlotNumber> slots;
  switch (mode.behavior) {
    case ServerBehavior::Correct:
      slots = take(batch_size);
      break;
    case ServerBehavior::Starve:
      break;
    case ServerBehavior::ColludeOnly:
      if (std::find(mode.colluders.begin(), mode.colluders.end(), requester) !=
          mode.colluders.end()) {
        slots = take(batch_size);
      }
      break;
    case ServerBehavior::DoubleGrant:
      // Every batch is handed to two distinct requesters.
      if (!double_grant_pending_.empty() && double_grant_first_ != requester) {
        slots = std::move(double_grant_pending_);
        double_grant_pending_.clear();
        double_grant_first_ = kNoNode;
      } else {
        slots = take(batch_size);
        double_grant_pending_ = slots;
        double_grant_first_ = requester;
      }
      break;
  }
  for (SlotNumber sn : slots) batch.grants.push_back(signer.mint(sn, requester));
  return batch;
}

bool mtr_request_gate(const LogView& log, std::span<const SlotNumber> last_batch) {
  return std::all_of(last_batch.begin(), last_batch.end(),
                     [&](SlotNumber sn) { return log.is_finalized(sn); });
}

}  // namespace ticketforge
