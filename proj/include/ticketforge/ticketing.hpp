#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ticketforge/core_log.hpp"

namespace ticketforge {

inline constexpr NodeId kUnmanaged = -1;

enum class Verdict : std::uint8_t { Valid, Invalid, Undefined };
const char* verdict_name(Verdict v);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Candidate set and regime selector of one epoch. server == kUnmanaged means
// round-robin over `candidates`; otherwise the elected ticketing server.
struct EpochState {
  EpochNumber epoch = 0;
  std::vector<NodeId> candidates;  // sorted ascending
  NodeId server = kUnmanaged;
  bool decided = false;

  bool managed() const { return server != kUnmanaged; }
  bool operator==(const EpochState&) const = default;
};

// Nodes with at least one non-⊥ slot in `committed_epoch`, ascending.
std::vector<NodeId> active_senders(std::span<const BlockRef> committed_epoch);

// Deterministic election: sort C, k = first 8 bytes (big-endian) of
// SHA-256(seed || epoch as 8-byte big-endian) mod |C|, return C[k].
NodeId get_ticketing_server(EpochNumber epoch, std::span<const NodeId> candidates,
                            std::span<const std::uint8_t> seed);

// Simulated PKI. Every node's grant tags are keyed by a secret only that node
// holds; a Signer is handed to the owning node alone.
class Authenticator {
 public:
  class Signer {
   public:
    NodeId node() const { return node_; }
    ServerGrant mint(SlotNumber slot, NodeId grantee) const;

   private:
    friend class Authenticator;
    Signer(NodeId node, std::uint64_t key) : node_(node), key_(key) {}
    NodeId node_;
    std::uint64_t key_;
  };

  Authenticator(std::uint64_t seed, int n);
  Signer signer_for(NodeId node) const;
  bool verify(const ServerGrant& grant) const;

 private:
  static std::uint64_t tag(std::uint64_t key, SlotNumber slot, NodeId grantee);
  std::vector<std::uint64_t> keys_;
};

enum class BookKind : std::uint8_t { Hybrid, StaticUnmanaged, StaticManaged };

// Per-node map of epoch -> (C, TR). The hybrid book implements the epoch
// switching rule; the static books describe pure UTR and pure MTR.
class EpochBook {
 public:
  // First K epochs round-robin over all nodes. Requires L >= 2f+1, K >= 1.
  static EpochBook hybrid(int n, int f, std::uint64_t L, std::uint64_t K,
                          std::vector<std::uint8_t> seed);
  static EpochBook unmanaged(int n, int f, std::uint64_t L, std::uint64_t K,
                             std::vector<NodeId> candidates);
  static EpochBook managed(int n, int f, std::uint64_t L, std::uint64_t K,
                           NodeId server);

  BookKind kind() const { return kind_; }
  int n() const { return n_; }
  int f() const { return f_; }
  std::uint64_t epoch_length() const { return L_; }
  std::uint64_t concurrency() const { return K_; }

  // nullptr while the epoch is undecided.
  const EpochState* find(EpochNumber epoch) const;
  bool decided(EpochNumber epoch) const { return find(epoch) != nullptr; }
  EpochNumber highest_decided() const;  // kForever-like for static books

  // Applies the switching rule after every slot of epoch i committed and
  // returns the decided state of epoch i+K. Static books return nullopt.
  // Throws std::logic_error if epoch i was already processed.
  std::optional<EpochState> on_epoch_committed(EpochNumber i,
                                               std::span<const BlockRef> values);

 private:
  EpochBook(BookKind kind, int n, int f, std::uint64_t L, std::uint64_t K)
      : kind_(kind), n_(n), f_(f), L_(L), K_(K) {}

  BookKind kind_;
  int n_;
  int f_;
  std::uint64_t L_;
  std::uint64_t K_;
  std::vector<std::uint8_t> seed_;
  std::map<EpochNumber, EpochState> epochs_;
  EpochNumber last_processed_ = 0;
  mutable EpochState static_state_;
};

Verdict verify_ticket(const EpochBook& book, SlotNumber sn, NodeId proposer,
                      const TicketProof& proof, const Authenticator& auth);

// Round-robin owner of `sn` under candidate set C: C[(sn-1) mod |C|].
NodeId round_robin_owner(SlotNumber sn, std::span<const NodeId> candidates);

struct GrantBatch {
  NodeId grantee = kNoNode;
  NodeId server = kNoNode;
  std::vector<ServerGrant> grants;

  bool empty() const { return grants.empty(); }
  std::vector<SlotNumber> slots() const;
};

enum class ServerBehavior : std::uint8_t { Correct, Starve, ColludeOnly, DoubleGrant };

struct ServerMode {
  ServerBehavior behavior = ServerBehavior::Correct;
  std::vector<NodeId> colluders;  // ColludeOnly
};

// Grant cursor of one ticketing server. Slots are handed out ascending per
// served epoch; a correct server never assigns a slot twice.
class TicketServer {
 public:
  TicketServer(NodeId self, std::uint64_t epoch_length, bool serve_all = false);

  void serve(EpochNumber epoch);
  bool serves(EpochNumber epoch) const;
  bool has_unassigned() const;

  GrantBatch grant(NodeId requester, std::uint32_t batch_size, const ServerMode& mode,
                   const Authenticator::Signer& signer);

 private:
  std::vector<SlotNumber> take(std::uint32_t count);

  NodeId self_;
  std::uint64_t L_;
  bool serve_all_;
  std::map<EpochNumber, SlotNumber> next_;  // next unassigned slot per epoch
  EpochNumber max_served_ = 0;
  std::vector<SlotNumber> double_grant_pending_;
  NodeId double_grant_first_ = kNoNode;
};

// True iff every slot of the most recent batch is finalized locally
// (trivially true before the first batch).
bool mtr_request_gate(const LogView& log, std::span<const SlotNumber> last_batch);

}  // namespace ticketforge
