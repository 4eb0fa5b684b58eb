#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <unordered_map>
#include <variant>

#include "ticketforge/harness.hpp"
#include "ticketforge/simnet.hpp"
#include "ticketforge/slot_consensus.hpp"

namespace ticketforge {
namespace {

struct ProposalMsg {
  BlockRef block;
};
struct GrantRequestMsg {
  EpochNumber epoch = 0;
  std::uint64_t request_id = 0;
};
struct GrantReplyMsg {
  GrantBatch batch;
  EpochNumber epoch = 0;
  std::uint64_t request_id = 0;
};
using Message = std::variant<ProposalMsg, GrantRequestMsg, GrantReplyMsg>;

enum class EvKind : std::uint8_t {
  Deliver,
  CpuDone,
  CertArrive,
  TimerFire,
  FastDecide,
  FallbackDecide,
  FaultEdge,
  PhaseEdge,
  RequestTimeout,
  NodeStep,
  Stop,
};

struct Event {
  EvKind kind = EvKind::NodeStep;
  NodeId node = kNoNode;
  NodeId from = kNoNode;
  SlotNumber slot = 0;
  std::uint64_t aux = 0;
  Micros sent_at = 0;
  BlockRef block;
  std::shared_ptr<const Message> msg;
};

enum class JobKind : std::uint8_t { Process, CatchUp, Create, ServeRequest, HandleReply };

struct Job {
  JobKind kind = JobKind::Process;
  SlotNumber slot = 0;
  NodeId from = kNoNode;
  BlockRef block;
  TicketProof proof;
  std::shared_ptr<const Message> msg;
};

struct NodeSlot {
  bool timer_started = false;
  bool timer_expired = false;
  bool processed = false;
  bool cert = false;
  int pending_jobs = 0;
  Micros cert_at = 0;
  BlockRef cert_value;
  Via cert_via = Via::Fast;
};

struct Node {
  NodeId id = kNoNode;
  bool byzantine = false;
  Micros crash_at = kForever;
  double ser_mult = 1.0;
  Supply supply;
  std::uint64_t consumed = 0;

  LogView log;
  std::optional<EpochBook> book;
  std::unordered_map<SlotNumber, NodeSlot> slots;
  std::map<SlotNumber, std::vector<BlockRef>> buffered;  // Undefined verdicts
  ProposerState proposer;
  SlotNumber timers_through = 0;
  EpochNumber announced_through = 0;

  std::deque<Job> urgent;
  std::deque<Job> normal;
  bool busy = false;
  Job current;
  Micros nic_free_at = 0;

  std::vector<SlotNumber> last_batch;
  bool request_outstanding = false;
  std::uint64_t request_id = 0;
  EpochNumber request_epoch = 0;
  std::set<EpochNumber> exhausted;
  Micros next_request_at = 0;
  std::optional<TicketServer> server;
  std::vector<std::pair<NodeId, GrantRequestMsg>> parked;

  bool step_scheduled = false;
  bool wake_scheduled = false;
};

std::string ranges(const std::vector<SlotNumber>& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < slots.size()) {
    std::size_t j = i;
    while (j + 1 < slots.size() && slots[j + 1] == slots[j] + 1) ++j;
    if (!out.empty()) out += ';';
    out += std::to_string(slots[i]);
    if (j > i) out += "-" + std::to_string(slots[j]);
    i = j + 1;
  }
  return out;
}

std::string join_candidates(const std::vector<NodeId>& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(c[i]);
  }
  return out;
}

class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& config)
      : cfg_(config),
        rng_(config.seed),
        auth_(config.seed, config.n),
        consensus_(config.n, config.f),
        window_(WindowPolicy::from_config(config)) {
    const auto byz = cfg_.byzantine_nodes();
    for (int i = 0; i < cfg_.n; ++i) {
      Node node;
      node.id = i;
      node.byzantine = std::find(byz.begin(), byz.end(), i) != byz.end();
      node.ser_mult = cfg_.nodes[static_cast<std::size_t>(i)].serialization_multiplier;
      node.supply = cfg_.nodes[static_cast<std::size_t>(i)].supply;
      node.proposer.self = i;
      switch (cfg_.regime) {
        case RegimeKind::Utr:
          node.book = EpochBook::unmanaged(cfg_.n, cfg_.f, cfg_.L, cfg_.K, cfg_.candidates);
          break;
        case RegimeKind::Mtr:
          node.book = EpochBook::managed(cfg_.n, cfg_.f, cfg_.L, cfg_.K, cfg_.mtr_server);
          if (i == cfg_.mtr_server) node.server.emplace(i, cfg_.L, true);
          break;
        case RegimeKind::Htr:
          node.book = EpochBook::hybrid(cfg_.n, cfg_.f, cfg_.L, cfg_.K, cfg_.election_seed_bytes());
          node.server.emplace(i, cfg_.L, false);
          break;
      }
      nodes_.push_back(std::move(node));
    }
    for (const auto& fault : cfg_.faults) {
      if (fault.kind == FaultKind::Crash) {
        auto& n = nodes_[static_cast<std::size_t>(fault.node)];
        n.crash_at = std::min(n.crash_at, fault.from);
      }
    }
    timer_window_ = cfg_.regime == RegimeKind::Mtr ? cfg_.batch : window_.effective;
  }

  Trace run() {
    for (auto& node : nodes_) {
      emit(0, TraceKind::Init, node.id, 0,
           std::string("regime=") + regime_name(cfg_.regime) + ",n=" + std::to_string(cfg_.n) +
               ",f=" + std::to_string(cfg_.f) + ",L=" + std::to_string(cfg_.L) +
               ",K=" + std::to_string(cfg_.K) + ",window=" + std::to_string(window_.effective));
    }
    if (cfg_.duration > 0) {
      for (std::size_t i = 0; i < cfg_.faults.size(); ++i) {
        const auto& f = cfg_.faults[i];
        if (f.from < cfg_.duration) push(f.from, Event{EvKind::FaultEdge, f.node, kNoNode, 0, i * 2});
        if (f.kind != FaultKind::Crash && f.to < cfg_.duration) {
          push(f.to, Event{EvKind::FaultEdge, f.node, kNoNode, 0, i * 2 + 1});
        }
      }
      for (std::size_t i = 0; i < cfg_.phases.size(); ++i) {
        const auto& p = cfg_.phases[i];
        if (p.from < cfg_.duration) push(p.from, Event{EvKind::PhaseEdge, p.node, kNoNode, 0, i * 2});
        if (p.to < cfg_.duration) push(p.to, Event{EvKind::PhaseEdge, p.node, kNoNode, 0, i * 2 + 1});
      }
      for (auto& node : nodes_) schedule_step(node, 0);
    }
    push(cfg_.duration, Event{EvKind::Stop});

    while (!queue_.empty()) {
      auto entry = queue_.pop();
      now_ = entry.at;
      dispatch(entry.payload);
    }
    return std::move(trace_);
  }

 private:
  // ---- plumbing -------------------------------------------------------

  void push(Micros at, Event ev) { queue_.push(at, std::move(ev)); }

  void emit(Micros at, TraceKind kind, NodeId node, SlotNumber slot, std::string detail) {
    trace_.push_back(TraceEvent{at, kind, node, slot, std::move(detail)});
  }

  bool crashed(const Node& node) const { return now_ >= node.crash_at; }

  double slow_multiplier(NodeId id) const {
    double m = 1.0;
    for (const auto& p : cfg_.phases) {
      if (p.node == id && now_ >= p.from && now_ < p.to) m *= p.multiplier;
    }
    return m;
  }

  bool silent_now(NodeId id) const {
    for (const auto& f : cfg_.faults) {
      if (f.kind == FaultKind::SilentTicketHolder && f.node == id && f.active_at(now_) &&
          f.from_slot == 0 && f.to_slot == 0) {
        return true;
      }
    }
    return false;
  }

  bool silent_for(NodeId id, SlotNumber sn) const {
    for (const auto& f : cfg_.faults) {
      if (f.kind != FaultKind::SilentTicketHolder || f.node != id || !f.active_at(now_)) continue;
      if (f.from_slot == 0 && f.to_slot == 0) return true;
      if (sn >= f.from_slot && sn <= f.to_slot) return true;
    }
    return false;
  }

  ServerMode server_mode(NodeId id) const {
    for (const auto& f : cfg_.faults) {
      if (f.kind == FaultKind::ByzServer && f.node == id && f.active_at(now_)) return f.mode;
    }
    return ServerMode{};
  }

  bool supply_available(const Node& node) const {
    if (node.supply.unbounded) return true;
    const double minted = node.supply.blocks_per_second * static_cast<double>(now_) / 1e6;
    return std::floor(minted) > static_cast<double>(node.consumed);
  }

  Micros next_supply_at(const Node& node) const {
    if (node.supply.unbounded || node.supply.blocks_per_second <= 0) return kForever;
    const double t = static_cast<double>(node.consumed + 1) * 1e6 / node.supply.blocks_per_second;
    return std::max(now_ + 1, static_cast<Micros>(std::ceil(t)));
  }

  // Protocol-internal hop; a lost message is retransmitted and lands by GST + delta.
  Micros hop() {
    const DelaySample d = sample_delay(cfg_.net, now_, cfg_.gst, rng_);
    return d.dropped ? std::max(now_, cfg_.gst) + cfg_.net.delta - now_ : d.delay;
  }

  void send(Node& from, NodeId to, std::shared_ptr<const Message> msg, SlotNumber slot = 0) {
    if (to == from.id) {
      push(now_, Event{EvKind::Deliver, to, from.id, slot, 0, now_, nullptr, std::move(msg)});
      return;
    }
    const auto ser = static_cast<Micros>(
        std::llround(static_cast<double>(cfg_.cpu.serialize) * from.ser_mult));
    const Micros depart = std::max(now_, from.nic_free_at) + ser;
    from.nic_free_at = depart;
    const DelaySample d = sample_delay(cfg_.net, depart, cfg_.gst, rng_);
    if (d.dropped) return;
    push(depart + d.delay, Event{EvKind::Deliver, to, from.id, slot, 0, now_, nullptr, std::move(msg)});
  }

  void schedule_step(Node& node, Micros at) {
    if (node.step_scheduled) return;
    node.step_scheduled = true;
    push(at, Event{EvKind::NodeStep, node.id});
  }

  // ---- dispatch -------------------------------------------------------

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EvKind::Stop:
        stopped_ = true;
        return;
      case EvKind::FaultEdge:
        on_fault_edge(ev);
        return;
      case EvKind::PhaseEdge:
        on_phase_edge(ev);
        return;
      case EvKind::FastDecide:
        on_fast_decide(ev);
        return;
      case EvKind::FallbackDecide:
        on_fallback_decide(ev);
        return;
      default:
        break;
    }
    Node& node = nodes_[static_cast<std::size_t>(ev.node)];
    if (crashed(node)) return;
    switch (ev.kind) {
      case EvKind::Deliver: on_deliver(node, ev); break;
      case EvKind::CpuDone: on_cpu_done(node); break;
      case EvKind::CertArrive: on_cert(node, ev); break;
      case EvKind::TimerFire: on_timer(node, ev.slot); break;
      case EvKind::RequestTimeout: on_request_timeout(node, ev.aux); break;
      case EvKind::NodeStep:
        node.step_scheduled = false;
        if (ev.aux == 1) node.wake_scheduled = false;
        step(node);
        break;
      default: break;
    }
  }

  void on_fault_edge(const Event& ev) {
    const auto& f = cfg_.faults[ev.aux / 2];
    const bool start = ev.aux % 2 == 0;
    std::string detail = std::string("kind=") + fault_kind_name(f.kind) +
                         ",state=" + (start ? "start" : "end");
    if (f.from_slot || f.to_slot) {
      detail += ",slots=" + std::to_string(f.from_slot) + "-" + std::to_string(f.to_slot);
    }
    emit(now_, TraceKind::Fault, f.node, 0, detail);
    if (!start) schedule_step(nodes_[static_cast<std::size_t>(f.node)], now_);
  }

  void on_phase_edge(const Event& ev) {
    const auto& p = cfg_.phases[ev.aux / 2];
    char mult[32];
    std::snprintf(mult, sizeof mult, "%g", p.multiplier);
    emit(now_, TraceKind::Phase, p.node, 0,
         std::string("mult=") + mult + ",state=" + (ev.aux % 2 == 0 ? "start" : "end"));
  }

  // ---- CPU ------------------------------------------------------------

  void enqueue(Node& node, Job job) {
    const bool urgent = job.kind == JobKind::ServeRequest || job.kind == JobKind::HandleReply;
    (urgent ? node.urgent : node.normal).push_back(std::move(job));
    start_next(node);
  }

  void start_next(Node& node) {
    if (node.busy) return;
    std::deque<Job>* q = !node.urgent.empty() ? &node.urgent : !node.normal.empty() ? &node.normal : nullptr;
    if (q == nullptr) return;
    node.current = std::move(q->front());
    q->pop_front();
    node.busy = true;
    Micros base = 0;
    switch (node.current.kind) {
      case JobKind::Process:
      case JobKind::CatchUp: {
        // A node that has fallen a full timeout behind a decision syncs the slot
        // instead of validating it again.
        auto it = node.slots.find(node.current.slot);
        const bool stale = it != node.slots.end() && it->second.cert &&
                           now_ - it->second.cert_at >= cfg_.timeout;
        const bool bottom = it != node.slots.end() && it->second.cert && !it->second.cert_value;
        base = stale || bottom || settled(node, node.current.slot) ? cfg_.cpu.catchup
                                                                   : cfg_.cpu.process;
        break;
      }
      case JobKind::Create: base = cfg_.cpu.propose; break;
      case JobKind::ServeRequest:
      case JobKind::HandleReply: base = cfg_.cpu.grant; break;
    }
    const auto cost = static_cast<Micros>(
        std::llround(static_cast<double>(base) * slow_multiplier(node.id)));
    push(now_ + cost, Event{EvKind::CpuDone, node.id});
  }

  void on_cpu_done(Node& node) {
    Job job = std::move(node.current);
    node.busy = false;
    switch (job.kind) {
      case JobKind::Process: finish_process(node, job); break;
      case JobKind::CatchUp: finish_catchup(node, job.slot); break;
      case JobKind::Create: finish_create(node, job); break;
      case JobKind::ServeRequest: finish_serve(node, job); break;
      case JobKind::HandleReply: finish_reply(node, job); break;
    }
    start_next(node);
  }

  // ---- proposals and acceptance --------------------------------------

  bool settled(const Node& node, SlotNumber sn) const {
    return sn <= node.log.commit_frontier() || node.log.is_finalized(sn);
  }

  void on_deliver(Node& node, const Event& ev) {
    if (const auto* p = std::get_if<ProposalMsg>(ev.msg.get())) {
      const SlotNumber sn = p->block->slot;
      emit(now_, TraceKind::Deliver, node.id, sn,
           "from=" + std::to_string(ev.from) + ",lat_us=" + std::to_string(now_ - ev.sent_at));
      if (!settled(node, sn)) ++node.slots[sn].pending_jobs;
      enqueue(node, Job{JobKind::Process, sn, ev.from, p->block, {}, nullptr});
    } else if (std::holds_alternative<GrantRequestMsg>(*ev.msg)) {
      enqueue(node, Job{JobKind::ServeRequest, 0, ev.from, nullptr, {}, ev.msg});
    } else {
      enqueue(node, Job{JobKind::HandleReply, 0, ev.from, nullptr, {}, ev.msg});
    }
  }

  void finish_process(Node& node, const Job& job) {
    const SlotNumber sn = job.slot;
    if (settled(node, sn)) return;
    NodeSlot& slot = node.slots[sn];
    --slot.pending_jobs;
    if (!slot.cert) {
      const Verdict v =
          verify_ticket(*node.book, sn, job.block->sender, job.block->ticket, auth_);
      emit_check(node, *job.block, v);
      if (v == Verdict::Valid) {
        try_accept(node, sn, job.block);
      } else if (v == Verdict::Undefined) {
        node.buffered[sn].push_back(job.block);
      }
    }
    slot.processed = true;
    maybe_finalize(node, sn);
  }

  void finish_catchup(Node& node, SlotNumber sn) {
    if (settled(node, sn)) return;
    NodeSlot& slot = node.slots[sn];
    --slot.pending_jobs;
    slot.processed = true;
    maybe_finalize(node, sn);
  }

  void emit_check(const Node& node, const Block& block, Verdict v) {
    emit(now_, TraceKind::TicketCheck, node.id, block.slot,
         "p=" + std::to_string(block.sender) + ",proof=" + describe_proof(block.ticket) +
             ",verdict=" + verdict_name(v));
  }

  void try_accept(Node& node, SlotNumber sn, const BlockRef& block) {
    if (sn <= forgotten_) return;
    NodeSlot& slot = node.slots[sn];
    if (slot.timer_expired) return;
    if (consensus_.accept(sn, node.id, block)) {
      const Micros at = now_ + hop();
      push(at, Event{EvKind::FastDecide, kNoNode, kNoNode, sn, 0, 0, block});
    }
  }

  // The proposal exists from the moment the holder commits to it; creation cost
  // and the broadcast follow on the CPU.
  BlockRef make_block(const Node& node, SlotNumber sn, const TicketProof& proof) {
    auto block = std::make_shared<Block>();
    block->sender = node.id;
    block->slot = sn;
    block->ticket = proof;
    block->payload.resize(cfg_.payload_size);
    for (std::size_t i = 0; i < block->payload.size(); ++i) {
      block->payload[i] =
          static_cast<std::uint8_t>((sn >> (8 * (i % 8))) ^ static_cast<std::uint64_t>(node.id * 37));
    }
    emit(now_, TraceKind::Propose, node.id, sn,
         "v=" + encode_value(block) + ",proof=" + describe_proof(block->ticket));
    return block;
  }

  void finish_create(Node& node, const Job& job) {
    const SlotNumber sn = job.slot;
    if (settled(node, sn) || node.slots[sn].timer_expired) return;
    node.slots[sn].processed = true;
    try_accept(node, sn, job.block);
    auto msg = std::make_shared<const Message>(ProposalMsg{job.block});
    for (auto& peer : nodes_) {
      if (peer.id != node.id) send(node, peer.id, msg, sn);
    }
  }

  // ---- decisions ------------------------------------------------------

  void on_fast_decide(const Event& ev) {
    if (ev.slot <= forgotten_) return;
    if (auto d = consensus_.decide_fast(ev.slot, ev.block, now_)) distribute(*d);
  }

  void on_fallback_decide(const Event& ev) {
    if (ev.slot <= forgotten_) return;
    if (auto d = consensus_.decide_fallback(ev.slot, now_)) distribute(*d);
  }

  void distribute(const FinalizationDecision& d) {
    for (auto& node : nodes_) {
      if (crashed(node)) continue;
      DelaySample s = sample_delay(cfg_.net, now_, cfg_.gst, rng_);
      Micros at = s.dropped ? std::max(now_, cfg_.gst) + cfg_.net.delta : now_ + s.delay;
      push(at, Event{EvKind::CertArrive, node.id, kNoNode, d.slot,
                     static_cast<std::uint64_t>(d.via), 0, d.value});
    }
  }

  void on_cert(Node& node, const Event& ev) {
    const SlotNumber sn = ev.slot;
    if (settled(node, sn)) return;
    NodeSlot& slot = node.slots[sn];
    if (slot.cert) return;
    slot.cert = true;
    slot.cert_at = now_;
    slot.cert_value = ev.block;
    slot.cert_via = static_cast<Via>(ev.aux);
    if (slot.processed) {
      maybe_finalize(node, sn);
    } else if (slot.pending_jobs == 0) {
      ++slot.pending_jobs;
      enqueue(node, Job{JobKind::CatchUp, sn});
    }
  }

  void on_timer(Node& node, SlotNumber sn) {
    if (settled(node, sn)) return;
    NodeSlot& slot = node.slots[sn];
    slot.timer_expired = true;
    emit(now_, TraceKind::TimerExpire, node.id, sn, "");
    if (node.byzantine || sn <= forgotten_) return;
    if (consensus_.trigger_fallback(sn)) {
      push(now_ + cfg_.fallback_latency(), Event{EvKind::FallbackDecide, kNoNode, kNoNode, sn});
    }
  }

  void maybe_finalize(Node& node, SlotNumber sn) {
    auto it = node.slots.find(sn);
    if (it == node.slots.end() || !it->second.cert || !it->second.processed) return;
    const BlockRef value = it->second.cert_value;
    node.log.finalize(sn, value);
    emit(now_, TraceKind::Finalize, node.id, sn,
         "v=" + encode_value(value) + ",via=" + via_name(it->second.cert_via));

    std::vector<SlotNumber> committed;
    node.log.advance([&](SlotNumber c, const BlockRef& v) {
      emit(now_, TraceKind::Commit, node.id, c, "v=" + encode_value(v));
      committed.push_back(c);
    });
    if (committed.empty()) {
      // The batch gate watches finality, not the commit frontier.
      if (std::find(node.last_batch.begin(), node.last_batch.end(), sn) != node.last_batch.end()) {
        schedule_step(node, now_);
      }
      return;
    }
    for (SlotNumber c : committed) {
      node.slots.erase(c);
      node.buffered.erase(c);
      if (c % cfg_.L == 0) on_epoch_committed(node, c / cfg_.L);
    }
    if (++commits_since_gc_ >= 4096) collect_garbage();
    schedule_step(node, now_);
  }

  void collect_garbage() {
    commits_since_gc_ = 0;
    SlotNumber low = std::numeric_limits<SlotNumber>::max();
    for (const auto& node : nodes_) {
      if (!crashed(node)) low = std::min(low, node.log.commit_frontier());
    }
    if (low == std::numeric_limits<SlotNumber>::max() || low <= forgotten_) return;
    forgotten_ = low;
    consensus_.forget_through(low);
  }

  // ---- epochs ---------------------------------------------------------

  void on_epoch_committed(Node& node, EpochNumber epoch) {
    std::vector<BlockRef> values;
    values.reserve(cfg_.L);
    for (SlotNumber sn = first_slot_of(epoch, cfg_.L); sn <= last_slot_of(epoch, cfg_.L); ++sn) {
      values.push_back(node.log.at(sn).value);
    }
    if (node.book->on_epoch_committed(epoch, values)) announce_decided(node);
  }

  void announce(Node& node, EpochNumber epoch) {
    const EpochState* st = node.book->find(epoch);
    emit(now_, TraceKind::EpochDecided, node.id, epoch,
         "tr=" + std::to_string(st->server) + ",c=" + join_candidates(st->candidates));
    if (node.book->kind() == BookKind::Hybrid && st->server == node.id) {
      node.server->serve(epoch);
    }
  }

  void announce_decided(Node& node) {
    if (node.book->kind() != BookKind::Hybrid) return;
    const EpochNumber high = node.book->highest_decided();
    bool any = false;
    while (node.announced_through < high) {
      announce(node, ++node.announced_through);
      any = true;
    }
    if (!any) return;
    recheck_buffered(node);
    release_parked(node);
    schedule_step(node, now_);
  }

  void recheck_buffered(Node& node) {
    for (auto it = node.buffered.begin(); it != node.buffered.end();) {
      const SlotNumber sn = it->first;
      if (!node.book->decided(epoch_of(sn, cfg_.L))) break;
      for (const auto& block : it->second) {
        const Verdict v = verify_ticket(*node.book, sn, block->sender, block->ticket, auth_);
        emit_check(node, *block, v);
        if (v == Verdict::Valid && !settled(node, sn)) try_accept(node, sn, block);
      }
      it = node.buffered.erase(it);
    }
  }

  // ---- ticket requests ------------------------------------------------

  void release_parked(Node& node) {
    auto parked = std::move(node.parked);
    node.parked.clear();
    for (auto& [requester, req] : parked) serve_request(node, requester, req);
  }

  void finish_serve(Node& node, const Job& job) {
    serve_request(node, job.from, std::get<GrantRequestMsg>(*job.msg));
  }

  void serve_request(Node& node, NodeId requester, const GrantRequestMsg& req) {
    GrantBatch batch{requester, node.id, {}};
    if (cfg_.regime == RegimeKind::Htr) {
      const EpochState* st = node.book->find(req.epoch);
      if (st == nullptr) {
        node.parked.emplace_back(requester, req);
        return;
      }
      if (st->server == node.id) {
        batch = node.server->grant(requester, cfg_.batch, server_mode(node.id),
                                   auth_.signer_for(node.id));
      }
    } else if (node.server) {
      batch = node.server->grant(requester, cfg_.batch, server_mode(node.id),
                                 auth_.signer_for(node.id));
    }
    if (!batch.empty()) {
      const auto slots = batch.slots();
      emit(now_, TraceKind::Grant, node.id, slots.front(),
           "grantee=" + std::to_string(requester) + ",slots=" + ranges(slots));
    }
    send(node, requester,
         std::make_shared<const Message>(GrantReplyMsg{std::move(batch), req.epoch, req.request_id}));
  }

  void finish_reply(Node& node, const Job& job) {
    const auto& reply = std::get<GrantReplyMsg>(*job.msg);
    for (const auto& g : reply.batch.grants) {
      if (!settled(node, g.slot)) node.proposer.held[g.slot] = g;
    }
    if (node.request_outstanding && reply.request_id == node.request_id) {
      node.request_outstanding = false;
      if (reply.batch.empty()) {
        if (cfg_.regime == RegimeKind::Htr) {
          node.exhausted.insert(reply.epoch);
        } else {
          node.next_request_at = now_ + cfg_.timeout;
          schedule_wake(node, node.next_request_at);
        }
      } else {
        node.last_batch = reply.batch.slots();
      }
    }
    schedule_step(node, now_);
  }

  void on_request_timeout(Node& node, std::uint64_t id) {
    if (!node.request_outstanding || id != node.request_id) return;
    node.request_outstanding = false;
    if (cfg_.regime == RegimeKind::Htr) node.exhausted.insert(node.request_epoch);
    schedule_step(node, now_);
  }

  void schedule_wake(Node& node, Micros at) {
    if (node.wake_scheduled || at >= kForever) return;
    node.wake_scheduled = true;
    push(at, Event{EvKind::NodeStep, node.id, kNoNode, 0, 1});
  }

  std::optional<std::pair<NodeId, EpochNumber>> request_target(const Node& node) const {
    if (cfg_.regime == RegimeKind::Mtr) return std::make_pair(cfg_.mtr_server, EpochNumber{0});
    if (cfg_.regime != RegimeKind::Htr) return std::nullopt;
    const SlotNumber frontier = node.log.commit_frontier();
    const EpochNumber lo = epoch_of(frontier + 1, cfg_.L);
    const EpochNumber hi = epoch_of(window_.limit(frontier), cfg_.L);
    for (EpochNumber e = lo; e <= hi; ++e) {
      const EpochState* st = node.book->find(e);
      if (st == nullptr) break;
      if (st->managed() && !node.exhausted.contains(e)) return std::make_pair(st->server, e);
    }
    return std::nullopt;
  }

  void maybe_request(Node& node) {
    if (cfg_.regime == RegimeKind::Utr || node.request_outstanding) return;
    if (!mtr_request_gate(node.log, node.last_batch) || silent_now(node.id)) return;
    if (now_ < node.next_request_at) return;
    if (!supply_available(node)) {
      schedule_wake(node, next_supply_at(node));
      return;
    }
    const auto target = request_target(node);
    if (!target) return;
    const bool draining = stopped_ || now_ >= cfg_.duration;
    if (draining && target->second > 0 && first_slot_of(target->second, cfg_.L) > drain_limit()) return;
    node.request_outstanding = true;
    node.request_id = ++request_counter_;
    node.request_epoch = target->second;
    send(node, target->first,
         std::make_shared<const Message>(GrantRequestMsg{target->second, node.request_id}));
    push(now_ + 2 * cfg_.timeout,
         Event{EvKind::RequestTimeout, node.id, kNoNode, 0, node.request_id});
  }

  // ---- node step ------------------------------------------------------

  // After the stop time no new slots are opened, but slots whose timers
  // already run somewhere are still proposed and decided.
  SlotNumber drain_limit() {
    if (!drain_limit_) {
      SlotNumber limit = 0;
      for (const auto& n : nodes_) {
        if (!crashed(n)) limit = std::max(limit, n.timers_through);
      }
      drain_limit_ = limit;
    }
    return *drain_limit_;
  }

  void step(Node& node) {
    const bool draining = stopped_ || now_ >= cfg_.duration;
    const SlotNumber last = draining ? drain_limit() : std::numeric_limits<SlotNumber>::max();
    const SlotNumber frontier = node.log.commit_frontier();
    if (frontier >= last) return;

    if (node.book->kind() == BookKind::Hybrid) {
      announce_decided(node);
    } else {
      const EpochNumber want = epoch_of(frontier + std::max<std::uint64_t>(timer_window_, 1), cfg_.L);
      while (node.announced_through < want) announce(node, ++node.announced_through);
    }

    const SlotNumber timer_limit = std::min(frontier + timer_window_, last);
    for (SlotNumber sn = std::max(node.timers_through, frontier) + 1; sn <= timer_limit; ++sn) {
      if (!node.book->decided(epoch_of(sn, cfg_.L))) break;
      node.timers_through = sn;
      if (node.log.is_finalized(sn)) continue;
      NodeSlot& slot = node.slots[sn];
      if (slot.timer_started) continue;
      slot.timer_started = true;
      emit(now_, TraceKind::TimerStart, node.id, sn, "dur_us=" + std::to_string(cfg_.timeout));
      push(now_ + cfg_.timeout, Event{EvKind::TimerFire, node.id, kNoNode, sn});
    }

    bool starved = false;
    StepContext ctx{node.log, *node.book, window_,
                    [&](SlotNumber sn) { return silent_for(node.id, sn); },
                    [&]() {
                      if (!supply_available(node)) {
                        starved = true;
                        return false;
                      }
                      ++node.consumed;
                      return true;
                    }};
    for (auto& p : plan_proposals(node.proposer, ctx)) {
      if (p.slot > last) continue;
      enqueue(node, Job{JobKind::Create, p.slot, node.id, make_block(node, p.slot, p.proof), p.proof, nullptr});
    }
    if (starved) schedule_wake(node, next_supply_at(node));
    maybe_request(node);
  }

  const ScenarioConfig& cfg_;
  Rng rng_;
  Authenticator auth_;
  SlotConsensus consensus_;
  WindowPolicy window_;
  std::uint64_t timer_window_ = 1;
  std::vector<Node> nodes_;
  EventQueue<Event> queue_;
  Trace trace_;
  Micros now_ = 0;
  bool stopped_ = false;
  std::optional<SlotNumber> drain_limit_;
  SlotNumber forgotten_ = 0;
  std::uint64_t commits_since_gc_ = 0;
  std::uint64_t request_counter_ = 0;
};

}  // namespace

Trace run(const ScenarioConfig& config) {
  ScenarioConfig checked = config;
  validate(checked);
  Simulation sim(checked);
  return sim.run();
}

}  // namespace ticketforge
