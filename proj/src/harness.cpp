#include "ticketforge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

namespace ticketforge {
namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

NodeId sender_of(const std::string& value) {
  if (value.size() < 2 || value[0] != 'b' || value == "bot") return kNoNode;
  return static_cast<NodeId>(std::stoi(value.substr(1, value.find('.') - 1)));
}

struct SlotFacts {
  NodeId proposer = kNoNode;
  std::string proposed_value;
  Micros proposed_at = -1;
  Micros finalized_at = -1;  // at the proposer
  Micros committed_at = -1;  // at the proposer
  Micros first_commit = std::numeric_limits<Micros>::max();
  std::string committed_value;
};

}  // namespace

WindowPolicy WindowPolicy::from_config(const ScenarioConfig& config) {
  WindowPolicy w;
  w.gsw = config.gsw;
  w.msw = config.msw();
  w.effective = config.effective_window();
  w.mtr_gated = config.regime == RegimeKind::Mtr;
  return w;
}

SlotNumber WindowPolicy::limit(SlotNumber frontier) const {
  if (mtr_gated) return std::numeric_limits<SlotNumber>::max();
  return frontier + effective;
}

bool may_propose(const WindowPolicy& window, SlotNumber frontier, SlotNumber sn) {
  return sn > frontier && sn <= window.limit(frontier);
}

std::vector<PlannedProposal> plan_proposals(ProposerState& state, const StepContext& ctx) {
  std::vector<PlannedProposal> out;
  const SlotNumber frontier = ctx.log.commit_frontier();
  const SlotNumber limit = ctx.window.limit(frontier);

  if (ctx.book.kind() != BookKind::StaticManaged) {
    SlotNumber sn = std::max(state.rr_cursor, frontier) + 1;
    for (; sn <= limit; ++sn) {
      const EpochState* epoch = ctx.book.find(epoch_of(sn, ctx.book.epoch_length()));
      if (epoch == nullptr) break;
      state.rr_cursor = sn;
      if (epoch->managed() || ctx.log.is_finalized(sn)) continue;
      if (round_robin_owner(sn, epoch->candidates) != state.self) continue;
      if (ctx.silent(sn) || !ctx.take_payload()) continue;
      out.push_back(PlannedProposal{sn, RoundRobinTicket{sn}});
    }
  }

  for (auto it = state.held.begin(); it != state.held.end() && it->first <= limit;) {
    const SlotNumber sn = it->first;
    if (sn > frontier && !ctx.log.is_finalized(sn) && !ctx.silent(sn) && ctx.take_payload()) {
      out.push_back(PlannedProposal{sn, it->second});
    }
    it = state.held.erase(it);
  }
  return out;
}

MetricsRecord collect_metrics(const Trace& trace, const ScenarioConfig& config) {
  MetricsRecord record;
  record.scenario = config.name;
  record.regime = regime_name(config.regime);
  record.n = config.n;

  std::vector<bool> correct(static_cast<std::size_t>(config.n), true);
  for (NodeId id : config.byzantine_nodes()) correct[static_cast<std::size_t>(id)] = false;

  std::unordered_map<SlotNumber, SlotFacts> slots;
  for (const auto& e : trace) {
    switch (e.kind) {
      case TraceKind::Propose: {
        auto& s = slots[e.slot];
        if (s.proposed_at < 0) {
          s.proposer = e.node;
          s.proposed_value = e.get("v").value_or("");
          s.proposed_at = e.at;
        }
        break;
      }
      case TraceKind::Finalize: {
        auto it = slots.find(e.slot);
        if (it != slots.end() && it->second.proposer == e.node &&
            e.get("v") == it->second.proposed_value) {
          it->second.finalized_at = e.at;
        }
        break;
      }
      case TraceKind::Commit: {
        auto& s = slots[e.slot];
        if (s.proposer == e.node && e.get("v") == s.proposed_value) s.committed_at = e.at;
        if (correct[static_cast<std::size_t>(e.node)] && e.at < s.first_commit) {
          s.first_commit = e.at;
          s.committed_value = e.get("v").value_or("bot");
        }
        break;
      }
      default:
        break;
    }
  }

  const Micros span = config.report_phase > 0 ? config.report_phase : config.duration;
  const std::size_t count =
      span > 0 ? static_cast<std::size_t>((config.duration + span - 1) / span) : 0;
  struct Acc {
    double fin_sum = 0, commit_sum = 0;
    std::uint64_t fin_n = 0, commit_n = 0;
  };
  std::vector<Acc> acc(count);
  for (std::size_t i = 0; i < count; ++i) {
    PhaseMetrics p;
    p.phase = i;
    p.from = static_cast<Micros>(i) * span;
    p.to = std::min(config.duration, p.from + span);
    p.proposed_by.assign(static_cast<std::size_t>(config.n), 0);
    record.phases.push_back(std::move(p));
  }
  auto phase_of = [&](Micros t) -> std::ptrdiff_t {
    if (t < 0 || t >= config.duration || span <= 0) return -1;
    return static_cast<std::ptrdiff_t>(t / span);
  };

  for (const auto& [sn, s] : slots) {
    if (auto p = phase_of(s.proposed_at); p >= 0 && s.finalized_at >= 0) {
      acc[static_cast<std::size_t>(p)].fin_sum += static_cast<double>(s.finalized_at - s.proposed_at);
      ++acc[static_cast<std::size_t>(p)].fin_n;
      if (s.committed_at >= 0) {
        acc[static_cast<std::size_t>(p)].commit_sum +=
            static_cast<double>(s.committed_at - s.proposed_at);
        ++acc[static_cast<std::size_t>(p)].commit_n;
      }
    }
    const auto p = phase_of(s.first_commit);
    if (p < 0) continue;
    auto& phase = record.phases[static_cast<std::size_t>(p)];
    const NodeId sender = sender_of(s.committed_value);
    if (sender == kNoNode) {
      if (s.first_commit >= config.gst) ++phase.skipped;
    } else {
      ++phase.committed_blocks;
      ++phase.proposed_by[static_cast<std::size_t>(sender)];
    }
  }

  for (std::size_t i = 0; i < count; ++i) {
    auto& p = record.phases[i];
    const double seconds = static_cast<double>(p.to - p.from) / 1e6;
    p.throughput_bps = seconds > 0 ? static_cast<double>(p.committed_blocks) / seconds : 0.0;
    if (acc[i].fin_n) p.finality_ms = acc[i].fin_sum / static_cast<double>(acc[i].fin_n) / 1000.0;
    if (acc[i].commit_n) {
      p.commit_ms = acc[i].commit_sum / static_cast<double>(acc[i].commit_n) / 1000.0;
    }
  }
  return record;
}

std::string metrics_csv_header(int n) {
  std::string out = "# ticketforge metrics schema v" + std::to_string(kMetricsSchemaVersion) + "\n";
  out += "scenario,phase,regime,finality_ms,commit_ms,throughput_bps,skipped";
  for (int i = 0; i < n; ++i) out += ",proposed_by_" + std::to_string(i);
  return out + "\n";
}

std::string metrics_csv_rows(const MetricsRecord& record) {
  std::string out;
  for (const auto& p : record.phases) {
    out += record.scenario + "," + std::to_string(p.phase) + "," + record.regime + "," +
           fixed3(p.finality_ms) + "," + fixed3(p.commit_ms) + "," + fixed3(p.throughput_bps) +
           "," + std::to_string(p.skipped);
    for (auto c : p.proposed_by) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  int n = 0;
  for (const auto& r : records) n = std::max(n, r.n);
  std::string out = metrics_csv_header(n);
  for (const auto& r : records) out += metrics_csv_rows(r);
  return out;
}

nlohmann::ordered_json metrics_json(const MetricsRecord& record) {
  nlohmann::ordered_json j;
  j["scenario"] = record.scenario;
  j["regime"] = record.regime;
  j["phases"] = nlohmann::ordered_json::array();
  for (const auto& p : record.phases) {
    nlohmann::ordered_json row;
    row["phase"] = p.phase;
    row["from_ms"] = p.from / kMicrosPerMilli;
    row["to_ms"] = p.to / kMicrosPerMilli;
    row["finality_ms"] = round3(p.finality_ms);
    row["commit_ms"] = round3(p.commit_ms);
    row["throughput_bps"] = round3(p.throughput_bps);
    row["skipped"] = p.skipped;
    row["committed_blocks"] = p.committed_blocks;
    row["proposed_by"] = p.proposed_by;
    j["phases"].push_back(std::move(row));
  }
  return j;
}

}  // namespace ticketforge
