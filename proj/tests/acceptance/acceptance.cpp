#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ticketforge/harness.hpp"
#include "ticketforge/oracle.hpp"
#include "ticketforge/scenarios.hpp"
#include "ticketforge/simnet.hpp"

namespace fs = std::filesystem;
using namespace ticketforge;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Run {
  ScenarioConfig config;
  Trace trace;
  std::vector<PropertyVerdict> verdicts;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const PropertyVerdict& verdict(const Run& run, const std::string& name) {
  for (const auto& v : run.verdicts) {
    if (v.name == name) return v;
  }
  throw std::logic_error("missing verdict " + name);
}

Run simulate(ScenarioConfig config) {
  validate(config);
  Run r{config, run(config), {}};
  r.verdicts = check_all(r.trace, r.config);
  return r;
}

std::vector<Run> simulate_all(const std::vector<ScenarioConfig>& configs) {
  std::vector<Run> out(configs.size());
  std::atomic<std::size_t> next{0};
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < configs.size(); i = next++) out[i] = simulate(configs[i]);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

std::string describe(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "n=" << c.n << " L=" << c.L << " K=" << c.K << " seed=" << c.seed;
  for (const auto& f : c.faults) out << " " << fault_kind_name(f.kind) << ":" << f.node;
  return out.str();
}

// Small random schedules shared by the campaigns. Each point cycles through
// n in {4, 7}, L in {2f+1, 8, 50} and K in {1, 2}; GST sits at 20%.
ScenarioConfig campaign_point(std::size_t i, std::uint64_t seed) {
  ScenarioConfig c = desk_config();
  c.n = i % 2 == 0 ? 4 : 7;
  c.f = (c.n - 1) / 3;
  const std::uint64_t lengths[] = {static_cast<std::uint64_t>(2 * c.f + 1), 8, 50};
  c.L = lengths[(i / 2) % 3];
  c.K = (i / 6) % 2 == 0 ? 1 : 2;
  c.gsw = c.msw();
  c.seed = seed;
  c.regime = RegimeKind::Htr;
  c.duration = (c.L == 50 ? 250 : 120) * kMicrosPerMilli;
  c.gst = c.duration / 5;
  return c;
}

std::vector<NodeId> pick_nodes(std::mt19937_64& rng, int n, int count) {
  std::vector<NodeId> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<ScenarioConfig> crash_campaign() {
  std::vector<ScenarioConfig> out;
  std::mt19937_64 rng(2024);
  for (std::size_t i = 0; i < 200; ++i) {
    ScenarioConfig c = campaign_point(i, 1000 + i);
    const int crashes = static_cast<int>((i / 12) % static_cast<std::size_t>(c.f + 1));
    for (NodeId node : pick_nodes(rng, c.n, crashes)) {
      FaultSpec s;
      s.kind = FaultKind::Crash;
      s.node = node;
      s.from = std::uniform_int_distribution<Micros>(0, c.duration)(rng);
      c.faults.push_back(s);
    }
    out.push_back(c);
  }
  return out;
}

std::vector<ScenarioConfig> byzantine_campaign(ServerBehavior first, ServerBehavior second,
                                               std::size_t count, std::uint64_t seed_base) {
  std::vector<ScenarioConfig> out;
  std::mt19937_64 rng(seed_base);
  for (std::size_t i = 0; i < count; ++i) {
    ScenarioConfig c = campaign_point(i, seed_base + i);
    const int byz = 1 + static_cast<int>(i % static_cast<std::size_t>(c.f));
    const auto nodes = pick_nodes(rng, c.n, byz);
    for (NodeId node : nodes) {
      FaultSpec s;
      s.kind = FaultKind::ByzServer;
      s.node = node;
      s.mode.behavior = i % 2 == 0 ? first : second;
      if (s.mode.behavior == ServerBehavior::ColludeOnly) s.mode.colluders = nodes;
      c.faults.push_back(s);
    }
    out.push_back(c);
  }
  return out;
}

std::string epoch_detail(const Trace& trace, EpochNumber epoch) {
  for (const auto& e : trace) {
    if (e.kind == TraceKind::EpochDecided && e.node == 0 && e.slot == epoch) return e.detail;
  }
  return "(undecided)";
}

Outcome fig2_pin(std::vector<Run>& collected) {
  const auto start = Clock::now();
  const auto builtin = find_builtin("fig2");
  Run r = simulate(builtin->variants.front().config);
  const double took = seconds_since(start);
  const std::map<EpochNumber, std::string> expected = {
      {4, "tr=-1,c=1.2.3"},
      {5, "tr=-1,c=0.1.2.3"},
      {6, "tr=-1,c=0.1.2.3"},
  };
  Outcome o;
  const std::string third = epoch_detail(r.trace, 3);
  const bool managed = third.rfind("tr=-1", 0) != 0 && third != "(undecided)";
  o.pass = managed && third.ends_with("c=0.1.2.3") && took < 1.0;
  std::ostringstream d;
  d << "E3 " << third;
  for (const auto& [epoch, want] : expected) {
    const std::string got = epoch_detail(r.trace, epoch);
    d << " E" << epoch << " " << got;
    o.pass = o.pass && got == want;
  }
  d << " in " << took << " s";
  o.detail = d.str();
  collected.push_back(std::move(r));
  return o;
}

Outcome slot_utilization_campaign(std::vector<Run>& collected) {
  const auto start = Clock::now();
  auto runs = simulate_all(crash_campaign());
  const double took = seconds_since(start);
  Outcome o;
  std::size_t within = 0, fault_free = 0, failures = 0;
  double worst_ratio = 0;
  std::string first_failure;
  for (const auto& r : runs) {
    const auto& su = verdict(r, "slot_utilization");
    const bool ok = su.pass && all_pass(r.verdicts) &&
                    (!r.config.faults.empty() || su.measured.value_or(-1) == 0.0);
    within += ok;
    fault_free += r.config.faults.empty();
    worst_ratio = std::max(worst_ratio, su.measured.value_or(0) / su.bound_used.value_or(1));
    if (!ok && failures++ == 0) {
      first_failure = describe(r.config) + " skipped=" + std::to_string(su.measured.value_or(-1));
    }
  }
  o.pass = within == runs.size() && took < 120.0;
  std::ostringstream d;
  d << within << "/" << runs.size() << " within bound (" << fault_free
    << " fault-free at 0), worst skipped/bound " << worst_ratio << ", " << took << " s";
  if (!first_failure.empty()) d << "; first failure " << first_failure;
  o.detail = d.str();
  for (auto& r : runs) collected.push_back(std::move(r));
  return o;
}

ScenarioConfig adversarial_chain_quality() {
  ScenarioConfig c = desk_config();
  c.L = 4;
  c.K = 1;
  c.gsw = 4;
  c.duration = 400 * kMicrosPerMilli;
  c.regime = RegimeKind::Htr;
  FaultSpec s;
  s.kind = FaultKind::ByzServer;
  s.node = 3;
  s.mode.behavior = ServerBehavior::ColludeOnly;
  s.mode.colluders = {3};
  c.faults = {s};
  return c;
}

Outcome chain_quality_campaign(std::vector<Run>& collected) {
  const auto start = Clock::now();
  auto runs = simulate_all(
      byzantine_campaign(ServerBehavior::Starve, ServerBehavior::ColludeOnly, 100, 5000));
  Run adversarial = simulate(adversarial_chain_quality());
  const double took = seconds_since(start);
  Outcome o;
  std::size_t within = 0;
  std::string first_failure;
  for (const auto& r : runs) {
    const auto& cq = verdict(r, "chain_quality");
    const bool ok = cq.applicable && cq.pass;
    within += ok;
    if (!ok && first_failure.empty()) {
      first_failure = describe(r.config) + " " + (cq.applicable ? "below bound" : cq.note);
    }
  }
  const auto& adv = verdict(adversarial, "chain_quality");
  const double bound = adv.bound_used.value_or(0);
  const double worst = adv.measured.value_or(-1);
  const bool tight = adv.applicable && worst >= bound &&
                     worst <= bound + static_cast<double>(adversarial.config.L);
  o.pass = within == runs.size() && tight && took < 120.0;
  std::ostringstream d;
  d << within << "/" << runs.size() << " windows at or above bound; adversarial min " << worst
    << " vs bound " << bound << " (slack " << adversarial.config.L << "), " << took << " s";
  if (!first_failure.empty()) d << "; first failure " << first_failure;
  o.detail = d.str();
  for (auto& r : runs) collected.push_back(std::move(r));
  collected.push_back(std::move(adversarial));
  return o;
}

Outcome cross_node_agreement(const std::vector<Run>& runs) {
  Outcome o;
  std::size_t epochs = 0, clean = 0;
  for (const auto& r : runs) {
    const bool ok = verdict(r, "epoch_consistency").pass && verdict(r, "ticket_agreement").pass;
    clean += ok;
    epochs += static_cast<std::size_t>(verdict(r, "epoch_consistency").measured.value_or(0));
  }
  o.pass = clean == runs.size();
  o.detail = std::to_string(clean) + "/" + std::to_string(runs.size()) +
             " runs without divergent epochs or ticket verdicts (" + std::to_string(epochs) +
             " epochs checked)";
  return o;
}

std::size_t double_granted_slots(const Trace& trace, const ScenarioConfig& config) {
  const auto byz = config.byzantine_nodes();
  std::map<SlotNumber, std::set<std::string>> holders;
  for (const auto& e : trace) {
    if (e.kind != TraceKind::Grant) continue;
    if (!std::binary_search(byz.begin(), byz.end(), e.node)) continue;
    const std::string slots = e.get("slots").value_or("");
    const auto dash = slots.find('-');
    const SlotNumber lo = std::stoull(slots.substr(0, dash));
    const SlotNumber hi = dash == std::string::npos ? lo : std::stoull(slots.substr(dash + 1));
    for (SlotNumber sn = lo; sn <= hi; ++sn) holders[sn].insert(e.get("grantee").value_or(""));
  }
  return static_cast<std::size_t>(std::count_if(
      holders.begin(), holders.end(), [](const auto& h) { return h.second.size() > 1; }));
}

Outcome double_grant_safety() {
  auto runs = simulate_all(
      byzantine_campaign(ServerBehavior::DoubleGrant, ServerBehavior::DoubleGrant, 50, 9000));
  Outcome o;
  std::size_t consistent = 0, contention_free = 0, conflicting = 0;
  for (const auto& r : runs) {
    consistent += verdict(r, "consistency").pass;
    contention_free += verdict(r, "contention_free").pass;
    conflicting += double_granted_slots(r.trace, r.config);
  }
  o.pass = consistent == runs.size() && contention_free == runs.size() && conflicting > 0;
  o.detail = "consistency " + std::to_string(consistent) + "/" + std::to_string(runs.size()) +
             ", contention-free " + std::to_string(contention_free) + "/" +
             std::to_string(runs.size()) + ", " + std::to_string(conflicting) +
             " double-granted slots issued";
  return o;
}

using Table = std::map<std::string, MetricsRecord>;

Table builtin_metrics(const std::string& name, std::uint64_t seed) {
  const auto builtin = find_builtin(name);
  std::vector<ScenarioConfig> configs;
  for (auto v : builtin->variants) {
    v.config.seed = seed;
    v.config.name = v.name;
    configs.push_back(v.config);
  }
  auto runs = simulate_all(configs);
  Table out;
  for (const auto& r : runs) {
    if (!all_pass(r.verdicts)) throw std::runtime_error(name + "/" + r.config.name + " oracle");
    out[r.config.name] = collect_metrics(r.trace, r.config);
  }
  return out;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

Outcome static_heterogeneity() {
  Outcome o;
  std::ostringstream d;
  for (std::uint64_t seed : kSeeds) {
    const Table t = builtin_metrics("table2-like", seed);
    const auto& mtr = t.at("mtr-b10").phases.front();
    const auto& all = t.at("utr-all").phases.front();
    const auto& one = t.at("utr-node0").phases.front();
    std::uint64_t total = 0;
    for (auto v : mtr.proposed_by) total += v;
    const double slow_share = total ? static_cast<double>(mtr.proposed_by[3]) / total : 1.0;
    const double ratio = mtr.throughput_bps / all.throughput_bps;
    const bool ok = ratio >= 1.5 && one.throughput_bps >= all.throughput_bps &&
                    slow_share <= 0.10 && mtr.finality_ms <= all.finality_ms;
    o.pass = o.pass && ok;
    d << "seed " << seed << ": mtr/all " << ratio << " node0 " << one.throughput_bps << " all "
      << all.throughput_bps << " slow " << slow_share * 100 << "% fin " << mtr.finality_ms
      << "/" << all.finality_ms << (ok ? "" : " FAIL") << "; ";
  }
  o.detail = d.str();
  return o;
}

Outcome dynamic_heterogeneity() {
  Outcome o;
  std::ostringstream d;
  double worst = 1e9;
  for (std::uint64_t seed : kSeeds) {
    const Table t = builtin_metrics("fig3-like", seed);
    const auto& mtr = t.at("mtr-b10").phases;
    for (std::size_t p = 0; p < mtr.size(); ++p) {
      const double best = std::max(t.at("utr-node0").phases[p].throughput_bps,
                                   t.at("utr-all").phases[p].throughput_bps);
      const double ratio = mtr[p].throughput_bps / best;
      worst = std::min(worst, ratio);
      if (ratio < 0.9) {
        o.pass = false;
        d << "seed " << seed << " phase " << p << " ratio " << ratio << "; ";
      }
    }
  }
  d << "worst mtr/best-utr ratio " << worst << " over " << std::size(kSeeds) << " seeds";
  o.detail = d.str();
  return o;
}

// The first epoch whose earliest timer starts at or after `at` is entirely
// post-fault; some epoch among the next K must be managed.
std::optional<EpochNumber> managed_after(const Trace& trace, const ScenarioConfig& c, Micros at) {
  std::map<EpochNumber, Micros> first_timer;
  std::map<EpochNumber, bool> managed;
  for (const auto& e : trace) {
    if (e.kind == TraceKind::TimerStart) {
      auto [it, fresh] = first_timer.try_emplace(epoch_of(e.slot, c.L), e.at);
      if (!fresh) it->second = std::min(it->second, e.at);
    } else if (e.kind == TraceKind::EpochDecided && e.node == 0) {
      managed[e.slot] = e.get("tr") != "-1";
    }
  }
  for (const auto& [epoch, start] : first_timer) {
    if (start < at) continue;
    for (EpochNumber k = 1; k <= c.K; ++k) {
      if (managed.contains(epoch + k) && managed[epoch + k]) return epoch + k;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

Outcome dual_mode_resilience() {
  Outcome o;
  std::ostringstream d;
  const auto builtin = find_builtin("fig4-like");
  double worst = 1e9;
  std::size_t recoveries = 0, max_skipped = 0;
  for (std::uint64_t seed : kSeeds) {
    std::vector<ScenarioConfig> configs;
    for (auto v : builtin->variants) {
      v.config.seed = seed;
      v.config.name = v.name;
      configs.push_back(v.config);
    }
    const auto runs = simulate_all(configs);
    const Run& htr = runs[0].config.regime == RegimeKind::Htr ? runs[0] : runs[1];
    const Run& utr = runs[0].config.regime == RegimeKind::Htr ? runs[1] : runs[0];
    const auto mh = collect_metrics(htr.trace, htr.config);
    const auto mu = collect_metrics(utr.trace, utr.config);
    for (const auto& fault : htr.config.faults) {
      const std::size_t p = static_cast<std::size_t>(fault.from / htr.config.report_phase);
      const double ratio = mh.phases[p].throughput_bps / mu.phases[p].throughput_bps;
      worst = std::min(worst, ratio);
      if (ratio < 1.0) {
        o.pass = false;
        d << "seed " << seed << " phase " << p << " htr/utr " << ratio << "; ";
      }
      if (fault.to >= htr.config.duration) continue;
      if (managed_after(htr.trace, htr.config, fault.to)) {
        ++recoveries;
      } else {
        o.pass = false;
        d << "seed " << seed << " no managed epoch after " << fault.to / 1000 << " ms; ";
      }
    }
    const auto& su = verdict(htr, "slot_utilization");
    max_skipped = std::max(max_skipped, static_cast<std::size_t>(su.measured.value_or(0)));
    if (!su.applicable || !su.pass || !all_pass(htr.verdicts)) {
      o.pass = false;
      d << "seed " << seed << " skipped " << su.measured.value_or(-1) << " over bound; ";
    }
  }
  d << "worst htr/utr " << worst << ", " << recoveries << " managed recoveries within K, max "
    << max_skipped << " skipped vs bound "
    << slot_utilization_bound(4, 1, 2, 50);
  o.detail = d.str();
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome determinism(const std::string& cli, const fs::path& scratch) {
  Outcome o;
  std::size_t compared = 0;
  for (const auto& name : builtin_names()) {
    const fs::path a = scratch / "det-a" / name, b = scratch / "det-b" / name;
    for (const auto& dir : {a, b}) {
      fs::remove_all(dir);
      const std::string cmd = "\"" + cli + "\" run " + name + " -q --out \"" + dir.string() +
                              "\" >/dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        o.pass = false;
        o.detail += name + " run failed; ";
      }
    }
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
      const auto file = entry.path().filename();
      if (file != "trace.log" && file != "metrics.csv") continue;
      const fs::path twin = b / fs::relative(entry.path(), a);
      ++compared;
      if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
        o.pass = false;
        o.detail += fs::relative(entry.path(), scratch).string() + " differs; ";
      }
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
  o.pass = o.pass && compared > 0;
  o.detail += std::to_string(compared) + " files byte-identical across " +
              std::to_string(builtin_names().size()) + " builtins";
  return o;
}

Outcome out_of_order_witness() {
  const auto builtin = find_builtin("ooo-finality");
  const Run r = simulate(builtin->variants.front().config);
  const NodeRoles roles = NodeRoles::from_config(r.config);
  Outcome o{false, "no witness"};
  for (NodeId node = 0; node < r.config.n && !o.pass; ++node) {
    if (!roles.live[static_cast<std::size_t>(node)]) continue;
    std::map<SlotNumber, const TraceEvent*> finalized, committed;
    for (const auto& e : r.trace) {
      if (e.node != node) continue;
      if (e.kind == TraceKind::Finalize) finalized.emplace(e.slot, &e);
      if (e.kind == TraceKind::Commit) committed.emplace(e.slot, &e);
    }
    for (const auto& [sn, fin] : finalized) {
      for (const auto& [later, fin_later] : finalized) {
        if (later <= sn || fin_later->at >= fin->at) continue;
        auto c = committed.find(later);
        if (c == committed.end() || c->second->at < fin->at) continue;
        o = {true, "node " + std::to_string(node) + ": [" + format_event(*fin_later) +
                       "] while slot " + std::to_string(sn) + " unwritten; [" +
                       format_event(*fin) + "] then [" + format_event(*c->second) + "]"};
        break;
      }
      if (o.pass) break;
    }
  }
  // Every commit must follow the finalization of its whole prefix.
  std::map<std::pair<NodeId, SlotNumber>, Micros> fin_at;
  for (const auto& e : r.trace) {
    if (e.kind == TraceKind::Finalize) fin_at[{e.node, e.slot}] = e.at;
    if (e.kind != TraceKind::Commit) continue;
    for (SlotNumber sn = 1; sn <= e.slot; ++sn) {
      auto it = fin_at.find({e.node, sn});
      if (it == fin_at.end() || it->second > e.at) {
        o = {false, "commit before prefix finalized: " + format_event(e)};
        return o;
      }
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string cli;
  std::string scratch = "acceptance-scratch";
  app.add_option("--cli", cli, "path to the ticketforge executable")->required();
  app.add_option("--scratch", scratch, "working directory for CLI runs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(scratch);

  std::vector<Run> property_runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"fig2 six-epoch pin", [&] { return fig2_pin(property_runs); }},
      {"slot utilization campaign", [&] { return slot_utilization_campaign(property_runs); }},
      {"chain quality campaign", [&] { return chain_quality_campaign(property_runs); }},
      {"epoch consistency and ticket agreement", [&] { return cross_node_agreement(property_runs); }},
      {"safety under double grants", double_grant_safety},
      {"static heterogeneity ordering", static_heterogeneity},
      {"dynamic heterogeneity ordering", dynamic_heterogeneity},
      {"dual-mode resilience", dual_mode_resilience},
      {"determinism", [&] { return determinism(cli, scratch); }},
      {"out-of-order finality witness", out_of_order_witness},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
            << " criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
