#include "ticketforge/scenarios.hpp"

namespace ticketforge {
namespace {

ScenarioConfig with(ScenarioConfig c, const std::string& name) {
  c.name = name;
  return c;
}

ScenarioConfig utr(ScenarioConfig c, std::vector<NodeId> candidates) {
  c.regime = RegimeKind::Utr;
  c.candidates = std::move(candidates);
  return c;
}

ScenarioConfig mtr(ScenarioConfig c, std::uint32_t batch) {
  c.regime = RegimeKind::Mtr;
  c.batch = batch;
  c.mtr_server = 0;
  return c;
}

void slow(ScenarioConfig& c, NodeId node, Micros from, Micros to) {
  c.phases.push_back(SlowPhase{node, from, to, 2.0});
}

BuiltinScenario fig2() {
  ScenarioConfig c = desk_config();
  c.name = "fig2";
  c.L = 4;
  c.K = 2;
  c.gsw = 4;
  c.regime = RegimeKind::Htr;
  c.election_seed = {0x2A};
  c.duration = 200 * kMicrosPerMilli;
  c.batch = 2;

  FaultSpec silent0;
  silent0.kind = FaultKind::SilentTicketHolder;
  silent0.node = 0;
  silent0.from_slot = 5;
  silent0.to_slot = 8;

  FaultSpec server3;
  server3.kind = FaultKind::ByzServer;
  server3.node = 3;
  server3.mode.behavior = ServerBehavior::Starve;

  FaultSpec silent3;
  silent3.kind = FaultKind::SilentTicketHolder;
  silent3.node = 3;
  silent3.from_slot = 13;
  silent3.to_slot = 16;

  c.faults = {silent0, server3, silent3};
  return {"fig2", "scripted six-epoch walk through the hybrid switching rule", {{"htr", c}}};
}

BuiltinScenario table2_like() {
  ScenarioConfig c = desk_config();
  c.L = 50;
  c.K = 3;
  c.gsw = 100;
  c.duration = 600 * kMicrosPerMilli;
  c.timeout = 20 * kMicrosPerMilli;
  c.nodes.assign(4, NodeProfile{});
  c.nodes[3].serialization_multiplier = 2.5;
  slow(c, 3, 0, kForever);
  return {"table2-like",
          "three fast nodes and one slow node under six ticketing variants",
          {
              {"utr-node0", with(utr(c, {0}), "utr-node0")},
              {"utr-node3", with(utr(c, {3}), "utr-node3")},
              {"utr-all", with(utr(c, {}), "utr-all")},
              {"mtr-b1", with(mtr(c, 1), "mtr-b1")},
              {"mtr-b10", with(mtr(c, 10), "mtr-b10")},
              {"mtr-b100", with(mtr(c, 100), "mtr-b100")},
          }};
}

BuiltinScenario fig3_like() {
  ScenarioConfig c = desk_config();
  c.L = 50;
  c.K = 3;
  c.gsw = 100;
  c.timeout = 20 * kMicrosPerMilli;
  c.report_phase = kDeskPhase;
  c.duration = 4 * kDeskPhase;
  slow(c, 3, kDeskPhase, 2 * kDeskPhase);
  slow(c, 0, 2 * kDeskPhase, 3 * kDeskPhase);
  slow(c, 1, 3 * kDeskPhase, kForever);
  slow(c, 2, 3 * kDeskPhase, kForever);
  return {"fig3-like",
          "four phases with rotating slow nodes",
          {
              {"utr-node0", with(utr(c, {0}), "utr-node0")},
              {"utr-all", with(utr(c, {}), "utr-all")},
              {"mtr-b10", with(mtr(c, 10), "mtr-b10")},
          }};
}

BuiltinScenario fig4_like() {
  ScenarioConfig c = desk_config();
  c.L = 50;
  c.K = 2;
  c.gsw = 50;
  c.batch = 10;
  c.report_phase = kDeskPhase;
  c.duration = 4 * kDeskPhase;
  const NodeId rotation[] = {3, 0, 1};
  for (int i = 0; i < 3; ++i) {
    FaultSpec s;
    s.kind = FaultKind::SilentTicketHolder;
    s.node = rotation[i];
    s.from = (i + 1) * kDeskPhase;
    s.to = (i + 2) * kDeskPhase;
    c.faults.push_back(s);
  }
  ScenarioConfig htr = c;
  htr.regime = RegimeKind::Htr;
  return {"fig4-like",
          "four phases with a rotating silent ticket holder",
          {
              {"htr", with(htr, "htr")},
              {"utr-all", with(utr(c, {}), "utr-all")},
          }};
}

BuiltinScenario ooo_finality() {
  ScenarioConfig c = desk_config();
  c.name = "ooo-finality";
  c.regime = RegimeKind::Utr;
  c.L = 4;
  c.K = 2;
  c.gsw = 4;
  c.duration = 40 * kMicrosPerMilli;
  FaultSpec s;
  s.kind = FaultKind::SilentTicketHolder;
  s.node = 0;
  s.from_slot = 1;
  s.to_slot = 1;
  c.faults = {s};
  return {"ooo-finality", "slot 1's holder stays silent while later slots finalize",
          {{"utr", c}}};
}

BuiltinScenario steady() {
  ScenarioConfig c = desk_config();
  c.name = "steady";
  c.duration = 300 * kMicrosPerMilli;
  return {"steady", "fault-free hybrid run", {{"htr", c}}};
}

}  // namespace

ScenarioConfig desk_config() {
  ScenarioConfig c;
  c.n = 4;
  c.f = 1;
  c.L = 50;
  c.K = 2;
  c.gsw = 50;
  c.seed = 7;
  c.timeout = 10 * kMicrosPerMilli;
  c.duration = 300 * kMicrosPerMilli;
  c.nodes.assign(4, NodeProfile{});
  return c;
}

std::vector<std::string> builtin_names() {
  return {"fig2", "table2-like", "fig3-like", "fig4-like", "ooo-finality", "steady"};
}

std::optional<BuiltinScenario> find_builtin(const std::string& name) {
  if (name == "fig2") return fig2();
  if (name == "table2-like") return table2_like();
  if (name == "fig3-like") return fig3_like();
  if (name == "fig4-like") return fig4_like();
  if (name == "ooo-finality") return ooo_finality();
  if (name == "steady") return steady();
  return std::nullopt;
}

}  // namespace ticketforge
