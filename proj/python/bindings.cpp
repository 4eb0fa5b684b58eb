#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "ticketforge/config.hpp"
#include "ticketforge/harness.hpp"
#include "ticketforge/oracle.hpp"
#include "ticketforge/scenarios.hpp"
#include "ticketforge/simnet.hpp"
#include "ticketforge/ticketing.hpp"

namespace py = pybind11;
using namespace ticketforge;

namespace {

ScenarioConfig resolve(const std::string& source) {
  auto slash = source.find('/');
  const std::string name = source.substr(0, slash);
  if (auto builtin = find_builtin(name)) {
    for (auto& v : builtin->variants) {
      if (slash == std::string::npos || v.name == source.substr(slash + 1)) return v.config;
    }
  }
  return parse_config(source);
}

py::dict simulate(const std::string& source, std::optional<std::uint64_t> seed) {
  ScenarioConfig config = resolve(source);
  if (seed) config.seed = *seed;
  validate(config);
  const Trace trace = run(config);
  std::ostringstream text;
  write_trace(text, trace);
  py::dict out;
  out["config"] = to_text(config);
  out["trace"] = text.str();
  out["metrics"] = metrics_json(collect_metrics(trace, config)).dump();
  out["oracle"] = render_json(check_all(trace, config)).dump();
  return out;
}

std::string verify(const std::string& trace_text, const std::string& source) {
  ScenarioConfig config = resolve(source);
  validate(config);
  std::istringstream in(trace_text);
  return render_json(check_all(read_trace(in), config)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Deterministic ticketing-regime simulator and property oracle.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("builtin_names", &builtin_names);
  m.def("simulate", &simulate, py::arg("source"), py::arg("seed") = py::none(),
        "Run a builtin name, builtin/variant, or config text.");
  m.def("verify", &verify, py::arg("trace"), py::arg("source"));
  m.def("config_text", [](const std::string& source) {
    ScenarioConfig config = resolve(source);
    validate(config);
    return to_text(config);
  });
  m.def("elect", [](EpochNumber epoch, std::vector<NodeId> candidates, py::bytes seed) {
    const std::string raw = seed;
    const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
    return get_ticketing_server(epoch, candidates, bytes);
  }, py::arg("epoch"), py::arg("candidates"), py::arg("seed"));
  m.def("slot_utilization_bound", &slot_utilization_bound, py::arg("n"), py::arg("f"),
        py::arg("K"), py::arg("L"));
  m.def("chain_quality_bound", &chain_quality_bound, py::arg("f"), py::arg("K"));
}
