#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ticketforge/config.hpp"

namespace ticketforge {

struct Variant {
  std::string name;
  ScenarioConfig config;
};

struct BuiltinScenario {
  std::string name;
  std::string description;
  std::vector<Variant> variants;
};

// Baseline used by every builtin: n=4, f=1, 10 ms timeout, desk-scale costs.
ScenarioConfig desk_config();

std::vector<std::string> builtin_names();
std::optional<BuiltinScenario> find_builtin(const std::string& name);

// Phase layout of the heterogeneity and fault-rotation builtins.
inline constexpr Micros kDeskPhase = 300 * kMicrosPerMilli;

}  // namespace ticketforge
