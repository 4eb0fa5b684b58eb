#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ticketforge/config.hpp"
#include "ticketforge/harness.hpp"

namespace ticketforge {

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

// "gsw=1,10,50;batch=1,10" -> two axes.
std::vector<GridAxis> parse_grid(const std::string& spec);

struct SweepPoint {
  std::vector<std::pair<std::string, std::string>> coords;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsRecord metrics;
  bool oracle_pass = false;
};

// Runs the cartesian product of the grid over `base`. Point i uses seed
// base.seed + i. Points run concurrently; results keep grid order.
std::vector<SweepPoint> run_sweep(const ScenarioConfig& base, const std::vector<GridAxis>& grid,
                                  unsigned threads = 0);

std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace ticketforge
