#include "ticketforge/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "ticketforge/oracle.hpp"
#include "ticketforge/simnet.hpp"

namespace ticketforge {
namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<GridAxis> parse_grid(const std::string& spec) {
  std::vector<GridAxis> grid;
  for (const auto& part : split(spec, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("grid", "expected key=v1,v2 in '" + part + "'");
    }
    GridAxis axis{part.substr(0, eq), split(part.substr(eq + 1), ',')};
    if (axis.values.empty()) throw ConfigError("grid", "axis '" + axis.key + "' has no values");
    grid.push_back(std::move(axis));
  }
  if (grid.empty()) throw ConfigError("grid", "empty grid");
  return grid;
}

std::vector<SweepPoint> run_sweep(const ScenarioConfig& base, const std::vector<GridAxis>& grid,
                                  unsigned threads) {
  std::size_t total = 1;
  for (const auto& axis : grid) total *= axis.values.size();
  std::vector<SweepPoint> points(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (auto axis = grid.rbegin(); axis != grid.rend(); ++axis) {
      points[i].coords.emplace_back(axis->key, axis->values[rest % axis->values.size()]);
      rest /= axis->values.size();
    }
    std::reverse(points[i].coords.begin(), points[i].coords.end());
    points[i].seed = base.seed + i;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < total; i = next++) {
      SweepPoint& p = points[i];
      try {
        ScenarioConfig config = base;
        for (const auto& [key, value] : p.coords) apply_override(config, key, value);
        config.seed = p.seed;
        validate(config);
        const Trace trace = run(config);
        p.metrics = collect_metrics(trace, config);
        p.oracle_pass = all_pass(check_all(trace, config));
        p.ok = true;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  int n = 0;
  for (const auto& p : points) n = std::max(n, p.metrics.n);
  std::string out = "# ticketforge sweep schema v" + std::to_string(kMetricsSchemaVersion) + "\n";
  if (points.empty()) return out;
  for (const auto& [key, value] : points.front().coords) out += key + ",";
  out += "seed,status,oracle,phase,throughput_bps,finality_ms,commit_ms,skipped";
  for (int i = 0; i < n; ++i) out += ",proposed_by_" + std::to_string(i);
  out += "\n";
  for (const auto& p : points) {
    std::string prefix;
    for (const auto& [key, value] : p.coords) prefix += value + ",";
    prefix += std::to_string(p.seed) + ",";
    if (!p.ok) {
      std::string err = p.error;
      std::replace(err.begin(), err.end(), ',', ';');
      out += prefix + "error: " + err + ",,,,,,\n";
      continue;
    }
    for (const auto& phase : p.metrics.phases) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "ok,%s,%zu,%.3f,%.3f,%.3f,%llu",
                    p.oracle_pass ? "pass" : "fail", phase.phase, phase.throughput_bps,
                    phase.finality_ms, phase.commit_ms,
                    static_cast<unsigned long long>(phase.skipped));
      out += prefix + buf;
      for (auto c : phase.proposed_by) out += "," + std::to_string(c);
      out += "\n";
    }
  }
  return out;
}

}  // namespace ticketforge
