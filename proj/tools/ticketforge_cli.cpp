#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ticketforge/config.hpp"
#include "ticketforge/harness.hpp"
#include "ticketforge/oracle.hpp"
#include "ticketforge/scenarios.hpp"
#include "ticketforge/simnet.hpp"
#include "ticketforge/sweep.hpp"

namespace fs = std::filesystem;
using namespace ticketforge;

namespace {

constexpr int kExitOracle = 1;
constexpr int kExitConfig = 2;

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

// A file path, a builtin name, or builtin/variant.
std::vector<Variant> resolve(const std::string& source) {
  if (fs::is_regular_file(source)) {
    ScenarioConfig c = load_config(source);
    return {{c.name, c}};
  }
  std::string name = source;
  std::string only;
  if (auto slash = source.find('/'); slash != std::string::npos && !fs::exists(source)) {
    name = source.substr(0, slash);
    only = source.substr(slash + 1);
  }
  auto builtin = find_builtin(name);
  if (!builtin) throw ConfigError("config", "no such file or builtin scenario: " + source);
  std::vector<Variant> out;
  for (auto& v : builtin->variants) {
    if (only.empty() || v.name == only) out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config", "builtin " + name + " has no variant " + only);
  return out;
}

fs::path output_root(const std::string& flag, const std::string& name) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TICKETFORGE_OUT"); env && *env) return fs::path(env) / name;
  return fs::path("out") / name;
}

std::string scenario_name(const std::string& source) {
  if (fs::is_regular_file(source)) return fs::path(source).stem().string();
  std::string name = source;
  std::replace(name.begin(), name.end(), '/', '_');
  return name;
}

int cmd_run(const std::string& source, const std::string& out_flag,
            std::optional<std::uint64_t> seed, bool quiet) {
  std::vector<Variant> variants = resolve(source);
  const fs::path root = output_root(out_flag, scenario_name(source));
  const bool nested = variants.size() > 1;

  std::vector<MetricsRecord> records;
  nlohmann::ordered_json summary;
  summary["schema"] = kMetricsSchemaVersion;
  summary["scenario"] = scenario_name(source);
  summary["variants"] = nlohmann::ordered_json::array();
  bool ok = true;

  for (auto& variant : variants) {
    if (seed) variant.config.seed = *seed;
    validate(variant.config);
    const Trace trace = run(variant.config);
    const auto verdicts = check_all(trace, variant.config);
    MetricsRecord metrics = collect_metrics(trace, variant.config);
    if (nested) metrics.scenario = variant.name;

    const fs::path dir = nested ? root / variant.name : root;
    std::ostringstream trace_text;
    write_trace(trace_text, trace);
    write_atomic(dir / "trace.log", trace_text.str());
    write_atomic(dir / "config.cfg", to_text(variant.config));

    const bool pass = all_pass(verdicts);
    ok = ok && pass;
    nlohmann::ordered_json entry;
    entry["variant"] = variant.name;
    entry["seed"] = variant.config.seed;
    entry["regime"] = regime_name(variant.config.regime);
    entry["events"] = trace.size();
    entry["metrics"] = metrics_json(metrics);
    entry["oracle"] = render_json(verdicts);
    entry["pass"] = pass;
    summary["variants"].push_back(std::move(entry));
    records.push_back(std::move(metrics));

    if (!quiet) {
      std::cout << "== " << variant.name << " (" << trace.size() << " events, seed "
                << variant.config.seed << ")\n"
                << render_text(verdicts);
    }
  }
  summary["pass"] = ok;
  write_atomic(root / "metrics.csv", metrics_csv(records));
  write_atomic(root / "summary.json", summary.dump(2) + "\n");
  if (!quiet) {
    std::cout << metrics_csv(records) << "output: " << root.string() << "\n";
  }
  return ok ? 0 : kExitOracle;
}

int cmd_sweep(const std::string& source, const std::string& grid_spec,
              const std::string& out_flag, unsigned threads) {
  auto variants = resolve(source);
  if (variants.size() != 1) {
    throw ConfigError("config", "sweep needs a single configuration; pick builtin/variant");
  }
  const auto grid = parse_grid(grid_spec);
  const auto points = run_sweep(variants.front().config, grid, threads);
  const fs::path root = output_root(out_flag, scenario_name(source) + "-sweep");
  const std::string csv = sweep_csv(points);
  write_atomic(root / "sweep.csv", csv);
  std::cout << csv << "output: " << root.string() << "\n";
  return 0;
}

int cmd_verify(const std::string& trace_path, const std::string& config_source) {
  auto variants = resolve(config_source);
  if (variants.size() != 1) {
    throw ConfigError("config", "verify needs a single configuration; pick builtin/variant");
  }
  validate(variants.front().config);
  const Trace trace = load_trace(trace_path);
  const auto verdicts = check_all(trace, variants.front().config);
  std::cout << render_text(verdicts);
  return all_pass(verdicts) ? 0 : kExitOracle;
}

int cmd_list() {
  for (const auto& name : builtin_names()) {
    const auto b = find_builtin(name);
    std::cout << name << "\t" << b->description << "\n";
    for (const auto& v : b->variants) std::cout << "  " << name << "/" << v.name << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ticketforge: ticketing regime simulator and property oracle"};
  app.require_subcommand(1);

  std::string source, out, grid, trace_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  unsigned threads = 0;

  auto* run_cmd = app.add_subcommand("run", "simulate a config file or builtin scenario");
  run_cmd->add_option("config", source, "config path, builtin name, or builtin/variant")->required();
  run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--seed", seed, "override the scenario seed");
  run_cmd->add_flag("-q,--quiet", quiet, "no console report");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter grid over one config");
  sweep_cmd->add_option("config", source, "config path or builtin/variant")->required();
  sweep_cmd->add_option("--grid", grid, "e.g. gsw=1,10,50;batch=1,10")->required();
  sweep_cmd->add_option("--out", out, "output directory");
  sweep_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* verify_cmd = app.add_subcommand("verify", "re-run the oracle on a stored trace");
  verify_cmd->add_option("trace", trace_path, "trace.log path")->required();
  verify_cmd->add_option("config", source, "config path or builtin/variant")->required();

  app.add_subcommand("list-scenarios", "list builtin scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(source, out, seed, quiet);
    if (sweep_cmd->parsed()) return cmd_sweep(source, grid, out, threads);
    if (verify_cmd->parsed()) return cmd_verify(trace_path, source);
    return cmd_list();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracle;
  }
}
