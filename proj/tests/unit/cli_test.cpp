#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ticketforge/trace.hpp"

namespace fs = std::filesystem;
using namespace ticketforge;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ticketforge-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + " \"" + std::string(TICKETFORGE_CLI) + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("run writes the artefacts and exits 0") {
  const fs::path dir = scratch("run");
  REQUIRE(cli("run fig2 -q --out " + (dir / "fig2").string()) == 0);
  CHECK(fs::exists(dir / "fig2" / "trace.log"));
  CHECK(fs::exists(dir / "fig2" / "metrics.csv"));
  CHECK(fs::exists(dir / "fig2" / "summary.json"));
  CHECK(fs::exists(dir / "fig2" / "config.cfg"));
  CHECK(slurp(dir / "fig2" / "metrics.csv").rfind("# ticketforge metrics schema v1", 0) == 0);
}

TEST_CASE("TICKETFORGE_OUT sets the output root") {
  const fs::path dir = scratch("env");
  REQUIRE(cli("run ooo-finality -q", "TICKETFORGE_OUT=" + dir.string()) == 0);
  CHECK(fs::exists(dir / "ooo-finality" / "trace.log"));
}

TEST_CASE("bad configuration exits 2") {
  const fs::path dir = scratch("bad");
  {
    std::ofstream out(dir / "bad.cfg");
    out << "n = 4\nL = 1\n";
  }
  CHECK(cli("run " + (dir / "bad.cfg").string() + " --out " + dir.string()) == 2);
  CHECK(cli("run no-such-scenario") == 2);
  CHECK(cli("run") == 2);
  CHECK(cli("list-scenarios") == 0);
}

TEST_CASE("verify accepts a clean trace and rejects a tampered one") {
  const fs::path dir = scratch("verify");
  REQUIRE(cli("run fig2 -q --out " + dir.string()) == 0);
  const fs::path trace = dir / "trace.log";
  CHECK(cli("verify " + trace.string() + " fig2") == 0);

  Trace t = load_trace(trace.string());
  bool tampered = false;
  for (auto& e : t) {
    if (e.kind == TraceKind::Commit && e.node == 1 && e.get("v") != "bot") {
      e.detail = "v=bot";
      tampered = true;
      break;
    }
  }
  REQUIRE(tampered);
  const fs::path bad = dir / "tampered.log";
  {
    std::ofstream out(bad);
    write_trace(out, t);
  }
  CHECK(cli("verify " + bad.string() + " fig2") == 1);
}
