#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hjlab/config.hpp"
#include "hjlab/experiment.hpp"

using namespace hjlab;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::vector<const char*> argv{"hjlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

}  // namespace

TEST_CASE("empty config gives the defaults") {
  const auto c = parse("");
  CHECK(c.scenario.name() == "constant-supercritical");
  CHECK(c.simulation.K == std::vector<double>{100.0, 1000.0, 10000.0});
  CHECK(c.simulation.cap == 1000000);
  CHECK(c.observables.windows.size() == 1);
  CHECK(c.solver_horizon() == 1.0);
  CHECK(c.grid.a_levels == std::vector<double>{0.0, 0.02, 0.05});
}

TEST_CASE("sections and lists parse") {
  const auto c = parse(R"(
[scenario]
name = valley
[grid]
T = 1.5
a_levels = 0 0.1
[simulation]
K = 50 500
t = 0.7
seed = 42
[observables]
windows = 2:0.3 -2:0.25
tubes = optimal@0:0.4
)");
  CHECK(c.scenario.name() == "valley");
  CHECK(c.solver_horizon() == 1.5);
  CHECK(c.grid.a_levels == std::vector<double>{0.0, 0.1});
  CHECK(c.simulation.K == std::vector<double>{50.0, 500.0});
  CHECK(c.simulation.seed == 42);
  REQUIRE(c.observables.windows.size() == 2);
  CHECK(c.observables.windows[1].x == -2.0);
  CHECK(c.observables.windows[1].delta == 0.25);
  REQUIRE(c.observables.tubes.size() == 1);
  CHECK(c.observables.tubes[0].optimal_x == 0.0);
  CHECK(c.observables.tubes[0].eps == 0.4);
}

TEST_CASE("overridden rates rename the scenario") {
  const auto c = parse("[scenario]\nname = constant-supercritical\nbirth = constant 1.2\n");
  CHECK(c.scenario.name() != "constant-supercritical");
  CHECK(c.scenario.growth_rate(0.0) == doctest::Approx(1.2));
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(parse("[grid]\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[grid]\ndt = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("[observables]\nwindows = 0\n"), ConfigError);
  CHECK_THROWS(parse("[scenario]\nname = nowhere\n"));
}

TEST_CASE("config json is stable") {
  const auto a = config_json(parse("[simulation]\nseed = 3\n[output]\ndir = one\n"));
  const auto b = config_json(parse("[simulation]\nseed = 3\n[output]\ndir = two\n"));
  CHECK(a == b);
  CHECK(a.find("\"seed\"") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "hjlab_test_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string good = (dir / "good.ini").string();
  const std::string bad = (dir / "bad.ini").string();
  std::ofstream(good) << "[scenario]\nname = quadratic\n";
  std::ofstream(bad) << "[grid]\nfoo = 1\n";

  std::string text;
  CHECK(cli({"--config", good, "validate"}, &text) == kExitOk);
  CHECK(text.find("all assumptions hold") != std::string::npos);
  CHECK(cli({"--config", bad, "validate"}) == kExitConfig);
  CHECK(cli({"--config", (dir / "missing.ini").string(), "validate"}) == kExitConfig);
  CHECK(cli({"validate"}) == kExitConfig);
  CHECK(cli({"--config", good}) == kExitConfig);
  CHECK(cli({"--help"}) == kExitOk);
  fs::remove_all(dir);
}
