#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjlab/extended_real.hpp"
#include "hjlab/path.hpp"
#include "hjlab/scenario.hpp"

namespace hjlab {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WindowSpec {
  double x = 0.0;
  double delta = 0.5;
};

/// Sup-norm tube around a reference path: either a "time,value" CSV file or
/// the backtracked optimizer of u_0 into (t, x).
struct TubeSpec {
  std::string source;
  std::optional<double> optimal_x;
  double eps = 0.5;
  /// Loaded file path (empty for optimal tubes until resolved).
  std::optional<GridPath> path;
};

struct GridSection {
  /// 0 means "the simulation horizon".
  double T = 0.0;
  double dt = 0.01;
  double dx = 0.01;
  /// 0 means the default bound from the scenario.
  double v_max = 0.0;
  std::optional<double> x_min;
  std::optional<double> x_max;
  int velocity_substeps = 0;
  std::vector<double> a_levels{0.0, 0.02, 0.05};
};

struct SimulationSection {
  std::vector<double> K{100.0, 1000.0, 10000.0};
  double t = 1.0;
  std::uint64_t replicas = 200;
  std::uint64_t cap = 1000000;
  std::uint64_t seed = 1;
  double tail_tol = 1e-9;
  bool dump_ancestry = false;
};

struct EstimationSection {
  std::uint64_t n_spines = 100000;
};

struct ObservablesSection {
  std::vector<WindowSpec> windows{WindowSpec{}};
  std::vector<TubeSpec> tubes;
  /// Largest accepted |tube exponent - window exponent| in lineage-check.
  double lineage_tolerance = 0.2;
  /// Bin width of the sup-distance histogram in lineage-check.
  double histogram_bin = 0.05;
};

struct OutputSection {
  std::filesystem::path dir = "out";
  std::size_t field_stride = 1;
};

struct ExperimentConfig {
  Scenario scenario = builtin_scenario("constant-supercritical");
  GridSection grid;
  SimulationSection simulation;
  EstimationSection estimation;
  ObservablesSection observables;
  OutputSection output;

  double solver_horizon() const { return grid.T > 0.0 ? grid.T : simulation.t; }
};

/// INI grammar:
///
///     [scenario]    name (built-in base), birth, death, mutation_rate, beta0
///                   (RateFunction text), domain = lo hi, beta0_offset, decay_alpha,
///                   b_bar p_bar p_low r_bar beta_bar (explicit bounds)
///     [kernel]      kind = gaussian | two_sided_exponential | tabulated, sigma,
///                   lambda, nodes = y:g ..., alpha_max, newton_tol
///     [grid]        T, dt, dx, v_max, x_min, x_max, velocity_substeps, a_levels
///     [simulation]  K (list), t, replicas, cap, seed, tail_tol, dump_ancestry
///     [estimation]  n_spines
///     [observables] windows = x:delta ..., tubes = file.csv:eps | optimal@x:eps ...,
///                   lineage_tolerance, histogram_bin
///     [output]      dir, field_stride
///
/// Overriding any rate without explicit bounds re-derives the bounds on the
/// domain. Unknown sections or keys are errors. Relative path files resolve
/// against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& file);

/// Every resolved setting, defaults included, in a fixed key order.
std::string config_json(const ExperimentConfig& config);

}  // namespace hjlab
