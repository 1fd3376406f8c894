#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjlab/config.hpp"
#include "hjlab/extended_real.hpp"
#include "hjlab/feynman_kac.hpp"
#include "hjlab/variational_solver.hpp"

namespace hjlab {

/// Exit codes of every subcommand.
enum ExitCode : int { kExitOk = 0, kExitAssertion = 2, kExitConfig = 3 };

/// u_0, U and the u_a levels of a configuration, solved once.
struct SolvedFields {
  ValueField constrained;    ///< a = 0
  ValueField unconstrained;  ///< a = -inf
  std::vector<ValueField> levels;  ///< one per grid.a_levels entry
};

SolverGrid config_grid(const ExperimentConfig& config, ExtendedReal a);
SolvedFields solve_fields(const ExperimentConfig& config);

/// One counted set: a window or a tube with its resolved reference path.
struct Observable {
  std::string kind;  ///< "window" or "tube"
  std::string spec;  ///< "window(x=..,delta=..)" or "tube(source=..,eps=..)"
  WindowSpec window;
  TubeSpec tube;
  SpinePredicate predicate() const;
};

/// Windows first, then tubes, in config order. Optimal tubes are backtracked
/// from u_0 (throws ConfigError when the target node is masked).
std::vector<Observable> resolve_observables(const ExperimentConfig& config, const SolvedFields* fields);

/// Counts of every observable in one replica.
struct ReplicaCounts {
  std::uint64_t replica = 0;
  bool capped = false;
  std::uint64_t alive = 0;
  std::vector<std::uint64_t> counts;
};

/// Replica r at K index k uses stream derive_stream(seed, (k << 32) | r).
std::vector<ReplicaCounts> simulate_counts(const ExperimentConfig& config, std::size_t k_index,
                                           const std::vector<Observable>& observables);

/// Feynman-Kac runs for K index k and observable j use seed derive_seed(seed ^ kFkSalt, (k << 32) | j).
inline constexpr std::uint64_t kFkSalt = 0x6b6d2d666b2d6573ull;
MeanEstimate estimate_observable(const ExperimentConfig& config, std::size_t k_index, std::size_t obs_index,
                                 const Observable& observable);

struct ReportRow {
  double K = 0.0;
  double t = 0.0;
  std::string observable;
  std::string spec;
  std::uint64_t replicas = 0;
  std::uint64_t capped = 0;
  std::uint64_t zero_replicas = 0;
  /// Mean and sd of log(count)/log K over replicas with a nonzero count;
  /// -inf when every replica is empty.
  ExtendedReal exponent_mean = ExtendedReal::neg_inf();
  double exponent_sd = 0.0;
  ExtendedReal exponent_max = ExtendedReal::neg_inf();
  double count_mean = 0.0;
  double count_se = 0.0;
  double fk_estimate = 0.0;
  double fk_std_error = 0.0;
  ExtendedReal fk_log_estimate = ExtendedReal::neg_inf();
  /// Window: field values at (t, x). Tube: F_t of the reference path, with
  /// u_0 = -inf when its running cost dips below 0.
  ExtendedReal u0 = ExtendedReal::neg_inf();
  ExtendedReal big_u = ExtendedReal::neg_inf();
  /// u_a at (t, x) for each a level (windows only).
  std::vector<ExtendedReal> u_levels;
  /// exponent_mean - u0 when both are finite.
  std::optional<double> gap;
  bool usable = true;
  bool holds = true;
  std::string note;
};

struct ExponentReport {
  std::vector<ReportRow> rows;
  std::vector<std::vector<ReplicaCounts>> replicas;  ///< per K index
  std::vector<Observable> observables;
  std::string config_json;
  std::string constrained_meta;
  std::string unconstrained_meta;
  bool all_hold = true;
};

/// Replicas, Feynman-Kac estimates and solver values for every (K, observable).
/// A row holds when it is usable (no capped replica) and the mean simulated
/// exponent does not exceed U by more than three standard errors.
ExponentReport run_compare(const ExperimentConfig& config);
/// compare.csv, compare_replicas.csv and compare.json in `dir`.
void write_compare(const ExponentReport& report, const std::filesystem::path& dir);

struct LineageRow {
  double K = 0.0;
  double x = 0.0;
  double delta = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t capped = 0;
  std::uint64_t extinct = 0;
  ExtendedReal window_exponent = ExtendedReal::neg_inf();
  ExtendedReal tube_exponent = ExtendedReal::neg_inf();
  /// Mean over used replicas of exponent(tube) / exponent(window).
  double exponent_ratio = 0.0;
  /// Sup distance to f_o of lineages ending in the window, pooled over replicas.
  double median_distance = 0.0;
  std::vector<std::uint64_t> histogram;
  bool usable = true;
  std::string note;
};

struct LineageReport {
  std::vector<LineageRow> rows;
  std::vector<std::optional<GridPath>> optimizers;  ///< one per window; empty when u_0 is masked there
  double bin_width = 0.05;
  std::string config_json;
  /// Every window at the largest K is usable and within lineage_tolerance.
  bool holds = true;
  /// Median distance strictly decreasing in K for every window.
  bool median_decreasing = true;
};

LineageReport run_lineage_check(const ExperimentConfig& config);
void write_lineage(const LineageReport& report, const std::filesystem::path& dir);

/// Full "hjlab" command line: validate, simulate, estimate-mean, solve,
/// compare, lineage-check; --config, --seed, --out. Returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hjlab
