#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hjlab/extended_real.hpp"
#include "hjlab/path.hpp"
#include "hjlab/random.hpp"
#include "hjlab/scenario.hpp"

namespace hjlab {

enum class Fate : std::uint8_t { Alive, Died };

/// One individual of the ancestry. The mother keeps her record through every
/// birth; each birth appends exactly one child. Times are model times.
struct Individual {
  std::uint64_t id = 0;
  std::optional<std::uint64_t> parent;
  double birth_time = 0.0;
  double trait = 0.0;
  std::optional<double> death_time;
  Fate fate = Fate::Alive;
  bool mutant = false;
};

struct SimulationResult {
  std::uint64_t scenario_hash = 0;
  double K = 0.0;
  /// Rescaled horizon t; the model ran to t ln K.
  double horizon_t = 0.0;
  /// Model time actually reached (smaller than t ln K only when capped).
  double reached_model_time = 0.0;
  std::vector<Individual> ancestry;
  std::vector<std::uint64_t> alive;
  std::uint64_t event_count = 0;
  std::uint64_t initial_count = 0;
  std::uint64_t births = 0;
  std::uint64_t mutant_births = 0;
  std::uint64_t deaths = 0;
  bool capped = false;
  /// int_0^{t ln K} <Z_s, 1> ds in model time.
  double alive_time_integral = 0.0;

  double log_k() const;
};

struct RunConfig {
  double K = 100.0;
  double t = 1.0;
  std::uint64_t cap = 1000000;
  double tail_tol = 1e-9;
  /// Reject scenarios that fail validation before simulating.
  bool validate = true;
};

/// Poisson(M) initial traits with intensity K^{beta0(x)} dx on the truncation
/// interval. Throws std::length_error when M exceeds the cap.
std::vector<double> sample_initial(const InitialMeasure& measure, RandomStream& rng, std::uint64_t cap);
std::vector<double> sample_initial(const Scenario& s, double K, RandomStream& rng, std::uint64_t cap = 1000000,
                                   double tail_tol = 1e-9);

/// Exact event-driven simulation up to model time t ln K with per-individual
/// exponential clocks of rate b + p + d.
SimulationResult run(const Scenario& s, const RunConfig& config, RandomStream& rng);
/// Same, reusing a prebuilt initial measure (which must match config.K).
SimulationResult run(const Scenario& s, const InitialMeasure& measure, const RunConfig& config, RandomStream& rng);
/// Same, starting from the given traits.
SimulationResult run_from(const Scenario& s, const std::vector<double>& initial_traits, const RunConfig& config,
                          RandomStream& rng);

/// Ancestral trait path of an individual in rescaled time, ending at its death
/// (or the horizon for the living).
GridPath lineage(const SimulationResult& res, std::uint64_t id);

/// Alive individuals with |trait - x| <= delta.
std::uint64_t count_window(const SimulationResult& res, double x, double delta);

/// sup-norm distance of every alive individual's lineage to f, in the order of
/// res.alive. f must cover [0, horizon_t].
std::vector<double> tube_distances(const SimulationResult& res, const GridPath& f);

/// Alive individuals whose lineage stays within eps of f in sup norm.
std::uint64_t count_tube(const SimulationResult& res, const GridPath& f, double eps);

/// log(count) / log(K); -inf for an empty set.
ExtendedReal exponent(std::uint64_t count, double K);

/// Columnar ancestry dump: id,parent,birth_time,trait,death_time,fate,mutant.
void write_ancestry_csv(std::ostream& os, const SimulationResult& res);

}  // namespace hjlab
