#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hjlab/mutation_kernel.hpp"
#include "hjlab/rate_function.hpp"

namespace hjlab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool contains(const Interval& other) const { return other.lo >= lo && other.hi <= hi; }
};

/// Standing constants of the model: 0 <= b <= b_bar, p_low <= p <= p_bar,
/// R <= r_bar and beta0(x) <= beta_bar - decay_alpha |x|.
struct ScenarioBounds {
  double b_bar = 0.0;
  double p_bar = 0.0;
  double p_low = 0.0;
  double r_bar = 0.0;
  double beta_bar = 0.0;
  double decay_alpha = 0.0;
};

struct Rates {
  double b;
  double d;
  double p;
  double big_r;         ///< b + p - d
  double lambda_total;  ///< b + p + d
};

/// One failed assumption at one sample point. Violations are data, not errors.
struct Violation {
  std::string assumption;
  double x;
  std::string detail;
};

/// The full model: demographic rates, initial exponent profile and mutation kernel.
class Scenario {
 public:
  Scenario(std::string name, RateFunction birth, RateFunction death, RateFunction mutation_rate,
           RateFunction beta0, MutationKernel kernel, ScenarioBounds bounds, Interval domain,
           double beta0_offset = 0.0);

  const std::string& name() const { return name_; }
  const RateFunction& birth() const { return birth_; }
  const RateFunction& death() const { return death_; }
  const RateFunction& mutation_rate() const { return mutation_rate_; }
  const RateFunction& beta0() const { return beta0_; }
  const MutationKernel& kernel() const { return kernel_; }
  const ScenarioBounds& bounds() const { return bounds_; }
  /// Declared working domain: validation range and default solver grid.
  const Interval& domain() const { return domain_; }
  /// Constant shift mu applied as beta0 - mu.
  double beta0_offset() const { return beta0_offset_; }

  Rates rates_at(double x) const;
  double growth_rate(double x) const { return birth_(x) + mutation_rate_(x) - death_(x); }
  double p_at(double x) const { return mutation_rate_(x); }
  /// beta0(x) - beta0_offset.
  double beta0_at(double x) const { return beta0_(x) - beta0_offset_; }

  /// Checks every standing assumption at n_samples equispaced points of `domain`.
  std::vector<Violation> validate(Interval domain, int n_samples) const;
  std::vector<Violation> validate(int n_samples = 10000) const { return validate(domain_, n_samples); }

  /// Interval outside which the intensity K^{beta0(x)} dx carries less than
  /// tail_tol times the total mass, from the closed-form exponential tail
  /// bound; left and right sides are bounded separately.
  Interval truncation_interval(double K, double tail_tol) const;

  /// Canonical multi-line description (every field); the hash is FNV-1a of it.
  std::string describe() const;
  std::uint64_t hash() const;

  Scenario with_beta0_offset(double mu) const;
  Scenario with_kernel(MutationKernel kernel) const;

 private:
  std::string name_;
  RateFunction birth_;
  RateFunction death_;
  RateFunction mutation_rate_;
  RateFunction beta0_;
  MutationKernel kernel_;
  ScenarioBounds bounds_;
  Interval domain_;
  double beta0_offset_ = 0.0;
};

/// Smallest constants satisfied by the functions on `domain` (dense sampling),
/// given a decay rate for beta0.
ScenarioBounds derive_bounds(const RateFunction& birth, const RateFunction& death,
                             const RateFunction& mutation_rate, const RateFunction& beta0,
                             Interval domain, double decay_alpha, int n_samples = 10001);

/// Built-in benchmark scenarios: "constant-supercritical", "quadratic", "valley".
Scenario builtin_scenario(std::string_view name);
std::vector<std::string> builtin_scenario_names();

/// The Poisson intensity K^{beta0(x)} dx restricted to the truncation interval,
/// tabulated as a CDF on a uniform grid for inverse-CDF sampling.
class InitialMeasure {
 public:
  InitialMeasure(const Scenario& scenario, double K, double tail_tol = 1e-9, int nodes = 10000);

  const Interval& interval() const { return interval_; }
  /// Total mass M = int K^{beta0}, by per-cell adaptive quadrature.
  double mass() const { return mass_; }
  /// Position with CDF value u in [0, 1], linear within grid cells.
  double inverse_cdf(double u) const;

 private:
  Interval interval_;
  double mass_ = 0.0;
  double step_ = 0.0;
  std::vector<double> cdf_;
};

}  // namespace hjlab
