#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "hjlab/extended_real.hpp"
#include "hjlab/path.hpp"
#include "hjlab/random.hpp"
#include "hjlab/scenario.hpp"

namespace hjlab {

/// One trajectory of the auxiliary jump process Y (rescaled time) together with
/// the exponent int_0^t R(Y_s) ds of its weight K^{...}.
struct SpineSample {
  double start = 0.0;
  GridPath path = GridPath::step({0.0}, {0.0}, 0.0);
  double weight_exponent = 0.0;
  std::uint64_t jumps = 0;
};

/// From x0, wait Exp(p(x) ln K) in rescaled time, then jump by y / ln K with y ~ G.
SpineSample simulate_spine(const Scenario& s, double K, double t, double x0, RandomStream& rng);

/// Path-membership test applied to spine paths.
class SpinePredicate {
 public:
  static SpinePredicate always();
  static SpinePredicate never();
  /// Terminal value within delta of x.
  static SpinePredicate window(double x, double delta);
  /// Whole path within eps of f in sup norm.
  static SpinePredicate tube(GridPath f, double eps);

  bool operator()(const GridPath& path) const;
  /// "true", "false", "window(x=..,delta=..)" or "tube(eps=..)".
  std::string spec() const;
  bool is_never() const { return kind_ == Kind::Never; }

 private:
  enum class Kind { Always, Never, Window, Tube };
  explicit SpinePredicate(Kind k) : kind_(k) {}

  Kind kind_;
  double x_ = 0.0;
  double radius_ = 0.0;
  std::shared_ptr<const GridPath> f_;
};

struct MeanEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  /// ln(estimate) / ln K computed from exponents, so it survives overflow of
  /// the estimate itself; -inf when no spine hit.
  ExtendedReal log_estimate_over_log_k = ExtendedReal::neg_inf();
  std::uint64_t n_spines = 0;
  std::uint64_t hits = 0;
  /// Every weight was zero.
  bool degenerate = false;
  /// Largest observed weight exponent.
  double max_weight_exponent = -HUGE_VAL;
};

/// E N_t^{K,A} = int K^{beta0(x)} E_x[K^{int R(Y)} 1_A(Y)] dx with one spine
/// per equal-mass stratum of K^{beta0(x)} dx. The standard error pairs
/// neighbouring strata. Spines are generated in fixed chunks from streams
/// derived from `seed`, so the result does not depend on the worker count.
MeanEstimate estimate_mean_count(const Scenario& s, double K, double t, const SpinePredicate& predicate,
                                 std::uint64_t n_spines, std::uint64_t seed, double tail_tol = 1e-9);
MeanEstimate estimate_mean_count(const Scenario& s, const InitialMeasure& measure, double K, double t,
                                 const SpinePredicate& predicate, std::uint64_t n_spines, std::uint64_t seed);

}  // namespace hjlab
