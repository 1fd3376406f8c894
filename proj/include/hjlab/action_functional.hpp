#pragma once

#include <iosfwd>
#include <vector>

#include "hjlab/extended_real.hpp"
#include "hjlab/path.hpp"
#include "hjlab/scenario.hpp"

namespace hjlab {

/// Running cost F_s(f) = beta0(f(0)) + int_0^s R(f) - I_s(f) at every node.
struct CostProfile {
  std::vector<double> times;
  std::vector<double> f_values;
  /// Cumulative action I_s at every node.
  std::vector<double> action_values;
  double action = 0.0;
  double terminal_cost = 0.0;
  double min_running = 0.0;
};

/// I_t(f) = sum over segments of dt L(midpoint, slope). Step paths with a jump
/// have infinite action.
ExtendedReal action(const Scenario& s, const GridPath& path);

/// Per-node F and I along a piecewise-linear path (midpoint rule for R and L).
CostProfile cost_profile(const Scenario& s, const GridPath& path);

/// I_t via the integration-by-parts form with psi = (H')^{-1}(f'/p(f)), using
/// finite differences for f' and psi'. Needs at least three nodes of a smooth path.
double action_via_psi(const Scenario& s, const GridPath& path);

/// Radius of the sup-norm ball containing the Skorohod ball of radius eps
/// around f: 2 eps + omega(f, (e^eps - 1) t).
double skorohod_sup_radius(const GridPath& f, double eps);

/// "s,F_s,I_s" CSV.
void write_cost_profile_csv(std::ostream& os, const CostProfile& profile);

}  // namespace hjlab
