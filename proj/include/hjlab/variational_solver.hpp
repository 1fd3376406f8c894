#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "hjlab/extended_real.hpp"
#include "hjlab/path.hpp"
#include "hjlab/scenario.hpp"

namespace hjlab {

/// Time-trait grid of the dynamic programme.
///
/// Sources lie on a sub-grid of spacing dx / velocity_substeps, so admissible
/// displacements per step are j dx / m for |j| <= J = floor(v_max dt m / dx).
/// Off-node feet are read by linear interpolation. velocity_substeps = 0
/// selects m = ceil(sqrt(dx) / dt), which refines the velocity set along with
/// the grid; m = 1 restricts sources to grid nodes.
struct SolverGrid {
  double T = 1.0;
  double dt = 0.01;
  double dx = 0.01;
  double x_min = -1.0;
  double x_max = 1.0;
  double v_max = 5.0;
  int velocity_substeps = 0;
};

/// Smallest v with dt L(x, v) > 2 (beta_bar + r_bar T - a) for every x (taking
/// p = p_bar), so that faster moves can never be optimal. For a = -inf the
/// lowest initial value minus the worst decay over [0, T] stands in for a.
double default_v_max(const Scenario& s, double T, double dt, ExtendedReal a);

/// Grid on the scenario's working domain with the default velocity bound.
SolverGrid default_grid(const Scenario& s, ExtendedReal a, double T, double dt, double dx);

/// u_a on a uniform (t, x) grid with the pruning mask.
class ValueField {
 public:
  static constexpr std::int16_t kNoSource = std::numeric_limits<std::int16_t>::min();

  /// Field built from given values; cells with live = 0 are masked. Used for
  /// residual checks of analytic fields and for tests.
  static ValueField from_values(const SolverGrid& grid, ExtendedReal a, std::vector<double> values,
                                std::vector<std::uint8_t> live, std::uint64_t scenario_hash = 0);

  ExtendedReal a() const { return a_; }
  bool constrained() const { return !a_.is_neg_inf(); }
  const SolverGrid& grid() const { return grid_; }
  int velocity_substeps() const { return substeps_; }
  /// J, the largest admissible sub-grid displacement index.
  int max_offset() const { return max_offset_; }
  std::size_t nt() const { return nt_; }  ///< number of time layers (steps + 1)
  std::size_t nx() const { return nx_; }
  double t(std::size_t k) const { return grid_.dt * static_cast<double>(k); }
  double x(std::size_t i) const { return grid_.x_min + grid_.dx * static_cast<double>(i); }

  bool live(std::size_t k, std::size_t i) const { return live_[k * nx_ + i] != 0; }
  /// Value of a live cell (unspecified for masked cells).
  double value(std::size_t k, std::size_t i) const { return values_[k * nx_ + i]; }
  ExtendedReal cell(std::size_t k, std::size_t i) const {
    return live(k, i) ? ExtendedReal(value(k, i)) : ExtendedReal::neg_inf();
  }
  /// Maximizing sub-grid displacement j (foot at x - j dx / m), or kNoSource.
  std::int16_t source_offset(std::size_t k, std::size_t i) const { return source_[k * nx_ + i]; }

  std::size_t boundary_hits() const { return boundary_hits_; }
  bool extinct() const { return extinct_; }
  /// First fully masked layer, or nt() when none.
  std::size_t extinction_layer() const { return extinction_layer_; }
  std::uint64_t scenario_hash() const { return scenario_hash_; }

 private:
  friend ValueField solve(const Scenario& s, ExtendedReal a, const SolverGrid& grid);
  ValueField() = default;
  void allocate(const SolverGrid& grid);

  ExtendedReal a_ = ExtendedReal::neg_inf();
  SolverGrid grid_;
  int substeps_ = 1;
  int max_offset_ = 0;
  std::size_t nt_ = 0;
  std::size_t nx_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> live_;
  std::vector<std::int16_t> source_;
  std::size_t boundary_hits_ = 0;
  bool extinct_ = false;
  std::size_t extinction_layer_ = 0;
  std::uint64_t scenario_hash_ = 0;
};

/// Forward semi-Lagrangian recursion
///   u(t+dt, x) = max_j [ u(t, x - d_j) + dt (R(xbar) - L(xbar, d_j / dt)) ],  xbar = x - d_j / 2,
/// over live feet, then masking of cells below a (never for a = -inf).
/// Ties go to the smallest |d_j|, then to the smaller foot.
ValueField solve(const Scenario& s, ExtendedReal a, const SolverGrid& grid);

/// Bilinear interpolation; -inf if any corner with nonzero weight is masked.
/// Throws std::out_of_range off the grid.
ExtendedReal value_at(const ValueField& field, double t, double x);

/// Optimal trajectory into the node nearest (t, x), following recorded
/// sources back to t = 0. The returned path is piecewise linear on the time
/// grid and carries the exact sub-grid displacements.
GridPath backtrack(const ValueField& field, double t, double x);

/// tol_g = c (dt + dx).
double grid_tolerance(const ValueField& field, double c = 1.0);

enum class CellClass { Masked, Boundary, Interior };

/// Omega_a membership: masked cells, live cells with value in [a, a + tol_g]
/// (boundary band), and the rest. Without a constraint every live cell is interior.
CellClass classify(const ValueField& field, std::size_t k, std::size_t i, double tol_g);

struct ResidualReport {
  double max_residual = 0.0;
  /// tested / eligible; eligible cells are interior live cells whose eight
  /// neighbours are live, tested cells are the smooth eligible ones.
  double interior_fraction = 0.0;
  std::size_t eligible = 0;
  std::size_t tested = 0;
};

struct ResidualOptions {
  /// Cells with |u_xx| or |u_tt| above this are treated as kinks and skipped.
  double smoothness_threshold = 10.0;
  /// Cells closer than this to the x-edges of the grid are skipped.
  double edge_margin = 0.0;
  /// Layers with t below this are skipped.
  double t_min = 0.0;
};

/// max |u_t - p H(u_x) - R| over smooth interior cells (centred differences).
ResidualReport hj_residual(const ValueField& field, const Scenario& s, const ResidualOptions& options = {});

/// Long-format CSV: t,x,value,source_offset, with MASKED for masked cells.
/// Every `stride`-th layer and node is written.
void write_field_csv(std::ostream& os, const ValueField& field, std::size_t stride = 1);
/// JSON metadata: grids, a, v_max, substeps, boundary_hits, extinction, scenario hash.
std::string field_metadata_json(const ValueField& field);

}  // namespace hjlab
