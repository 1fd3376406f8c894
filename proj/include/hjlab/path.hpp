#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace hjlab {

enum class Interpolation { PiecewiseLinear, PiecewiseConstantRightContinuous };

/// A real-valued path on [t0, t_end] in rescaled time.
///
/// PiecewiseLinear paths live on the uniform grid t0 + k dt and stand in for
/// absolutely continuous trajectories. PiecewiseConstantRightContinuous paths
/// are lineages: values[k] holds on [knots[k], knots[k+1]) and the last value
/// up to and including t_end.
class GridPath {
 public:
  static GridPath linear(double t0, double dt, std::vector<double> values);
  static GridPath step(std::vector<double> knots, std::vector<double> values, double t_end);

  Interpolation interpolation() const { return interpolation_; }
  bool is_linear() const { return interpolation_ == Interpolation::PiecewiseLinear; }
  double t0() const { return t0_; }
  double t_end() const { return t_end_; }
  /// Grid step of a linear path; t_end - t0 for a step path.
  double dt() const { return dt_; }
  const std::vector<double>& values() const { return values_; }
  /// Node times (linear) or piece start times (step).
  const std::vector<double>& knots() const { return knots_; }
  std::size_t size() const { return values_.size(); }

  double front() const { return values_.front(); }
  double back() const { return values_.back(); }
  double value_at(double s) const;
  /// Number of discontinuities (always 0 for linear paths).
  std::size_t jump_count() const;

  /// Linear path restricted to its first n_nodes nodes.
  GridPath prefix(std::size_t n_nodes) const;
  /// Linear path run backwards in time on the same grid.
  GridPath reversed() const;

 private:
  GridPath() = default;

  Interpolation interpolation_ = Interpolation::PiecewiseLinear;
  double t0_ = 0.0;
  double dt_ = 1.0;
  double t_end_ = 0.0;
  std::vector<double> values_;
  std::vector<double> knots_;
};

/// sup over the common time range of |a(s) - b(s)|, exact for any mix of
/// linear and step paths (both are affine between the merged breakpoints).
double sup_distance(const GridPath& a, const GridPath& b);

/// Modulus of continuity omega(f, eta) = sup_{|s - r| < eta} |f(s) - f(r)| of a
/// linear path, over its nodes.
double modulus_of_continuity(const GridPath& f, double eta);

/// "time,value" CSV, one row per node (linear) or per piece start plus the end (step).
void write_path_csv(std::ostream& os, const GridPath& path);
/// Reads a linear path from "time,value" CSV; times must be uniformly spaced.
GridPath read_path_csv(std::istream& is);

}  // namespace hjlab
