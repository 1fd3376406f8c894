#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hjlab/random.hpp"

namespace hjlab {

/// |alpha| outside [-alpha_max, alpha_max], or w beyond H'(alpha_max).
class KernelDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An exponential moment that would overflow double precision.
class KernelSaturationError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// Safeguarded Newton failed to reach tolerance; carries the final bracket.
class InversionError : public std::runtime_error {
 public:
  InversionError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), bracket_lo(lo), bracket_hi(hi) {}
  double bracket_lo;
  double bracket_hi;
};

struct KernelOptions {
  /// Largest |alpha| at which H may be evaluated. Non-positive means "pick the
  /// default": 20, reduced for wide kernels to the largest value whose
  /// exponential moment stays representable.
  double alpha_max = 0.0;
  double newton_tol = 1e-12;
  int newton_max_iter = 200;
  /// Maximal bisection depth of the adaptive Simpson rule (tabulated kernels).
  int quadrature_order = 30;
};

/// H(alpha) = int (e^{alpha y} - 1) G(y) dy together with H' and H''.
struct HValue {
  double h;
  double h_prime;
  double h_second;
};

/// L(x, v) = sup_alpha (alpha v - p(x) H(alpha)) and its maximizer.
struct LagrangianValue {
  double l;
  double alpha_star;
};

/// Even mutation density G with all needed exponential moments.
///
/// Immutable after construction; sampling takes a caller-owned stream, so one
/// kernel may be shared by any number of concurrent workers.
class MutationKernel {
 public:
  enum class Kind { Gaussian, TwoSidedExponential, TabulatedSymmetricDensity };

  static MutationKernel gaussian(double sigma, KernelOptions options = {});
  /// G(y) = lambda/2 exp(-lambda |y|). Requires alpha_max < lambda.
  static MutationKernel two_sided_exponential(double lambda, KernelOptions options = {});
  /// Piecewise-linear density through (y, G(y)) nodes, zero outside the nodes.
  /// The table is symmetrized with G(-y) and renormalized to unit mass.
  static MutationKernel tabulated(std::vector<std::pair<double, double>> nodes,
                                  KernelOptions options = {});

  Kind kind() const { return kind_; }
  double alpha_max() const { return alpha_max_; }
  double newton_tol() const { return newton_tol_; }
  int newton_max_iter() const { return newton_max_iter_; }
  int quadrature_order() const { return quadrature_order_; }
  /// sigma for Gaussian, lambda for two-sided exponential, 0 otherwise.
  double parameter() const { return parameter_; }
  /// Symmetrized and normalized nodes (tabulated kernels only).
  const std::vector<std::pair<double, double>>& nodes() const { return nodes_; }
  /// True for tabulated kernels, whose support is truncated.
  bool truncated_support() const { return kind_ == Kind::TabulatedSymmetricDensity; }

  double density(double y) const;
  /// Total mass under the module's quadrature (1 up to rounding after construction).
  double total_mass() const;

  HValue h(double alpha) const;
  double h_prime_inverse(double w) const;
  LagrangianValue lagrangian(double p_x, double v) const;
  double sample_jump(RandomStream& rng) const;

  /// Canonical one-line description, used in reports and scenario hashes.
  std::string describe() const;

 private:
  MutationKernel() = default;
  void finalize_alpha_max(double requested);
  HValue h_unchecked(double alpha) const;

  Kind kind_ = Kind::Gaussian;
  double parameter_ = 1.0;
  double alpha_max_ = 20.0;
  double newton_tol_ = 1e-12;
  int newton_max_iter_ = 200;
  int quadrature_order_ = 30;
  std::vector<std::pair<double, double>> nodes_;
  std::vector<double> segment_cdf_;
};

}  // namespace hjlab
