#include "hjlab/mutation_kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "hjlab/quadrature.hpp"

namespace hjlab {

namespace {

// Largest exponent we let exp() see; leaves room for the polynomial prefactors
// of H' and H'' before reaching DBL_MAX (e^709.78).
constexpr double kMaxExponent = 650.0;
constexpr double kDefaultAlphaMax = 20.0;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MutationKernel MutationKernel::gaussian(double sigma, KernelOptions options) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian kernel: sigma must be positive and finite");
  }
  MutationKernel k;
  k.kind_ = Kind::Gaussian;
  k.parameter_ = sigma;
  k.newton_tol_ = options.newton_tol;
  k.newton_max_iter_ = options.newton_max_iter;
  k.quadrature_order_ = options.quadrature_order;
  k.finalize_alpha_max(options.alpha_max);
  return k;
}

MutationKernel MutationKernel::two_sided_exponential(double lambda, KernelOptions options) {
  if (!(lambda > 1.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("two-sided exponential kernel: lambda must exceed 1");
  }
  MutationKernel k;
  k.kind_ = Kind::TwoSidedExponential;
  k.parameter_ = lambda;
  k.newton_tol_ = options.newton_tol;
  k.newton_max_iter_ = options.newton_max_iter;
  k.quadrature_order_ = options.quadrature_order;
  k.finalize_alpha_max(options.alpha_max);
  return k;
}

MutationKernel MutationKernel::tabulated(std::vector<std::pair<double, double>> nodes,
                                         KernelOptions options) {
  if (nodes.size() < 2) {
    throw std::invalid_argument("tabulated kernel: need at least two nodes");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto [y, g] = nodes[i];
    if (!std::isfinite(y) || !std::isfinite(g) || g < 0.0) {
      throw std::invalid_argument("tabulated kernel: nodes must be finite with G(y) >= 0");
    }
    if (i > 0 && !(y > nodes[i - 1].first)) {
      throw std::invalid_argument("tabulated kernel: node abscissae must be strictly increasing");
    }
  }
  auto raw = [&nodes](double y) {
    if (y < nodes.front().first || y > nodes.back().first) return 0.0;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), y,
                               [](double v, const auto& n) { return v < n.first; });
    if (it == nodes.end()) return nodes.back().second;
    if (it == nodes.begin()) return nodes.front().second;
    const auto& [y1, g1] = *it;
    const auto& [y0, g0] = *(it - 1);
    return g0 + (g1 - g0) * (y - y0) / (y1 - y0);
  };
  // Symmetrize on the mirrored breakpoint set; the result is piecewise linear there.
  std::vector<double> ys;
  for (const auto& n : nodes) {
    ys.push_back(n.first);
    ys.push_back(-n.first);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end(),
                       [](double a, double b) { return std::fabs(a - b) <= 1e-14 * (1.0 + std::fabs(a)); }),
           ys.end());
  std::vector<std::pair<double, double>> sym;
  sym.reserve(ys.size());
  for (double y : ys) sym.emplace_back(y, 0.5 * (raw(y) + raw(-y)));
  double mass = 0.0;
  for (std::size_t i = 1; i < sym.size(); ++i) {
    mass += 0.5 * (sym[i].second + sym[i - 1].second) * (sym[i].first - sym[i - 1].first);
  }
  if (!(mass > 0.0)) {
    throw std::invalid_argument("tabulated kernel: density has zero mass");
  }
  for (auto& n : sym) n.second /= mass;

  MutationKernel k;
  k.kind_ = Kind::TabulatedSymmetricDensity;
  k.parameter_ = 0.0;
  k.nodes_ = std::move(sym);
  k.segment_cdf_.assign(k.nodes_.size(), 0.0);
  for (std::size_t i = 1; i < k.nodes_.size(); ++i) {
    k.segment_cdf_[i] = k.segment_cdf_[i - 1] + 0.5 * (k.nodes_[i].second + k.nodes_[i - 1].second) *
                                                   (k.nodes_[i].first - k.nodes_[i - 1].first);
  }
  k.newton_tol_ = options.newton_tol;
  k.newton_max_iter_ = options.newton_max_iter;
  k.quadrature_order_ = options.quadrature_order;
  k.finalize_alpha_max(options.alpha_max);
  return k;
}

void MutationKernel::finalize_alpha_max(double requested) {
  if (!(newton_tol_ > 0.0) || newton_max_iter_ < 1 || quadrature_order_ < 1) {
    throw std::invalid_argument("kernel: newton_tol, newton_max_iter and quadrature_order must be positive");
  }
  double safe = 0.0;
  switch (kind_) {
    case Kind::Gaussian:
      safe = std::sqrt(2.0 * kMaxExponent) / parameter_;
      break;
    case Kind::TwoSidedExponential:
      safe = parameter_;
      break;
    case Kind::TabulatedSymmetricDensity:
      safe = kMaxExponent / std::max(std::fabs(nodes_.front().first), std::fabs(nodes_.back().first));
      break;
  }
  if (requested > 0.0) {
    if (kind_ == Kind::TwoSidedExponential && requested >= parameter_) {
      throw std::invalid_argument("two-sided exponential kernel: alpha_max must be below lambda");
    }
    if (requested > safe) {
      throw std::invalid_argument("kernel: alpha_max " + fmt_double(requested) +
                                  " exceeds the representable exponential-moment range " +
                                  fmt_double(safe));
    }
    alpha_max_ = requested;
    return;
  }
  alpha_max_ = kind_ == Kind::TwoSidedExponential ? std::min(kDefaultAlphaMax, 0.9 * parameter_)
                                                   : std::min(kDefaultAlphaMax, safe);
}

double MutationKernel::density(double y) const {
  switch (kind_) {
    case Kind::Gaussian: {
      const double s = parameter_;
      return std::exp(-0.5 * y * y / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
    }
    case Kind::TwoSidedExponential:
      return 0.5 * parameter_ * std::exp(-parameter_ * std::fabs(y));
    case Kind::TabulatedSymmetricDensity:
      break;
  }
  if (y < nodes_.front().first || y > nodes_.back().first) return 0.0;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), y,
                             [](double v, const auto& n) { return v < n.first; });
  if (it == nodes_.end()) return nodes_.back().second;
  const auto& [y1, g1] = *it;
  const auto& [y0, g0] = *(it - 1);
  return g0 + (g1 - g0) * (y - y0) / (y1 - y0);
}

double MutationKernel::total_mass() const {
  if (kind_ != Kind::TabulatedSymmetricDensity) return 1.0;
  return segment_cdf_.back();
}

HValue MutationKernel::h(double alpha) const {
  if (!std::isfinite(alpha) || std::fabs(alpha) > alpha_max_) {
    throw KernelDomainError("H: |alpha| = " + fmt_double(std::fabs(alpha)) + " exceeds alpha_max = " +
                            fmt_double(alpha_max_));
  }
  const HValue v = h_unchecked(alpha);
  if (!std::isfinite(v.h) || !std::isfinite(v.h_prime) || !std::isfinite(v.h_second)) {
    throw KernelSaturationError("H: exponential moment overflows at alpha = " + fmt_double(alpha));
  }
  return v;
}

HValue MutationKernel::h_unchecked(double alpha) const {
  switch (kind_) {
    case Kind::Gaussian: {
      const double s2 = parameter_ * parameter_;
      const double expo = 0.5 * s2 * alpha * alpha;
      if (expo > kMaxExponent) {
        throw KernelSaturationError("H: exponent " + fmt_double(expo) + " out of range");
      }
      const double e = std::exp(expo);
      return {std::expm1(expo), s2 * alpha * e, s2 * (1.0 + s2 * alpha * alpha) * e};
    }
    case Kind::TwoSidedExponential: {
      const double l2 = parameter_ * parameter_;
      const double a2 = alpha * alpha;
      const double den = l2 - a2;
      if (!(den > 0.0)) throw KernelSaturationError("H: |alpha| >= lambda");
      return {a2 / den, 2.0 * l2 * alpha / (den * den), 2.0 * l2 * (l2 + 3.0 * a2) / (den * den * den)};
    }
    case Kind::TabulatedSymmetricDensity:
      break;
  }
  // Even/odd forms on the half line: H = 2 int_0 (cosh - 1) G, H' = 2 int_0 y sinh G,
  // H'' = 2 int_0 y^2 cosh G. Exact symmetry of H and H' follows.
  const double ymax = nodes_.back().first;
  if (std::fabs(alpha) * ymax > kMaxExponent) {
    throw KernelSaturationError("H: alpha * y_max out of range");
  }
  const double scale = std::cosh(alpha * ymax) * (1.0 + ymax * ymax);
  const double a = std::fabs(alpha);
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  std::size_t n_segments = 0;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (nodes_[i].first > 0.0) ++n_segments;
  }
  const double tol = 1e-15 * scale / static_cast<double>(std::max<std::size_t>(1, n_segments));
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    double y0 = nodes_[i - 1].first;
    const double y1 = nodes_[i].first;
    if (y1 <= 0.0) continue;
    y0 = std::max(0.0, y0);
    auto integrand = [this, a](double y) {
      const double g = density(y);
      const double half = std::sinh(0.5 * a * y);
      return std::array<double, 3>{2.0 * half * half * g, y * std::sinh(a * y) * g,
                                   y * y * std::cosh(a * y) * g};
    };
    const auto seg = quadrature::adaptive_simpson<3>(integrand, y0, y1, tol, quadrature_order_);
    for (int c = 0; c < 3; ++c) acc[c] += seg[c];
  }
  const double sign = alpha < 0.0 ? -1.0 : 1.0;
  return {2.0 * acc[0], sign * 2.0 * acc[1], 2.0 * acc[2]};
}

double MutationKernel::h_prime_inverse(double w) const {
  if (!std::isfinite(w)) throw KernelDomainError("H'^{-1}: argument must be finite");
  if (w == 0.0) return 0.0;
  const double target = std::fabs(w);
  const double tol = newton_tol_ * (1.0 + target);

  // Bracket [lo, hi] with H'(lo) < target <= H'(hi), by doubling from 1.
  double lo = 0.0;
  double hi = std::min(1.0, alpha_max_);
  while (h_unchecked(hi).h_prime < target) {
    if (hi >= alpha_max_) {
      throw KernelDomainError("H'^{-1}: w = " + fmt_double(w) + " exceeds H'(alpha_max)");
    }
    lo = hi;
    hi = std::min(2.0 * hi, alpha_max_);
  }
  // Start from the small-w linearization, clipped into the bracket.
  double alpha = target / h_unchecked(0.0).h_second;
  if (!(alpha > lo && alpha < hi)) alpha = 0.5 * (lo + hi);
  for (int iter = 0; iter < newton_max_iter_; ++iter) {
    const HValue v = h_unchecked(alpha);
    const double r = v.h_prime - target;
    if (std::fabs(r) <= tol) return w < 0.0 ? -alpha : alpha;
    if (r > 0.0) {
      hi = alpha;
    } else {
      lo = alpha;
    }
    double next = alpha - r / v.h_second;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == alpha) break;
    alpha = next;
  }
  throw InversionError("H'^{-1}: no convergence for w = " + fmt_double(w), w < 0.0 ? -hi : lo,
                       w < 0.0 ? -lo : hi);
}

LagrangianValue MutationKernel::lagrangian(double p_x, double v) const {
  if (!(p_x > 0.0) || !std::isfinite(p_x)) {
    throw std::invalid_argument("L: mutation rate must be positive");
  }
  if (v == 0.0) return {0.0, 0.0};
  const double alpha = h_prime_inverse(v / p_x);
  const double l = alpha * v - p_x * h(alpha).h;
  // The supremum dominates the value 0 at alpha = 0; clip rounding below it.
  return {std::max(0.0, l), alpha};
}

double MutationKernel::sample_jump(RandomStream& rng) const {
  switch (kind_) {
    case Kind::Gaussian: {
      // Box-Muller, one variate per call so the kernel holds no cached state.
      const double u1 = 1.0 - uniform01(rng);  // (0, 1]
      const double u2 = uniform01(rng);
      return parameter_ * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    case Kind::TwoSidedExponential: {
      const double e = -std::log1p(-uniform01(rng)) / parameter_;
      return (rng() >> 63) ? e : -e;
    }
    case Kind::TabulatedSymmetricDensity:
      break;
  }
  const double m = uniform01(rng) * segment_cdf_.back();
  auto it = std::upper_bound(segment_cdf_.begin(), segment_cdf_.end(), m);
  std::size_t i = static_cast<std::size_t>(it - segment_cdf_.begin());
  i = std::clamp<std::size_t>(i, 1, nodes_.size() - 1);
  const auto [y0, g0] = nodes_[i - 1];
  const auto [y1, g1] = nodes_[i];
  const double width = y1 - y0;
  const double slope = (g1 - g0) / width;
  const double rem = m - segment_cdf_[i - 1];
  double s = 0.0;
  if (std::fabs(slope) * width <= 1e-12 * std::max(g0, g1)) {
    s = g0 > 0.0 ? rem / g0 : 0.5 * width;
  } else {
    s = (-g0 + std::sqrt(std::max(0.0, g0 * g0 + 2.0 * slope * rem))) / slope;
  }
  return y0 + std::clamp(s, 0.0, width);
}

std::string MutationKernel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Gaussian:
      os << "gaussian sigma=" << fmt_double(parameter_);
      break;
    case Kind::TwoSidedExponential:
      os << "two_sided_exponential lambda=" << fmt_double(parameter_);
      break;
    case Kind::TabulatedSymmetricDensity:
      os << "tabulated nodes=" << nodes_.size() << " [";
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        os << (i ? " " : "") << fmt_double(nodes_[i].first) << ":" << fmt_double(nodes_[i].second);
      }
      os << "] truncated_support=1";
      break;
  }
  os << " alpha_max=" << fmt_double(alpha_max_) << " newton_tol=" << fmt_double(newton_tol_);
  return os.str();
}

}  // namespace hjlab
