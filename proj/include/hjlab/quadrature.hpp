#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace hjlab::quadrature {

namespace detail {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
Vec<N> simpson(const Vec<N>& fa, const Vec<N>& fm, const Vec<N>& fb, double h) {
  Vec<N> out{};
  for (std::size_t k = 0; k < N; ++k) out[k] = h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]);
  return out;
}

template <std::size_t N, class F>
Vec<N> adapt(const F& f, double a, double b, const Vec<N>& fa, const Vec<N>& fm,
             const Vec<N>& fb, const Vec<N>& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Vec<N> flm = f(lm);
  const Vec<N> frm = f(rm);
  const Vec<N> left = simpson<N>(fa, flm, fm, m - a);
  const Vec<N> right = simpson<N>(fm, frm, fb, b - m);
  double err = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    err = std::fmax(err, std::fabs(left[k] + right[k] - whole[k]));
  }
  if (depth <= 0 || err <= 15.0 * tol) {
    Vec<N> out{};
    for (std::size_t k = 0; k < N; ++k) {
      out[k] = left[k] + right[k] + (left[k] + right[k] - whole[k]) / 15.0;
    }
    return out;
  }
  const Vec<N> l = adapt<N>(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
  const Vec<N> r = adapt<N>(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  Vec<N> out{};
  for (std::size_t k = 0; k < N; ++k) out[k] = l[k] + r[k];
  return out;
}

}  // namespace detail

/// Adaptive Simpson for an N-component integrand f: double -> std::array<double, N>.
/// The absolute tolerance applies to every component.
template <std::size_t N, class F>
std::array<double, N> adaptive_simpson(const F& f, double a, double b, double tol,
                                       int max_depth = 40) {
  const auto fa = f(a);
  const auto fb = f(b);
  const auto fm = f(0.5 * (a + b));
  const auto whole = detail::simpson<N>(fa, fm, fb, b - a);
  return detail::adapt<N>(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Scalar convenience wrapper.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 40) {
  auto wrapped = [&f](double x) { return std::array<double, 1>{f(x)}; };
  return adaptive_simpson<1>(wrapped, a, b, tol, max_depth)[0];
}

}  // namespace hjlab::quadrature
