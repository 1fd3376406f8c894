#include "hjlab/action_functional.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace hjlab {

namespace {

double segment_cost(const Scenario& s, double x0, double x1, double dt) {
  const double mid = 0.5 * (x0 + x1);
  return dt * s.kernel().lagrangian(s.p_at(mid), (x1 - x0) / dt).l;
}

}  // namespace

ExtendedReal action(const Scenario& s, const GridPath& path) {
  if (!path.is_linear()) {
    return path.jump_count() == 0 ? ExtendedReal(0.0) : ExtendedReal::pos_inf();
  }
  const auto& v = path.values();
  double total = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) total += segment_cost(s, v[k - 1], v[k], path.dt());
  return total;
}

CostProfile cost_profile(const Scenario& s, const GridPath& path) {
  if (!path.is_linear()) throw std::invalid_argument("cost_profile: piecewise-linear path required");
  const auto& v = path.values();
  const double dt = path.dt();
  CostProfile out;
  out.times = path.knots();
  out.f_values.resize(v.size());
  out.action_values.resize(v.size());
  double f = s.beta0_at(v[0]);
  double i = 0.0;
  out.f_values[0] = f;
  out.action_values[0] = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double di = segment_cost(s, v[k - 1], v[k], dt);
    i += di;
    f += dt * s.growth_rate(0.5 * (v[k - 1] + v[k])) - di;
    out.f_values[k] = f;
    out.action_values[k] = i;
  }
  out.action = i;
  out.terminal_cost = out.f_values.back();
  out.min_running = *std::min_element(out.f_values.begin(), out.f_values.end());
  return out;
}

namespace {

// First derivative on a uniform grid: central inside, second-order one-sided
// at both ends.
std::vector<double> derivative(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> d(n);
  d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
  d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2.0 * h);
  return d;
}

}  // namespace

double action_via_psi(const Scenario& s, const GridPath& path) {
  if (!path.is_linear()) throw std::invalid_argument("action_via_psi: piecewise-linear path required");
  const auto& f = path.values();
  if (f.size() < 3) throw std::invalid_argument("action_via_psi: at least three nodes required");
  const double h = path.dt();
  const auto& kernel = s.kernel();
  const std::vector<double> fdot = derivative(f, h);
  std::vector<double> psi(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) psi[k] = kernel.h_prime_inverse(fdot[k] / s.p_at(f[k]));
  const std::vector<double> psi_dot = derivative(psi, h);
  std::vector<double> g(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    g[k] = f[k] * psi_dot[k] + s.p_at(f[k]) * kernel.h(psi[k]).h;
  }
  double integral = 0.0;
  for (std::size_t k = 1; k < g.size(); ++k) integral += 0.5 * h * (g[k - 1] + g[k]);
  return psi.back() * f.back() - psi.front() * f.front() - integral;
}

double skorohod_sup_radius(const GridPath& f, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("skorohod_sup_radius: eps must be nonnegative");
  const double horizon = f.t_end() - f.t0();
  return 2.0 * eps + modulus_of_continuity(f, std::expm1(eps) * horizon);
}

void write_cost_profile_csv(std::ostream& os, const CostProfile& profile) {
  char buf[128];
  os << "s,F_s,I_s\n";
  for (std::size_t k = 0; k < profile.f_values.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", profile.times[k], profile.f_values[k],
                  profile.action_values[k]);
    os << buf;
  }
}

}  // namespace hjlab
