#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hjlab/action_functional.hpp"
#include "hjlab/variational_solver.hpp"

using namespace hjlab;

namespace {

SolverGrid small_grid(double T, double h, double half_width, double v_max, int m) {
  SolverGrid g;
  g.T = T;
  g.dt = h;
  g.dx = h;
  g.x_min = -half_width;
  g.x_max = half_width;
  g.v_max = v_max;
  g.velocity_substeps = m;
  return g;
}

// Brute-force first step: every sub-grid foot within the velocity bound, read
// by interpolation from the t = 0 layer, with the midpoint rule for R and L.
struct OneStep {
  double value;
  bool live;
};

OneStep brute_step(const Scenario& s, ExtendedReal a, const SolverGrid& g, int m, int i) {
  const int nx = static_cast<int>(std::lround((g.x_max - g.x_min) / g.dx)) + 1;
  auto node = [&](int n) { return g.x_min + n * g.dx; };
  auto live0 = [&](int n) { return a.is_neg_inf() || s.beta0_at(node(n)) >= a.value(); };
  const double x = node(i);
  const double sub = g.dx / m;
  const int reach = static_cast<int>(std::floor(g.v_max * g.dt / sub + 1e-9));
  bool found = false;
  double best = 0.0;
  for (int j = -reach; j <= reach; ++j) {
    // Foot at sub-grid index i*m - j.
    const int q = i * m - j;
    if (q < 0 || q > (nx - 1) * m) continue;
    const int lo = q / m;
    const int r = q % m;
    double u;
    if (r == 0) {
      if (!live0(lo)) continue;
      u = s.beta0_at(node(lo));
    } else {
      if (!live0(lo) || !live0(lo + 1)) continue;
      const double w = static_cast<double>(r) / m;
      u = (1.0 - w) * s.beta0_at(node(lo)) + w * s.beta0_at(node(lo + 1));
    }
    const double d = j * sub;
    const double mid = x - 0.5 * d;
    const double cand = u + g.dt * (s.growth_rate(mid) - s.kernel().lagrangian(s.p_at(mid), d / g.dt).l);
    if (!found || cand > best) best = cand;
    found = true;
  }
  if (!found) return {0.0, false};
  if (a.is_finite() && best < a.value()) return {0.0, false};
  return {best, true};
}

Scenario flat_growth_scenario() {
  // R = b + p - d = 0 identically.
  const auto base = builtin_scenario("constant-supercritical");
  ScenarioBounds b = base.bounds();
  b.r_bar = 0.0;
  return Scenario("flat", base.birth(), RateFunction::constant(1.5), base.mutation_rate(), base.beta0(), base.kernel(),
                  b, base.domain());
}

}  // namespace

TEST_CASE("one step matches a brute-force dynamic programme") {
  const char* names[] = {"constant-supercritical", "quadratic"};
  for (const char* name : names) {
    const auto s = builtin_scenario(name);
    for (int m : {1, 3}) {
      for (ExtendedReal a : {ExtendedReal::neg_inf(), ExtendedReal(0.0)}) {
        const auto g = small_grid(0.05, 0.05, 2.0, 3.0, m);
        const auto f = solve(s, a, g);
        REQUIRE(f.nt() == 2);
        for (std::size_t i = 0; i < f.nx(); ++i) {
          const auto want = brute_step(s, a, g, m, static_cast<int>(i));
          CAPTURE(name);
          CAPTURE(m);
          CAPTURE(i);
          REQUIRE(f.live(1, i) == want.live);
          if (want.live) CHECK(std::fabs(f.value(1, i) - want.value) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("initial layer is beta0 where it clears the level") {
  const auto s = builtin_scenario("constant-supercritical");
  const auto f = solve(s, ExtendedReal(0.3), small_grid(0.1, 0.01, 1.5, 5.0, 0));
  for (std::size_t i = 0; i < f.nx(); ++i) {
    const double b0 = s.beta0_at(f.x(i));
    CHECK(f.live(0, i) == (b0 >= 0.3));
    if (f.live(0, i)) CHECK(f.value(0, i) == b0);
  }
}

TEST_CASE("monotone in the constraint level") {
  const auto s = builtin_scenario("quadratic");
  const auto g = small_grid(1.0, 0.02, 3.0, 12.0, 0);
  const auto free_field = solve(s, ExtendedReal::neg_inf(), g);
  std::vector<ValueField> fields;
  for (double a : {0.0, 0.02, 0.05}) fields.push_back(solve(s, ExtendedReal(a), g));
  std::size_t bad_order = 0, bad_nest = 0, below = 0;
  for (std::size_t k = 0; k < g.T / g.dt + 1; ++k) {
    for (std::size_t i = 0; i < free_field.nx(); ++i) {
      const ExtendedReal top = free_field.cell(k, i);
      for (std::size_t n = 0; n < fields.size(); ++n) {
        const auto& cur = fields[n];
        if (cur.live(k, i) && cur.value(k, i) < cur.a().value() - 1e-12) ++below;
        if (cur.cell(k, i) > top + 1e-12) ++bad_order;
        if (n > 0) {
          const auto& prev = fields[n - 1];
          if (cur.live(k, i) && !prev.live(k, i)) ++bad_nest;
          if (cur.cell(k, i) > prev.cell(k, i) + 1e-12) ++bad_order;
        }
      }
    }
  }
  CHECK(bad_order == 0);
  CHECK(bad_nest == 0);
  CHECK(below == 0);
}

TEST_CASE("constant scenario: stay-put value and optimizer") {
  const auto s = builtin_scenario("constant-supercritical");
  SolverGrid g = small_grid(1.0, 0.01, 2.0, 5.0, 0);
  const auto f = solve(s, ExtendedReal(0.0), g);
  CHECK(f.boundary_hits() == 0);
  CHECK(value_at(f, 1.0, 0.0).value() == doctest::Approx(2.0).epsilon(1e-9));
  const auto path = backtrack(f, 1.0, 0.0);
  CHECK(path.size() == f.nt());
  CHECK(sup_distance(path, GridPath::linear(0.0, 1.0, {0.0, 0.0})) <= g.dx);
  const auto point = backtrack(f, 0.0, 0.4);
  CHECK(point.size() == 1);
  CHECK(cost_profile(s, point).terminal_cost == doctest::Approx(s.beta0_at(0.4)));
}

TEST_CASE("backtracked cost agrees with the field") {
  const auto s = builtin_scenario("quadratic");
  const auto g = small_grid(1.0, 0.01, 3.0, 12.0, 0);
  for (ExtendedReal a : {ExtendedReal::neg_inf(), ExtendedReal(0.0)}) {
    const auto f = solve(s, a, g);
    const double tol = grid_tolerance(f);
    int tried = 0;
    for (double x = -1.5; x <= 1.5; x += 0.25) {
      for (double t : {0.3, 0.7, 1.0}) {
        if (!value_at(f, t, x).is_finite()) continue;
        ++tried;
        const auto prof = cost_profile(s, backtrack(f, t, x));
        CAPTURE(x);
        CAPTURE(t);
        CHECK(std::fabs(prof.terminal_cost - value_at(f, t, x).value()) <= tol);
        if (a.is_finite()) CHECK(prof.min_running >= a.value() - tol);
      }
    }
    CHECK(tried > 10);
  }
}

TEST_CASE("value_at conventions") {
  SolverGrid g = small_grid(0.02, 0.01, 0.02, 5.0, 1);
  // 3 layers x 5 nodes.
  std::vector<double> v(15, 0.7);
  std::vector<std::uint8_t> live(15, 1);
  v[5 + 1] = 0.9;
  live[10 + 4] = 0;
  const auto f = ValueField::from_values(g, ExtendedReal(0.0), v, live);
  CHECK(value_at(f, 0.01, -0.01).value() == 0.9);
  CHECK(value_at(f, 0.005, 0.005).value() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(value_at(f, 0.015, 0.015).is_neg_inf());
  CHECK(value_at(f, 0.02, 0.01).value() == 0.7);
  CHECK_THROWS_AS(value_at(f, 0.03, 0.0), std::out_of_range);
  CHECK_THROWS_AS(value_at(f, 0.0, 0.05), std::out_of_range);
  CHECK_THROWS_AS(backtrack(f, 0.02, 0.02), std::invalid_argument);
}

TEST_CASE("residual of an injected linear field is exact") {
  const auto s = builtin_scenario("quadratic");
  const auto g = small_grid(0.5, 0.05, 2.0, 5.0, 1);
  const double c = 0.8;
  const auto nt = static_cast<std::size_t>(std::lround(g.T / g.dt)) + 1;
  const auto nx = static_cast<std::size_t>(std::lround((g.x_max - g.x_min) / g.dx)) + 1;
  std::vector<double> v(nt * nx);
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < nx; ++i) v[k * nx + i] = c * (g.x_min + g.dx * static_cast<double>(i));
  }
  const auto f = ValueField::from_values(g, ExtendedReal::neg_inf(), v, std::vector<std::uint8_t>(nt * nx, 1));
  double want = 0.0;
  const double h = std::expm1(0.5 * c * c);
  for (std::size_t i = 1; i + 1 < nx; ++i) {
    const double x = g.x_min + g.dx * static_cast<double>(i);
    want = std::max(want, std::fabs(-s.p_at(x) * h - s.growth_rate(x)));
  }
  ResidualOptions opt;
  opt.smoothness_threshold = 1e9;
  const auto rep = hj_residual(f, s, opt);
  CHECK(std::fabs(rep.max_residual - want) <= 1e-12);
  CHECK(rep.tested == (nt - 2) * (nx - 2));
  CHECK(rep.interior_fraction == 1.0);
}

TEST_CASE("cells next to the mask sit near the level") {
  const auto s = builtin_scenario("constant-supercritical");
  const auto f = solve(s, ExtendedReal(0.0), small_grid(1.0, 0.01, 3.0, 5.0, 0));
  const double tol = grid_tolerance(f);
  std::size_t adjacent = 0;
  for (std::size_t k = 0; k < f.nt(); ++k) {
    for (std::size_t i = 1; i + 1 < f.nx(); ++i) {
      if (!f.live(k, i) || (f.live(k, i - 1) && f.live(k, i + 1))) continue;
      ++adjacent;
      CHECK(f.value(k, i) <= 5.0 * tol);
      CHECK(classify(f, k, i, tol) == CellClass::Boundary);
    }
  }
  CHECK(adjacent >= 2 * f.nt());
}

TEST_CASE("grid refinement is Cauchy") {
  const auto s = builtin_scenario("quadratic");
  const auto coarse = solve(s, ExtendedReal(0.0), small_grid(1.0, 0.02, 3.0, 12.0, 0));
  const auto fine = solve(s, ExtendedReal(0.0), small_grid(1.0, 0.01, 3.0, 12.0, 0));
  const double bound = 0.02 + 0.02;
  double worst = 0.0;
  std::size_t shared = 0;
  for (std::size_t k = 0; k < coarse.nt(); ++k) {
    for (std::size_t i = 0; i < coarse.nx(); ++i) {
      if (!coarse.live(k, i) || !fine.live(2 * k, 2 * i)) continue;
      ++shared;
      worst = std::max(worst, std::fabs(coarse.value(k, i) - fine.value(2 * k, 2 * i)));
    }
  }
  CHECK(shared > 1000);
  CHECK(worst <= bound);
}

TEST_CASE("no free lunch in one step") {
  const auto s = flat_growth_scenario();
  const auto f = solve(s, ExtendedReal::neg_inf(), small_grid(0.01, 0.01, 2.0, 5.0, 0));
  for (std::size_t i = 0; i < f.nx(); ++i) CHECK(f.value(1, i) <= 1.0 + 1e-15);
}

TEST_CASE("unconstrained mode never masks") {
  const auto s = builtin_scenario("quadratic");
  const auto f = solve(s, ExtendedReal::neg_inf(), small_grid(0.5, 0.02, 4.0, 12.0, 0));
  std::size_t masked = 0;
  for (std::size_t k = 0; k < f.nt(); ++k) {
    for (std::size_t i = 0; i < f.nx(); ++i) masked += !f.live(k, i);
  }
  CHECK(masked == 0);
  CHECK_FALSE(f.extinct());
}

TEST_CASE("extinction is flagged") {
  const auto base = builtin_scenario("constant-supercritical");
  ScenarioBounds b = base.bounds();
  b.r_bar = -1.0;
  const Scenario dying("dying", base.birth(), RateFunction::constant(2.5), base.mutation_rate(), base.beta0(),
                       base.kernel(), b, base.domain());
  const auto f = solve(dying, ExtendedReal(0.5), small_grid(1.0, 0.01, 2.0, 5.0, 0));
  CHECK(f.extinct());
  CHECK(f.extinction_layer() > 0);
  CHECK(f.extinction_layer() < f.nt());
  for (std::size_t i = 0; i < f.nx(); ++i) CHECK_FALSE(f.live(f.extinction_layer(), i));
}

TEST_CASE("invalid grids are rejected") {
  const auto s = builtin_scenario("constant-supercritical");
  CHECK_THROWS_AS(solve(s, ExtendedReal::pos_inf(), small_grid(1.0, 0.01, 1.0, 5.0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(solve(s, ExtendedReal(0.0), small_grid(1.0, 0.01, 1.0, 0.5, 0)), std::invalid_argument);
  SolverGrid g = small_grid(1.0, 0.01, 1.0, 5.0, 0);
  g.T = 1.005;
  CHECK_THROWS_AS(solve(s, ExtendedReal(0.0), g), std::invalid_argument);
  g = small_grid(1.0, 0.01, 1.0, 5.0, 0);
  g.dx = -0.01;
  CHECK_THROWS_AS(solve(s, ExtendedReal(0.0), g), std::invalid_argument);
}

TEST_CASE("default velocity bound prices out fast moves") {
  const auto s = builtin_scenario("constant-supercritical");
  const double v = default_v_max(s, 1.0, 0.01, ExtendedReal(0.0));
  const auto& b = s.bounds();
  CHECK(0.01 * s.kernel().lagrangian(b.p_bar, v).l >= 2.0 * (b.beta_bar + b.r_bar - 0.0) * (1.0 - 1e-9));
  CHECK(0.01 * s.kernel().lagrangian(b.p_bar, 0.99 * v).l < 2.0 * (b.beta_bar + b.r_bar));
  CHECK(default_v_max(s, 1.0, 0.01, ExtendedReal::neg_inf()) > v);
}

TEST_CASE("serialization") {
  const auto s = builtin_scenario("constant-supercritical");
  const auto f = solve(s, ExtendedReal(0.5), small_grid(0.02, 0.01, 1.0, 5.0, 1));
  std::ostringstream csv;
  write_field_csv(csv, f);
  const std::string text = csv.str();
  CHECK(text.rfind("t,x,value,source_offset\n", 0) == 0);
  CHECK(text.find("MASKED") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(f.nt() * f.nx() + 1));
  const std::string meta = field_metadata_json(f);
  CHECK(meta.find("\"boundary_hits\"") != std::string::npos);
  CHECK(meta.find("\"scenario_hash\"") != std::string::npos);
  std::ostringstream again;
  write_field_csv(again, solve(s, ExtendedReal(0.5), small_grid(0.02, 0.01, 1.0, 5.0, 1)));
  CHECK(again.str() == text);
}

TEST_CASE("valley: the constraint removes the far side") {
  const auto s = builtin_scenario("valley");
  SolverGrid g = default_grid(s, ExtendedReal(0.0), 1.5, 0.01, 0.01);
  g.v_max = 48.0;
  const auto constrained = solve(s, ExtendedReal(0.0), g);
  const auto free_field = solve(s, ExtendedReal::neg_inf(), g);
  const ExtendedReal u0 = value_at(constrained, 1.5, 2.0);
  const ExtendedReal big_u = value_at(free_field, 1.5, 2.0);
  REQUIRE(big_u.is_finite());
  CHECK(big_u.value() >= 0.2);
  CHECK((u0.is_neg_inf() || u0.value() <= big_u.value() - 0.2));
  const auto prof = cost_profile(s, backtrack(free_field, 1.5, 2.0));
  CHECK(prof.min_running < 0.0);
  CHECK(std::fabs(prof.terminal_cost - big_u.value()) <= grid_tolerance(free_field));
}
