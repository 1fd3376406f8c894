// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "hjlab/action_functional.hpp"
#include "hjlab/branching_sim.hpp"
#include "hjlab/experiment.hpp"
#include "hjlab/feynman_kac.hpp"
#include "hjlab/mutation_kernel.hpp"
#include "hjlab/parallel.hpp"
#include "hjlab/variational_solver.hpp"

using namespace hjlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::string g(double v) { return fmt("%.4g", v); }

ExperimentConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

double rel_err(double got, double want) { return std::fabs(got - want) / std::max(1.0, std::fabs(want)); }

// 1. Gaussian closed forms and the H' inverse.
Outcome kernel_exactness() {
  const auto k = MutationKernel::gaussian(1.0);
  double e_h = 0, e_hp = 0, e_hpp = 0, e_round = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = -5.0 + 10.0 * i / 999.0;
    const double ex = std::exp(0.5 * a * a);
    const auto v = k.h(a);
    e_h = std::max(e_h, rel_err(v.h, ex - 1.0));
    e_hp = std::max(e_hp, rel_err(v.h_prime, a * ex));
    e_hpp = std::max(e_hpp, rel_err(v.h_second, (1.0 + a * a) * ex));
    e_round = std::max(e_round, std::fabs(k.h_prime_inverse(a * ex) - a));
  }
  const bool pass = e_h <= 1e-10 && e_hp <= 1e-10 && e_hpp <= 1e-10 && e_round <= 1e-8;
  return {pass, "max rel err H " + g(e_h) + ", H' " + g(e_hp) + ", H'' " + g(e_hpp) + " (tol 1e-10); round trip " +
                    g(e_round) + " (tol 1e-8)"};
}

// 2. Lagrangian against a brute-force sup, and Fenchel-Young.
Outcome legendre_oracle() {
  const auto k = MutationKernel::gaussian(1.0);
  oracle::Gen gen(2);
  auto ham = [](double a) { return oracle::gaussian_h(1.0, a); };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = gen.uniform(0.05, 3.0);
    const double v = gen.uniform(-20.0, 20.0);
    worst = std::max(worst, std::fabs(k.lagrangian(p, v).l - oracle::brute_legendre(ham, p, v)));
  }
  double violation = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double p = gen.uniform(0.05, 3.0);
    const double v = gen.uniform(-20.0, 20.0);
    const double a = gen.uniform(-5.0, 5.0);
    violation = std::max(violation, a * v - (k.lagrangian(p, v).l + p * k.h(a).h));
  }
  const bool pass = worst <= 1e-5 && violation <= 1e-12;
  return {pass, "max |L - brute| " + g(worst) + " (tol 1e-5); max Fenchel-Young excess " + g(violation) +
                    " (tol 1e-12)"};
}

GridPath wave(int n) {
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = 0.3 * std::sin(2.0 * std::numbers::pi * i / n);
  return GridPath::linear(0.0, 1.0 / n, v);
}

// 3. Action by midpoint Lagrangian against the Psi form.
Outcome action_cross_check() {
  const auto s = builtin_scenario("constant-supercritical");
  auto gap = [&](int n) {
    const auto f = wave(n);
    return std::fabs(action(s, f).value() - action_via_psi(s, f));
  };
  const double g1 = gap(1000);
  const double g2 = gap(2000);
  const bool pass = g1 <= 1e-3 && g2 * 3.0 <= g1;
  return {pass, "gap at dt=1e-3 " + g(g1) + " (tol 1e-3), at dt=5e-4 " + g(g2) + ", shrink " + g(g1 / g2) +
                    "x (need >= 3)"};
}

// 4. Replica mean and Feynman-Kac estimate of the total count.
Outcome many_to_one() {
  const auto s = builtin_scenario("constant-supercritical");
  const double K = 100.0;
  const double exact = 100.0 * 200.0 / std::log(100.0);
  const std::size_t n = 1000;
  std::vector<double> totals(n);
  const InitialMeasure measure(s, K);
  parallel_for(n, [&](std::size_t r) {
    RandomStream rng = derive_stream(404, r);
    RunConfig rc;
    rc.K = K;
    rc.t = 1.0;
    totals[r] = static_cast<double>(run(s, measure, rc, rng).alive.size());
  });
  double mean = 0.0;
  for (double x : totals) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : totals) var += (x - mean) * (x - mean);
  const double se_sim = std::sqrt(var / (n - 1) / n);
  const auto fk = estimate_mean_count(s, K, 1.0, SpinePredicate::always(), 10000, 405);
  const double se = std::hypot(se_sim, fk.std_error);
  const double z_sim = std::fabs(mean - exact) / se;
  const double z_fk = std::fabs(fk.estimate - exact) / se;
  const double z_pair = std::fabs(mean - fk.estimate) / se;
  const bool pass = z_sim <= 3.0 && z_fk <= 3.0 && z_pair <= 3.0;
  return {pass, "closed form " + g(exact) + ", replicas " + g(mean) + " +- " + g(se_sim) + ", FK " + g(fk.estimate) +
                    " +- " + g(fk.std_error) + "; |z| sim " + g(z_sim) + ", FK " + g(z_fk) + ", pair " + g(z_pair) +
                    " (tol 3)"};
}

// Hopf-Lax value of the constant scenario: fan from the peak, then slope-1 flanks.
double constant_exact(double t, double x) {
  const double edge = 0.5 * std::exp(0.5) * t;
  if (std::fabs(x) <= edge) return 1.0 + t - t * oracle::gaussian_lagrangian(1.0, 0.5, x / t);
  return 1.0 - std::fabs(x) + t * (1.0 + 0.5 * std::expm1(0.5));
}

double sup_error_t1(const ValueField& f) {
  double e = 0.0;
  const std::size_t k = f.nt() - 1;
  for (std::size_t i = 0; i < f.nx(); ++i) {
    if (std::fabs(f.x(i)) > 1.5) continue;
    e = std::max(e, std::fabs(f.cell(k, i).value() - constant_exact(1.0, f.x(i))));
  }
  return e;
}

// 5. u_0(1, 0) = 2 with the stay-put optimizer.
Outcome dp_analytic() {
  const auto s = builtin_scenario("constant-supercritical");
  const ExtendedReal a(0.0);
  const auto coarse = solve(s, a, default_grid(s, a, 1.0, 0.01, 0.01));
  const auto fine = solve(s, a, default_grid(s, a, 1.0, 0.005, 0.005));
  const double u = value_at(coarse, 1.0, 0.0).value();
  const double dist = sup_distance(backtrack(coarse, 1.0, 0.0), GridPath::linear(0.0, 1.0, {0.0, 0.0}));
  const double e1 = sup_error_t1(coarse);
  const double e2 = sup_error_t1(fine);
  const bool pass = std::fabs(u - 2.0) <= 0.05 && dist <= 0.02 && e2 < e1;
  return {pass, "|u(1,0) - 2| " + g(std::fabs(u - 2.0)) + " (tol 0.05), path distance " + g(dist) +
                    " (tol 0.02), sup error on |x|<=1.5 " + g(e1) + " -> " + g(e2) + " (must decrease)"};
}

// 6. Hamilton-Jacobi residual of the unconstrained field.
Outcome viscosity_residual() {
  const auto s = builtin_scenario("constant-supercritical");
  const auto na = ExtendedReal::neg_inf();
  const auto r1 = hj_residual(solve(s, na, default_grid(s, na, 1.0, 0.01, 0.01)), s);
  const auto r2 = hj_residual(solve(s, na, default_grid(s, na, 1.0, 0.005, 0.005)), s);
  const double ratio = r2.max_residual / r1.max_residual;
  const bool pass = r1.max_residual <= 0.1 && r1.interior_fraction >= 0.9 && ratio >= 0.35 && ratio <= 0.65;
  return {pass, "residual " + g(r1.max_residual) + " (tol 0.1) on " + g(r1.interior_fraction) +
                    " of interior cells (need 0.9), refined " + g(r2.max_residual) + ", ratio " + g(ratio) +
                    " (need 0.35..0.65)"};
}

// 7. Ordering in a, nested masks, floor a, initial layer.
Outcome ordering_and_masks() {
  const double slack = 1e-12;
  const std::vector<double> levels{0.0, 0.02, 0.05};
  std::size_t bad = 0, checked = 0;
  for (const char* name : {"constant-supercritical", "quadratic", "valley"}) {
    const auto s = builtin_scenario(name);
    const bool valley = std::string(name) == "valley";
    // The valley's automatic velocity bound is far above the configured 48.
    auto grid = valley ? default_grid(s, ExtendedReal::neg_inf(), 1.5, 0.02, 0.02)
                       : default_grid(s, ExtendedReal::neg_inf(), 1.0, 0.01, 0.01);
    if (valley) grid.v_max = 48.0;
    const auto big_u = solve(s, ExtendedReal::neg_inf(), grid);
    std::vector<ValueField> u;
    for (double a : levels) u.push_back(solve(s, ExtendedReal(a), grid));
    for (std::size_t k = 0; k < big_u.nt(); ++k) {
      for (std::size_t i = 0; i < big_u.nx(); ++i) {
        ++checked;
        for (std::size_t l = 0; l < levels.size(); ++l) {
          const auto& f = u[l];
          if (!f.live(k, i)) continue;
          if (f.value(k, i) > big_u.value(k, i) + slack) ++bad;
          if (f.value(k, i) < levels[l] - slack) ++bad;
          if (l > 0 && (!u[l - 1].live(k, i) || f.value(k, i) > u[l - 1].value(k, i) + slack)) ++bad;
        }
        if (k == 0) {
          const double b0 = s.beta0_at(big_u.x(i));
          if (std::fabs(big_u.value(0, i) - b0) > slack) ++bad;
          for (std::size_t l = 0; l < levels.size(); ++l) {
            const bool want_live = b0 >= levels[l];
            if (u[l].live(0, i) != want_live) ++bad;
            if (want_live && std::fabs(u[l].value(0, i) - b0) > slack) ++bad;
          }
        }
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " violations over " + std::to_string(checked) +
                        " cells x 3 scenarios (slack 1e-12)"};
}

const char* kConstantCompare = R"(
[scenario]
name = constant-supercritical
[grid]
x_min = -3
x_max = 3
v_max = 20
[simulation]
K = 100 1000 10000
t = 1
replicas = 200
cap = 1000000
seed = 20240601
[estimation]
n_spines = 100000
[observables]
windows = 0:0.5
)";

// 8. Window exponent converging to u_0 = 2.
Outcome exponent_convergence() {
  const auto rep = run_compare(config_from(kConstantCompare));
  std::string detail;
  bool pass = true;
  double prev_gap = HUGE_VAL;
  double worst_excess = -HUGE_VAL;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    detail += "K=" + g(r.K) + ": ";
    if (r.capped > 0) {
      pass = false;
      detail += std::to_string(r.capped) + "/" + std::to_string(r.replicas) + " replicas hit the cap; ";
      continue;
    }
    const double gap = std::fabs(r.exponent_mean.value() - 2.0);
    detail += "gap " + g(gap) + "; ";
    if (!(gap < prev_gap)) pass = false;
    prev_gap = gap;
    if (k + 1 == rep.rows.size() && gap > 0.35) pass = false;
    for (const auto& c : rep.replicas[k]) {
      if (c.counts[0] == 0) continue;
      worst_excess = std::max(worst_excess, exponent(c.counts[0], r.K).value() - 2.0);
    }
  }
  if (worst_excess > 0.35) pass = false;
  detail += "max replica excess over u_0 " + g(worst_excess) + " (tol 0.35); gap at 1e4 tol 0.35, strictly decreasing";
  return {pass, detail};
}

// 9. Population empty where the unconstrained value and the expectation are not.
Outcome state_constraint() {
  const auto rep = run_compare(config_from(R"(
[scenario]
name = valley
[grid]
T = 1.5
v_max = 48
a_levels = 0
[simulation]
K = 10000
t = 1.5
replicas = 200
seed = 7
[estimation]
n_spines = 2000000
[observables]
windows = 2:0.3
)"));
  const auto& r = rep.rows.at(0);
  const double zero_frac = static_cast<double>(r.zero_replicas) / static_cast<double>(r.replicas);
  const double big_u = r.big_u.is_neg_inf() ? -HUGE_VAL : r.big_u.value();
  const double fk = r.fk_log_estimate.is_neg_inf() ? -HUGE_VAL : r.fk_log_estimate.value();
  const bool pass = r.capped == 0 && zero_frac >= 0.95 && big_u >= 0.2 && fk >= 0.1;
  return {pass, "empty in " + g(zero_frac) + " of replicas (need 0.95), capped " + std::to_string(r.capped) +
                    ", U(1.5,2) " + g(big_u) + " (need 0.2), FK exponent " + g(fk) + " (need 0.1), u_0 " +
                    r.u0.to_string()};
}

// 10. Tube around the backtracked optimizer carries the window exponent.
Outcome lineage_concentration() {
  auto cfg = config_from(R"(
[scenario]
name = constant-supercritical
[grid]
x_min = -3
x_max = 3
v_max = 20
[simulation]
K = 10000
t = 1
replicas = 50
seed = 99
[observables]
windows = 0:0.5
lineage_tolerance = 0.2
)");
  const auto rep = run_lineage_check(cfg);
  const auto& r = rep.rows.at(0);
  if (!r.usable) return {false, "K=1e4: " + r.note + " (" + std::to_string(r.capped) + "/" +
                                    std::to_string(r.replicas) + " replicas capped)"};
  const double d = std::fabs(r.tube_exponent.value() - r.window_exponent.value());
  return {d <= 0.2, "window " + r.window_exponent.to_string() + ", tube " + r.tube_exponent.to_string() +
                        ", difference " + g(d) + " (tol 0.2)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 11. Two compare runs with one seed, byte for byte.
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "hjlab_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "run.ini");
    cfg << "[scenario]\nname = quadratic\n[grid]\nx_min = -4\nx_max = 4\nv_max = 20\n"
           "[simulation]\nK = 100 300\nreplicas = 30\nseed = 5\n[estimation]\nn_spines = 20000\n"
           "[observables]\nwindows = 0:0.3 -1:0.3\ntubes = optimal@0:0.3\n";
  }
  const std::string ini = (root / "run.ini").string();
  std::vector<std::string> outs{(root / "a").string(), (root / "b").string()};
  std::ostringstream sink;
  for (const auto& o : outs) {
    const char* argv[] = {"hjlab", "--config", ini.c_str(), "--out", o.c_str(), "compare"};
    run_cli(6, argv, sink, sink);
  }
  std::size_t files = 0, differ = 0;
  std::set<std::string> names;
  for (const auto& o : outs) {
    for (const auto& e : fs::directory_iterator(o)) names.insert(e.path().filename().string());
  }
  for (const auto& n : names) {
    ++files;
    const fs::path pa = fs::path(outs[0]) / n, pb = fs::path(outs[1]) / n;
    if (!fs::exists(pa) || !fs::exists(pb) || slurp(pa) != slurp(pb)) ++differ;
  }
  fs::remove_all(root);
  return {files >= 3 && differ == 0,
          std::to_string(files) + " output files, " + std::to_string(differ) + " differ"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "kernel exactness", 1, kernel_exactness},
      {2, "Legendre oracle", 30, legendre_oracle},
      {3, "action cross-check", 1, action_cross_check},
      {4, "many-to-one identity", 120, many_to_one},
      {5, "DP analytic case", 60, dp_analytic},
      {6, "viscosity residual", 120, viscosity_residual},
      {7, "ordering and masks", 60, ordering_and_masks},
      {8, "exponent convergence", 600, exponent_convergence},
      {9, "state-constraint discrepancy", 600, state_constraint},
      {10, "lineage concentration", 600, lineage_concentration},
      {11, "determinism", 600, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << "; runtime "
              << fmt("%.1f", secs) << " s (budget " << c.budget_s << " s" << (in_time ? "" : ", exceeded") << ")"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
