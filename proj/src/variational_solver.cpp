#include "hjlab/variational_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "hjlab/parallel.hpp"
#include "json.hpp"

namespace hjlab {

namespace {

std::size_t count_steps(double span, double step, const char* what) {
  const double n = span / step;
  const double r = std::round(n);
  if (!(r >= 0.0) || std::fabs(n - r) > 1e-9 * std::max(1.0, r)) {
    throw std::invalid_argument(std::string("solver grid: ") + what + " is not a multiple of its step");
  }
  return static_cast<std::size_t>(r);
}

int resolve_substeps(const SolverGrid& g) {
  if (g.velocity_substeps > 0) return g.velocity_substeps;
  return std::max(1, static_cast<int>(std::ceil(std::sqrt(g.dx) / g.dt - 1e-9)));
}

void check_grid(const SolverGrid& g) {
  if (!(g.dt > 0.0) || !(g.dx > 0.0) || !(g.v_max > 0.0) || !(g.T >= 0.0)) {
    throw std::invalid_argument("solver grid: dt, dx, v_max must be positive and T nonnegative");
  }
  if (!(g.x_max > g.x_min)) throw std::invalid_argument("solver grid: empty trait range");
  if (g.dx / g.dt > g.v_max * (1.0 + 1e-12)) {
    throw std::invalid_argument("solver grid: dx/dt exceeds v_max, neighbours unreachable");
  }
  if (g.velocity_substeps < 0) throw std::invalid_argument("solver grid: negative velocity_substeps");
}

// floor(a / b) for b > 0.
long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

double default_v_max(const Scenario& s, double T, double dt, ExtendedReal a) {
  const auto& b = s.bounds();
  double a_eff = 0.0;
  if (a.is_finite()) {
    a_eff = a.value();
  } else {
    const Interval dom = s.domain();
    double lowest = HUGE_VAL;
    double worst_r = HUGE_VAL;
    for (int i = 0; i <= 2000; ++i) {
      const double x = dom.lo + dom.width() * i / 2000.0;
      lowest = std::min(lowest, s.beta0_at(x));
      worst_r = std::min(worst_r, s.growth_rate(x));
    }
    a_eff = lowest + std::min(0.0, worst_r) * T;
  }
  const double target = std::max(2.0 * (b.beta_bar + b.r_bar * T - a_eff), dt);
  const auto& kernel = s.kernel();
  const double p = b.p_bar;
  const double v_cap = 0.999 * p * kernel.h(kernel.alpha_max()).h_prime;
  auto cost = [&](double v) { return dt * kernel.lagrangian(p, v).l; };
  double hi = 1.0;
  while (cost(hi) <= target) {
    if (hi >= v_cap) return v_cap;
    hi = std::min(2.0 * hi, v_cap);
  }
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cost(mid) > target ? hi : lo) = mid;
  }
  return hi;
}

SolverGrid default_grid(const Scenario& s, ExtendedReal a, double T, double dt, double dx) {
  SolverGrid g;
  g.T = T;
  g.dt = dt;
  g.dx = dx;
  g.x_min = s.domain().lo;
  g.x_max = s.domain().hi;
  g.v_max = std::max(default_v_max(s, T, dt, a), dx / dt);
  return g;
}

void ValueField::allocate(const SolverGrid& grid) {
  check_grid(grid);
  grid_ = grid;
  nt_ = count_steps(grid.T, grid.dt, "T") + 1;
  nx_ = count_steps(grid.x_max - grid.x_min, grid.dx, "trait range") + 1;
  substeps_ = resolve_substeps(grid);
  const double j_max = std::floor(grid.v_max * grid.dt * substeps_ / grid.dx * (1.0 + 1e-12));
  if (j_max > 32000.0) throw std::invalid_argument("solver grid: too many source offsets");
  max_offset_ = static_cast<int>(j_max);
  values_.assign(nt_ * nx_, 0.0);
  live_.assign(nt_ * nx_, 0);
  source_.assign(nt_ * nx_, kNoSource);
  extinction_layer_ = nt_;
}

ValueField ValueField::from_values(const SolverGrid& grid, ExtendedReal a, std::vector<double> values,
                                   std::vector<std::uint8_t> live, std::uint64_t scenario_hash) {
  ValueField f;
  f.allocate(grid);
  if (values.size() != f.values_.size() || live.size() != f.live_.size()) {
    throw std::invalid_argument("ValueField::from_values: size does not match the grid");
  }
  f.a_ = a;
  f.values_ = std::move(values);
  f.live_ = std::move(live);
  f.scenario_hash_ = scenario_hash;
  return f;
}

ValueField solve(const Scenario& s, ExtendedReal a, const SolverGrid& grid) {
  if (a.is_pos_inf()) throw std::invalid_argument("solve: constraint level must be finite or -inf");
  ValueField f;
  f.allocate(grid);
  f.a_ = a;
  f.scenario_hash_ = s.hash();
  const std::size_t nx = f.nx_;
  const int m = f.substeps_;
  const int J = f.max_offset_;
  const double dt = grid.dt;
  const double dx = grid.dx;
  const double sub = dx / m;
  const bool constrained = a.is_finite();
  const double level = constrained ? a.value() : 0.0;

  const auto& kernel = s.kernel();
  if (J > 0) {
    const double v_top = J * sub / dt;
    const double p_low = s.bounds().p_low;
    if (v_top / p_low > kernel.h(kernel.alpha_max()).h_prime) {
      throw std::invalid_argument("solve: v_max exceeds the velocities the kernel can price");
    }
  }

  // Visiting order 0, +1, -1, +2, -2, ... with strict improvement realizes the
  // tie-breaking rule (smaller |d| first, then the smaller foot x - d).
  std::vector<int> order{0};
  for (int j = 1; j <= J; ++j) {
    order.push_back(j);
    order.push_back(-j);
  }
  const std::size_t nj = order.size();
  std::vector<long> shift(nj);
  std::vector<double> frac(nj);
  for (std::size_t q = 0; q < nj; ++q) {
    const long num = -static_cast<long>(order[q]);
    shift[q] = floor_div(num, m);
    frac[q] = static_cast<double>(num - shift[q] * m) / m;
  }

  // gain[i * nj + q] = dt (R(xbar) - L(xbar, v)); NaN marks feet off the grid.
  std::vector<double> gain(nx * nj, std::nan(""));
  const bool flat_p = s.mutation_rate().is_constant();
  std::vector<double> flat_l(nj, 0.0);
  if (flat_p) {
    const double p0 = s.p_at(grid.x_min);
    for (std::size_t q = 0; q < nj; ++q) flat_l[q] = kernel.lagrangian(p0, order[q] * sub / dt).l;
  }
  parallel_for(nx, [&](std::size_t i) {
    for (std::size_t q = 0; q < nj; ++q) {
      const long lo = static_cast<long>(i) + shift[q];
      const bool inside = lo >= 0 && (frac[q] == 0.0 ? lo < static_cast<long>(nx) : lo + 1 < static_cast<long>(nx));
      if (!inside) continue;
      const double d = order[q] * sub;
      const double xbar = f.x(i) - 0.5 * d;
      const double l = flat_p ? flat_l[q] : kernel.lagrangian(s.p_at(xbar), d / dt).l;
      gain[i * nj + q] = dt * (s.growth_rate(xbar) - l);
    }
  });

  for (std::size_t i = 0; i < nx; ++i) {
    const double b0 = s.beta0_at(f.x(i));
    f.values_[i] = b0;
    f.live_[i] = (!constrained || b0 >= level) ? 1 : 0;
  }
  auto layer_alive = [&](std::size_t k) {
    return std::any_of(f.live_.begin() + static_cast<long>(k * nx), f.live_.begin() + static_cast<long>((k + 1) * nx),
                       [](std::uint8_t v) { return v != 0; });
  };
  if (!layer_alive(0)) {
    f.extinct_ = true;
    f.extinction_layer_ = 0;
    return f;
  }

  constexpr std::size_t kBlock = 512;
  const std::size_t blocks = (nx + kBlock - 1) / kBlock;
  std::vector<std::size_t> hits(blocks);
  for (std::size_t k = 1; k < f.nt_; ++k) {
    const double* prev = f.values_.data() + (k - 1) * nx;
    const std::uint8_t* prev_live = f.live_.data() + (k - 1) * nx;
    double* cur = f.values_.data() + k * nx;
    std::uint8_t* cur_live = f.live_.data() + k * nx;
    std::int16_t* cur_src = f.source_.data() + k * nx;
    parallel_for(blocks, [&](std::size_t bl) {
      std::size_t boundary = 0;
      const std::size_t end = std::min(nx, (bl + 1) * kBlock);
      for (std::size_t i = bl * kBlock; i < end; ++i) {
        double best = 0.0;
        int best_q = -1;
        for (std::size_t q = 0; q < nj; ++q) {
          const double g = gain[i * nj + q];
          if (std::isnan(g)) continue;
          const auto lo = static_cast<std::size_t>(static_cast<long>(i) + shift[q]);
          double u = 0.0;
          if (frac[q] == 0.0) {
            if (!prev_live[lo]) continue;
            u = prev[lo];
          } else {
            if (!prev_live[lo] || !prev_live[lo + 1]) continue;
            u = prev[lo] + frac[q] * (prev[lo + 1] - prev[lo]);
          }
          const double cand = u + g;
          if (best_q < 0 || cand > best) {
            best = cand;
            best_q = static_cast<int>(q);
          }
        }
        if (best_q < 0 || (constrained && best < level)) {
          cur_live[i] = 0;
          cur_src[i] = ValueField::kNoSource;
          cur[i] = 0.0;
          continue;
        }
        cur[i] = best;
        cur_live[i] = 1;
        cur_src[i] = static_cast<std::int16_t>(order[static_cast<std::size_t>(best_q)]);
        if (J > 0 && std::abs(order[static_cast<std::size_t>(best_q)]) == J) ++boundary;
      }
      hits[bl] = boundary;
    });
    for (std::size_t h : hits) f.boundary_hits_ += h;
    if (!layer_alive(k)) {
      f.extinct_ = true;
      f.extinction_layer_ = k;
      break;
    }
  }
  return f;
}

ExtendedReal value_at(const ValueField& field, double t, double x) {
  const auto& g = field.grid();
  const double tk = t / g.dt;
  const double xi = (x - g.x_min) / g.dx;
  const double top_t = static_cast<double>(field.nt() - 1);
  const double top_x = static_cast<double>(field.nx() - 1);
  constexpr double kSnap = 1e-9;
  if (!(tk >= -kSnap && tk <= top_t + kSnap && xi >= -kSnap && xi <= top_x + kSnap)) {
    throw std::out_of_range("value_at: point outside the grid");
  }
  auto split = [&](double pos, double top) {
    pos = std::clamp(pos, 0.0, top);
    double base = std::floor(pos);
    double w = pos - base;
    if (w < kSnap) w = 0.0;
    if (w > 1.0 - kSnap) {
      base += 1.0;
      w = 0.0;
    }
    if (base >= top) {
      base = top;
      w = 0.0;
    }
    return std::pair{static_cast<std::size_t>(base), w};
  };
  const auto [k0, wt] = split(tk, top_t);
  const auto [i0, wx] = split(xi, top_x);
  double acc = 0.0;
  for (int dk = 0; dk <= (wt > 0.0 ? 1 : 0); ++dk) {
    for (int di = 0; di <= (wx > 0.0 ? 1 : 0); ++di) {
      const std::size_t k = k0 + static_cast<std::size_t>(dk);
      const std::size_t i = i0 + static_cast<std::size_t>(di);
      if (!field.live(k, i)) return ExtendedReal::neg_inf();
      acc += (dk ? wt : 1.0 - wt) * (di ? wx : 1.0 - wx) * field.value(k, i);
    }
  }
  return acc;
}

GridPath backtrack(const ValueField& field, double t, double x) {
  const auto& g = field.grid();
  const double tk = std::round(t / g.dt);
  const double xi = std::round((x - g.x_min) / g.dx);
  if (tk < 0.0 || tk > static_cast<double>(field.nt() - 1) || xi < 0.0 || xi > static_cast<double>(field.nx() - 1)) {
    throw std::out_of_range("backtrack: point outside the grid");
  }
  auto k = static_cast<std::size_t>(tk);
  auto i = static_cast<std::size_t>(xi);
  if (!field.live(k, i)) throw std::invalid_argument("backtrack: start node is masked");
  const int m = field.velocity_substeps();
  const double sub = g.dx / m;
  std::vector<double> rev{field.x(i)};
  // Position in sub-grid units; the lookup uses the nearest live node of the two
  // the interpolated foot was read from.
  long pos = static_cast<long>(i) * m;
  while (k > 0) {
    const std::int16_t j = field.source_offset(k, i);
    if (j == ValueField::kNoSource) throw std::logic_error("backtrack: live cell without a source");
    pos -= j;
    rev.push_back(g.x_min + static_cast<double>(pos) * sub);
    --k;
    const long lo = floor_div(pos, m);
    const long r = pos - lo * m;
    std::size_t next = static_cast<std::size_t>(lo);
    if (r != 0) {
      const bool upper = 2 * r > m;
      const std::size_t near = upper ? next + 1 : next;
      const std::size_t far = upper ? next : next + 1;
      next = field.live(k, near) ? near : far;
    }
    i = next;
    if (!field.live(k, i)) throw std::logic_error("backtrack: reached a masked cell");
  }
  std::reverse(rev.begin(), rev.end());
  return GridPath::linear(0.0, g.dt, std::move(rev));
}

double grid_tolerance(const ValueField& field, double c) { return c * (field.grid().dt + field.grid().dx); }

CellClass classify(const ValueField& field, std::size_t k, std::size_t i, double tol_g) {
  if (!field.live(k, i)) return CellClass::Masked;
  if (!field.constrained()) return CellClass::Interior;
  return field.value(k, i) <= field.a().value() + tol_g ? CellClass::Boundary : CellClass::Interior;
}

ResidualReport hj_residual(const ValueField& field, const Scenario& s, const ResidualOptions& options) {
  ResidualReport rep;
  const auto& g = field.grid();
  const auto& kernel = s.kernel();
  const double tol_g = grid_tolerance(field);
  for (std::size_t k = 1; k + 1 < field.nt(); ++k) {
    if (field.t(k) < options.t_min) continue;
    for (std::size_t i = 1; i + 1 < field.nx(); ++i) {
      const double x = field.x(i);
      if (x - g.x_min < options.edge_margin || g.x_max - x < options.edge_margin) continue;
      if (classify(field, k, i, tol_g) != CellClass::Interior) continue;
      bool all_live = true;
      for (int dk = -1; dk <= 1 && all_live; ++dk) {
        for (int di = -1; di <= 1; ++di) all_live = all_live && field.live(k + dk, i + di);
      }
      if (!all_live) continue;
      ++rep.eligible;
      const double u = field.value(k, i);
      const double uxx = (field.value(k, i + 1) - 2.0 * u + field.value(k, i - 1)) / (g.dx * g.dx);
      const double utt = (field.value(k + 1, i) - 2.0 * u + field.value(k - 1, i)) / (g.dt * g.dt);
      if (std::fabs(uxx) > options.smoothness_threshold || std::fabs(utt) > options.smoothness_threshold) continue;
      const double ut = (field.value(k + 1, i) - field.value(k - 1, i)) / (2.0 * g.dt);
      const double ux = (field.value(k, i + 1) - field.value(k, i - 1)) / (2.0 * g.dx);
      if (std::fabs(ux) > kernel.alpha_max()) continue;
      const double r = std::fabs(ut - s.p_at(x) * kernel.h(ux).h - s.growth_rate(x));
      rep.max_residual = std::max(rep.max_residual, r);
      ++rep.tested;
    }
  }
  rep.interior_fraction = rep.eligible ? static_cast<double>(rep.tested) / static_cast<double>(rep.eligible) : 0.0;
  return rep;
}

void write_field_csv(std::ostream& os, const ValueField& field, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("write_field_csv: stride must be positive");
  char buf[128];
  os << "t,x,value,source_offset\n";
  for (std::size_t k = 0; k < field.nt(); k += stride) {
    for (std::size_t i = 0; i < field.nx(); i += stride) {
      const std::int16_t src = field.source_offset(k, i);
      const std::string src_text = src == ValueField::kNoSource ? "" : std::to_string(src);
      if (field.live(k, i)) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.12g,", field.t(k), field.x(i), field.value(k, i));
      } else {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,MASKED,", field.t(k), field.x(i));
      }
      os << buf << src_text << '\n';
    }
  }
}

std::string field_metadata_json(const ValueField& field) {
  const auto& g = field.grid();
  nlohmann::ordered_json j;
  j["a"] = field.a().is_finite() ? nlohmann::ordered_json(field.a().value()) : nlohmann::ordered_json("-inf");
  j["T"] = g.T;
  j["dt"] = g.dt;
  j["dx"] = g.dx;
  j["x_min"] = g.x_min;
  j["x_max"] = g.x_max;
  j["nt"] = field.nt();
  j["nx"] = field.nx();
  j["v_max"] = g.v_max;
  j["velocity_substeps"] = field.velocity_substeps();
  j["max_offset"] = field.max_offset();
  j["boundary_hits"] = field.boundary_hits();
  j["extinct"] = field.extinct();
  j["extinction_layer"] = field.extinction_layer();
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(field.scenario_hash()));
  j["scenario_hash"] = hash;
  return j.dump(2);
}

}  // namespace hjlab
