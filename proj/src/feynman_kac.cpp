#include "hjlab/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "hjlab/parallel.hpp"

namespace hjlab {

SpineSample simulate_spine(const Scenario& s, double K, double t, double x0, RandomStream& rng) {
  if (!(K >= 2.0)) throw std::invalid_argument("simulate_spine: K must be at least 2");
  if (!(t >= 0.0)) throw std::invalid_argument("simulate_spine: t must be nonnegative");
  const double log_k = std::log(K);
  std::vector<double> knots{0.0}, values{x0};
  double now = 0.0;
  double x = x0;
  double w = 0.0;
  double r_lo = HUGE_VAL;
  double r_hi = -HUGE_VAL;
  std::uint64_t jumps = 0;
  while (true) {
    const double rate = s.p_at(x) * log_k;
    r_lo = std::min(r_lo, s.growth_rate(x));
    r_hi = std::max(r_hi, s.growth_rate(x));
    const double wait = rate > 0.0 ? -std::log1p(-uniform01(rng)) / rate : HUGE_VAL;
    if (now + wait >= t) {
      w += (t - now) * s.growth_rate(x);
      break;
    }
    w += wait * s.growth_rate(x);
    now += wait;
    x += s.kernel().sample_jump(rng) / log_k;
    knots.push_back(now);
    values.push_back(x);
    ++jumps;
  }
  SpineSample out;
  out.start = x0;
  out.path = GridPath::step(std::move(knots), std::move(values), t);
  // The exact integral lies in [min R, max R] * t; clamping removes rounding only.
  out.weight_exponent = std::clamp(w, r_lo * t, r_hi * t);
  out.jumps = jumps;
  return out;
}

SpinePredicate SpinePredicate::always() { return SpinePredicate(Kind::Always); }
SpinePredicate SpinePredicate::never() { return SpinePredicate(Kind::Never); }

SpinePredicate SpinePredicate::window(double x, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("window predicate: delta must be positive");
  SpinePredicate p(Kind::Window);
  p.x_ = x;
  p.radius_ = delta;
  return p;
}

SpinePredicate SpinePredicate::tube(GridPath f, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("tube predicate: eps must be positive");
  if (!f.is_linear()) throw std::invalid_argument("tube predicate: reference must be piecewise linear");
  SpinePredicate p(Kind::Tube);
  p.radius_ = eps;
  p.f_ = std::make_shared<const GridPath>(std::move(f));
  return p;
}

bool SpinePredicate::operator()(const GridPath& path) const {
  switch (kind_) {
    case Kind::Always:
      return true;
    case Kind::Never:
      return false;
    case Kind::Window:
      return std::fabs(path.back() - x_) <= radius_;
    case Kind::Tube:
      return sup_distance(path, *f_) <= radius_;
  }
  return false;
}

std::string SpinePredicate::spec() const {
  char buf[96];
  switch (kind_) {
    case Kind::Always:
      return "true";
    case Kind::Never:
      return "false";
    case Kind::Window:
      std::snprintf(buf, sizeof(buf), "window(x=%g,delta=%g)", x_, radius_);
      return buf;
    case Kind::Tube:
      std::snprintf(buf, sizeof(buf), "tube(eps=%g)", radius_);
      return buf;
  }
  return "";
}

namespace {

constexpr std::uint64_t kChunk = 4096;  // even, so strata pairs never straddle chunks

// Weights of one chunk relative to its own largest exponent.
struct ChunkSums {
  double w_max = -HUGE_VAL;
  double sum = 0.0;     // sum of K^{w - w_max} over hits
  double sq = 0.0;      // sum over pairs of (Y_a - Y_b)^2 / K^{2 w_max}
  std::uint64_t hits = 0;
};

}  // namespace

MeanEstimate estimate_mean_count(const Scenario& s, const InitialMeasure& measure, double K, double t,
                                 const SpinePredicate& predicate, std::uint64_t n_spines, std::uint64_t seed) {
  if (n_spines < 2) throw std::invalid_argument("estimate_mean_count: need at least two spines");
  if (n_spines % 2 != 0) ++n_spines;
  MeanEstimate out;
  out.n_spines = n_spines;
  if (predicate.is_never()) {
    out.degenerate = true;
    return out;
  }
  const double log_k = std::log(K);
  const std::uint64_t chunks = (n_spines + kChunk - 1) / kChunk;
  std::vector<ChunkSums> parts(chunks);
  std::vector<double> chunk_max(chunks, -HUGE_VAL);
  parallel_for(chunks, [&](std::size_t c) {
    RandomStream rng = derive_stream(seed, c);
    const std::uint64_t begin = c * kChunk;
    const std::uint64_t end = std::min(n_spines, begin + kChunk);
    // Exponents of Y_k (or -inf for a miss), then a scaled second pass.
    std::vector<double> w(end - begin, -HUGE_VAL);
    double w_max = -HUGE_VAL;
    for (std::uint64_t k = begin; k < end; ++k) {
      const double u = (static_cast<double>(k) + uniform01(rng)) / static_cast<double>(n_spines);
      const auto spine = simulate_spine(s, K, t, measure.inverse_cdf(u), rng);
      chunk_max[c] = std::max(chunk_max[c], spine.weight_exponent);
      if (predicate(spine.path)) {
        w[k - begin] = spine.weight_exponent;
        w_max = std::max(w_max, spine.weight_exponent);
      }
    }
    ChunkSums& p = parts[c];
    p.w_max = w_max;
    if (w_max == -HUGE_VAL) return;
    auto y = [&](double e) { return e == -HUGE_VAL ? 0.0 : std::exp((e - w_max) * log_k); };
    for (std::size_t j = 0; j < w.size(); j += 2) {
      const double a = y(w[j]);
      const double b = j + 1 < w.size() ? y(w[j + 1]) : 0.0;
      p.sum += a + b;
      p.sq += (a - b) * (a - b);
      p.hits += (w[j] != -HUGE_VAL) + (j + 1 < w.size() && w[j + 1] != -HUGE_VAL);
    }
  });

  for (double m : chunk_max) out.max_weight_exponent = std::max(out.max_weight_exponent, m);
  double w_max = -HUGE_VAL;
  for (const auto& p : parts) {
    w_max = std::max(w_max, p.w_max);
    out.hits += p.hits;
  }
  if (out.hits == 0) {
    out.degenerate = true;
    return out;
  }
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& p : parts) {
    if (p.w_max == -HUGE_VAL) continue;
    const double scale = std::exp((p.w_max - w_max) * log_k);
    sum += p.sum * scale;
    sq += p.sq * scale * scale;
  }
  // estimate = M / n * sum_k Y_k, Var = (M / n)^2 * sum_pairs (Y_a - Y_b)^2.
  const double n = static_cast<double>(n_spines);
  const double log_scale = std::log(measure.mass() / n) + w_max * log_k;
  out.log_estimate_over_log_k = (log_scale + std::log(sum)) / log_k;
  out.estimate = std::exp(log_scale) * sum;
  out.std_error = std::exp(log_scale) * std::sqrt(sq);
  return out;
}

MeanEstimate estimate_mean_count(const Scenario& s, double K, double t, const SpinePredicate& predicate,
                                 std::uint64_t n_spines, std::uint64_t seed, double tail_tol) {
  return estimate_mean_count(s, InitialMeasure(s, K, tail_tol), K, t, predicate, n_spines, seed);
}

}  // namespace hjlab
