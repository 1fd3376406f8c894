#include "hjlab/branching_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace hjlab {

double SimulationResult::log_k() const { return std::log(K); }

std::vector<double> sample_initial(const InitialMeasure& measure, RandomStream& rng, std::uint64_t cap) {
  if (measure.mass() > static_cast<double>(cap)) {
    throw std::length_error("sample_initial: expected initial population exceeds the cap");
  }
  std::poisson_distribution<std::uint64_t> count(measure.mass());
  const std::uint64_t n = measure.mass() > 0.0 ? count(rng) : 0;
  std::vector<double> traits(n);
  for (auto& x : traits) x = measure.inverse_cdf(uniform01(rng));
  return traits;
}

std::vector<double> sample_initial(const Scenario& s, double K, RandomStream& rng, std::uint64_t cap,
                                   double tail_tol) {
  return sample_initial(InitialMeasure(s, K, tail_tol), rng, cap);
}

namespace {

struct Pending {
  double time;
  std::uint64_t id;
  bool operator>(const Pending& o) const { return time > o.time || (time == o.time && id > o.id); }
};

double exp_clock(RandomStream& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

void check_run(const Scenario& s, const RunConfig& config) {
  if (!(config.K >= 2.0)) throw std::invalid_argument("run: K must be at least 2");
  if (!(config.t >= 0.0)) throw std::invalid_argument("run: t must be nonnegative");
  if (config.cap < 1) throw std::invalid_argument("run: cap must be at least 1");
  if (config.validate) {
    const auto v = s.validate();
    if (!v.empty()) throw std::invalid_argument("run: scenario fails '" + v.front().assumption + "'");
  }
}

}  // namespace

SimulationResult run_from(const Scenario& s, const std::vector<double>& initial_traits, const RunConfig& config,
                          RandomStream& rng) {
  check_run(s, config);
  SimulationResult res;
  res.scenario_hash = s.hash();
  res.K = config.K;
  res.horizon_t = config.t;
  const double log_k = std::log(config.K);
  const double horizon = config.t * log_k;

  // Per-individual rate cache: traits never change, so neither do rates.
  std::vector<double> rate_b, rate_bp, rate_total;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
  auto add = [&](std::optional<std::uint64_t> parent, double time, double trait, bool mutant) {
    const auto id = static_cast<std::uint64_t>(res.ancestry.size());
    Individual ind;
    ind.id = id;
    ind.parent = parent;
    ind.birth_time = time;
    ind.trait = trait;
    ind.mutant = mutant;
    res.ancestry.push_back(ind);
    const Rates r = s.rates_at(trait);
    rate_b.push_back(r.b);
    rate_bp.push_back(r.b + r.p);
    rate_total.push_back(r.lambda_total);
    if (r.lambda_total > 0.0) queue.push({time + exp_clock(rng, r.lambda_total), id});
  };

  for (double x : initial_traits) add(std::nullopt, 0.0, x, false);
  res.initial_count = initial_traits.size();
  std::uint64_t live = res.initial_count;
  if (live > config.cap) res.capped = true;
  double now = 0.0;

  while (!res.capped && !queue.empty() && queue.top().time <= horizon) {
    const Pending ev = queue.top();
    queue.pop();
    res.alive_time_integral += static_cast<double>(live) * (ev.time - now);
    now = ev.time;
    ++res.event_count;
    const std::uint64_t id = ev.id;
    const double u = uniform01(rng) * rate_total[id];
    if (u < rate_bp[id]) {
      const bool mutant = u >= rate_b[id];
      double trait = res.ancestry[id].trait;
      if (mutant) {
        trait += s.kernel().sample_jump(rng) / log_k;
        ++res.mutant_births;
      }
      ++res.births;
      add(id, now, trait, mutant);
      queue.push({now + exp_clock(rng, rate_total[id]), id});
      if (++live > config.cap) res.capped = true;
    } else {
      auto& ind = res.ancestry[id];
      ind.fate = Fate::Died;
      ind.death_time = now;
      ++res.deaths;
      --live;
    }
  }
  if (!res.capped) {
    res.alive_time_integral += static_cast<double>(live) * (horizon - now);
    now = horizon;
  }
  res.reached_model_time = now;
  res.alive.reserve(live);
  for (const auto& ind : res.ancestry) {
    if (ind.fate == Fate::Alive) res.alive.push_back(ind.id);
  }
  return res;
}

SimulationResult run(const Scenario& s, const InitialMeasure& measure, const RunConfig& config, RandomStream& rng) {
  check_run(s, config);
  RunConfig inner = config;
  inner.validate = false;
  return run_from(s, sample_initial(measure, rng, config.cap), inner, rng);
}

SimulationResult run(const Scenario& s, const RunConfig& config, RandomStream& rng) {
  check_run(s, config);
  return run(s, InitialMeasure(s, config.K, config.tail_tol), config, rng);
}

GridPath lineage(const SimulationResult& res, std::uint64_t id) {
  if (id >= res.ancestry.size()) throw std::out_of_range("lineage: unknown id");
  const double log_k = res.log_k();
  const auto& self = res.ancestry[id];
  const double end = self.death_time ? *self.death_time / log_k : res.reached_model_time / log_k;
  std::vector<double> knots, values;
  for (std::optional<std::uint64_t> cur = id; cur; cur = res.ancestry[*cur].parent) {
    const auto& ind = res.ancestry[*cur];
    knots.push_back(ind.birth_time / log_k);
    values.push_back(ind.trait);
  }
  std::reverse(knots.begin(), knots.end());
  std::reverse(values.begin(), values.end());
  // Clonal births leave the trait unchanged; drop the redundant knots.
  std::vector<double> k2{knots[0]}, v2{values[0]};
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] != v2.back()) {
      k2.push_back(knots[j]);
      v2.push_back(values[j]);
    }
  }
  return GridPath::step(std::move(k2), std::move(v2), std::max(end, k2.back()));
}

std::uint64_t count_window(const SimulationResult& res, double x, double delta) {
  std::uint64_t n = 0;
  for (auto id : res.alive) n += std::fabs(res.ancestry[id].trait - x) <= delta;
  return n;
}

namespace {

// Range min/max of a linear path over any time interval, via a sparse table
// on its node values plus the interpolated end points.
class PathRange {
 public:
  explicit PathRange(const GridPath& f) : f_(f) {
    const auto& v = f.values();
    const std::size_t n = v.size();
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    lo_.assign(levels_, std::vector<double>(n));
    hi_.assign(levels_, std::vector<double>(n));
    lo_[0] = v;
    hi_[0] = v;
    for (std::size_t l = 1; l < levels_; ++l) {
      const std::size_t half = std::size_t{1} << (l - 1);
      for (std::size_t i = 0; i + (std::size_t{1} << l) <= n; ++i) {
        lo_[l][i] = std::min(lo_[l - 1][i], lo_[l - 1][i + half]);
        hi_[l][i] = std::max(hi_[l - 1][i], hi_[l - 1][i + half]);
      }
    }
  }

  /// max |c - f(s)| over s in [a, b].
  double distance(double c, double a, double b) const {
    double mn = std::min(f_.value_at(a), f_.value_at(b));
    double mx = std::max(f_.value_at(a), f_.value_at(b));
    // Nodes strictly inside (a, b).
    const double pa = (a - f_.t0()) / f_.dt();
    const double pb = (b - f_.t0()) / f_.dt();
    const auto n = static_cast<long>(f_.size());
    const long i0 = std::max(0L, static_cast<long>(std::floor(pa)) + 1);
    const long i1 = std::min(n - 1, static_cast<long>(std::ceil(pb)) - 1);
    if (i0 <= i1) {
      const auto len = static_cast<std::size_t>(i1 - i0 + 1);
      std::size_t l = 0;
      while ((std::size_t{2} << l) <= len) ++l;
      const auto s0 = static_cast<std::size_t>(i0);
      const std::size_t s1 = static_cast<std::size_t>(i1) + 1 - (std::size_t{1} << l);
      mn = std::min({mn, lo_[l][s0], lo_[l][s1]});
      mx = std::max({mx, hi_[l][s0], hi_[l][s1]});
    }
    return std::max(c - mn, mx - c);
  }

 private:
  const GridPath& f_;
  std::size_t levels_ = 0;
  std::vector<std::vector<double>> lo_, hi_;
};

}  // namespace

std::vector<double> tube_distances(const SimulationResult& res, const GridPath& f) {
  if (!f.is_linear()) throw std::invalid_argument("tube_distances: reference path must be piecewise linear");
  const double log_k = res.log_k();
  const double end = res.reached_model_time / log_k;
  if (f.t0() > 1e-12 || f.t_end() < end - 1e-9 * std::max(1.0, end)) {
    throw std::invalid_argument("tube_distances: reference path does not cover the horizon");
  }
  const PathRange range(f);
  // prefix[v] = sup distance of v's lineage over [0, birth(v)]; ids increase
  // along every ancestral line, so one forward pass fills it.
  std::vector<double> prefix(res.ancestry.size(), 0.0);
  for (const auto& ind : res.ancestry) {
    if (!ind.parent) continue;
    const auto& par = res.ancestry[*ind.parent];
    prefix[ind.id] = std::max(prefix[par.id], range.distance(par.trait, par.birth_time / log_k, ind.birth_time / log_k));
  }
  std::vector<double> out;
  out.reserve(res.alive.size());
  for (auto id : res.alive) {
    const auto& ind = res.ancestry[id];
    out.push_back(std::max(prefix[id], range.distance(ind.trait, ind.birth_time / log_k, end)));
  }
  return out;
}

std::uint64_t count_tube(const SimulationResult& res, const GridPath& f, double eps) {
  const auto d = tube_distances(res, f);
  return static_cast<std::uint64_t>(std::count_if(d.begin(), d.end(), [eps](double v) { return v <= eps; }));
}

ExtendedReal exponent(std::uint64_t count, double K) {
  if (!(K >= 2.0)) throw std::invalid_argument("exponent: K must be at least 2");
  if (count == 0) return ExtendedReal::neg_inf();
  return std::log(static_cast<double>(count)) / std::log(K);
}

void write_ancestry_csv(std::ostream& os, const SimulationResult& res) {
  char buf[160];
  os << "id,parent,birth_time,trait,death_time,fate,mutant\n";
  for (const auto& ind : res.ancestry) {
    const std::string parent = ind.parent ? std::to_string(*ind.parent) : "";
    char death[40] = "";
    if (ind.death_time) std::snprintf(death, sizeof(death), "%.17g", *ind.death_time);
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.17g,%s,%s,%d\n", static_cast<unsigned long long>(ind.id),
                  parent.c_str(), ind.birth_time, ind.trait, death, ind.fate == Fate::Alive ? "alive" : "died",
                  ind.mutant ? 1 : 0);
    os << buf;
  }
}

}  // namespace hjlab
