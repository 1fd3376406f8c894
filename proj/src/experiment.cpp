#include "hjlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hjlab/action_functional.hpp"
#include "hjlab/branching_sim.hpp"
#include "hjlab/parallel.hpp"
#include "json.hpp"

namespace hjlab {

namespace {

using nlohmann::ordered_json;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ordered_json jext(ExtendedReal e) { return e.is_finite() ? ordered_json(e.value()) : ordered_json(e.to_string()); }

std::string a_label(double a) {
  if (std::isinf(a)) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

// ln(count)/ln K for count >= 1.
double exponent_of(std::uint64_t c, double K) { return std::log(static_cast<double>(c)) / std::log(K); }

void check_scenario(const Scenario& s) {
  const auto v = s.validate();
  if (!v.empty()) {
    throw ConfigError("scenario fails '" + v.front().assumption + "' at x = " + num(v.front().x) + ": " +
                      v.front().detail);
  }
}

// Reference path restricted to [0, t].
GridPath fit_horizon(const GridPath& f, double t, const std::string& what) {
  if (!f.is_linear()) throw ConfigError(what + ": reference path must be piecewise linear");
  if (std::fabs(f.t0()) > 1e-12 || f.t_end() < t - 1e-9 * std::max(1.0, t)) {
    throw ConfigError(what + ": reference path does not cover [0, t]");
  }
  if (f.t_end() <= t + 1e-9 * std::max(1.0, t)) return f;
  const double steps = t / f.dt();
  if (std::fabs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError(what + ": t is not on the reference path's time grid");
  }
  return f.prefix(static_cast<std::size_t>(std::llround(steps)) + 1);
}

}  // namespace

SolverGrid config_grid(const ExperimentConfig& config, ExtendedReal a) {
  SolverGrid g = default_grid(config.scenario, a, config.solver_horizon(), config.grid.dt, config.grid.dx);
  if (config.grid.x_min) g.x_min = *config.grid.x_min;
  if (config.grid.x_max) g.x_max = *config.grid.x_max;
  if (config.grid.v_max > 0.0) g.v_max = config.grid.v_max;
  g.velocity_substeps = config.grid.velocity_substeps;
  return g;
}

SolvedFields solve_fields(const ExperimentConfig& config) {
  if (config.solver_horizon() < config.simulation.t - 1e-12) throw ConfigError("grid.T is shorter than simulation.t");
  // One grid for every level: the unconstrained default bound is the largest.
  const SolverGrid g = config_grid(config, ExtendedReal::neg_inf());
  const auto& s = config.scenario;
  SolvedFields out{solve(s, ExtendedReal(0.0), g), solve(s, ExtendedReal::neg_inf(), g), {}};
  for (double a : config.grid.a_levels) {
    if (a == 0.0) {
      out.levels.push_back(out.constrained);
    } else if (std::isinf(a)) {
      out.levels.push_back(out.unconstrained);
    } else {
      out.levels.push_back(solve(s, ExtendedReal(a), g));
    }
  }
  return out;
}

SpinePredicate Observable::predicate() const {
  if (kind == "window") return SpinePredicate::window(window.x, window.delta);
  return SpinePredicate::tube(*tube.path, tube.eps);
}

std::vector<Observable> resolve_observables(const ExperimentConfig& config, const SolvedFields* fields) {
  const double t = config.simulation.t;
  std::vector<Observable> out;
  for (const auto& w : config.observables.windows) {
    Observable o;
    o.kind = "window";
    o.window = w;
    o.spec = "window(x=" + num(w.x) + ",delta=" + num(w.delta) + ")";
    out.push_back(o);
  }
  for (const auto& tube : config.observables.tubes) {
    Observable o;
    o.kind = "tube";
    o.tube = tube;
    o.spec = "tube(source=" + tube.source + ",eps=" + num(tube.eps) + ")";
    if (tube.optimal_x) {
      if (!fields) throw std::logic_error("resolve_observables: optimal tubes need solved fields");
      ExtendedReal v;
      try {
        v = value_at(fields->constrained, t, *tube.optimal_x);
      } catch (const std::out_of_range&) {
        throw ConfigError(o.spec + ": point outside the solver grid");
      }
      if (!v.is_finite()) throw ConfigError(o.spec + ": u_0 is masked at the target");
      o.tube.path = backtrack(fields->constrained, t, *tube.optimal_x);
    } else {
      o.tube.path = fit_horizon(*tube.path, t, o.spec);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<ReplicaCounts> simulate_counts(const ExperimentConfig& config, std::size_t k_index,
                                           const std::vector<Observable>& observables) {
  const auto& sim = config.simulation;
  const double K = sim.K.at(k_index);
  const InitialMeasure mu(config.scenario, K, sim.tail_tol);
  RunConfig rc;
  rc.K = K;
  rc.t = sim.t;
  rc.cap = sim.cap;
  rc.tail_tol = sim.tail_tol;
  rc.validate = false;
  std::vector<ReplicaCounts> out(sim.replicas);
  parallel_for(sim.replicas, [&](std::size_t r) {
    ReplicaCounts& rep = out[r];
    rep.replica = r;
    rep.counts.assign(observables.size(), 0);
    RandomStream rng = derive_stream(sim.seed, (static_cast<std::uint64_t>(k_index) << 32) | r);
    SimulationResult res;
    try {
      res = run(config.scenario, mu, rc, rng);
    } catch (const std::length_error&) {
      rep.capped = true;
      return;
    }
    rep.capped = res.capped;
    rep.alive = res.alive.size();
    if (rep.capped) return;
    for (std::size_t j = 0; j < observables.size(); ++j) {
      const auto& o = observables[j];
      rep.counts[j] = o.kind == "window" ? count_window(res, o.window.x, o.window.delta)
                                         : count_tube(res, *o.tube.path, o.tube.eps);
    }
  });
  return out;
}

MeanEstimate estimate_observable(const ExperimentConfig& config, std::size_t k_index, std::size_t obs_index,
                                 const Observable& observable) {
  const auto& sim = config.simulation;
  const std::uint64_t seed = derive_seed(sim.seed ^ kFkSalt, (static_cast<std::uint64_t>(k_index) << 32) | obs_index);
  return estimate_mean_count(config.scenario, sim.K.at(k_index), sim.t, observable.predicate(),
                             config.estimation.n_spines, seed, sim.tail_tol);
}

ExponentReport run_compare(const ExperimentConfig& config) {
  check_scenario(config.scenario);
  ExponentReport rep;
  rep.config_json = config_json(config);
  const SolvedFields fields = solve_fields(config);
  rep.constrained_meta = field_metadata_json(fields.constrained);
  rep.unconstrained_meta = field_metadata_json(fields.unconstrained);
  rep.observables = resolve_observables(config, &fields);
  const double t = config.simulation.t;
  const auto& s = config.scenario;

  // Solver-side predictions do not depend on K.
  struct Prediction {
    ExtendedReal u0, big_u;
    std::vector<ExtendedReal> levels;
  };
  std::vector<Prediction> pred;
  for (const auto& o : rep.observables) {
    Prediction p;
    if (o.kind == "window") {
      try {
        p.u0 = value_at(fields.constrained, t, o.window.x);
        p.big_u = value_at(fields.unconstrained, t, o.window.x);
        for (const auto& f : fields.levels) p.levels.push_back(value_at(f, t, o.window.x));
      } catch (const std::out_of_range&) {
        throw ConfigError(o.spec + ": point outside the solver grid");
      }
    } else {
      const auto prof = cost_profile(s, *o.tube.path);
      p.big_u = prof.terminal_cost;
      p.u0 = prof.min_running >= 0.0 ? ExtendedReal(prof.terminal_cost) : ExtendedReal::neg_inf();
    }
    pred.push_back(std::move(p));
  }

  for (std::size_t k = 0; k < config.simulation.K.size(); ++k) {
    const double K = config.simulation.K[k];
    auto reps = simulate_counts(config, k, rep.observables);
    for (std::size_t j = 0; j < rep.observables.size(); ++j) {
      const auto& o = rep.observables[j];
      ReportRow row;
      row.K = K;
      row.t = t;
      row.observable = o.kind;
      row.spec = o.spec;
      row.replicas = reps.size();
      std::vector<double> exps, counts;
      for (const auto& r : reps) {
        if (r.capped) {
          ++row.capped;
          continue;
        }
        counts.push_back(static_cast<double>(r.counts[j]));
        if (r.counts[j] == 0) {
          ++row.zero_replicas;
        } else {
          exps.push_back(exponent_of(r.counts[j], K));
        }
      }
      if (!counts.empty()) {
        row.count_mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
        double ss = 0.0;
        for (double c : counts) ss += (c - row.count_mean) * (c - row.count_mean);
        row.count_se = counts.size() > 1 ? std::sqrt(ss / (counts.size() - 1) / counts.size()) : 0.0;
      }
      double noise = 0.0;
      if (!exps.empty()) {
        const double m = std::accumulate(exps.begin(), exps.end(), 0.0) / exps.size();
        double ss = 0.0;
        for (double e : exps) ss += (e - m) * (e - m);
        row.exponent_mean = m;
        row.exponent_sd = exps.size() > 1 ? std::sqrt(ss / (exps.size() - 1)) : 0.0;
        row.exponent_max = *std::max_element(exps.begin(), exps.end());
        noise = 3.0 * row.exponent_sd / std::sqrt(static_cast<double>(exps.size()));
      }
      const MeanEstimate fk = estimate_observable(config, k, j, o);
      row.fk_estimate = fk.estimate;
      row.fk_std_error = fk.std_error;
      row.fk_log_estimate = fk.log_estimate_over_log_k;
      row.u0 = pred[j].u0;
      row.big_u = pred[j].big_u;
      row.u_levels = pred[j].levels;
      if (row.exponent_mean.is_finite() && row.u0.is_finite()) row.gap = row.exponent_mean.value() - row.u0.value();
      row.usable = row.capped == 0;
      if (!row.usable) row.note = "capped replicas: rows unusable";
      const bool below_u = row.exponent_mean.is_neg_inf() ||
                           (row.big_u.is_finite() && row.exponent_mean.value() <= row.big_u.value() + noise);
      row.holds = row.usable && below_u;
      if (row.usable && !below_u) row.note = "simulated exponent above U";
      rep.all_hold = rep.all_hold && row.holds;
      rep.rows.push_back(std::move(row));
    }
    rep.replicas.push_back(std::move(reps));
  }
  return rep;
}

void write_compare(const ExponentReport& rep, const std::filesystem::path& dir) {
  std::vector<double> levels;
  const auto cfg = ordered_json::parse(rep.config_json);
  for (const auto& a : cfg["grid"]["a_levels"]) levels.push_back(a.is_string() ? -HUGE_VAL : a.get<double>());

  auto csv = open_out(dir, "compare.csv");
  csv << "K,t,observable,spec,replicas,capped,zero_fraction,exponent_mean,exponent_sd,exponent_max,count_mean,"
         "count_se,fk_estimate,fk_std_error,fk_log_estimate_over_logK,u0,U";
  for (double a : levels) csv << ",u_a=" << a_label(a);
  csv << ",gap,usable,holds\n";
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows) {
    const std::uint64_t used = r.replicas - r.capped;
    const double zero_fraction = used ? static_cast<double>(r.zero_replicas) / static_cast<double>(used) : 0.0;
    csv << num(r.K) << ',' << num(r.t) << ',' << r.observable << ",\"" << r.spec << "\"," << r.replicas << ','
        << r.capped << ',' << num(zero_fraction) << ',' << r.exponent_mean.to_string() << ',' << num(r.exponent_sd)
        << ',' << r.exponent_max.to_string() << ',' << num(r.count_mean) << ',' << num(r.count_se) << ','
        << num(r.fk_estimate) << ',' << num(r.fk_std_error) << ',' << r.fk_log_estimate.to_string() << ','
        << r.u0.to_string() << ',' << r.big_u.to_string();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      csv << ',' << (i < r.u_levels.size() ? r.u_levels[i].to_string() : "");
    }
    csv << ',' << (r.gap ? num(*r.gap) : "") << ',' << (r.usable ? 1 : 0) << ',' << (r.holds ? 1 : 0) << '\n';

    ordered_json lv = ordered_json::array();
    for (const auto& u : r.u_levels) lv.push_back(jext(u));
    rows.push_back({{"K", r.K},
                    {"t", r.t},
                    {"observable", r.observable},
                    {"spec", r.spec},
                    {"replicas", r.replicas},
                    {"capped", r.capped},
                    {"zero_fraction", zero_fraction},
                    {"exponent_mean", jext(r.exponent_mean)},
                    {"exponent_sd", r.exponent_sd},
                    {"exponent_max", jext(r.exponent_max)},
                    {"count_mean", r.count_mean},
                    {"count_se", r.count_se},
                    {"fk_estimate", r.fk_estimate},
                    {"fk_std_error", r.fk_std_error},
                    {"fk_log_estimate_over_logK", jext(r.fk_log_estimate)},
                    {"u0", jext(r.u0)},
                    {"U", jext(r.big_u)},
                    {"u_levels", lv},
                    {"gap", r.gap ? ordered_json(*r.gap) : ordered_json(nullptr)},
                    {"usable", r.usable},
                    {"holds", r.holds},
                    {"note", r.note}});
  }

  auto rcsv = open_out(dir, "compare_replicas.csv");
  rcsv << "replica,K,t,observable,spec,count,exponent,capped\n";
  const std::size_t n_obs = rep.observables.size();
  for (std::size_t k = 0; k < rep.replicas.size(); ++k) {
    const double K = rep.rows.at(k * n_obs).K;
    for (const auto& r : rep.replicas[k]) {
      for (std::size_t j = 0; j < n_obs; ++j) {
        const auto& o = rep.observables[j];
        const std::string e = r.capped ? "" : exponent(r.counts[j], K).to_string();
        rcsv << r.replica << ',' << num(K) << ',' << num(rep.rows.front().t) << ',' << o.kind << ",\"" << o.spec << "\","
             << (r.capped ? "" : std::to_string(r.counts[j])) << ',' << e << ',' << (r.capped ? 1 : 0) << '\n';
      }
    }
  }

  ordered_json j;
  j["config"] = cfg;
  j["solver"] = {{"constrained", ordered_json::parse(rep.constrained_meta)},
                 {"unconstrained", ordered_json::parse(rep.unconstrained_meta)}};
  j["rows"] = rows;
  j["all_hold"] = rep.all_hold;
  auto js = open_out(dir, "compare.json");
  js << j.dump(2) << '\n';
}

LineageReport run_lineage_check(const ExperimentConfig& config) {
  check_scenario(config.scenario);
  LineageReport rep;
  rep.config_json = config_json(config);
  rep.bin_width = config.observables.histogram_bin;
  const SolvedFields fields = solve_fields(config);
  const auto& sim = config.simulation;
  const double t = sim.t;
  const auto& windows = config.observables.windows;
  if (windows.empty()) throw ConfigError("lineage-check needs at least one window");
  for (const auto& w : windows) {
    ExtendedReal v;
    try {
      v = value_at(fields.constrained, t, w.x);
    } catch (const std::out_of_range&) {
      throw ConfigError("lineage-check: window outside the solver grid");
    }
    if (v.is_finite()) {
      rep.optimizers.push_back(backtrack(fields.constrained, t, w.x));
    } else {
      rep.optimizers.emplace_back();
    }
  }
  constexpr std::size_t kBins = 20;
  constexpr std::size_t kSampleCap = 2000;

  struct PerReplica {
    bool capped = false;
    std::uint64_t window = 0;
    std::uint64_t tube = 0;
    std::vector<std::uint64_t> hist;
    std::vector<double> sample;
  };
  std::vector<std::vector<double>> medians(windows.size());
  for (std::size_t k = 0; k < sim.K.size(); ++k) {
    const double K = sim.K[k];
    const InitialMeasure mu(config.scenario, K, sim.tail_tol);
    RunConfig rc;
    rc.K = K;
    rc.t = t;
    rc.cap = sim.cap;
    rc.tail_tol = sim.tail_tol;
    rc.validate = false;
    std::vector<std::vector<PerReplica>> per(sim.replicas, std::vector<PerReplica>(windows.size()));
    parallel_for(sim.replicas, [&](std::size_t r) {
      RandomStream rng = derive_stream(sim.seed, (static_cast<std::uint64_t>(k) << 32) | r);
      SimulationResult res;
      bool capped = false;
      try {
        res = run(config.scenario, mu, rc, rng);
        capped = res.capped;
      } catch (const std::length_error&) {
        capped = true;
      }
      for (std::size_t w = 0; w < windows.size(); ++w) {
        PerReplica& pr = per[r][w];
        pr.capped = capped;
        pr.hist.assign(kBins + 1, 0);
        if (capped || !rep.optimizers[w]) continue;
        const auto d = tube_distances(res, *rep.optimizers[w]);
        std::vector<double> members;
        for (std::size_t n = 0; n < res.alive.size(); ++n) {
          if (std::fabs(res.ancestry[res.alive[n]].trait - windows[w].x) <= windows[w].delta) members.push_back(d[n]);
          if (d[n] <= windows[w].delta) ++pr.tube;
        }
        pr.window = members.size();
        for (double v : members) ++pr.hist[std::min<std::size_t>(kBins, static_cast<std::size_t>(v / rep.bin_width))];
        const std::size_t stride = std::max<std::size_t>(1, (members.size() + kSampleCap - 1) / kSampleCap);
        for (std::size_t n = 0; n < members.size(); n += stride) pr.sample.push_back(members[n]);
      }
    });

    for (std::size_t w = 0; w < windows.size(); ++w) {
      LineageRow row;
      row.K = K;
      row.x = windows[w].x;
      row.delta = windows[w].delta;
      row.replicas = sim.replicas;
      row.histogram.assign(kBins + 1, 0);
      std::vector<double> wexp, texp, ratios, pooled;
      for (const auto& rr : per) {
        const PerReplica& pr = rr[w];
        if (pr.capped) {
          ++row.capped;
          continue;
        }
        if (pr.window == 0) {
          ++row.extinct;
          continue;
        }
        for (std::size_t b = 0; b <= kBins; ++b) row.histogram[b] += pr.hist[b];
        pooled.insert(pooled.end(), pr.sample.begin(), pr.sample.end());
        wexp.push_back(exponent_of(pr.window, K));
        texp.push_back(pr.tube ? exponent_of(pr.tube, K) : -HUGE_VAL);
        if (pr.window >= 2 && pr.tube >= 1) ratios.push_back(exponent_of(pr.tube, K) / exponent_of(pr.window, K));
      }
      if (!rep.optimizers[w]) {
        row.usable = false;
        row.note = "u_0 masked at the window: no optimizer";
      } else if (row.capped > 0) {
        row.usable = false;
        row.note = "capped replicas: row unusable";
      } else if (wexp.empty()) {
        row.usable = false;
        row.note = "every replica extinct in the window";
      } else if (row.extinct > 0) {
        row.note = std::to_string(row.extinct) + " extinct replicas skipped";
      }
      if (!wexp.empty()) {
        row.window_exponent = std::accumulate(wexp.begin(), wexp.end(), 0.0) / wexp.size();
        const bool any_empty = std::any_of(texp.begin(), texp.end(), [](double e) { return std::isinf(e); });
        row.tube_exponent = any_empty ? ExtendedReal::neg_inf()
                                      : ExtendedReal(std::accumulate(texp.begin(), texp.end(), 0.0) / texp.size());
        if (!ratios.empty()) row.exponent_ratio = std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size();
      }
      if (!pooled.empty()) {
        const auto mid = pooled.begin() + static_cast<long>(pooled.size() / 2);
        std::nth_element(pooled.begin(), mid, pooled.end());
        row.median_distance = *mid;
        if (pooled.size() % 2 == 0) {
          row.median_distance = 0.5 * (row.median_distance + *std::max_element(pooled.begin(), mid));
        }
        medians[w].push_back(row.median_distance);
      } else {
        medians[w].push_back(HUGE_VAL);
      }
      if (k + 1 == sim.K.size()) {
        const bool close = row.window_exponent.is_finite() && row.tube_exponent.is_finite() &&
                           std::fabs(row.tube_exponent.value() - row.window_exponent.value()) <=
                               config.observables.lineage_tolerance;
        rep.holds = rep.holds && row.usable && close;
      }
      rep.rows.push_back(std::move(row));
    }
  }
  for (const auto& m : medians) {
    for (std::size_t k = 1; k < m.size(); ++k) rep.median_decreasing = rep.median_decreasing && m[k] < m[k - 1];
  }
  return rep;
}

void write_lineage(const LineageReport& rep, const std::filesystem::path& dir) {
  auto csv = open_out(dir, "lineage.csv");
  csv << "K,x,delta,replicas,capped,extinct,window_exponent,tube_exponent,exponent_gap,exponent_ratio,"
         "median_distance,usable\n";
  auto hcsv = open_out(dir, "lineage_histogram.csv");
  hcsv << "K,x,delta,bin_lo,bin_hi,count\n";
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows) {
    const bool both = r.window_exponent.is_finite() && r.tube_exponent.is_finite();
    const double gap = both ? r.tube_exponent.value() - r.window_exponent.value() : 0.0;
    csv << num(r.K) << ',' << num(r.x) << ',' << num(r.delta) << ',' << r.replicas << ',' << r.capped << ','
        << r.extinct << ',' << r.window_exponent.to_string() << ',' << r.tube_exponent.to_string() << ','
        << (both ? num(gap) : "") << ',' << num(r.exponent_ratio) << ',' << num(r.median_distance) << ','
        << (r.usable ? 1 : 0) << '\n';
    for (std::size_t b = 0; b < r.histogram.size(); ++b) {
      const bool last = b + 1 == r.histogram.size();
      hcsv << num(r.K) << ',' << num(r.x) << ',' << num(r.delta) << ',' << num(b * rep.bin_width) << ','
           << (last ? "inf" : num((b + 1) * rep.bin_width)) << ',' << r.histogram[b] << '\n';
    }
    rows.push_back({{"K", r.K},
                    {"x", r.x},
                    {"delta", r.delta},
                    {"replicas", r.replicas},
                    {"capped", r.capped},
                    {"extinct", r.extinct},
                    {"window_exponent", jext(r.window_exponent)},
                    {"tube_exponent", jext(r.tube_exponent)},
                    {"exponent_gap", both ? ordered_json(gap) : ordered_json(nullptr)},
                    {"exponent_ratio", r.exponent_ratio},
                    {"median_distance", std::isfinite(r.median_distance) ? ordered_json(r.median_distance)
                                                                         : ordered_json(nullptr)},
                    {"histogram", r.histogram},
                    {"usable", r.usable},
                    {"note", r.note}});
  }
  for (std::size_t w = 0; w < rep.optimizers.size(); ++w) {
    if (!rep.optimizers[w]) continue;
    auto pcsv = open_out(dir, "optimizer_" + std::to_string(w) + ".csv");
    write_path_csv(pcsv, *rep.optimizers[w]);
  }
  ordered_json j;
  j["config"] = ordered_json::parse(rep.config_json);
  j["rows"] = rows;
  j["bin_width"] = rep.bin_width;
  j["holds"] = rep.holds;
  j["median_decreasing"] = rep.median_decreasing;
  auto js = open_out(dir, "lineage.json");
  js << j.dump(2) << '\n';
}

}  // namespace hjlab
