#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "hjlab/branching_sim.hpp"
#include "hjlab/experiment.hpp"
#include "hjlab/parallel.hpp"

namespace hjlab {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

int cmd_validate(const ExperimentConfig& c, std::ostream& out) {
  const auto v = c.scenario.validate();
  out << "scenario " << c.scenario.name() << " hash " << c.scenario.hash() << '\n';
  if (v.empty()) {
    out << "all assumptions hold on [" << c.scenario.domain().lo << ", " << c.scenario.domain().hi << "]\n";
    return kExitOk;
  }
  for (const auto& e : v) out << "violation: " << e.assumption << " at x = " << e.x << ": " << e.detail << '\n';
  return kExitConfig;
}

bool needs_fields(const ExperimentConfig& c) {
  for (const auto& t : c.observables.tubes) {
    if (t.optimal_x) return true;
  }
  return false;
}

int cmd_simulate(const ExperimentConfig& c, std::ostream& out) {
  std::optional<SolvedFields> fields;
  if (needs_fields(c)) fields = solve_fields(c);
  const auto obs = resolve_observables(c, fields ? &*fields : nullptr);
  auto csv = open_out(c.output.dir, "simulate.csv");
  csv << "replica,K,t,observable,spec,count,exponent,capped\n";
  for (std::size_t k = 0; k < c.simulation.K.size(); ++k) {
    const double K = c.simulation.K[k];
    const auto reps = simulate_counts(c, k, obs);
    std::size_t capped = 0;
    for (const auto& r : reps) {
      capped += r.capped;
      for (std::size_t j = 0; j < obs.size(); ++j) {
        csv << r.replica << ',' << num(K) << ',' << num(c.simulation.t) << ',' << obs[j].kind << ",\"" << obs[j].spec
            << "\"," << (r.capped ? "" : std::to_string(r.counts[j])) << ','
            << (r.capped ? "" : exponent(r.counts[j], K).to_string()) << ',' << (r.capped ? 1 : 0) << '\n';
      }
    }
    out << "K=" << num(K) << ": " << reps.size() << " replicas, " << capped << " capped\n";
    if (c.simulation.dump_ancestry) {
      // Replica 0 again from its own stream; identical to the counted run.
      RandomStream rng = derive_stream(c.simulation.seed, static_cast<std::uint64_t>(k) << 32);
      RunConfig rc;
      rc.K = K;
      rc.t = c.simulation.t;
      rc.cap = c.simulation.cap;
      rc.tail_tol = c.simulation.tail_tol;
      rc.validate = false;
      try {
        const auto res = run(c.scenario, InitialMeasure(c.scenario, K, c.simulation.tail_tol), rc, rng);
        auto dump = open_out(c.output.dir, "ancestry_K" + num(K) + ".csv");
        write_ancestry_csv(dump, res);
      } catch (const std::length_error&) {
        out << "K=" << num(K) << ": initial population exceeds the cap, no ancestry dump\n";
      }
    }
  }
  return kExitOk;
}

int cmd_estimate(const ExperimentConfig& c, std::ostream& out) {
  std::optional<SolvedFields> fields;
  if (needs_fields(c)) fields = solve_fields(c);
  const auto obs = resolve_observables(c, fields ? &*fields : nullptr);
  auto csv = open_out(c.output.dir, "estimate.csv");
  csv << "K,t,predicate,estimate,std_error,log_estimate_over_logK,degenerate\n";
  for (std::size_t k = 0; k < c.simulation.K.size(); ++k) {
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const auto e = estimate_observable(c, k, j, obs[j]);
      csv << num(c.simulation.K[k]) << ',' << num(c.simulation.t) << ",\"" << obs[j].spec << "\"," << num(e.estimate)
          << ',' << num(e.std_error) << ',' << e.log_estimate_over_log_k.to_string() << ',' << (e.degenerate ? 1 : 0)
          << '\n';
      out << "K=" << num(c.simulation.K[k]) << ' ' << obs[j].spec << ": " << short_num(e.estimate) << " +- "
          << short_num(e.std_error) << " (exponent " << e.log_estimate_over_log_k.to_string() << ")\n";
    }
  }
  return kExitOk;
}

void write_field(const ValueField& f, const std::filesystem::path& dir, const std::string& stem, std::size_t stride) {
  auto csv = open_out(dir, stem + ".csv");
  write_field_csv(csv, f, stride);
  auto js = open_out(dir, stem + ".json");
  js << field_metadata_json(f) << '\n';
}

int cmd_solve(const ExperimentConfig& c, std::ostream& out) {
  const auto fields = solve_fields(c);
  const std::size_t stride = c.output.field_stride;
  write_field(fields.unconstrained, c.output.dir, "field_a-inf", stride);
  write_field(fields.constrained, c.output.dir, "field_a0", stride);
  for (std::size_t i = 0; i < c.grid.a_levels.size(); ++i) {
    const double a = c.grid.a_levels[i];
    if (a == 0.0 || std::isinf(a)) continue;
    write_field(fields.levels[i], c.output.dir, "field_a" + short_num(a), stride);
  }
  const double t = c.simulation.t;
  out << "boundary hits: a=0 " << fields.constrained.boundary_hits() << ", a=-inf "
      << fields.unconstrained.boundary_hits() << '\n';
  for (const auto& w : c.observables.windows) {
    out << "x=" << num(w.x) << " t=" << num(t) << ": u_0 " << value_at(fields.constrained, t, w.x).to_string()
        << ", U " << value_at(fields.unconstrained, t, w.x).to_string();
    for (std::size_t i = 0; i < c.grid.a_levels.size(); ++i) {
      out << ", u_" << short_num(c.grid.a_levels[i]) << ' ' << value_at(fields.levels[i], t, w.x).to_string();
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& c, std::ostream& out) {
  const auto rep = run_compare(c);
  write_compare(rep, c.output.dir);
  for (const auto& r : rep.rows) {
    out << "K=" << num(r.K) << ' ' << r.spec << ": exponent " << r.exponent_mean.to_string() << " (sd "
        << short_num(r.exponent_sd) << "), FK " << r.fk_log_estimate.to_string() << ", u_0 " << r.u0.to_string()
        << ", U " << r.big_u.to_string() << (r.holds ? "" : "  [" + r.note + "]") << '\n';
  }
  return rep.all_hold ? kExitOk : kExitAssertion;
}

int cmd_lineage(const ExperimentConfig& c, std::ostream& out) {
  const auto rep = run_lineage_check(c);
  write_lineage(rep, c.output.dir);
  for (const auto& r : rep.rows) {
    out << "K=" << num(r.K) << " x=" << num(r.x) << ": window " << r.window_exponent.to_string() << ", tube "
        << r.tube_exponent.to_string() << ", median distance " << short_num(r.median_distance)
        << (r.note.empty() ? "" : "  [" + r.note + "]") << '\n';
  }
  out << "median distance decreasing in K: " << (rep.median_decreasing ? "yes" : "no") << '\n';
  return rep.holds ? kExitOk : kExitAssertion;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branching-process exponents, Feynman-Kac estimates and constrained Hamilton-Jacobi values"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_file, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed, overrides simulation.seed");
  app.add_option("--out", out_dir, "output directory, overrides output.dir");
  app.footer("Worker threads: $HJLAB_WORKERS (default: hardware concurrency).\nExit codes: 0 ok, 2 assertions failed, 3 configuration or validation error.");
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const ExperimentConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"validate", "check the scenario's standing assumptions", cmd_validate},
      {"simulate", "branching replicas and their window/tube counts", cmd_simulate},
      {"estimate-mean", "Feynman-Kac estimates of mean counts", cmd_estimate},
      {"solve", "constrained and unconstrained value fields", cmd_solve},
      {"compare", "simulated exponents against the solver and the expectation", cmd_compare},
      {"lineage-check", "concentration of lineages around the optimal trajectory", cmd_lineage},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) subs.push_back(app.add_subcommand(c.name, c.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    ExperimentConfig cfg = load_config(config_file);
    if (seed) cfg.simulation.seed = *seed;
    if (out_dir) cfg.output.dir = *out_dir;
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].fn(cfg, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace hjlab
