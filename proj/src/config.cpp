#include "hjlab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

namespace hjlab {

namespace {

using Entries = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario",
       {"name", "birth", "death", "mutation_rate", "beta0", "domain", "beta0_offset", "decay_alpha", "b_bar", "p_bar",
        "p_low", "r_bar", "beta_bar"}},
      {"kernel", {"kind", "sigma", "lambda", "nodes", "alpha_max", "newton_tol"}},
      {"grid", {"T", "dt", "dx", "v_max", "x_min", "x_max", "velocity_substeps", "a_levels"}},
      {"simulation", {"K", "t", "replicas", "cap", "seed", "tail_tol", "dump_ancestry"}},
      {"estimation", {"n_spines"}},
      {"observables", {"windows", "tubes", "lineage_tolerance", "histogram_bin"}},
      {"output", {"dir", "field_stride"}},
  };
  return keys;
}

Entries read_entries(std::istream& in) {
  CLI::ConfigINI ini;
  std::vector<CLI::ConfigItem> items;
  try {
    items = ini.from_config(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Entries out;
  for (const auto& it : items) {
    if (it.name == "--" || it.name == "++") continue;  // section markers
    if (it.parents.size() != 1) throw ConfigError("config: key '" + it.name + "' outside a known section");
    const std::string& section = it.parents.front();
    const auto sec = known_keys().find(section);
    if (sec == known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    if (!sec->second.count(it.name)) throw ConfigError("config: unknown key '" + it.name + "' in [" + section + "]");
    if (out[section].count(it.name)) throw ConfigError("config: duplicate key '" + it.name + "' in [" + section + "]");
    out[section][it.name] = it.inputs;
  }
  return out;
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
  return s;
}

double to_double(const std::string& text, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) throw ConfigError("config: '" + key + "' is not a number: " + text);
  return v;
}

std::uint64_t to_count(const std::string& text, const std::string& key) {
  const double v = to_double(text, key);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) throw ConfigError("config: '" + key + "' must be a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

class Section {
 public:
  Section(const Entries& e, std::string name) : name_(std::move(name)) {
    const auto it = e.find(name_);
    if (it != e.end()) values_ = &it->second;
  }
  bool has(const std::string& key) const { return values_ && values_->count(key); }
  const std::vector<std::string>& list(const std::string& key) const { return values_->at(key); }
  std::string text(const std::string& key) const { return joined(list(key)); }
  std::string label(const std::string& key) const { return name_ + "." + key; }
  double number(const std::string& key) const {
    if (list(key).size() != 1) throw ConfigError("config: '" + label(key) + "' takes one value");
    return to_double(list(key).front(), label(key));
  }
  void read(const std::string& key, double& out) const {
    if (has(key)) out = number(key);
  }
  void read(const std::string& key, std::optional<double>& out) const {
    if (has(key)) out = number(key);
  }
  void read(const std::string& key, std::uint64_t& out) const {
    if (has(key)) out = to_count(text(key), label(key));
  }

 private:
  std::string name_;
  const std::map<std::string, std::vector<std::string>>* values_ = nullptr;
};

RateFunction rate(const Section& sec, const std::string& key, const RateFunction& fallback) {
  if (!sec.has(key)) return fallback;
  try {
    return RateFunction::parse(sec.text(key));
  } catch (const std::exception& e) {
    throw ConfigError("config: '" + sec.label(key) + "': " + e.what());
  }
}

MutationKernel build_kernel(const Section& sec, const MutationKernel& fallback) {
  KernelOptions opt;
  opt.alpha_max = 0.0;
  sec.read("alpha_max", opt.alpha_max);
  opt.newton_tol = fallback.newton_tol();
  sec.read("newton_tol", opt.newton_tol);
  const bool any = sec.has("kind") || sec.has("sigma") || sec.has("lambda") || sec.has("nodes") ||
                   sec.has("alpha_max") || sec.has("newton_tol");
  if (!any) return fallback;
  std::string kind = sec.has("kind") ? sec.text("kind") : "";
  if (kind.empty()) {
    kind = fallback.kind() == MutationKernel::Kind::Gaussian              ? "gaussian"
           : fallback.kind() == MutationKernel::Kind::TwoSidedExponential ? "two_sided_exponential"
                                                                          : "tabulated";
  }
  try {
    if (kind == "gaussian") {
      double sigma = fallback.kind() == MutationKernel::Kind::Gaussian ? fallback.parameter() : 1.0;
      sec.read("sigma", sigma);
      return MutationKernel::gaussian(sigma, opt);
    }
    if (kind == "two_sided_exponential") {
      double lambda = fallback.kind() == MutationKernel::Kind::TwoSidedExponential ? fallback.parameter() : 1.0;
      sec.read("lambda", lambda);
      return MutationKernel::two_sided_exponential(lambda, opt);
    }
    if (kind == "tabulated") {
      if (!sec.has("nodes")) throw ConfigError("config: tabulated kernel needs 'kernel.nodes'");
      std::vector<std::pair<double, double>> nodes;
      for (const auto& w : sec.list("nodes")) {
        const auto colon = w.find(':');
        if (colon == std::string::npos) throw ConfigError("config: kernel node '" + w + "' is not y:g");
        nodes.emplace_back(to_double(w.substr(0, colon), "kernel.nodes"), to_double(w.substr(colon + 1), "kernel.nodes"));
      }
      return MutationKernel::tabulated(std::move(nodes), opt);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: kernel: ") + e.what());
  }
  throw ConfigError("config: unknown kernel kind '" + kind + "'");
}

Scenario build_scenario(const Entries& e) {
  const Section sec(e, "scenario");
  const Section ker(e, "kernel");
  std::string name = sec.has("name") ? sec.text("name") : "constant-supercritical";
  Scenario base = [&] {
    try {
      return builtin_scenario(name);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("config: scenario.name: ") + ex.what());
    }
  }();
  const RateFunction birth = rate(sec, "birth", base.birth());
  const RateFunction death = rate(sec, "death", base.death());
  const RateFunction mut = rate(sec, "mutation_rate", base.mutation_rate());
  const RateFunction beta0 = rate(sec, "beta0", base.beta0());
  Interval domain = base.domain();
  if (sec.has("domain")) {
    const auto& d = sec.list("domain");
    if (d.size() != 2) throw ConfigError("config: 'scenario.domain' takes two values");
    domain = {to_double(d[0], "scenario.domain"), to_double(d[1], "scenario.domain")};
    if (!(domain.hi > domain.lo)) throw ConfigError("config: empty scenario.domain");
  }
  const bool rates_changed = sec.has("birth") || sec.has("death") || sec.has("mutation_rate") || sec.has("beta0") ||
                             sec.has("domain");
  ScenarioBounds bounds = base.bounds();
  if (rates_changed) {
    double decay = base.bounds().decay_alpha;
    sec.read("decay_alpha", decay);
    bounds = derive_bounds(birth, death, mut, beta0, domain, decay);
  } else if (sec.has("decay_alpha")) {
    bounds.decay_alpha = sec.number("decay_alpha");
  }
  sec.read("b_bar", bounds.b_bar);
  sec.read("p_bar", bounds.p_bar);
  sec.read("p_low", bounds.p_low);
  sec.read("r_bar", bounds.r_bar);
  sec.read("beta_bar", bounds.beta_bar);
  double offset = 0.0;
  sec.read("beta0_offset", offset);
  if (rates_changed || sec.has("b_bar") || sec.has("p_bar") || sec.has("p_low") || sec.has("r_bar") ||
      sec.has("beta_bar") || sec.has("decay_alpha")) {
    name += "+custom";
  }
  return Scenario(name, birth, death, mut, beta0, build_kernel(ker, base.kernel()), bounds, domain, offset);
}

void positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError("config: " + what + " must be positive");
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  const Entries e = read_entries(in);
  ExperimentConfig c;
  c.scenario = build_scenario(e);

  const Section g(e, "grid");
  g.read("T", c.grid.T);
  g.read("dt", c.grid.dt);
  g.read("dx", c.grid.dx);
  g.read("v_max", c.grid.v_max);
  g.read("x_min", c.grid.x_min);
  g.read("x_max", c.grid.x_max);
  if (g.has("velocity_substeps")) c.grid.velocity_substeps = static_cast<int>(to_count(g.text("velocity_substeps"), "grid.velocity_substeps"));
  if (g.has("a_levels")) {
    c.grid.a_levels.clear();
    for (const auto& w : g.list("a_levels")) c.grid.a_levels.push_back(to_double(w, "grid.a_levels"));
  }
  positive(c.grid.dt, "grid.dt");
  positive(c.grid.dx, "grid.dx");
  if (c.grid.T < 0.0 || c.grid.v_max < 0.0) throw ConfigError("config: grid.T and grid.v_max must be nonnegative");
  for (double a : c.grid.a_levels) {
    if (std::isnan(a) || a == HUGE_VAL) throw ConfigError("config: grid.a_levels must be finite or -inf");
  }

  const Section s(e, "simulation");
  if (s.has("K")) {
    c.simulation.K.clear();
    for (const auto& w : s.list("K")) c.simulation.K.push_back(to_double(w, "simulation.K"));
  }
  for (double K : c.simulation.K) {
    if (!(K >= 2.0) || K != std::floor(K)) throw ConfigError("config: every K must be an integer of at least 2");
  }
  if (c.simulation.K.empty()) throw ConfigError("config: simulation.K is empty");
  s.read("t", c.simulation.t);
  s.read("replicas", c.simulation.replicas);
  s.read("cap", c.simulation.cap);
  s.read("seed", c.simulation.seed);
  s.read("tail_tol", c.simulation.tail_tol);
  if (s.has("dump_ancestry")) {
    const std::string v = s.text("dump_ancestry");
    if (v != "true" && v != "false") throw ConfigError("config: simulation.dump_ancestry must be true or false");
    c.simulation.dump_ancestry = v == "true";
  }
  positive(c.simulation.t, "simulation.t");
  positive(c.simulation.tail_tol, "simulation.tail_tol");
  if (c.simulation.replicas < 1 || c.simulation.cap < 1) throw ConfigError("config: replicas and cap must be at least 1");

  const Section est(e, "estimation");
  est.read("n_spines", c.estimation.n_spines);
  if (c.estimation.n_spines < 2) throw ConfigError("config: estimation.n_spines must be at least 2");

  const Section obs(e, "observables");
  if (obs.has("windows")) {
    c.observables.windows.clear();
    for (const auto& w : obs.list("windows")) {
      const auto colon = w.find(':');
      if (colon == std::string::npos) throw ConfigError("config: window '" + w + "' is not x:delta");
      WindowSpec ws{to_double(w.substr(0, colon), "observables.windows"),
                    to_double(w.substr(colon + 1), "observables.windows")};
      positive(ws.delta, "window delta");
      c.observables.windows.push_back(ws);
    }
  }
  if (obs.has("tubes")) {
    for (const auto& w : obs.list("tubes")) {
      const auto colon = w.rfind(':');
      if (colon == std::string::npos || colon == 0) throw ConfigError("config: tube '" + w + "' is not source:eps");
      TubeSpec ts;
      ts.source = w.substr(0, colon);
      ts.eps = to_double(w.substr(colon + 1), "observables.tubes");
      positive(ts.eps, "tube eps");
      if (ts.source.rfind("optimal@", 0) == 0) {
        ts.optimal_x = to_double(ts.source.substr(8), "observables.tubes");
      } else {
        std::filesystem::path file = ts.source;
        if (file.is_relative()) file = base_dir / file;
        std::ifstream pin(file);
        if (!pin) throw ConfigError("config: tube path file '" + file.string() + "' not found");
        try {
          ts.path = read_path_csv(pin);
        } catch (const std::exception& ex) {
          throw ConfigError("config: tube path file '" + file.string() + "': " + ex.what());
        }
      }
      c.observables.tubes.push_back(std::move(ts));
    }
  }
  obs.read("lineage_tolerance", c.observables.lineage_tolerance);
  obs.read("histogram_bin", c.observables.histogram_bin);
  positive(c.observables.lineage_tolerance, "observables.lineage_tolerance");
  positive(c.observables.histogram_bin, "observables.histogram_bin");

  const Section out(e, "output");
  if (out.has("dir")) c.output.dir = out.text("dir");
  if (out.has("field_stride")) c.output.field_stride = to_count(out.text("field_stride"), "output.field_stride");
  if (c.output.field_stride < 1) throw ConfigError("config: output.field_stride must be at least 1");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open '" + file.string() + "'");
  return parse_config(in, file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

std::string config_json(const ExperimentConfig& c) {
  using nlohmann::ordered_json;
  auto ext = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(v < 0 ? "-inf" : "inf"); };
  const auto& s = c.scenario;
  ordered_json j;
  j["scenario"] = {{"name", s.name()},
                   {"birth", s.birth().to_string()},
                   {"death", s.death().to_string()},
                   {"mutation_rate", s.mutation_rate().to_string()},
                   {"beta0", s.beta0().to_string()},
                   {"domain", {s.domain().lo, s.domain().hi}},
                   {"beta0_offset", s.beta0_offset()},
                   {"b_bar", s.bounds().b_bar},
                   {"p_bar", s.bounds().p_bar},
                   {"p_low", s.bounds().p_low},
                   {"r_bar", s.bounds().r_bar},
                   {"beta_bar", s.bounds().beta_bar},
                   {"decay_alpha", s.bounds().decay_alpha},
                   {"kernel", s.kernel().describe()},
                   {"hash", s.hash()}};
  ordered_json levels = ordered_json::array();
  for (double a : c.grid.a_levels) levels.push_back(ext(a));
  j["grid"] = {{"T", c.solver_horizon()},
               {"dt", c.grid.dt},
               {"dx", c.grid.dx},
               {"v_max", c.grid.v_max > 0.0 ? ordered_json(c.grid.v_max) : ordered_json("auto")},
               {"x_min", c.grid.x_min ? *c.grid.x_min : s.domain().lo},
               {"x_max", c.grid.x_max ? *c.grid.x_max : s.domain().hi},
               {"velocity_substeps", c.grid.velocity_substeps},
               {"a_levels", levels}};
  j["simulation"] = {{"K", c.simulation.K},
                     {"t", c.simulation.t},
                     {"replicas", c.simulation.replicas},
                     {"cap", c.simulation.cap},
                     {"seed", c.simulation.seed},
                     {"tail_tol", c.simulation.tail_tol},
                     {"dump_ancestry", c.simulation.dump_ancestry}};
  j["estimation"] = {{"n_spines", c.estimation.n_spines}};
  ordered_json windows = ordered_json::array();
  for (const auto& w : c.observables.windows) windows.push_back({{"x", w.x}, {"delta", w.delta}});
  ordered_json tubes = ordered_json::array();
  for (const auto& t : c.observables.tubes) tubes.push_back({{"source", t.source}, {"eps", t.eps}});
  j["observables"] = {{"windows", windows},
                      {"tubes", tubes},
                      {"lineage_tolerance", c.observables.lineage_tolerance},
                      {"histogram_bin", c.observables.histogram_bin}};
  // The output directory is left out so that reruns elsewhere stay byte-identical.
  j["output"] = {{"field_stride", c.output.field_stride}};
  return j.dump(2);
}

}  // namespace hjlab
