#include "hjlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "hjlab/quadrature.hpp"

namespace hjlab {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr double kSlack = 1e-12;

}  // namespace

Scenario::Scenario(std::string name, RateFunction birth, RateFunction death, RateFunction mutation_rate,
                   RateFunction beta0, MutationKernel kernel, ScenarioBounds bounds, Interval domain,
                   double beta0_offset)
    : name_(std::move(name)),
      birth_(std::move(birth)),
      death_(std::move(death)),
      mutation_rate_(std::move(mutation_rate)),
      beta0_(std::move(beta0)),
      kernel_(std::move(kernel)),
      bounds_(bounds),
      domain_(domain),
      beta0_offset_(beta0_offset) {
  if (!(domain_.hi > domain_.lo)) throw std::invalid_argument("scenario: empty working domain");
  if (!std::isfinite(beta0_offset_)) throw std::invalid_argument("scenario: beta0 offset must be finite");
}

Rates Scenario::rates_at(double x) const {
  const double b = birth_(x);
  const double d = death_(x);
  const double p = mutation_rate_(x);
  return {b, d, p, b + p - d, b + p + d};
}

std::vector<Violation> Scenario::validate(Interval domain, int n_samples) const {
  if (n_samples < 2) throw std::invalid_argument("validate: need at least two sample points");
  std::vector<Violation> out;
  const auto& bd = bounds_;
  if (!(bd.p_low > 0.0)) out.push_back({"p_low must be positive", 0.0, "p_low=" + num(bd.p_low)});
  if (!(bd.decay_alpha > 0.0)) {
    out.push_back({"beta0 decay rate must be positive", 0.0, "decay_alpha=" + num(bd.decay_alpha)});
  }
  for (int i = 0; i < n_samples; ++i) {
    const double x = domain.lo + domain.width() * static_cast<double>(i) / (n_samples - 1);
    const Rates r = rates_at(x);
    const double b0 = beta0_at(x);
    if (!std::isfinite(r.b) || !std::isfinite(r.d) || !std::isfinite(r.p) || !std::isfinite(b0)) {
      out.push_back({"rates must be finite", x, "non-finite value"});
      continue;
    }
    if (r.b < -kSlack) out.push_back({"b below 0", x, "b=" + num(r.b)});
    if (r.b > bd.b_bar + kSlack) out.push_back({"b above b_bar", x, "b=" + num(r.b) + " b_bar=" + num(bd.b_bar)});
    if (r.p < bd.p_low - kSlack || !(r.p > 0.0)) {
      out.push_back({"p below p_low", x, "p=" + num(r.p) + " p_low=" + num(bd.p_low)});
    }
    if (r.p > bd.p_bar + kSlack) out.push_back({"p above p_bar", x, "p=" + num(r.p) + " p_bar=" + num(bd.p_bar)});
    if (r.d < -kSlack) out.push_back({"d below 0", x, "d=" + num(r.d)});
    if (r.big_r > bd.r_bar + kSlack) {
      out.push_back({"R above r_bar", x, "R=" + num(r.big_r) + " r_bar=" + num(bd.r_bar)});
    }
    if (b0 > bd.beta_bar - bd.decay_alpha * std::fabs(x) + kSlack) {
      out.push_back({"beta0 lacks linear decay", x,
                     "beta0=" + num(b0) + " bound=" + num(bd.beta_bar - bd.decay_alpha * std::fabs(x))});
    }
  }
  return out;
}

Interval Scenario::truncation_interval(double K, double tail_tol) const {
  if (!(K >= 2.0)) throw std::invalid_argument("truncation_interval: K must be at least 2");
  if (!(tail_tol > 0.0)) throw std::invalid_argument("truncation_interval: tail_tol must be positive");
  const double alpha = bounds_.decay_alpha;
  if (!(alpha > 0.0)) throw std::invalid_argument("truncation_interval: decay_alpha must be positive");
  const double log_k = std::log(K);

  // Side constants c with beta0(x) <= c - alpha |x| on that side.
  constexpr int kSamples = 20001;
  double c_left = -HUGE_VAL;
  double c_right = -HUGE_VAL;
  for (int i = 0; i < kSamples; ++i) {
    const double x = domain_.lo + domain_.width() * static_cast<double>(i) / (kSamples - 1);
    const double c = beta0_at(x) + alpha * std::fabs(x);
    if (x <= 0.0) c_left = std::max(c_left, c);
    if (x >= 0.0) c_right = std::max(c_right, c);
  }
  if (domain_.lo > 0.0) c_left = bounds_.beta_bar;
  if (domain_.hi < 0.0) c_right = bounds_.beta_bar;
  c_left = std::min(c_left, bounds_.beta_bar);
  c_right = std::min(c_right, bounds_.beta_bar);

  // Total-mass estimate over the working domain.
  auto intensity = [&](double x) { return std::exp(log_k * beta0_at(x)); };
  double mass = 0.0;
  constexpr int kPanels = 400;
  const double h = domain_.width() / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double a = domain_.lo + i * h;
    const double scale = std::max({intensity(a), intensity(a + 0.5 * h), intensity(a + h)}) * h;
    mass += quadrature::adaptive_simpson(intensity, a, a + h, 1e-13 * scale, 30);
  }
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::domain_error("truncation_interval: intensity has no finite positive mass");
  }
  // One side: K^{c - alpha X} / (alpha ln K) <= tail_tol * mass / 2.
  const double log_target = std::log(0.5 * tail_tol * mass * alpha * log_k) / log_k;
  const double x_right = (c_right - log_target) / alpha;
  const double x_left = -(c_left - log_target) / alpha;
  if (!(x_right > x_left)) {
    throw std::domain_error("truncation_interval: tail bounds leave an empty interval");
  }
  return {x_left, x_right};
}

std::string Scenario::describe() const {
  std::ostringstream os;
  os << "name=" << name_ << "\n"
     << "birth=" << birth_.to_string() << "\n"
     << "death=" << death_.to_string() << "\n"
     << "mutation_rate=" << mutation_rate_.to_string() << "\n"
     << "beta0=" << beta0_.to_string() << "\n"
     << "beta0_offset=" << num(beta0_offset_) << "\n"
     << "kernel=" << kernel_.describe() << "\n"
     << "bounds=b_bar:" << num(bounds_.b_bar) << " p_bar:" << num(bounds_.p_bar) << " p_low:" << num(bounds_.p_low)
     << " r_bar:" << num(bounds_.r_bar) << " beta_bar:" << num(bounds_.beta_bar)
     << " decay_alpha:" << num(bounds_.decay_alpha) << "\n"
     << "domain=" << num(domain_.lo) << ":" << num(domain_.hi) << "\n";
  return os.str();
}

std::uint64_t Scenario::hash() const { return fnv1a(describe()); }

Scenario Scenario::with_beta0_offset(double mu) const {
  Scenario s = *this;
  s.beta0_offset_ = mu;
  return s;
}

Scenario Scenario::with_kernel(MutationKernel kernel) const {
  Scenario s = *this;
  s.kernel_ = std::move(kernel);
  return s;
}

ScenarioBounds derive_bounds(const RateFunction& birth, const RateFunction& death,
                             const RateFunction& mutation_rate, const RateFunction& beta0, Interval domain,
                             double decay_alpha, int n_samples) {
  ScenarioBounds b;
  b.b_bar = -HUGE_VAL;
  b.p_bar = -HUGE_VAL;
  b.p_low = HUGE_VAL;
  b.r_bar = -HUGE_VAL;
  b.beta_bar = -HUGE_VAL;
  b.decay_alpha = decay_alpha;
  for (int i = 0; i < n_samples; ++i) {
    const double x = domain.lo + domain.width() * static_cast<double>(i) / (n_samples - 1);
    const double bx = birth(x);
    const double px = mutation_rate(x);
    b.b_bar = std::max(b.b_bar, bx);
    b.p_bar = std::max(b.p_bar, px);
    b.p_low = std::min(b.p_low, px);
    b.r_bar = std::max(b.r_bar, bx + px - death(x));
    b.beta_bar = std::max(b.beta_bar, beta0(x) + decay_alpha * std::fabs(x));
  }
  return b;
}

Scenario builtin_scenario(std::string_view name) {
  if (name == "constant-supercritical") {
    // R = 1 everywhere; u_0(t, 0) = 1 + t.
    return Scenario("constant-supercritical", RateFunction::constant(1.0), RateFunction::constant(0.5),
                    RateFunction::constant(0.5), RateFunction::peak(1.0, 0.0, 1.0), MutationKernel::gaussian(1.0),
                    ScenarioBounds{1.0, 0.5, 0.5, 1.0, 1.0, 1.0}, Interval{-6.0, 6.0});
  }
  if (name == "quadratic") {
    // R(x) = 1.5 - min(x^2, 25): smooth fitness peak at 0, mass starting around -1.
    return Scenario("quadratic", RateFunction::constant(1.0), RateFunction::parse("poly 0 0 1 cap 25"),
                    RateFunction::constant(0.5), RateFunction::peak(0.8, -1.0, 1.0), MutationKernel::gaussian(1.0),
                    ScenarioBounds{1.0, 0.5, 0.5, 1.5, 1.8, 1.0}, Interval{-6.0, 6.0});
  }
  if (name == "valley") {
    // R = 0 for x <= -1, -0.6 on |x| < 1, 1.2 for x >= 1, corners mollified over 0.1.
    // The critical left plateau forbids growing before the crossing, so any
    // lineage reaching x > 1 must pass with a negative running exponent.
    return Scenario("valley", RateFunction::constant(1.0), RateFunction::parse("steps 1.5 -1 2.1 1 0.3 smooth 0.1"),
                    RateFunction::constant(0.5), RateFunction::peak(0.5, -2.0, 2.0), MutationKernel::gaussian(4.0),
                    ScenarioBounds{1.0, 0.5, 0.5, 1.2, 4.5, 2.0}, Interval{-5.0, 5.0});
  }
  throw std::invalid_argument("unknown built-in scenario '" + std::string(name) + "'");
}

std::vector<std::string> builtin_scenario_names() { return {"constant-supercritical", "quadratic", "valley"}; }

InitialMeasure::InitialMeasure(const Scenario& scenario, double K, double tail_tol, int nodes)
    : interval_(scenario.truncation_interval(K, tail_tol)) {
  if (nodes < 2) throw std::invalid_argument("InitialMeasure: need at least two nodes");
  const double log_k = std::log(K);
  auto intensity = [&](double x) { return std::exp(log_k * scenario.beta0_at(x)); };
  step_ = interval_.width() / (nodes - 1);
  cdf_.assign(static_cast<std::size_t>(nodes), 0.0);
  for (int i = 1; i < nodes; ++i) {
    const double a = interval_.lo + (i - 1) * step_;
    const double b = (i == nodes - 1) ? interval_.hi : a + step_;
    const double scale = std::max(intensity(a), intensity(b)) * step_;
    cdf_[i] = cdf_[i - 1] + quadrature::adaptive_simpson(intensity, a, b, 1e-13 * scale, 20);
  }
  mass_ = cdf_.back();
}

double InitialMeasure::inverse_cdf(double u) const {
  const double target = std::clamp(u, 0.0, 1.0) * mass_;
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  i = std::clamp<std::size_t>(i, 1, cdf_.size() - 1);
  const double c0 = cdf_[i - 1];
  const double c1 = cdf_[i];
  const double frac = c1 > c0 ? (target - c0) / (c1 - c0) : 0.0;
  return std::min(interval_.hi, interval_.lo + (static_cast<double>(i - 1) + std::clamp(frac, 0.0, 1.0)) * step_);
}

}  // namespace hjlab
