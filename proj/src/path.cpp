#include "hjlab/path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hjlab {

GridPath GridPath::linear(double t0, double dt, std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("GridPath: no values");
  if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
    throw std::invalid_argument("GridPath: dt must be positive and finite");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("GridPath: values must be finite");
  }
  GridPath p;
  p.interpolation_ = Interpolation::PiecewiseLinear;
  p.t0_ = t0;
  p.dt_ = dt;
  p.values_ = std::move(values);
  p.t_end_ = t0 + dt * static_cast<double>(p.values_.size() - 1);
  p.knots_.resize(p.values_.size());
  for (std::size_t k = 0; k < p.values_.size(); ++k) p.knots_[k] = t0 + dt * static_cast<double>(k);
  return p;
}

GridPath GridPath::step(std::vector<double> knots, std::vector<double> values, double t_end) {
  if (values.empty() || knots.size() != values.size()) {
    throw std::invalid_argument("GridPath: step path needs one knot per value");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]) || !std::isfinite(knots[k])) {
      throw std::invalid_argument("GridPath: values must be finite");
    }
    if (k > 0 && !(knots[k] >= knots[k - 1])) throw std::invalid_argument("GridPath: knots must be sorted");
  }
  if (!(t_end >= knots.back())) throw std::invalid_argument("GridPath: t_end before last knot");
  GridPath p;
  p.interpolation_ = Interpolation::PiecewiseConstantRightContinuous;
  p.t0_ = knots.front();
  p.t_end_ = t_end;
  p.dt_ = t_end - knots.front();
  p.values_ = std::move(values);
  p.knots_ = std::move(knots);
  return p;
}

double GridPath::value_at(double s) const {
  if (interpolation_ == Interpolation::PiecewiseLinear) {
    if (values_.size() == 1) return values_[0];
    const double pos = std::clamp((s - t0_) / dt_, 0.0, static_cast<double>(values_.size() - 1));
    const auto k = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
    const double frac = pos - static_cast<double>(k);
    return values_[k] + frac * (values_[k + 1] - values_[k]);
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
  if (it == knots_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

std::size_t GridPath::jump_count() const {
  if (interpolation_ == Interpolation::PiecewiseLinear) return 0;
  std::size_t n = 0;
  for (std::size_t k = 1; k < values_.size(); ++k) n += values_[k] != values_[k - 1];
  return n;
}

GridPath GridPath::prefix(std::size_t n_nodes) const {
  if (!is_linear()) throw std::invalid_argument("GridPath::prefix: linear paths only");
  if (n_nodes == 0 || n_nodes > values_.size()) throw std::out_of_range("GridPath::prefix: bad node count");
  return linear(t0_, dt_, std::vector<double>(values_.begin(), values_.begin() + static_cast<long>(n_nodes)));
}

GridPath GridPath::reversed() const {
  if (!is_linear()) throw std::invalid_argument("GridPath::reversed: linear paths only");
  return linear(t0_, dt_, std::vector<double>(values_.rbegin(), values_.rend()));
}

namespace {

// Value of `p` on the open interval (u, w) extended to its end points: the
// affine piece of a linear path, or the constant piece of a step path.
std::pair<double, double> piece_ends(const GridPath& p, double u, double w) {
  if (p.is_linear()) return {p.value_at(u), p.value_at(w)};
  const double mid = p.value_at(0.5 * (u + w));
  return {mid, mid};
}

}  // namespace

double sup_distance(const GridPath& a, const GridPath& b) {
  const double lo = std::max(a.t0(), b.t0());
  const double hi = std::min(a.t_end(), b.t_end());
  if (hi < lo) throw std::invalid_argument("sup_distance: paths have disjoint time ranges");
  std::vector<double> br{lo, hi};
  for (const GridPath* p : {&a, &b}) {
    for (double t : p->knots()) {
      if (t > lo && t < hi) br.push_back(t);
    }
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  double best = std::fabs(a.value_at(lo) - b.value_at(lo));
  best = std::max(best, std::fabs(a.value_at(hi) - b.value_at(hi)));
  for (std::size_t k = 1; k < br.size(); ++k) {
    const double u = br[k - 1];
    const double w = br[k];
    if (!(w > u)) continue;
    const auto [a0, a1] = piece_ends(a, u, w);
    const auto [b0, b1] = piece_ends(b, u, w);
    best = std::max({best, std::fabs(a0 - b0), std::fabs(a1 - b1)});
  }
  return best;
}

double modulus_of_continuity(const GridPath& f, double eta) {
  if (!f.is_linear()) throw std::invalid_argument("modulus_of_continuity: linear paths only");
  const auto& v = f.values();
  const double reach = eta / f.dt();
  double best = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size() && static_cast<double>(j - i) < reach + 1.0; ++j) {
      // Nodes closer than eta, plus the partial segment reaching exactly eta - 0.
      const double gap = static_cast<double>(j - i);
      double vj = v[j];
      if (gap > reach) vj = v[j - 1] + (v[j] - v[j - 1]) * (reach - (gap - 1.0));
      best = std::max(best, std::fabs(vj - v[i]));
    }
  }
  return best;
}

void write_path_csv(std::ostream& os, const GridPath& path) {
  char buf[96];
  os << "time,value\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", path.knots()[k], path.values()[k]);
    os << buf;
  }
  if (!path.is_linear() && path.t_end() > path.knots().back()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", path.t_end(), path.values().back());
    os << buf;
  }
}

GridPath read_path_csv(std::istream& is) {
  std::string line;
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("path CSV: expected 'time,value' rows");
    const std::string t = line.substr(0, comma);
    if (times.empty() && values.empty() && t.find("time") != std::string::npos) continue;
    times.push_back(std::stod(t));
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (values.empty()) throw std::invalid_argument("path CSV: no rows");
  if (values.size() == 1) return GridPath::linear(times[0], 1.0, values);
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::fabs(times[k] - (times.front() + dt * static_cast<double>(k))) > 1e-9 * (1.0 + std::fabs(times[k]))) {
      throw std::invalid_argument("path CSV: times must be uniformly spaced");
    }
  }
  return GridPath::linear(times.front(), dt, std::move(values));
}

}  // namespace hjlab
