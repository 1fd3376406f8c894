#include "hjlab/rate_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hjlab {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_number(const std::string& tok) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("rate function: bad number '" + tok + "'");
  }
  if (used != tok.size() || !std::isfinite(v)) {
    throw std::invalid_argument("rate function: bad number '" + tok + "'");
  }
  return v;
}

// C^1 transition from 0 to 1 on [-w/2, w/2].
double smoothstep(double s, double w) {
  if (w <= 0.0) return s < 0.0 ? 0.0 : 1.0;
  const double u = std::clamp(s / w + 0.5, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace

RateFunction::RateFunction(Polynomial f) : form_(std::move(f)) {
  if (std::get<Polynomial>(form_).coefficients.empty()) {
    throw std::invalid_argument("rate function: polynomial needs coefficients");
  }
}

RateFunction::RateFunction(Steps f) : form_(std::move(f)) {
  const auto& s = std::get<Steps>(form_);
  if (s.levels.size() != s.breaks.size() + 1 || s.levels.empty()) {
    throw std::invalid_argument("rate function: steps need n+1 levels for n breaks");
  }
  for (std::size_t i = 1; i < s.breaks.size(); ++i) {
    if (!(s.breaks[i] - s.breaks[i - 1] >= s.smooth)) {
      throw std::invalid_argument("rate function: step breaks must be increasing and at least the smoothing width apart");
    }
  }
  if (s.smooth < 0.0) throw std::invalid_argument("rate function: negative smoothing width");
}

RateFunction::RateFunction(Table f) : form_(std::move(f)) {
  const auto& t = std::get<Table>(form_);
  if (t.nodes.empty()) throw std::invalid_argument("rate function: empty table");
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    if (!(t.nodes[i].first > t.nodes[i - 1].first)) {
      throw std::invalid_argument("rate function: table abscissae must be strictly increasing");
    }
  }
}

RateFunction RateFunction::parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::vector<std::string> toks;
  for (std::string tok; is >> tok;) toks.push_back(tok);
  if (toks.empty()) throw std::invalid_argument("rate function: empty text");
  const std::string& kind = toks[0];
  std::vector<std::string> args(toks.begin() + 1, toks.end());

  if (kind == "constant") {
    if (args.size() != 1) throw std::invalid_argument("rate function: constant takes one value");
    return constant(parse_number(args[0]));
  }
  if (kind == "peak") {
    if (args.size() != 3) throw std::invalid_argument("rate function: peak takes height center slope");
    return peak(parse_number(args[0]), parse_number(args[1]), parse_number(args[2]));
  }
  if (kind == "poly") {
    Polynomial p;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "cap") {
        if (i + 2 != args.size()) throw std::invalid_argument("rate function: 'cap <max>' must end a poly");
        p.capped = true;
        p.cap = parse_number(args[i + 1]);
        break;
      }
      p.coefficients.push_back(parse_number(args[i]));
    }
    return RateFunction(std::move(p));
  }
  if (kind == "steps") {
    Steps s;
    std::vector<double> seq;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "smooth") {
        if (i + 2 != args.size()) throw std::invalid_argument("rate function: 'smooth <w>' must end a steps spec");
        s.smooth = parse_number(args[i + 1]);
        break;
      }
      seq.push_back(parse_number(args[i]));
    }
    if (seq.size() % 2 != 1) throw std::invalid_argument("rate function: steps need v0 x1 v1 ... xn vn");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      (i % 2 == 0 ? s.levels : s.breaks).push_back(seq[i]);
    }
    return RateFunction(std::move(s));
  }
  if (kind == "table") {
    Table t;
    for (const auto& a : args) {
      const auto colon = a.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("rate function: table entries are x:y");
      t.nodes.emplace_back(parse_number(a.substr(0, colon)), parse_number(a.substr(colon + 1)));
    }
    return RateFunction(std::move(t));
  }
  throw std::invalid_argument("rate function: unknown form '" + kind + "'");
}

double RateFunction::operator()(double x) const {
  struct Eval {
    double x;
    double operator()(const Constant& f) const { return f.c; }
    double operator()(const Peak& f) const { return f.height - f.slope * std::fabs(x - f.center); }
    double operator()(const Polynomial& f) const {
      double acc = 0.0;
      for (auto it = f.coefficients.rbegin(); it != f.coefficients.rend(); ++it) acc = acc * x + *it;
      return f.capped ? std::min(acc, f.cap) : acc;
    }
    double operator()(const Steps& f) const {
      double v = f.levels[0];
      for (std::size_t k = 0; k < f.breaks.size(); ++k) {
        v += (f.levels[k + 1] - f.levels[k]) * smoothstep(x - f.breaks[k], f.smooth);
      }
      return v;
    }
    double operator()(const Table& f) const {
      const auto& n = f.nodes;
      if (x <= n.front().first) return n.front().second;
      if (x >= n.back().first) return n.back().second;
      auto it = std::upper_bound(n.begin(), n.end(), x, [](double v, const auto& p) { return v < p.first; });
      const auto& [x1, y1] = *it;
      const auto& [x0, y0] = *(it - 1);
      return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }
  };
  return std::visit(Eval{x}, form_);
}

std::string RateFunction::to_string() const {
  struct Print {
    std::string operator()(const Constant& f) const { return "constant " + num(f.c); }
    std::string operator()(const Peak& f) const {
      return "peak " + num(f.height) + " " + num(f.center) + " " + num(f.slope);
    }
    std::string operator()(const Polynomial& f) const {
      std::string s = "poly";
      for (double c : f.coefficients) s += " " + num(c);
      if (f.capped) s += " cap " + num(f.cap);
      return s;
    }
    std::string operator()(const Steps& f) const {
      std::string s = "steps " + num(f.levels[0]);
      for (std::size_t k = 0; k < f.breaks.size(); ++k) s += " " + num(f.breaks[k]) + " " + num(f.levels[k + 1]);
      if (f.smooth > 0.0) s += " smooth " + num(f.smooth);
      return s;
    }
    std::string operator()(const Table& f) const {
      std::string s = "table";
      for (const auto& [x, y] : f.nodes) s += " " + num(x) + ":" + num(y);
      return s;
    }
  };
  return std::visit(Print{}, form_);
}

bool RateFunction::is_constant() const {
  if (std::holds_alternative<Constant>(form_)) return true;
  if (const auto* p = std::get_if<Peak>(&form_)) return p->slope == 0.0;
  if (const auto* p = std::get_if<Polynomial>(&form_)) {
    return std::all_of(p->coefficients.begin() + 1, p->coefficients.end(), [](double c) { return c == 0.0; });
  }
  if (const auto* s = std::get_if<Steps>(&form_)) {
    return std::all_of(s->levels.begin(), s->levels.end(), [&](double v) { return v == s->levels[0]; });
  }
  const auto& t = std::get<Table>(form_);
  return std::all_of(t.nodes.begin(), t.nodes.end(), [&](const auto& n) { return n.second == t.nodes[0].second; });
}

}  // namespace hjlab
