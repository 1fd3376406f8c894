#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace hjlab {

/// A real function of the trait, from a small inspectable family.
///
/// Text grammar (whitespace separated, numbers in C locale):
///
///     constant <c>
///     peak <height> <center> <slope>            height - slope * |x - center|
///     poly <c0> <c1> ... [cap <max>]            sum c_k x^k, optionally min(., max)
///     steps <v0> <x1> <v1> ... <xn> <vn> [smooth <w>]
///                                               v_k on (x_k, x_{k+1}); each jump is
///                                               a C^1 smoothstep of width w centred at x_k
///     table <x0>:<y0> <x1>:<y1> ...             linear interpolation, flat outside
class RateFunction {
 public:
  struct Constant {
    double c;
  };
  struct Peak {
    double height;
    double center;
    double slope;
  };
  struct Polynomial {
    std::vector<double> coefficients;
    bool capped = false;
    double cap = 0.0;
  };
  struct Steps {
    std::vector<double> levels;
    std::vector<double> breaks;
    double smooth = 0.0;
  };
  struct Table {
    std::vector<std::pair<double, double>> nodes;
  };

  RateFunction() : form_(Constant{0.0}) {}
  explicit RateFunction(Constant f) : form_(f) {}
  explicit RateFunction(Peak f) : form_(f) {}
  explicit RateFunction(Polynomial f);
  explicit RateFunction(Steps f);
  explicit RateFunction(Table f);

  static RateFunction constant(double c) { return RateFunction(Constant{c}); }
  static RateFunction peak(double height, double center, double slope) {
    return RateFunction(Peak{height, center, slope});
  }
  static RateFunction parse(std::string_view text);

  double operator()(double x) const;

  /// Canonical text form; parse(to_string()) reproduces the function exactly.
  std::string to_string() const;

  /// True when the function is the same value everywhere.
  bool is_constant() const;

 private:
  std::variant<Constant, Peak, Polynomial, Steps, Table> form_;
};

}  // namespace hjlab
