#pragma once

// Reference computations that share no code with the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

// Gauss-Hermite rule for int f(x) e^{-x^2} dx (Newton on the orthonormal
// Hermite recurrence, Golub-Welsch style initial guesses).
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  std::vector<double> x(n), w(n);
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-15) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  return {x, w};
}

// E[g(sigma Z)] for standard normal Z with a 96-node Gauss-Hermite rule.
inline double gaussian_expectation(double sigma, const std::function<double(double)>& g) {
  static const auto rule = gauss_hermite(96);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.first.size(); ++i) {
    acc += rule.second[i] * g(std::numbers::sqrt2 * sigma * rule.first[i]);
  }
  return acc / std::sqrt(std::numbers::pi);
}

// sup over a uniform alpha grid of alpha v - p H(alpha).
inline double brute_legendre(const std::function<double(double)>& hamiltonian, double p, double v,
                             double lo = -10.0, double hi = 10.0, double step = 1e-4) {
  double best = -HUGE_VAL;
  const auto n = static_cast<long>(std::llround((hi - lo) / step));
  for (long k = 0; k <= n; ++k) {
    const double a = lo + step * static_cast<double>(k);
    best = std::max(best, a * v - p * hamiltonian(a));
  }
  return best;
}

// Golden-section maximization of a concave function on [lo, hi].
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && b - a > 1e-14 * (1.0 + std::fabs(a)); ++i) {
    if (fc > fd) {
      b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
    }
  }
  return std::max(fc, fd);
}

inline double gaussian_h(double sigma, double a) { return std::expm1(0.5 * sigma * sigma * a * a); }

// Closed-form Lagrangian of the Gaussian kernel via golden section on alpha.
inline double gaussian_lagrangian(double sigma, double p, double v) {
  auto f = [&](double a) { return a * v - p * gaussian_h(sigma, a); };
  return golden_max(f, -30.0 / sigma, 30.0 / sigma);
}

// Hand-rolled generators for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
};

}  // namespace oracle
