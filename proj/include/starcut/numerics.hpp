#pragma once

// Deterministic numerical references: 1-D quadrature against the normal
// density, the two-sample Kolmogorov-Smirnov test, and the radial tail
// masses of a shifted Gaussian.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace starcut::numerics {

/// Adaptive Gauss-Kronrod integral over [a, b]; either end may be infinite.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tolerance = 1e-12) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tolerance);
}

/// E[g(u)] for standard normal u, split at the given breakpoints.
inline double normal_expectation(const std::function<double(double)>& g,
                                 std::vector<double> breakpoints = {}) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  breakpoints.insert(breakpoints.begin(), -inf);
  breakpoints.push_back(inf);
  auto weighted = [&](double u) {
    const double w = std::exp(-0.5 * u * u);
    return w == 0.0 ? 0.0 : g(u) * w;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    total += integrate(weighted, breakpoints[i], breakpoints[i + 1]);
  return total / std::sqrt(2.0 * M_PI);
}

/// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample KS test with the asymptotic p-value and the usual
/// small-sample correction of the argument.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

struct TailMasses {
  double m = 0.0;
  double lower = 0.0;  // mass on [m, m + 1/3]
  double upper = 0.0;  // mass on [m + 2/3, inf)
};

/// Masses of the density proportional to exp(-(x-c)^2/2) x^(n-1) on x >= 0,
/// around m = (c + sqrt(c^2 + 4(n-1)))/2.
inline TailMasses radial_tail_masses(double c, int n) {
  const double m = 0.5 * (c + std::sqrt(c * c + 4.0 * (n - 1)));
  // Work with the log-density shifted by its maximum (attained at m).
  const double peak = -0.5 * (m - c) * (m - c) + (n > 1 ? (n - 1) * std::log(m) : 0.0);
  auto density = [&](double x) {
    if (x <= 0.0) return n == 1 ? std::exp(-0.5 * c * c - peak) : 0.0;
    return std::exp(-0.5 * (x - c) * (x - c) + (n - 1) * std::log(x) - peak);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double total =
      integrate(density, 0.0, m) + integrate(density, m, inf);
  TailMasses t;
  t.m = m;
  t.lower = integrate(density, m, m + 1.0 / 3.0) / total;
  t.upper = integrate(density, m + 2.0 / 3.0, inf) / total;
  return t;
}

}  // namespace starcut::numerics
