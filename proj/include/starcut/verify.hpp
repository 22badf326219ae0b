#pragma once

// Invariant suites runnable from the command line. Each suite returns a
// machine-readable report; a suite passes when every check passes.

#include "starcut/cutfinder.hpp"
#include "starcut/numerics.hpp"
#include "starcut/serialize.hpp"

#include <functional>
#include <map>
#include <string>

namespace starcut::verify {

struct Report {
  std::string suite;
  std::uint64_t seed = 0;
  json checks = json::array();
  bool passed = true;

  void add(const std::string& name, bool ok, json detail = json::object()) {
    checks.push_back({{"name", name}, {"passed", ok}, {"detail", std::move(detail)}});
    passed = passed && ok;
  }
  json to_json() const {
    return {{"suite", suite}, {"seed", seed}, {"passed", passed}, {"checks", checks}};
  }
};

inline Matrix random_rotation(int n, Stream& rng) {
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  reorthonormalize(q);
  return q;
}

inline Vector random_unit(int n, Stream& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v / v.norm();
}

/// Uniform point of the unit n-ball.
inline Vector random_in_ball(int n, Stream& rng) {
  std::uniform_real_distribution<double> unif;
  return random_unit(n, rng) * std::pow(unif(rng), 1.0 / n);
}

/// Random ellipsoid with log-lengths in [lo, hi] and some axes below tau.
inline Ellipsoid random_ellipsoid(int n, Stream& rng, double lo, double hi, double tau_log,
                                  int thin) {
  std::uniform_real_distribution<double> unif;
  Ellipsoid e{Vector(n), random_rotation(n, rng), Vector(n)};
  for (int i = 0; i < n; ++i) {
    e.center[i] = 2.0 * unif(rng) - 1.0;
    e.log_lengths[i] = i < thin ? tau_log - 1.0 - 3.0 * unif(rng) : lo + (hi - lo) * unif(rng);
  }
  return e;
}

inline Report ellipsoid_geometry(std::uint64_t seed, int pairs = 40, int points = 2000) {
  Report r{"ellipsoid-geometry", seed};
  Stream rng = seed_schedule(seed, 0, 0, 0);
  std::uniform_real_distribution<double> unif;
  const double tau_log = std::log(1e-6);
  for (int n = 2; n <= 8; ++n) {
    long long cut_violations = 0, clamp_violations = 0, recenter_violations = 0;
    double worst_ratio = -std::numeric_limits<double>::infinity();
    bool volume_ok = true;
    const double bound = -1.0 / (6.0 * (n + 1));
    for (int t = 0; t < pairs; ++t) {
      const int thin = t % 3 == 0 ? static_cast<int>(unif(rng) * (n - 1)) : 0;
      Ellipsoid e = random_ellipsoid(n, rng, std::log(0.05), std::log(20.0), tau_log, thin);
      const ThinDecomposition frame = thin_decomposition(e, tau_log);
      Vector d = Vector::Zero(n);
      for (int a : frame.nonthin_axes) d[a] = unif(rng) - 0.5;
      d /= d.norm();
      const Ellipsoid cut = apply_cut(e, d, tau_log);
      const double dv = log_volume(cut) - log_volume(e);
      worst_ratio = std::max(worst_ratio, dv);
      if (dv > bound + 1e-12) volume_ok = false;
      for (int s = 0; s < points; ++s) {
        Vector w = random_in_ball(n, rng);
        if (w.dot(d) > 1.0 / (3.0 * n)) continue;
        Vector x = e.center;
        for (int a = 0; a < n; ++a) x += e.basis.col(a) * (std::exp(e.log_lengths[a]) * w[a]);
        if (!contains(cut, x)) ++cut_violations;
      }

      // Clamp and recenter against E intersected with the radius-R ball.
      const double R = 1.0;
      Ellipsoid big = random_ellipsoid(n, rng, std::log(0.3), std::log(9.0 * n), tau_log, 0);
      big.center *= 3.0;
      const Ellipsoid clamped = clamp_axes(big, R, n);
      const Ellipsoid moved = recenter(big, R);
      for (int s = 0; s < points; ++s) {
        const Vector x = random_in_ball(n, rng) * R;
        if (!contains(big, x)) continue;
        if (!contains(clamped, x)) ++clamp_violations;
        if (!contains(moved, x)) ++recenter_violations;
      }
    }
    const std::string tag = "n=" + std::to_string(n);
    r.add("cut containment " + tag, cut_violations == 0, {{"violations", cut_violations}});
    r.add("cut volume " + tag, volume_ok, {{"worst_log_ratio", worst_ratio}, {"bound", bound}});
    r.add("clamp containment " + tag, clamp_violations == 0, {{"violations", clamp_violations}});
    r.add("recenter containment " + tag, recenter_violations == 0,
          {{"violations", recenter_violations}});
  }
  return r;
}

inline Report blur_estimators(std::uint64_t seed) {
  Report r{"blur-estimators", seed};
  const double kappa = 0.05;
  // f(x) = ||x - x0||^2 away from x0, compared against finite differences of
  // the blurred mean with common random numbers.
  for (int n : {1, 2, 3}) {
    json spec = {{"kind", "sphere"}, {"dim", n}, {"center", std::vector<double>(n, 0.8)}};
    Oracle oracle(FunctionSpec::from_json(spec), 2.0);
    const TruncParams p{0.0, 0.05, 10.0};
    const GaussianSpec g = axis_aligned_gaussian(Vector::Constant(n, -0.2), Vector::Constant(n, 0.5));
    RandomSource source(seed, static_cast<std::uint64_t>(n));
    const SamplingContext ctx{oracle, 0.0, source};
    const Accuracy acc{kappa, 0.05, std::nullopt};
    const double mu_est = estimate_mu_derivative_scaled(ctx, g, 0, p, acc);
    const double sigma_est = estimate_sigma_derivative_scaled(ctx, g, 0, p, acc);

    const double h = 1e-3 * 0.5;
    const Accuracy fd{kappa, 0.05, 400000};
    auto mean_at = [&](const GaussianSpec& gg) {
      RandomSource crn(seed ^ 0xFD, 0);
      return estimate_mean(SamplingContext{oracle, 0.0, crn}, gg, p, fd);
    };
    GaussianSpec plus = g, minus = g;
    plus.mean[0] += h;
    minus.mean[0] -= h;
    const double mu_fd = (mean_at(plus) - mean_at(minus)) * 0.5 / (2.0 * h);
    plus = g;
    minus = g;
    plus.log_widths[0] += std::log1p(1e-3);
    minus.log_widths[0] += std::log1p(-1e-3);
    const double sigma_fd = (mean_at(plus) - mean_at(minus)) / (std::log1p(1e-3) - std::log1p(-1e-3));
    const std::string tag = "n=" + std::to_string(n);
    r.add("mu derivative vs finite difference " + tag, std::abs(mu_est - mu_fd) <= 2.0 * kappa,
          {{"estimate", mu_est}, {"reference", mu_fd}});
    r.add("sigma derivative vs finite difference " + tag,
          std::abs(sigma_est - sigma_fd) <= 2.0 * kappa,
          {{"estimate", sigma_est}, {"reference", sigma_fd}});
  }
  // E[ln u^2] = -gamma - ln 2 for standard normal u.
  {
    Oracle oracle(FunctionSpec::from_json({{"kind", "sphere"}, {"dim", 1}}), 1.0, 1e6);
    RandomSource source(seed, 99);
    const TruncParams p{0.0, 1e-12, 1e6};
    const double est = estimate_mean(SamplingContext{oracle, 0.0, source},
                                     axis_aligned_gaussian(Vector::Zero(1), Vector::Ones(1)), p,
                                     {kappa, 0.05, 400000});
    const double ref = numerics::normal_expectation(
        [&](double u) { return truncated_log(u * u, p); }, {0.0});
    r.add("mean of log(x^2) vs quadrature", std::abs(est - ref) <= kappa,
          {{"estimate", est}, {"reference", ref}});
  }
  return r;
}

inline Report double_sampling(std::uint64_t seed, int runs = 20, int samples = 2000) {
  Report r{"double-sampling", seed};
  const int n = 3;
  const double sigma = 0.4, sigma_prime = 1.0;
  const Vector mu = Vector::LinSpaced(n, -0.5, 0.5);
  int accepted = 0;
  json pvalues = json::array();
  for (int run = 0; run < runs; ++run) {
    Stream rng = seed_schedule(seed, static_cast<std::uint64_t>(run), 0, 0);
    std::normal_distribution<double> normal;
    const Vector dir = random_unit(n, rng);
    std::vector<double> a(samples), b(samples);
    const double outer = std::sqrt(sigma_prime * sigma_prime - sigma * sigma);
    for (int s = 0; s < samples; ++s) {
      Vector x(n), y(n);
      for (int i = 0; i < n; ++i) {
        const double inner_mean = mu[i] + outer * normal(rng);
        x[i] = inner_mean + sigma * normal(rng);
        y[i] = mu[i] + sigma_prime * normal(rng);
      }
      a[s] = x.dot(dir);
      b[s] = y.dot(dir);
    }
    const auto ks = numerics::ks_two_sample(a, b);
    pvalues.push_back(ks.p_value);
    if (ks.p_value > 0.01) ++accepted;
  }
  r.add("two-sample KS p > 0.01", accepted >= (runs * 9) / 10,
        {{"accepted", accepted}, {"runs", runs}, {"p_values", pvalues}});
  return r;
}

inline Report tail_lemma(std::uint64_t seed) {
  Report r{"tail-lemma", seed};
  for (double c : {0.0, 1.0, 5.0}) {
    for (int n : {2, 5, 10}) {
      const auto t = numerics::radial_tail_masses(c, n);
      r.add("tail masses c=" + std::to_string(static_cast<int>(c)) + " n=" + std::to_string(n),
            t.lower >= 0.1 && t.upper >= 0.1,
            {{"m", t.m}, {"mass_lower", t.lower}, {"mass_upper", t.upper}});
    }
  }
  return r;
}

inline const std::map<std::string, std::function<Report(std::uint64_t)>>& suites() {
  static const std::map<std::string, std::function<Report(std::uint64_t)>> table = {
      {"ellipsoid-geometry", [](std::uint64_t s) { return ellipsoid_geometry(s); }},
      {"blur-estimators", [](std::uint64_t s) { return blur_estimators(s); }},
      {"double-sampling", [](std::uint64_t s) { return double_sampling(s); }},
      {"tail-lemma", [](std::uint64_t s) { return tail_lemma(s); }},
  };
  return table;
}

}  // namespace starcut::verify
