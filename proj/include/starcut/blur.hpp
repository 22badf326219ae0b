#pragma once

// The truncated logarithm L_z and Monte-Carlo estimators of its Gaussian
// blur: the mean, and the mean and width derivatives scaled by the width.
//
// Every estimator draws through the oracle in standardized form,
// y = mean + factor * u, so the score multipliers are read off u directly.

#include "starcut/ellipsoid.hpp"
#include "starcut/funcbench.hpp"
#include "starcut/random.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace starcut {

struct TruncParams {
  double z = 0.0;
  double eps_prime = 1e-3;
  double B = 1.0;

  double log_low() const { return std::log(eps_prime); }
  double log_high() const { return std::log(2.0 * B); }
  /// ln(2B / eps'), the width of the range of L_z.
  double log_range() const { return log_high() - log_low(); }
  /// Largest |L_z|.
  double magnitude() const { return std::max(std::abs(log_low()), std::abs(log_high())); }

  void validate() const {
    require(std::isfinite(z), "z must be finite");
    require(eps_prime > 0.0 && B > 0.0, "eps' and B must be positive");
    require(eps_prime < 2.0 * B, "eps' must be below 2B");
  }
};

inline double truncated_log(double v, const TruncParams& p) {
  const double gap = v - p.z;
  if (!(gap > p.eps_prime)) return p.log_low();
  if (gap >= 2.0 * p.B) return p.log_high();
  return std::log(gap);
}

/// Samples for a Hoeffding mean estimate of a variable with the given range
/// to accuracy kappa with probability 1 - fail.
inline std::size_t hoeffding_count(double range, double kappa, double fail) {
  require(range > 0.0 && kappa > 0.0, "range and kappa must be positive");
  require(fail > 0.0 && fail < 1.0, "fail must lie in (0,1)");
  const double count = std::ceil(range * range / (2.0 * kappa * kappa) * std::log(2.0 / fail));
  require(count < 9.0e18, "sample count overflows");
  return std::max<std::size_t>(1, static_cast<std::size_t>(count));
}

/// Axis-aligned Gaussian in the normalized chart of a ThinDecomposition:
/// coordinate i has mean mean[i] and width exp(log_widths[i]) in chart units.
struct GaussianSpec {
  std::shared_ptr<const ThinDecomposition> frame;
  Vector mean;
  Vector log_widths;

  int dim() const { return static_cast<int>(mean.size()); }

  /// The same Gaussian in original coordinates. Widths below the smallest
  /// normal double are floored there; `floored` counts how many.
  GaussianQuery to_query(int* floored = nullptr) const {
    const int n = dim();
    require(frame && frame->dim() == n, "Gaussian frame has wrong dimension");
    require(log_widths.size() == n, "Gaussian widths have wrong dimension");
    GaussianQuery q{frame->from_normalized(mean), frame->basis};
    int low = 0;
    for (int i = 0; i < n; ++i) {
      const double lw = frame->log_scale(i) + log_widths[i];
      require(!std::isnan(lw), "Gaussian width is NaN");
      if (lw <= kLogMinWidth) ++low;
      q.factor.col(i) *= width_from_log(lw);
    }
    if (floored) *floored = low;
    return q;
  }
};

/// Chart in which the normalized coordinates are the original ones.
inline std::shared_ptr<const ThinDecomposition> identity_frame(int n) {
  return std::make_shared<const ThinDecomposition>(
      thin_decomposition(Ellipsoid{Vector::Zero(n), Matrix::Identity(n, n), Vector::Zero(n)},
                         -std::numeric_limits<double>::infinity()));
}

inline GaussianSpec axis_aligned_gaussian(const Vector& mean, const Vector& widths) {
  Vector lw(widths.size());
  for (Eigen::Index i = 0; i < widths.size(); ++i) {
    require(widths[i] > 0.0, "widths must be positive");
    lw[i] = std::log(widths[i]);
  }
  return GaussianSpec{identity_frame(static_cast<int>(mean.size())), mean, lw};
}

/// Oracle, its slack and the random source shared by a group of estimates.
struct SamplingContext {
  const Oracle& oracle;
  double eps_oracle = 0.0;
  RandomSource& source;
};

/// Accuracy request. `samples`, when set, replaces the Hoeffding count.
struct Accuracy {
  double kappa = 0.02;
  double fail = 0.05;
  std::optional<std::size_t> samples;
};

namespace detail {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double normal_upper(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// E[(|u| - c)_+] for standard normal u.
inline double abs_excess(double c) { return 2.0 * (normal_pdf(c) - c * normal_upper(c)); }

/// E[(u^2 - c^2)_+] for standard normal u.
inline double square_excess(double c) {
  return 2.0 * (c * normal_pdf(c) + (1.0 - c * c) * normal_upper(c));
}

/// Smallest c (to 1e-9) with excess(c) <= target; excess is decreasing.
template <class Excess>
double solve_clamp(Excess excess, double target) {
  double lo = 0.0, hi = 1.0;
  while (excess(hi) > target) hi *= 2.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > target ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace detail

/// Clamp level for the mean-derivative multiplier u: clamping bias below
/// `bias` given |L| <= magnitude.
inline double mu_clamp_level(double magnitude, double bias) {
  return detail::solve_clamp(detail::abs_excess, bias / std::max(magnitude, 1e-300));
}

/// Clamp level c for the width-derivative multiplier min(u^2, c^2) - 1.
inline double sigma_clamp_level(double magnitude, double bias) {
  return detail::solve_clamp(detail::square_excess, bias / std::max(magnitude, 1e-300));
}

inline double mu_multiplier(double u, double c) { return std::clamp(u, -c, c); }
inline double sigma_multiplier(double u, double c) { return std::min(u * u, c * c) - 1.0; }

/// Shared sampling loop. For each draw, `accumulate(value, u, sums)` adds
/// the per-sample contributions; returns the sample means.
template <class Accumulate>
std::vector<double> blurred_means(const SamplingContext& ctx, const GaussianSpec& g,
                                  std::size_t samples, std::size_t width,
                                  Accumulate&& accumulate) {
  require(g.dim() == ctx.oracle.dim(), "Gaussian dimension does not match the oracle");
  const GaussianQuery q = g.to_query();
  const double eps = ctx.eps_oracle;
  const Oracle& oracle = ctx.oracle;
  std::vector<double> sums = chunked_sums(
      ctx.source, samples, width, [&](Stream& rng, std::size_t count, std::vector<double>& acc) {
        Vector u(g.dim());
        for (std::size_t s = 0; s < count; ++s) {
          const double v = oracle.sample(q, eps, rng, &u);
          accumulate(v, u, acc);
        }
      });
  for (double& s : sums) s /= static_cast<double>(samples);
  return sums;
}

inline double estimate_mean(const SamplingContext& ctx, const GaussianSpec& g,
                            const TruncParams& p, const Accuracy& acc) {
  p.validate();
  const std::size_t samples =
      acc.samples ? *acc.samples : hoeffding_count(p.log_range(), acc.kappa, acc.fail);
  return blurred_means(ctx, g, samples, 1,
                       [&](double v, const Vector&, std::vector<double>& s) {
                         s[0] += truncated_log(v, p);
                       })[0];
}

/// Estimates of sigma_i * d/dmu_i E[L_z] for the listed axes from one shared
/// sample set. Clamping bias and sampling error each take half of kappa; the
/// failure probability is split across the axes.
inline Vector estimate_mu_derivatives_scaled(const SamplingContext& ctx, const GaussianSpec& g,
                                             const std::vector<int>& axes, const TruncParams& p,
                                             const Accuracy& acc) {
  p.validate();
  require(!axes.empty(), "no axes requested");
  for (int a : axes) require(a >= 0 && a < g.dim(), "axis out of range");
  const double M = p.magnitude();
  const double c = mu_clamp_level(M, 0.5 * acc.kappa);
  const std::size_t samples =
      acc.samples ? *acc.samples
                  : hoeffding_count(2.0 * c * M, 0.5 * acc.kappa,
                                    acc.fail / static_cast<double>(axes.size()));
  const std::vector<double> means = blurred_means(
      ctx, g, samples, axes.size(), [&](double v, const Vector& u, std::vector<double>& s) {
        const double L = truncated_log(v, p);
        for (std::size_t k = 0; k < axes.size(); ++k) s[k] += mu_multiplier(u[axes[k]], c) * L;
      });
  return Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
}

inline double estimate_mu_derivative_scaled(const SamplingContext& ctx, const GaussianSpec& g,
                                            int axis, const TruncParams& p, const Accuracy& acc) {
  return estimate_mu_derivatives_scaled(ctx, g, {axis}, p, acc)[0];
}

/// Estimates of sigma_i * d/dsigma_i E[L_z] using the exact normal score
/// (u^2 - 1), with u^2 clamped at c^2.
inline Vector estimate_sigma_derivatives_scaled(const SamplingContext& ctx, const GaussianSpec& g,
                                                const std::vector<int>& axes,
                                                const TruncParams& p, const Accuracy& acc) {
  p.validate();
  require(!axes.empty(), "no axes requested");
  for (int a : axes) require(a >= 0 && a < g.dim(), "axis out of range");
  const double M = p.magnitude();
  const double c = sigma_clamp_level(M, 0.5 * acc.kappa);
  const double range = 2.0 * std::max(c * c - 1.0, 1.0) * M;
  const std::size_t samples =
      acc.samples ? *acc.samples
                  : hoeffding_count(range, 0.5 * acc.kappa,
                                    acc.fail / static_cast<double>(axes.size()));
  const std::vector<double> means = blurred_means(
      ctx, g, samples, axes.size(), [&](double v, const Vector& u, std::vector<double>& s) {
        const double L = truncated_log(v, p);
        for (std::size_t k = 0; k < axes.size(); ++k) s[k] += sigma_multiplier(u[axes[k]], c) * L;
      });
  return Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
}

inline double estimate_sigma_derivative_scaled(const SamplingContext& ctx, const GaussianSpec& g,
                                               int axis, const TruncParams& p,
                                               const Accuracy& acc) {
  return estimate_sigma_derivatives_scaled(ctx, g, {axis}, p, acc)[0];
}

}  // namespace starcut
