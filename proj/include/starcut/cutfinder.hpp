#pragma once

// Single-cut procedure with locked thin dimensions, and the parameter
// schedule that drives it.

#include "starcut/blur.hpp"
#include "starcut/ellipsoid.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace starcut {

/// Replacements for the derived schedule. Any override makes the parameter
/// set non-faithful.
struct ParameterOverrides {
  std::optional<double> tau_log;
  std::optional<long long> k;
  std::optional<long long> S;
  std::optional<double> sigma_bot_prime;
  std::optional<double> sigma_bot;
  std::optional<std::size_t> g_samples;
  std::optional<std::size_t> grad_samples;
  std::optional<long long> g_iteration_cap;

  bool empty() const {
    return !tau_log && !k && !S && !sigma_bot_prime && !sigma_bot && !g_samples &&
           !grad_samples && !g_iteration_cap;
  }
};

struct CutParams {
  int n = 0;
  double delta_input = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  double eps_prime = 0.0;
  double B = 0.0;
  double R = 0.0;
  double F = 0.0;
  double s = 0.0;
  double sigma_bot_prime = 0.0;
  double sigma_bot = 0.0;
  double tau_prime_log = 0.0;
  double tau_log = 0.0;
  double eta_log = 0.0;
  long long k = 0;
  long long S = 0;
  double g_accuracy = 0.0;
  double g_threshold = 0.0;
  double grad_axis_accuracy = 0.0;
  long long g_iteration_cap = 0;
  long long m = 0;
  std::optional<std::size_t> g_samples;
  std::optional<std::size_t> grad_samples;
  bool paper_faithful = true;

  /// ln(2B / eps').
  double log_range() const { return std::log(2.0 * B) - std::log(eps_prime); }
  /// ln(R / s), the top of the sigma_top range.
  double top_log() const { return std::log(R) - std::log(s); }
};

/// m = ceil(6(n+1) [n (ln R - tau_log) - (n-1) ln((1 + 1/(3n))/2)]).
inline long long iteration_budget(int n, double R, double tau_log) {
  require(n >= 1 && R > 0.0, "iteration_budget needs n >= 1 and R > 0");
  require(std::log(R) > tau_log, "iteration_budget needs ln R > tau_log");
  const double nd = n;
  const double inner =
      nd * (std::log(R) - tau_log) - (nd - 1.0) * std::log((1.0 + 1.0 / (3.0 * nd)) / 2.0);
  return static_cast<long long>(std::ceil(6.0 * (nd + 1.0) * inner));
}

/// ln(tau' / tau) = ln((16/delta) ln(2B/eps') (2 sqrt 2 / sqrt pi)).
inline double tau_gap_log(double delta, double log_range) {
  return std::log(16.0 / delta) + std::log(log_range) + std::log(2.0 * std::sqrt(2.0) / std::sqrt(M_PI));
}

inline CutParams derive_parameters(int n, double delta, double eps, double B, double R, double F,
                                   const ParameterOverrides& overrides = {}) {
  require(n >= 1, "n must be >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  require(F > 0.0 && F < 1.0, "F must lie in (0,1)");
  require(eps > 0.0 && B > 0.0 && R > 0.0, "eps, B and R must be positive");
  require(std::isfinite(eps) && std::isfinite(B) && std::isfinite(R), "parameters must be finite");

  CutParams p;
  p.n = n;
  p.delta_input = delta;
  p.delta = delta >= 1.0 / 20.0 ? 1.0 / 21.0 : delta;
  p.eps = eps;
  p.B = B;
  p.R = R;
  p.F = F;
  p.paper_faithful = overrides.empty();

  const double nd = n;
  const double radicand = nd + 1.0 / p.delta + std::log(1.0 / eps) + std::log(B) + std::log(R) +
                          std::log(1.0 / F);
  require(radicand > 0.0, "parameter combination gives a non-positive s radicand");
  p.s = std::sqrt(nd) * (1.0 + std::sqrt(4.0 / 3.0) * std::sqrt(radicand));

  p.sigma_bot_prime = overrides.sigma_bot_prime.value_or(1.0 / (3.0 * nd * p.s));
  require(p.sigma_bot_prime > 0.0, "sigma_bot_prime must be positive");
  p.eps_prime = eps / (1.0 + 12.0 / p.sigma_bot_prime);
  require(p.eps_prime < 2.0 * B, "eps' must be below 2B");
  const double r = p.log_range();

  p.sigma_bot = overrides.sigma_bot.value_or(
      p.sigma_bot_prime * std::sqrt((p.delta / 8.0) / r * std::sqrt(1.0 / (2.0 * nd))));
  require(p.sigma_bot > 0.0 && p.sigma_bot < p.sigma_bot_prime,
          "sigma_bot must lie strictly between 0 and sigma_bot_prime");

  const double gap = tau_gap_log(p.delta, r);
  if (overrides.tau_log) {
    p.tau_log = *overrides.tau_log;
    p.tau_prime_log = p.tau_log + gap;
  } else {
    p.tau_prime_log = p.top_log() - (16.0 / p.delta) * r;
    p.tau_log = p.tau_prime_log - gap;
  }
  require(p.tau_prime_log < p.top_log(),
          "tau' must be below R/s; the sigma_top mesh range would be empty");

  if (overrides.k) {
    require(*overrides.k >= 1, "k must be >= 1");
    p.k = *overrides.k;
    p.eta_log = (p.top_log() - p.tau_prime_log) / static_cast<double>(p.k);
  } else if (overrides.tau_log) {
    p.eta_log = p.delta * p.delta / (8.0 * nd);
    p.k = static_cast<long long>(std::ceil((p.top_log() - p.tau_prime_log) / p.eta_log));
  } else {
    p.eta_log = p.delta * p.delta / (8.0 * nd);
    p.k = static_cast<long long>(std::ceil((16.0 / p.delta) * r / p.eta_log));
  }

  if (overrides.S) {
    require(*overrides.S >= 1, "S must be >= 1");
    p.S = *overrides.S;
  } else {
    p.S = static_cast<long long>(
        hoeffding_count(1.0, p.delta / 32.0, F / (2.0 * static_cast<double>(p.k + 1))));
  }

  p.g_accuracy = p.delta / 32.0;
  p.g_threshold = 7.0 * p.delta / 32.0;
  p.grad_axis_accuracy = p.delta / (16.0 * nd);
  p.g_iteration_cap = overrides.g_iteration_cap.value_or(static_cast<long long>(
      std::ceil(8.0 * (1.0 + 2.0 * std::sqrt(2.0 * nd) * r) / p.delta * std::log(1.0 / F))));
  require(p.g_iteration_cap >= 0, "g_iteration_cap must be non-negative");
  p.g_samples = overrides.g_samples;
  p.grad_samples = overrides.grad_samples;
  p.m = iteration_budget(n, R, p.tau_log);
  return p;
}

inline double victory_lower_bound(double z, double eps_prime, double mu_norm, int n) {
  return z - 6.0 * eps_prime * std::max(mu_norm, std::sqrt(static_cast<double>(n)));
}

// ---------------------------------------------------------------------------

struct CutDiagnostics {
  double z = 0.0;
  long long halted_mesh_index = -1;
  long long mesh_iterations = 0;
  long long g_iterations = 0;
  std::optional<Vector> accepted_mu;
  std::optional<double> accepted_log_sigma_top;
  std::optional<double> g_estimate;
  std::optional<double> gradient_norm;
  std::optional<double> victory_bound;
  int floored_widths = 0;
};

struct CutResult {
  std::optional<Vector> cut_direction;
  std::optional<GaussianSpec> solution;
  CutDiagnostics diagnostics;
};

class CutFailure : public AlgorithmFailure {
 public:
  CutFailure(const std::string& what, CutDiagnostics diagnostics)
      : AlgorithmFailure(what), diagnostics_(std::move(diagnostics)) {}
  const CutDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  CutDiagnostics diagnostics_;
};

/// Called between sampling rounds; may throw to abort a run.
using Checkpoint = std::function<void()>;

struct MeshSolution {
  GaussianSpec gaussian;
  long long index = 0;
  double z_iteration = 0.0;
};

struct MeshOutcome {
  std::optional<MeshSolution> solution;
  double z = std::numeric_limits<double>::infinity();
  long long iterations = 0;
  int floored_widths = 0;
};

inline GaussianSpec mesh_gaussian(const std::shared_ptr<const ThinDecomposition>& frame,
                                  const CutParams& p, long long i) {
  const int n = frame->dim();
  GaussianSpec g{frame, Vector::Zero(n), Vector(n)};
  for (int a = 0; a < n; ++a)
    g.log_widths[a] = frame->is_thin[a] ? p.tau_prime_log + static_cast<double>(i) * p.eta_log
                                        : std::log(p.sigma_bot_prime);
  return g;
}

/// Scans the thin-width mesh; halts on the first Gaussian whose samples
/// concentrate within eps' of their minimum, otherwise reports the minimum
/// over every sample.
inline MeshOutcome mesh_scan(const SamplingContext& ctx,
                             const std::shared_ptr<const ThinDecomposition>& frame,
                             const CutParams& p, const Checkpoint& checkpoint = {}) {
  MeshOutcome out;
  const std::size_t S = static_cast<std::size_t>(p.S);
  const double needed = (1.0 - 31.0 * p.delta / 32.0) * static_cast<double>(S);
  for (long long i = 0; i <= p.k; ++i) {
    if (checkpoint) checkpoint();
    const GaussianSpec g = mesh_gaussian(frame, p, i);
    int floored = 0;
    const GaussianQuery q = g.to_query(&floored);
    out.floored_widths = std::max(out.floored_widths, floored);
    const std::vector<double> values = chunked_values(
        ctx.source, S, [&](Stream& rng, std::size_t count, std::span<double> dst) {
          Vector u(frame->dim());
          for (std::size_t s = 0; s < count; ++s) dst[s] = ctx.oracle.sample(q, ctx.eps_oracle, rng, &u);
        });
    ++out.iterations;
    const double lowest = *std::min_element(values.begin(), values.end());
    out.z = std::min(out.z, lowest);
    const auto close = std::count_if(values.begin(), values.end(),
                                     [&](double v) { return v <= lowest + p.eps_prime; });
    if (static_cast<double>(close) >= needed) {
      out.solution = MeshSolution{g, i, lowest};
      return out;
    }
  }
  return out;
}

/// Fraction of samples with f - z in (eps', 2B).
inline double probability_in_band(const SamplingContext& ctx, const GaussianSpec& g,
                                  const TruncParams& p, std::size_t S) {
  require(S >= 1, "S must be >= 1");
  p.validate();
  return blurred_means(ctx, g, S, 1, [&](double v, const Vector&, std::vector<double>& s) {
    const double gap = v - p.z;
    if (gap > p.eps_prime && gap < 2.0 * p.B) s[0] += 1.0;
  })[0];
}

/// Gaussian used by the g-function and by the gradient step: mean mu on the
/// non-thin axes and 0 on thin ones, width sigma_bot across and sigma_top on
/// thin axes.
inline GaussianSpec cut_gaussian(const std::shared_ptr<const ThinDecomposition>& frame,
                                 const Vector& mu_bot, double log_sigma_top, const CutParams& p) {
  const int n = frame->dim();
  GaussianSpec g{frame, mu_bot, Vector(n)};
  for (int a = 0; a < n; ++a) {
    if (frame->is_thin[a]) {
      g.mean[a] = 0.0;
      g.log_widths[a] = log_sigma_top;
    } else {
      g.log_widths[a] = std::log(p.sigma_bot);
    }
  }
  return g;
}

/// Band probability minus the scaled width derivatives over every axis, from
/// one shared sample set. Clamping bias and sampling error each get half of
/// the delta/32 budget.
inline double estimate_g(const SamplingContext& ctx,
                         const std::shared_ptr<const ThinDecomposition>& frame,
                         const Vector& mu_bot_prime, double log_sigma_top, double z,
                         const CutParams& p) {
  require(log_sigma_top >= p.tau_prime_log - 1e-12 && log_sigma_top <= p.top_log() + 1e-12,
          "sigma_top outside [tau', R/s]");
  const TruncParams tp{z, p.eps_prime, p.B};
  const GaussianSpec g = cut_gaussian(frame, mu_bot_prime, log_sigma_top, p);
  const int n = frame->dim();
  const double M = tp.magnitude();
  const double half = 0.5 * p.g_accuracy;
  const double c = sigma_clamp_level(n * M, half);
  const double range = 1.0 + 2.0 * n * M * std::max(c * c - 1.0, 1.0);
  const double fail = p.F / (4.0 * static_cast<double>(p.g_iteration_cap + 1));
  const std::size_t samples = p.g_samples ? *p.g_samples : hoeffding_count(range, half, fail);
  return blurred_means(ctx, g, samples, 1, [&](double v, const Vector& u, std::vector<double>& s) {
    const double gap = v - z;
    double x = (gap > p.eps_prime && gap < 2.0 * p.B) ? 1.0 : 0.0;
    const double L = truncated_log(v, tp);
    double m = 0.0;
    for (int a = 0; a < n; ++a) m += sigma_multiplier(u[a], c);
    x -= m * L;
    s[0] += x;
  })[0];
}

/// One cut. The ellipsoid is decomposed at tau; the returned direction lives
/// in the normalized chart of that decomposition.
inline CutResult find_cut(const SamplingContext& ctx, const Ellipsoid& e, const CutParams& p,
                          const Checkpoint& checkpoint = {}) {
  require(e.dim() == ctx.oracle.dim(), "ellipsoid dimension does not match the oracle");
  auto frame = std::make_shared<const ThinDecomposition>(thin_decomposition(e, p.tau_log));
  require(!frame->nonthin_axes.empty(), "find_cut needs at least one non-thin axis");
  const int n = e.dim();

  CutResult result;
  CutDiagnostics& diag = result.diagnostics;

  const MeshOutcome mesh = mesh_scan(ctx, frame, p, checkpoint);
  diag.mesh_iterations = mesh.iterations;
  diag.floored_widths = mesh.floored_widths;
  diag.z = mesh.solution ? mesh.solution->z_iteration : mesh.z;
  if (mesh.solution) {
    diag.halted_mesh_index = mesh.solution->index;
    diag.victory_bound =
        victory_lower_bound(mesh.solution->z_iteration, p.eps_prime, 2.0 / p.sigma_bot_prime, n);
    result.solution = mesh.solution->gaussian;
    return result;
  }
  const double z = mesh.z;

  Stream proposals = ctx.source.fresh_stream();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(p.tau_prime_log, p.top_log());
  const double spread = std::sqrt(p.sigma_bot_prime * p.sigma_bot_prime - p.sigma_bot * p.sigma_bot);

  std::optional<Vector> accepted;
  double accepted_sigma = 0.0;
  for (long long it = 0; it < p.g_iteration_cap; ++it) {
    if (checkpoint) checkpoint();
    Vector mu = Vector::Zero(n);
    for (int a : frame->nonthin_axes) mu[a] = spread * normal(proposals);
    const double log_sigma_top = unif(proposals);
    const double g = estimate_g(ctx, frame, mu, log_sigma_top, z, p);
    diag.g_iterations = it + 1;
    diag.g_estimate = g;
    if (g > p.g_threshold) {
      accepted = mu;
      accepted_sigma = log_sigma_top;
      break;
    }
  }
  if (!accepted) {
    throw CutFailure("g-function rejection sampler exceeded its cap of " +
                         std::to_string(p.g_iteration_cap) + " iterations",
                     diag);
  }
  diag.accepted_mu = *accepted;
  diag.accepted_log_sigma_top = accepted_sigma;

  if (checkpoint) checkpoint();
  const GaussianSpec g = cut_gaussian(frame, *accepted, accepted_sigma, p);
  const TruncParams tp{z, p.eps_prime, p.B};
  const Accuracy acc{p.grad_axis_accuracy * p.sigma_bot, p.F / 4.0, p.grad_samples};
  const Vector scaled = estimate_mu_derivatives_scaled(ctx, g, frame->nonthin_axes, tp, acc);
  Vector d = Vector::Zero(n);
  for (std::size_t a = 0; a < frame->nonthin_axes.size(); ++a)
    d[frame->nonthin_axes[a]] = scaled[static_cast<Eigen::Index>(a)] / p.sigma_bot;
  const double norm = d.norm();
  diag.gradient_norm = norm;
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw CutFailure("estimated gradient vanished; no cut direction", diag);
  result.cut_direction = d / norm;
  return result;
}

}  // namespace starcut
