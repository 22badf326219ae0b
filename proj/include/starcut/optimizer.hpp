#pragma once

// Outer ellipsoid loop.

#include "starcut/cutfinder.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace starcut {

enum class Mode { paper_faithful, practical };

inline const char* to_string(Mode m) { return m == Mode::paper_faithful ? "paper" : "practical"; }

/// Defaults that make desk-scale runs feasible while keeping the structure.
inline ParameterOverrides practical_preset() {
  ParameterOverrides o;
  o.tau_log = std::log(1e-6);
  o.k = 40;
  o.S = 2000;
  o.sigma_bot_prime = 0.05;
  o.sigma_bot = 0.035;
  o.g_samples = 10000;
  o.grad_samples = 100000;
  return o;
}

struct OptimizerConfig {
  int n = 2;
  double R = 1.0;
  std::optional<double> B;  // taken from the oracle when absent
  double eps = 1e-3;
  double delta = 1.0 / 21.0;
  double F = 1e-3;
  Mode mode = Mode::practical;
  ParameterOverrides overrides = practical_preset();
  std::uint64_t master_seed = 0;
  double eps_oracle = 0.0;
  int workers = 1;
  std::optional<std::uint64_t> budget_calls;
  std::optional<double> budget_seconds;
  bool record_timing = false;

  void validate() const {
    require(n >= 1, "n must be >= 1");
    require(R > 0.0 && std::isfinite(R), "R must be positive");
    require(!B || (*B > 0.0 && std::isfinite(*B)), "B must be positive");
    require(eps > 0.0, "eps must be positive");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    require(F > 0.0 && F < 1.0, "F must lie in (0,1)");
    require(eps_oracle >= 0.0, "eps_oracle must be non-negative");
    require(workers >= 1, "workers must be >= 1");
    require(!budget_seconds || *budget_seconds > 0.0, "budget_seconds must be positive");
    if (mode == Mode::paper_faithful)
      require(overrides.empty(), "paper mode does not accept parameter overrides");
    else
      require(overrides.tau_log && overrides.k, "practical mode needs explicit tau and k overrides");
  }
};

/// Lengths strictly below tau, center within R, and the value chain
/// 2B (2 tau) / (10nR - R - tau) < eps.
inline bool certify_tiny(const Ellipsoid& e, const CutParams& p) {
  if (!(e.max_log_length() < p.tau_log)) return false;
  if (e.center.norm() > p.R) return false;
  const double tau = std::exp(p.tau_log);
  const double denom = 10.0 * p.n * p.R - p.R - tau;
  if (!(denom > 0.0)) return false;
  return std::log(4.0 * p.B) + p.tau_log - std::log(denom) < std::log(p.eps);
}

struct IterationRecord {
  long long iteration = 0;
  Ellipsoid ellipsoid;  // at the start of the iteration
  double log_volume = 0.0;
  int thin_count = 0;
  std::string event;  // "cut", "solution", "tiny", "failure", "budget"
  std::optional<Vector> cut_direction;
  std::optional<double> log_volume_after_cut;
  std::optional<double> log_volume_after;
  int clamp_rounds = 0;
  bool recentered = false;
  std::optional<double> z;
  std::optional<double> z_running_min;
  CutDiagnostics diagnostics;
  std::uint64_t evaluations = 0;
  std::uint64_t out_of_ball = 0;
  std::optional<double> wall_seconds;
  std::string message;
};

struct Outcome {
  enum class Type { gaussian, tiny_ellipsoid } type = Type::gaussian;
  GaussianSpec gaussian;  // the returned Gaussian; materialized for the tiny branch
  std::optional<Ellipsoid> tiny;
  std::optional<double> victory_bound;
  bool certified = false;
};

enum class RunStatus { ok, algorithm_failure, budget_exhausted, iteration_limit };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::algorithm_failure: return "algorithm_failure";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct RunTrace {
  CutParams params;
  std::vector<IterationRecord> records;
};

struct RunResult {
  RunStatus status = RunStatus::ok;
  std::string message;
  std::optional<Outcome> outcome;
  RunTrace trace;
  std::uint64_t evaluations = 0;
  std::uint64_t out_of_ball = 0;
  double wall_seconds = 0.0;
};

class BudgetExceeded : public AlgorithmFailure {
 public:
  using AlgorithmFailure::AlgorithmFailure;
};

/// Observer for streaming the trace; called once per finished record.
using RecordSink = std::function<void(const IterationRecord&)>;

inline CutParams parameters_for(const OptimizerConfig& cfg, double B) {
  return derive_parameters(cfg.n, cfg.delta, cfg.eps, B, cfg.R, cfg.F,
                           cfg.mode == Mode::paper_faithful ? ParameterOverrides{} : cfg.overrides);
}

inline RunResult optimize(const Oracle& oracle, const OptimizerConfig& cfg,
                          const RecordSink& sink = {}) {
  cfg.validate();
  require(oracle.dim() == cfg.n, "oracle dimension does not match n");
  const auto start = std::chrono::steady_clock::now();
  const double B = cfg.B.value_or(oracle.B());
  const CutParams p = parameters_for(cfg, B);

  RunResult result;
  result.trace.params = p;
  const OracleCounters base = oracle.counters();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const Checkpoint checkpoint = [&] {
    if (cfg.budget_calls && oracle.counters().evaluations - base.evaluations >= *cfg.budget_calls)
      throw BudgetExceeded("oracle call budget exhausted");
    if (cfg.budget_seconds && elapsed() >= *cfg.budget_seconds)
      throw BudgetExceeded("wall-clock budget exhausted");
  };

  Ellipsoid E = unit_ball(cfg.n, cfg.R);
  std::optional<double> z_min;
  bool halted = false;
  for (long long i = 1; i <= p.m + 1 && !halted; ++i) {
    IterationRecord rec;
    rec.iteration = i;
    rec.ellipsoid = E;
    rec.log_volume = log_volume(E);
    const OracleCounters before = oracle.counters();
    const ThinDecomposition frame = thin_decomposition(E, p.tau_log);
    rec.thin_count = static_cast<int>(frame.thin_axes.size());

    auto finish = [&] {
      const OracleCounters after = oracle.counters();
      rec.evaluations = after.evaluations - before.evaluations;
      rec.out_of_ball = after.out_of_ball - before.out_of_ball;
      if (cfg.record_timing) rec.wall_seconds = elapsed();
      if (sink) sink(rec);
      result.trace.records.push_back(rec);
    };

    if (frame.nonthin_axes.empty()) {
      rec.event = "tiny";
      Outcome out;
      out.type = Outcome::Type::tiny_ellipsoid;
      out.tiny = E;
      out.certified = certify_tiny(E, p);
      out.gaussian = GaussianSpec{identity_frame(cfg.n), E.center,
                                  Vector::Constant(cfg.n, p.tau_log - std::log(p.s))};
      result.outcome = out;
      halted = true;
      finish();
      break;
    }

    RandomSource source(cfg.master_seed, static_cast<std::uint64_t>(i), cfg.workers);
    const SamplingContext ctx{oracle, cfg.eps_oracle, source};
    CutResult cut;
    try {
      checkpoint();
      cut = find_cut(ctx, E, p, checkpoint);
    } catch (const CutFailure& failure) {
      rec.event = "failure";
      rec.message = failure.what();
      rec.diagnostics = failure.diagnostics();
      rec.z = failure.diagnostics().z;
      result.status = RunStatus::algorithm_failure;
      result.message = failure.what();
      finish();
      break;
    } catch (const BudgetExceeded& stop) {
      rec.event = "budget";
      rec.message = stop.what();
      result.status = RunStatus::budget_exhausted;
      result.message = stop.what();
      finish();
      break;
    }
    rec.diagnostics = cut.diagnostics;
    rec.z = cut.diagnostics.z;
    z_min = z_min ? std::min(*z_min, *rec.z) : *rec.z;
    rec.z_running_min = z_min;

    if (cut.solution) {
      rec.event = "solution";
      Outcome out;
      out.type = Outcome::Type::gaussian;
      out.gaussian = *cut.solution;
      out.victory_bound = cut.diagnostics.victory_bound;
      out.certified = true;
      result.outcome = out;
      halted = true;
      finish();
      break;
    }

    rec.event = "cut";
    rec.cut_direction = *cut.cut_direction;
    Ellipsoid next = apply_cut(E, *cut.cut_direction, p.tau_log);
    rec.log_volume_after_cut = log_volume(next);
    const double limit = std::log(3.0 * cfg.n * cfg.R);
    while (next.max_log_length() >= limit) {
      next = clamp_axes(next, cfg.R, cfg.n);
      ++rec.clamp_rounds;
    }
    if (next.center.norm() > cfg.R) {
      next = recenter(next, cfg.R);
      rec.recentered = true;
    }
    rec.log_volume_after = log_volume(next);
    E = std::move(next);
    finish();
  }

  if (!halted && result.status == RunStatus::ok) {
    result.status = RunStatus::iteration_limit;
    result.message = "loop ran m+1 iterations without halting";
  }
  const OracleCounters end = oracle.counters();
  result.evaluations = end.evaluations - base.evaluations;
  result.out_of_ball = end.out_of_ball - base.out_of_ball;
  result.wall_seconds = elapsed();
  return result;
}

/// Exact-evaluation summary of an outcome on a benchmark with known optimum.
struct OutcomeAssessment {
  double quantile_value = 0.0;  // (1 - delta)-quantile of f over the outcome Gaussian
  double value_at_mean = 0.0;
  double fraction_within_eps = 0.0;
};

inline OutcomeAssessment assess_outcome(const FunctionSpec& spec, const Outcome& outcome,
                                        double delta, double eps, std::size_t samples,
                                        std::uint64_t seed) {
  require(samples >= 1, "samples must be >= 1");
  const GaussianQuery q = outcome.gaussian.to_query();
  Stream rng = seed_schedule(seed, 0, 0, 0xA55E55);
  std::normal_distribution<double> normal;
  std::vector<double> values(samples);
  Vector u(spec.dim());
  std::size_t within = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (int i = 0; i < spec.dim(); ++i) u[i] = normal(rng);
    values[s] = spec(q.mean + q.factor * u);
    if (values[s] <= spec.f_star() + eps) ++within;
  }
  std::sort(values.begin(), values.end());
  const auto idx = std::min<std::size_t>(
      samples - 1, static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(samples))) - 1);
  return {values[idx], spec(q.mean), static_cast<double>(within) / static_cast<double>(samples)};
}

}  // namespace starcut
