#include "starcut/serialize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace starcut;

namespace {

OptimizerConfig practical_config(double R, std::uint64_t seed) {
  OptimizerConfig cfg;
  cfg.n = 2;
  cfg.R = R;
  cfg.master_seed = seed;
  return cfg;
}

std::string serialized(const RunResult& r) {
  std::ostringstream out;
  for (const auto& rec : r.trace.records) out << to_json(rec).dump() << '\n';
  return out.str();
}

FunctionSpec sphere_at(double a, double b) {
  return resolve_benchmark({{"name", "sphere"}, {"center", {a, b}}});
}

}  // namespace

TEST(CertifyTiny, Cases) {
  const CutParams p = derive_parameters(2, 1.0 / 21.0, 1e-3, 10, 10, 1e-3);
  const double half = p.tau_log - std::log(2.0);
  Ellipsoid e{Vector::Zero(2), Matrix::Identity(2, 2), Vector::Constant(2, half)};
  EXPECT_TRUE(certify_tiny(e, p));
  Ellipsoid wide = e;
  wide.log_lengths[1] = p.tau_log + std::log(2.0);
  EXPECT_FALSE(certify_tiny(wide, p));
  Ellipsoid far = e;
  far.center[0] = 2 * p.R;
  EXPECT_FALSE(certify_tiny(far, p));
}

TEST(Config, ModeRules) {
  OptimizerConfig cfg = practical_config(10, 0);
  EXPECT_NO_THROW(cfg.validate());
  cfg.mode = Mode::paper_faithful;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg.overrides = {};
  EXPECT_NO_THROW(cfg.validate());
  cfg.mode = Mode::practical;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = practical_config(-1, 0);
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Optimize, SphereConvergesWithSoundTrace) {
  const FunctionSpec f = sphere_at(3.1, -2.4);
  Oracle oracle(f, 10.0);
  const OptimizerConfig cfg = practical_config(10.0, 1);
  std::vector<json> streamed;
  const RunResult r = optimize(oracle, cfg, [&](const IterationRecord& rec) { streamed.push_back(to_json(rec)); });
  ASSERT_EQ(r.status, RunStatus::ok) << r.message;
  ASSERT_TRUE(r.outcome);
  EXPECT_EQ(r.outcome->type, Outcome::Type::gaussian);
  ASSERT_TRUE(r.outcome->victory_bound);
  EXPECT_LE(*r.outcome->victory_bound, f.f_star() + 1e-12);

  const OutcomeAssessment a = assess_outcome(f, *r.outcome, r.trace.params.delta, r.trace.params.eps, 10000, 1);
  EXPECT_LE(a.quantile_value, f.f_star() + 1e-3);
  EXPECT_LE(a.value_at_mean, f.f_star() + 1e-3);

  const CutParams& p = r.trace.params;
  const int n = p.n;
  EXPECT_LE(static_cast<long long>(r.trace.records.size()), p.m + 1);
  ASSERT_EQ(streamed.size(), r.trace.records.size());
  const double floor = axis_floor_log(n, p.tau_log);
  double previous_after = log_volume(unit_ball(n, 10.0));
  for (const auto& rec : r.trace.records) {
    validate_record_json(to_json(rec));
    EXPECT_GE(rec.ellipsoid.min_log_length(), floor);
    EXPECT_LE(rec.ellipsoid.max_log_length(), std::log(3.0 * n * 10.0));
    EXPECT_LE(rec.ellipsoid.center.norm(), 10.0 + 1e-9);
    EXPECT_NEAR(rec.log_volume, previous_after, 1e-12);
    if (rec.event == "cut") {
      EXPECT_LE(*rec.log_volume_after_cut - rec.log_volume, -1.0 / (6.0 * (n + 1)) + 1e-12);
      EXPECT_LE(*rec.log_volume_after, *rec.log_volume_after_cut + 1e-12);
      previous_after = *rec.log_volume_after;
      EXPECT_FALSE(rec.wall_seconds);
    }
  }
  EXPECT_EQ(r.trace.records.back().event, "solution");
  validate_outcome_json(outcome_json(r, cfg.master_seed));
}

TEST(Optimize, RerunIsByteIdentical) {
  const FunctionSpec f = sphere_at(-1.0, 0.5);
  OptimizerConfig cfg = practical_config(4.0, 9);
  Oracle a(f, 4.0), b(f, 4.0);
  const RunResult r1 = optimize(a, cfg), r2 = optimize(b, cfg);
  EXPECT_EQ(serialized(r1), serialized(r2));
  EXPECT_EQ(outcome_json(r1, 9).dump(), outcome_json(r2, 9).dump());
  cfg.master_seed = 10;
  Oracle c(f, 4.0);
  EXPECT_NE(serialized(optimize(c, cfg)), serialized(r1));
}

TEST(Optimize, NearConstantHaltsAtFirstIteration) {
  const json spec = {{"kind", "sum"},
                     {"components",
                      {{{"kind", "constant"}, {"dim", 2}, {"value", 5.0}},
                       {{"kind", "linear_extension"},
                        {"dim", 2},
                        {"profile", {{"type", "oscillating"}, {"base", 1e-9}, {"amplitude", 0.0}, {"frequency", 1.0}}}}}}};
  Oracle oracle(FunctionSpec::from_json(spec), 10.0);
  const RunResult r = optimize(oracle, practical_config(10.0, 2));
  ASSERT_EQ(r.status, RunStatus::ok);
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].event, "solution");
  EXPECT_EQ(r.outcome->type, Outcome::Type::gaussian);
}

TEST(Optimize, SamplerCapGivesStructuredFailure) {
  Oracle oracle(sphere_at(3.0, -2.0), 10.0);
  OptimizerConfig cfg = practical_config(10.0, 3);
  cfg.overrides.g_iteration_cap = 0;
  const RunResult r = optimize(oracle, cfg);
  EXPECT_EQ(r.status, RunStatus::algorithm_failure);
  EXPECT_FALSE(r.outcome);
  ASSERT_FALSE(r.trace.records.empty());
  EXPECT_EQ(r.trace.records.back().event, "failure");
  validate_outcome_json(outcome_json(r, 3));
}

TEST(Optimize, CallBudgetStopsGracefully) {
  Oracle oracle(sphere_at(3.0, -2.0), 10.0);
  OptimizerConfig cfg = practical_config(10.0, 4);
  cfg.budget_calls = 500000;
  const RunResult r = optimize(oracle, cfg);
  EXPECT_EQ(r.status, RunStatus::budget_exhausted);
  EXPECT_EQ(r.trace.records.back().event, "budget");
  EXPECT_GE(r.evaluations, 500000u);
}

TEST(Optimize, TimingOnlyWhenRequested) {
  Oracle oracle(sphere_at(0.2, 0.1), 1.0);
  OptimizerConfig cfg = practical_config(1.0, 5);
  cfg.record_timing = true;
  cfg.budget_calls = 300000;
  const RunResult r = optimize(oracle, cfg);
  ASSERT_FALSE(r.trace.records.empty());
  EXPECT_TRUE(r.trace.records.front().wall_seconds);
  EXPECT_TRUE(to_json(r.trace.records.front()).contains("wall_seconds"));
}

TEST(Serialize, EllipsoidRoundTrip) {
  Ellipsoid e{(Vector(2) << 1.5, -2).finished(), Matrix::Identity(2, 2), (Vector(2) << -3, 0.25).finished()};
  e.basis << 0, 1, 1, 0;
  const Ellipsoid back = ellipsoid_from_json(json::parse(to_json(e).dump()));
  EXPECT_EQ(back.center, e.center);
  EXPECT_EQ(back.basis, e.basis);
  EXPECT_EQ(back.log_lengths, e.log_lengths);
  EXPECT_THROW(validate_record_json(json{{"iteration", 1}}), InvalidInput);
  EXPECT_THROW(validate_outcome_json(json{{"status", "ok"}}), InvalidInput);
}
