#pragma once

// JSON forms of ellipsoids, Gaussians, parameters, trace records and
// outcomes, plus structural validators for the emitted artifacts.

#include "starcut/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace starcut {

inline json to_json(const Vector& v) { return detail::vector_to_json(v); }

inline json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(m.row(r).transpose()));
  return rows;
}

inline Matrix matrix_from_rows(const json& j, int n) {
  require(j.is_array() && static_cast<int>(j.size()) == n, "matrix must have n rows");
  Matrix m(n, n);
  for (int r = 0; r < n; ++r) {
    const Vector row = detail::vector_from_json(j[static_cast<std::size_t>(r)], "matrix row");
    require(row.size() == n, "matrix must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

inline json to_json(const Ellipsoid& e) {
  return {{"center", to_json(e.center)},
          {"basis", matrix_rows(e.basis)},
          {"log_lengths", to_json(e.log_lengths)}};
}

inline Ellipsoid ellipsoid_from_json(const json& j) {
  require(j.is_object() && j.contains("center") && j.contains("basis") && j.contains("log_lengths"),
          "ellipsoid needs center, basis and log_lengths");
  Ellipsoid e;
  e.center = detail::vector_from_json(j.at("center"), "center");
  const int n = e.dim();
  e.basis = matrix_from_rows(j.at("basis"), n);
  e.log_lengths = detail::vector_from_json(j.at("log_lengths"), "log_lengths");
  require(e.log_lengths.size() == n, "log_lengths has wrong dimension");
  return e;
}

/// Gaussian in original coordinates: mean and the axis directions with
/// their log widths.
inline json to_json(const GaussianSpec& g) {
  const int n = g.dim();
  Vector log_widths(n);
  for (int i = 0; i < n; ++i) log_widths[i] = g.frame->log_scale(i) + g.log_widths[i];
  return {{"mean", to_json(g.frame->from_normalized(g.mean))},
          {"axes", matrix_rows(g.frame->basis)},
          {"log_widths", to_json(log_widths)}};
}

inline json to_json(const CutParams& p) {
  json j = {{"n", p.n},
            {"delta_input", p.delta_input},
            {"delta", p.delta},
            {"eps", p.eps},
            {"eps_prime", p.eps_prime},
            {"B", p.B},
            {"R", p.R},
            {"F", p.F},
            {"s", p.s},
            {"sigma_bot_prime", p.sigma_bot_prime},
            {"sigma_bot", p.sigma_bot},
            {"tau_prime_log", p.tau_prime_log},
            {"tau_log", p.tau_log},
            {"eta_log", p.eta_log},
            {"k", p.k},
            {"S", p.S},
            {"g_accuracy", p.g_accuracy},
            {"g_threshold", p.g_threshold},
            {"grad_axis_accuracy", p.grad_axis_accuracy},
            {"g_iteration_cap", p.g_iteration_cap},
            {"m", p.m},
            {"paper_faithful", p.paper_faithful}};
  j["g_samples"] = p.g_samples ? json(*p.g_samples) : json(nullptr);
  j["grad_samples"] = p.grad_samples ? json(*p.grad_samples) : json(nullptr);
  return j;
}

namespace detail {
template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}
inline json optional_json(const std::optional<Vector>& v) { return v ? to_json(*v) : json(nullptr); }
}  // namespace detail

inline json to_json(const CutDiagnostics& d) {
  return {{"z", d.z},
          {"halted_mesh_index", d.halted_mesh_index},
          {"mesh_iterations", d.mesh_iterations},
          {"g_iterations", d.g_iterations},
          {"accepted_mu", detail::optional_json(d.accepted_mu)},
          {"accepted_log_sigma_top", detail::optional_json(d.accepted_log_sigma_top)},
          {"g_estimate", detail::optional_json(d.g_estimate)},
          {"gradient_norm", detail::optional_json(d.gradient_norm)},
          {"victory_bound", detail::optional_json(d.victory_bound)},
          {"floored_widths", d.floored_widths}};
}

inline json to_json(const IterationRecord& r) {
  json j = {{"iteration", r.iteration},
            {"event", r.event},
            {"ellipsoid", to_json(r.ellipsoid)},
            {"log_volume", r.log_volume},
            {"log_lengths", to_json(r.ellipsoid.log_lengths)},
            {"thin_count", r.thin_count},
            {"cut_direction", detail::optional_json(r.cut_direction)},
            {"log_volume_after_cut", detail::optional_json(r.log_volume_after_cut)},
            {"log_volume_after", detail::optional_json(r.log_volume_after)},
            {"clamp_rounds", r.clamp_rounds},
            {"recentered", r.recentered},
            {"z", detail::optional_json(r.z)},
            {"z_running_min", detail::optional_json(r.z_running_min)},
            {"diagnostics", to_json(r.diagnostics)},
            {"evaluations", r.evaluations},
            {"out_of_ball", r.out_of_ball}};
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

inline json outcome_json(const RunResult& result, std::uint64_t master_seed) {
  json j = {{"status", to_string(result.status)},
            {"seeds", {{"master_seed", master_seed}}},
            {"evaluations", result.evaluations},
            {"out_of_ball", result.out_of_ball},
            {"iterations", result.trace.records.size()},
            {"params", to_json(result.trace.params)}};
  if (!result.message.empty()) j["message"] = result.message;
  if (!result.outcome) {
    j["type"] = nullptr;
    return j;
  }
  const Outcome& o = *result.outcome;
  j["type"] = o.type == Outcome::Type::gaussian ? "gaussian" : "tiny_ellipsoid";
  const json g = to_json(o.gaussian);
  j["mean"] = g["mean"];
  j["axes"] = g["axes"];
  j["log_widths"] = g["log_widths"];
  json bounds = {{"certified", o.certified}};
  if (o.victory_bound) bounds["victory_lower_bound"] = *o.victory_bound;
  if (o.tiny) {
    j["ellipsoid"] = to_json(*o.tiny);
    bounds["value_gap_bound"] = 2.0 * result.trace.params.B * 2.0 * std::exp(result.trace.params.tau_log) /
                                (10.0 * result.trace.params.n * result.trace.params.R -
                                 result.trace.params.R - std::exp(result.trace.params.tau_log));
  }
  j["certified_bounds"] = bounds;
  return j;
}

// ---------------------------------------------------------------------------
// Validators: throw InvalidInput describing the first structural problem.

namespace detail {

inline void expect(const json& j, const char* key, bool (json::*pred)() const noexcept,
                   const char* what) {
  require(j.contains(key), std::string("missing key '") + key + "'");
  require((j.at(key).*pred)(), std::string("key '") + key + "' must be " + what);
}

inline void expect_number_array(const json& j, const char* key, std::size_t n) {
  require(j.contains(key) && j.at(key).is_array() && j.at(key).size() == n,
          std::string("key '") + key + "' must be an array of length " + std::to_string(n));
  for (const auto& v : j.at(key)) require(v.is_number(), std::string("key '") + key + "' must hold numbers");
}

inline void expect_square(const json& j, const char* key, std::size_t n) {
  require(j.contains(key) && j.at(key).is_array() && j.at(key).size() == n,
          std::string("key '") + key + "' must have n rows");
  for (const auto& row : j.at(key)) {
    require(row.is_array() && row.size() == n, std::string("key '") + key + "' must be square");
    for (const auto& v : row) require(v.is_number(), std::string("key '") + key + "' must hold numbers");
  }
}

inline void validate_ellipsoid_json(const json& e) {
  require(e.is_object(), "ellipsoid must be an object");
  require(e.contains("center") && e.at("center").is_array(), "ellipsoid needs center");
  const std::size_t n = e.at("center").size();
  expect_number_array(e, "center", n);
  expect_square(e, "basis", n);
  expect_number_array(e, "log_lengths", n);
}

}  // namespace detail

inline void validate_record_json(const json& j) {
  using detail::expect;
  require(j.is_object(), "record must be an object");
  expect(j, "iteration", &json::is_number_integer, "an integer");
  expect(j, "event", &json::is_string, "a string");
  static const std::set<std::string> events = {"cut", "solution", "tiny", "failure", "budget"};
  require(events.count(j.at("event").get<std::string>()) == 1, "unknown event");
  require(j.contains("ellipsoid"), "missing key 'ellipsoid'");
  detail::validate_ellipsoid_json(j.at("ellipsoid"));
  const std::size_t n = j.at("ellipsoid").at("center").size();
  expect(j, "log_volume", &json::is_number, "a number");
  detail::expect_number_array(j, "log_lengths", n);
  expect(j, "thin_count", &json::is_number_integer, "an integer");
  expect(j, "evaluations", &json::is_number_unsigned, "a non-negative integer");
  expect(j, "out_of_ball", &json::is_number_unsigned, "a non-negative integer");
  expect(j, "diagnostics", &json::is_object, "an object");
  require(j.contains("cut_direction"), "missing key 'cut_direction'");
  if (j.at("event") == "cut") {
    detail::expect_number_array(j, "cut_direction", n);
    expect(j, "log_volume_after_cut", &json::is_number, "a number");
    expect(j, "log_volume_after", &json::is_number, "a number");
  } else {
    require(j.at("cut_direction").is_null(), "cut_direction must be null without a cut");
  }
}

inline void validate_outcome_json(const json& j) {
  using detail::expect;
  require(j.is_object(), "outcome must be an object");
  expect(j, "status", &json::is_string, "a string");
  expect(j, "seeds", &json::is_object, "an object");
  expect(j, "params", &json::is_object, "an object");
  expect(j, "evaluations", &json::is_number_unsigned, "a non-negative integer");
  require(j.contains("type"), "missing key 'type'");
  if (j.at("type").is_null()) {
    require(j.at("status") != "ok", "an ok run must carry an outcome");
    return;
  }
  const std::string type = j.at("type").get<std::string>();
  require(type == "gaussian" || type == "tiny_ellipsoid", "unknown outcome type");
  require(j.contains("mean") && j.at("mean").is_array(), "missing key 'mean'");
  const std::size_t n = j.at("mean").size();
  detail::expect_number_array(j, "mean", n);
  detail::expect_square(j, "axes", n);
  detail::expect_number_array(j, "log_widths", n);
  expect(j, "certified_bounds", &json::is_object, "an object");
  if (type == "tiny_ellipsoid") {
    require(j.contains("ellipsoid"), "tiny outcome needs its ellipsoid");
    detail::validate_ellipsoid_json(j.at("ellipsoid"));
  }
}

}  // namespace starcut
