#pragma once

// Command implementations behind the starcut executable. Each command
// returns its exit code: 0 ok, 1 configuration or usage error, 2 algorithmic
// failure, 3 property violation.

#include "starcut/optimizer.hpp"
#include "starcut/serialize.hpp"
#include "starcut/verify.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace starcut::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kAlgorithmFailure = 2, kPropertyViolation = 3 };

enum class Verbosity { quiet = 0, info = 1, debug = 2 };

inline Verbosity verbosity_from_env() {
  const char* v = std::getenv("STARCUT_LOG");
  if (!v) return Verbosity::info;
  const std::string s(v);
  if (s == "quiet" || s == "error" || s == "0") return Verbosity::quiet;
  if (s == "debug" || s == "trace" || s == "2") return Verbosity::debug;
  return Verbosity::info;
}

class Log {
 public:
  Log(std::ostream& sink, Verbosity level) : sink_(sink), level_(level) {}
  void info(const std::string& msg) const { emit(Verbosity::info, "info", msg); }
  void debug(const std::string& msg) const { emit(Verbosity::debug, "debug", msg); }
  void error(const std::string& msg) const { sink_ << "[starcut] error: " << msg << '\n'; }

 private:
  void emit(Verbosity at, const char* tag, const std::string& msg) const {
    if (static_cast<int>(level_) >= static_cast<int>(at))
      sink_ << "[starcut] " << tag << ": " << msg << '\n';
  }
  std::ostream& sink_;
  Verbosity level_;
};

// ---------------------------------------------------------------------------
// Config

struct RunConfig {
  json benchmark;
  OptimizerConfig optimizer;
  std::string out_dir = "starcut-out";
  std::string trace_name = "trace.jsonl";
  std::string outcome_name = "outcome.json";
  bool record_timing = false;
  int repeat = 1;
  std::size_t assessment_samples = 10000;
};

/// Values given on the command line; they replace config keys.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> mode;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> budget_calls;
  std::optional<double> budget_seconds;
  std::vector<std::string> sets;  // dotted.path=value
};

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require(j.is_object(), where + " must be a JSON object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    require(ok.count(it.key()) == 1, "unknown key '" + it.key() + "' in " + where);
}

inline double num(const json& j, const char* key, const std::string& where) {
  require(j.at(key).is_number(), where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

inline std::uint64_t count(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  require(v.is_number_integer() && v.get<long long>() >= 0,
          where + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

/// Sets `path` (dot separated) inside `j`. The value is parsed as JSON when
/// possible and kept as a string otherwise.
inline void apply_dotted(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    require(!part.empty(), "empty component in override path '" + path + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    require(next.is_object(), "override path '" + path + "' crosses a non-object");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

inline ParameterOverrides parse_overrides(const json& j) {
  const std::string where = "optimizer.overrides";
  detail::only_keys(j, where,
                    {"tau", "tau_log", "k", "S", "sigma_bot_prime", "sigma_bot", "g_samples",
                     "grad_samples", "g_iteration_cap"});
  ParameterOverrides o;
  require(!(j.contains("tau") && j.contains("tau_log")), "give either tau or tau_log, not both");
  if (j.contains("tau")) {
    const double tau = detail::num(j, "tau", where);
    require(tau > 0.0, "tau must be positive");
    o.tau_log = std::log(tau);
  }
  if (j.contains("tau_log")) o.tau_log = detail::num(j, "tau_log", where);
  if (j.contains("k")) o.k = static_cast<long long>(detail::count(j, "k", where));
  if (j.contains("S")) o.S = static_cast<long long>(detail::count(j, "S", where));
  if (j.contains("sigma_bot_prime")) o.sigma_bot_prime = detail::num(j, "sigma_bot_prime", where);
  if (j.contains("sigma_bot")) o.sigma_bot = detail::num(j, "sigma_bot", where);
  if (j.contains("g_samples")) o.g_samples = detail::count(j, "g_samples", where);
  if (j.contains("grad_samples")) o.grad_samples = detail::count(j, "grad_samples", where);
  if (j.contains("g_iteration_cap"))
    o.g_iteration_cap = static_cast<long long>(detail::count(j, "g_iteration_cap", where));
  return o;
}

/// Overlays user overrides on the practical preset.
inline ParameterOverrides merge_overrides(ParameterOverrides base, const ParameterOverrides& top) {
  if (top.tau_log) base.tau_log = top.tau_log;
  if (top.k) base.k = top.k;
  if (top.S) base.S = top.S;
  if (top.sigma_bot_prime) base.sigma_bot_prime = top.sigma_bot_prime;
  if (top.sigma_bot) base.sigma_bot = top.sigma_bot;
  if (top.g_samples) base.g_samples = top.g_samples;
  if (top.grad_samples) base.grad_samples = top.grad_samples;
  if (top.g_iteration_cap) base.g_iteration_cap = top.g_iteration_cap;
  return base;
}

/// Validates the whole config and resolves the benchmark. No oracle is built.
inline RunConfig parse_run_config(const json& j, FunctionSpec* resolved = nullptr) {
  detail::only_keys(j, "config", {"benchmark", "optimizer", "output", "repeat"});
  require(j.contains("benchmark"), "config needs 'benchmark'");
  require(j.contains("optimizer"), "config needs 'optimizer'");
  RunConfig rc;
  rc.benchmark = j.at("benchmark");
  const FunctionSpec spec = resolve_benchmark(rc.benchmark);
  if (resolved) *resolved = spec;

  const json& o = j.at("optimizer");
  const std::string where = "optimizer";
  detail::only_keys(o, where,
                    {"n", "R", "B", "eps", "delta", "F", "mode", "overrides", "eps_oracle", "seed",
                     "workers", "budget_calls", "budget_seconds"});
  OptimizerConfig& cfg = rc.optimizer;
  cfg.n = spec.dim();
  if (o.contains("n")) {
    require(o.at("n").is_number_integer(), "optimizer.n must be an integer");
    require(o.at("n").get<int>() == spec.dim(), "optimizer.n does not match the benchmark dimension");
  }
  require(o.contains("R"), "optimizer needs 'R'");
  cfg.R = detail::num(o, "R", where);
  if (o.contains("B")) cfg.B = detail::num(o, "B", where);
  if (o.contains("eps")) cfg.eps = detail::num(o, "eps", where);
  if (o.contains("delta")) cfg.delta = detail::num(o, "delta", where);
  if (o.contains("F")) cfg.F = detail::num(o, "F", where);
  if (o.contains("eps_oracle")) cfg.eps_oracle = detail::num(o, "eps_oracle", where);
  if (o.contains("seed")) cfg.master_seed = detail::count(o, "seed", where);
  if (o.contains("workers")) cfg.workers = static_cast<int>(detail::count(o, "workers", where));
  if (o.contains("budget_calls")) cfg.budget_calls = detail::count(o, "budget_calls", where);
  if (o.contains("budget_seconds")) cfg.budget_seconds = detail::num(o, "budget_seconds", where);
  const std::string mode = o.value("mode", std::string("practical"));
  require(mode == "practical" || mode == "paper", "optimizer.mode must be 'practical' or 'paper'");
  cfg.mode = mode == "paper" ? Mode::paper_faithful : Mode::practical;
  const ParameterOverrides user = o.contains("overrides") ? parse_overrides(o.at("overrides"))
                                                          : ParameterOverrides{};
  cfg.overrides = cfg.mode == Mode::paper_faithful ? user : merge_overrides(practical_preset(), user);

  if (j.contains("output")) {
    const json& out = j.at("output");
    detail::only_keys(out, "output", {"dir", "trace", "outcome", "record_timing", "assessment_samples"});
    if (out.contains("dir")) rc.out_dir = out.at("dir").get<std::string>();
    if (out.contains("trace")) rc.trace_name = out.at("trace").get<std::string>();
    if (out.contains("outcome")) rc.outcome_name = out.at("outcome").get<std::string>();
    if (out.contains("record_timing")) {
      require(out.at("record_timing").is_boolean(), "output.record_timing must be a boolean");
      rc.record_timing = out.at("record_timing").get<bool>();
    }
    if (out.contains("assessment_samples"))
      rc.assessment_samples = detail::count(out, "assessment_samples", "output");
  }
  cfg.record_timing = rc.record_timing;
  if (j.contains("repeat")) {
    rc.repeat = static_cast<int>(detail::count(j, "repeat", "config"));
    require(rc.repeat >= 1, "repeat must be >= 1");
  }
  cfg.validate();
  // Surface schedule errors (empty mesh range and the like) before any run.
  parameters_for(cfg, cfg.B.value_or(std::max(1.0, spec.value_bound(10.0 * cfg.n * cfg.R))));
  require(spec.star_center().norm() <= cfg.R, "benchmark star center lies outside the radius-R ball");
  return rc;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "config file '" + path + "' is not valid JSON");
  return j;
}

inline void apply_flags(json& j, const FlagOverrides& f) {
  if (f.seed) j["optimizer"]["seed"] = *f.seed;
  if (f.workers) j["optimizer"]["workers"] = *f.workers;
  if (f.mode) j["optimizer"]["mode"] = *f.mode;
  if (f.budget_calls) j["optimizer"]["budget_calls"] = *f.budget_calls;
  if (f.budget_seconds) j["optimizer"]["budget_seconds"] = *f.budget_seconds;
  if (f.out_dir) j["output"]["dir"] = *f.out_dir;
  for (const auto& s : f.sets) apply_dotted(j, s);
}

// ---------------------------------------------------------------------------
// Commands

inline std::string indexed(const std::string& name, int run, int repeat) {
  if (repeat == 1) return name;
  const auto dot = name.rfind('.');
  const std::string stem = dot == std::string::npos ? name : name.substr(0, dot);
  const std::string ext = dot == std::string::npos ? "" : name.substr(dot);
  return stem + "-" + std::to_string(run) + ext;
}

inline int cmd_optimize(const std::string& config_path, const FlagOverrides& flags, std::ostream& out,
                        std::ostream& err) {
  const Log log(err, verbosity_from_env());
  RunConfig rc;
  FunctionSpec spec;
  try {
    json j = load_json_file(config_path);
    apply_flags(j, flags);
    rc = parse_run_config(j, &spec);
  } catch (const std::exception& e) {
    log.error(std::string("invalid config: ") + e.what());
    return kConfigError;
  }

  std::unique_ptr<Oracle> oracle;
  try {
    oracle = std::make_unique<Oracle>(spec, rc.optimizer.R, rc.optimizer.B);
    std::filesystem::create_directories(rc.out_dir);
  } catch (const std::exception& e) {
    log.error(e.what());
    return kConfigError;
  }

  int exit_code = kOk;
  out << std::left << std::setw(5) << "run" << std::setw(19) << "status" << std::setw(7) << "iters"
      << std::setw(16) << "value_gap" << std::setw(16) << "victory_lb" << std::setw(14) << "oracle_calls"
      << "wall_s\n";
  for (int run = 0; run < rc.repeat; ++run) {
    OptimizerConfig cfg = rc.optimizer;
    cfg.master_seed = rc.optimizer.master_seed + static_cast<std::uint64_t>(run);
    const std::filesystem::path trace_path = std::filesystem::path(rc.out_dir) / indexed(rc.trace_name, run, rc.repeat);
    const std::filesystem::path outcome_path =
        std::filesystem::path(rc.out_dir) / indexed(rc.outcome_name, run, rc.repeat);
    std::ofstream trace(trace_path);
    if (!trace) {
      log.error("cannot write " + trace_path.string());
      return kConfigError;
    }
    log.info("run " + std::to_string(run) + " seed " + std::to_string(cfg.master_seed));
    RunResult result;
    try {
      result = optimize(*oracle, cfg, [&](const IterationRecord& rec) {
        trace << to_json(rec).dump() << '\n';
        trace.flush();
        log.debug("iteration " + std::to_string(rec.iteration) + " " + rec.event + " log_volume " +
                  std::to_string(rec.log_volume));
      });
    } catch (const AlgorithmFailure& e) {
      log.error(e.what());
      return kAlgorithmFailure;
    } catch (const InvalidInput& e) {
      log.error(e.what());
      return kConfigError;
    }

    json outcome = outcome_json(result, cfg.master_seed);
    std::optional<double> gap;
    if (result.outcome) {
      const OutcomeAssessment a = assess_outcome(spec, *result.outcome, result.trace.params.delta,
                                                 result.trace.params.eps, rc.assessment_samples, cfg.master_seed);
      gap = a.quantile_value - spec.f_star();
      outcome["certified_bounds"]["value_quantile"] = a.quantile_value;
      outcome["certified_bounds"]["value_gap"] = *gap;
      outcome["certified_bounds"]["fraction_within_eps"] = a.fraction_within_eps;
      outcome["certified_bounds"]["f_star"] = spec.f_star();
    }
    if (rc.record_timing) outcome["wall_seconds"] = result.wall_seconds;
    validate_outcome_json(outcome);
    std::ofstream(outcome_path) << outcome.dump(2) << '\n';

    auto short_num = [](std::optional<double> v) {
      if (!v) return std::string("-");
      std::ostringstream s;
      s << std::setprecision(4) << *v;
      return s.str();
    };
    const std::string gap_s = short_num(gap);
    const std::string vlb_s = short_num(result.outcome ? result.outcome->victory_bound : std::nullopt);
    out << std::setw(5) << run << std::setw(19) << to_string(result.status) << std::setw(7)
        << result.trace.records.size() << std::setw(16) << gap_s << std::setw(16) << vlb_s
        << std::setw(14) << result.evaluations << std::fixed << std::setprecision(2) << result.wall_seconds
        << std::defaultfloat << '\n';
    if (result.status != RunStatus::ok) {
      log.error("run " + std::to_string(run) + ": " + result.message);
      if (!result.trace.records.empty())
        err << to_json(result.trace.records.back().diagnostics).dump() << '\n';
      exit_code = kAlgorithmFailure;
    }
  }
  return exit_code;
}

inline int cmd_check(const std::string& benchmark, long long trials, std::uint64_t seed,
                     const std::optional<std::vector<double>>& center, std::ostream& out,
                     std::ostream& err) {
  const Log log(err, verbosity_from_env());
  FunctionSpec spec;
  Vector candidate;
  try {
    require(trials >= 1, "trials must be >= 1");
    json ref = json::parse(benchmark, nullptr, false);
    if (ref.is_discarded() || ref.is_string()) ref = json{{"name", benchmark}};
    spec = resolve_benchmark(ref);
    candidate = spec.star_center();
    if (center) {
      require(static_cast<int>(center->size()) == spec.dim(), "center has wrong dimension");
      candidate = Eigen::Map<const Vector>(center->data(), spec.dim());
    }
  } catch (const std::exception& e) {
    log.error(e.what());
    return kConfigError;
  }
  Stream rng = seed_schedule(seed, 0, 0, 0);
  const StarConvexityReport report = check_star_convexity(spec, candidate, static_cast<int>(trials), rng);
  json j = {{"benchmark", spec.to_json()},
            {"candidate_center", to_json(candidate)},
            {"trials", report.trials},
            {"passed", report.passed},
            {"worst_violation", report.worst_violation}};
  if (report.witness) {
    const Vector& x = report.witness->x;
    const double a = report.witness->alpha;
    const Vector mid = a * candidate + (1.0 - a) * x;
    j["witness"] = {{"x", to_json(x)},
                    {"alpha", a},
                    {"f_mid", spec(mid)},
                    {"interpolation", a * spec(candidate) + (1.0 - a) * spec(x)}};
  } else {
    j["witness"] = nullptr;
  }
  out << j.dump(2) << '\n';
  return report.passed ? kOk : kPropertyViolation;
}

inline int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const Log log(err, verbosity_from_env());
  const auto& table = verify::suites();
  auto it = table.find(suite);
  if (it == table.end()) {
    std::string names;
    for (const auto& [name, _] : table) names += " " + name;
    log.error("unknown suite '" + suite + "'; available:" + names);
    return kConfigError;
  }
  const verify::Report report = it->second(seed);
  out << report.to_json().dump(2) << '\n';
  return report.passed ? kOk : kPropertyViolation;
}

inline int cmd_catalog(std::ostream& out) {
  for (const auto& [name, j] : catalog()) out << name << '\t' << j.dump() << '\n';
  return kOk;
}

}  // namespace starcut::cli
