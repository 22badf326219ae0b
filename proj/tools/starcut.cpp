#include "starcut/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace starcut::cli;
  CLI::App app{"Star-convex cutting-plane optimizer"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;
  auto* opt = app.add_subcommand("optimize", "run the optimizer from a JSON config");
  opt->add_option("--config", config_path, "run configuration (JSON)")->required();
  opt->add_option("--seed", flags.seed, "master seed");
  opt->add_option("--workers", flags.workers, "sampling worker threads");
  opt->add_option("--mode", flags.mode, "practical or paper");
  opt->add_option("--out", flags.out_dir, "output directory");
  opt->add_option("--budget-calls", flags.budget_calls, "oracle call budget");
  opt->add_option("--budget-seconds", flags.budget_seconds, "wall-clock budget");
  opt->add_option("--set", flags.sets, "dotted config override, e.g. optimizer.eps=1e-4");

  std::string benchmark;
  long long trials = 10000;
  std::uint64_t check_seed = 0;
  std::optional<std::vector<double>> center;
  auto* check = app.add_subcommand("check", "randomized star-convexity test of a benchmark");
  check->add_option("benchmark", benchmark, "catalog name or JSON function spec")->required();
  check->add_option("--trials", trials, "number of (x, alpha) trials");
  check->add_option("--seed", check_seed, "seed");
  check->add_option("--center", center, "candidate star center (defaults to the declared one)");

  std::string suite;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  verify->add_option("suite", suite, "suite name")->required();
  verify->add_option("--seed", verify_seed, "seed");

  auto* list = app.add_subcommand("catalog", "list the benchmark presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (opt->parsed()) return cmd_optimize(config_path, flags, std::cout, std::cerr);
    if (check->parsed()) return cmd_check(benchmark, trials, check_seed, center, std::cout, std::cerr);
    if (verify->parsed()) return cmd_verify(suite, verify_seed, std::cout, std::cerr);
    if (list->parsed()) return cmd_catalog(std::cout);
  } catch (const std::exception& e) {
    std::cerr << "[starcut] error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
