#include "starcut/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace starcut;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
};

// Runs the installed binary through the shell; stderr is folded into out.
CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(STARCUT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("starcut-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  json sphere_config(double R = 10.0) const {
    return {{"benchmark", {{"name", "sphere"}, {"center", {3.1, -2.4}}}},
            {"optimizer", {{"R", R}, {"eps", 1e-3}, {"seed", 7}}},
            {"output", {{"dir", (dir_ / "out").string()}}}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, OptimizeSphereWritesValidOutputs) {
  const CliRun r = run_cli("optimize --config " + write_config(sphere_config()));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("value_gap"), std::string::npos);
  const json outcome = json::parse(slurp(dir_ / "out" / "outcome.json"));
  validate_outcome_json(outcome);
  EXPECT_EQ(outcome["status"], "ok");
  EXPECT_LE(outcome["certified_bounds"]["value_gap"].get<double>(), 1e-3);
  EXPECT_FALSE(outcome.contains("wall_seconds"));

  std::istringstream lines(slurp(dir_ / "out" / "trace.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    validate_record_json(json::parse(line));
    ++count;
  }
  EXPECT_GE(count, 1);
}

TEST_F(CliTest, SameSeedGivesIdenticalTrace) {
  json cfg = sphere_config(4.0);
  cfg["output"]["dir"] = (dir_ / "a").string();
  ASSERT_EQ(run_cli("optimize --config " + write_config(cfg, "a.json")).code, 0);
  cfg["output"]["dir"] = (dir_ / "b").string();
  ASSERT_EQ(run_cli("optimize --config " + write_config(cfg, "b.json")).code, 0);
  const std::string a = slurp(dir_ / "a" / "trace.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "trace.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a" / "outcome.json"), slurp(dir_ / "b" / "outcome.json"));
}

TEST_F(CliTest, NegativeRadiusIsConfigError) {
  const CliRun r = run_cli("optimize --config " + write_config(sphere_config(-1.0)));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("R must be positive"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir_ / "out" / "trace.jsonl"));
}

TEST_F(CliTest, UnknownKeyAndBadOverrideRejected) {
  json cfg = sphere_config();
  cfg["optimizer"]["learning_rate"] = 0.1;
  EXPECT_EQ(run_cli("optimize --config " + write_config(cfg)).code, 1);
  cfg = sphere_config();
  cfg["optimizer"]["overrides"] = {{"tau", 1e-6}, {"tau_log", -12.0}};
  EXPECT_EQ(run_cli("optimize --config " + write_config(cfg)).code, 1);
  cfg = sphere_config();
  cfg["optimizer"]["mode"] = "paper";
  cfg["optimizer"]["overrides"] = {{"k", 5}};
  EXPECT_EQ(run_cli("optimize --config " + write_config(cfg)).code, 1);
  EXPECT_EQ(run_cli("optimize --config " + (dir_ / "missing.json").string()).code, 1);
}

TEST_F(CliTest, SamplerCapExitsTwoWithDiagnostics) {
  const CliRun r = run_cli("optimize --config " + write_config(sphere_config()) +
                        " --set optimizer.overrides.g_iteration_cap=0");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("g_iterations"), std::string::npos) << r.out;
  const json outcome = json::parse(slurp(dir_ / "out" / "outcome.json"));
  EXPECT_EQ(outcome["status"], "algorithm_failure");
}

TEST_F(CliTest, BudgetFlagStopsRun) {
  const CliRun r = run_cli("optimize --config " + write_config(sphere_config()) + " --budget-calls 1000");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("budget_exhausted"), std::string::npos) << r.out;
}

TEST_F(CliTest, CheckCommand) {
  CliRun r = run_cli("check power_mean --trials 3000");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(json::parse(r.out)["passed"], true);

  r = run_cli("check broken_min --trials 5000 --seed 3");
  ASSERT_EQ(r.code, 3) << r.out;
  const json report = json::parse(r.out);
  const json& w = report["witness"];
  ASSERT_TRUE(w.is_object());
  const FunctionSpec f = resolve_benchmark(json("broken_min"));
  Vector x(2);
  x << w["x"][0].get<double>(), w["x"][1].get<double>();
  const double a = w["alpha"].get<double>();
  EXPECT_DOUBLE_EQ(f((1 - a) * x), w["f_mid"].get<double>());
  EXPECT_GT(w["f_mid"].get<double>(), w["interpolation"].get<double>());

  EXPECT_EQ(run_cli("check sphere --trials 0").code, 1);
  EXPECT_EQ(run_cli("check no_such_function").code, 1);
  EXPECT_EQ(run_cli("check sphere --center 1 2 3").code, 1);
}

TEST_F(CliTest, VerifySuites) {
  for (const char* suite : {"ellipsoid-geometry", "blur-estimators", "double-sampling", "tail-lemma"}) {
    const CliRun r = run_cli(std::string("verify ") + suite + " --seed 1");
    EXPECT_EQ(r.code, 0) << suite << "\n" << r.out;
    EXPECT_EQ(json::parse(r.out)["passed"], true) << suite;
  }
  const CliRun bad = run_cli("verify nonsense");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("ellipsoid-geometry"), std::string::npos);
}

TEST_F(CliTest, CatalogListsEveryPreset) {
  const CliRun r = run_cli("catalog");
  ASSERT_EQ(r.code, 0);
  for (const auto& [name, j] : catalog()) EXPECT_NE(r.out.find(name + "\t"), std::string::npos) << name;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("optimize").code, 1);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(CliHelpers, DottedAssignment) {
  json j = {{"optimizer", {{"eps", 1e-3}}}};
  cli::apply_dotted(j, "optimizer.eps=1e-4");
  cli::apply_dotted(j, "optimizer.mode=paper");
  cli::apply_dotted(j, "output.dir=x/y");
  EXPECT_DOUBLE_EQ(j["optimizer"]["eps"].get<double>(), 1e-4);
  EXPECT_EQ(j["optimizer"]["mode"], "paper");
  EXPECT_EQ(j["output"]["dir"], "x/y");
  EXPECT_THROW(cli::apply_dotted(j, "no_equals_sign"), InvalidInput);
}

TEST(CliHelpers, IndexedNames) {
  EXPECT_EQ(cli::indexed("trace.jsonl", 0, 1), "trace.jsonl");
  EXPECT_EQ(cli::indexed("trace.jsonl", 2, 3), "trace-2.jsonl");
  EXPECT_EQ(cli::indexed("out", 1, 2), "out-1");
}

TEST(CliHelpers, PracticalPresetMergesUserOverrides) {
  const json j = {{"benchmark", "sphere"}, {"optimizer", {{"R", 5.0}, {"overrides", {{"k", 7}}}}}};
  const cli::RunConfig rc = cli::parse_run_config(j);
  EXPECT_EQ(rc.optimizer.overrides.k, 7);
  EXPECT_TRUE(rc.optimizer.overrides.tau_log);
}
