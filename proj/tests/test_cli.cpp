#include "mfg/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mfgtool_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Runs the installed binary when MFGTOOL is set, otherwise the in-process entry point.
int tool(const std::string& args, const fs::path& out) {
  if (const char* exe = std::getenv("MFGTOOL")) {
    const std::string cmd = std::string(exe) + " " + args + " --out " + out.string() + " 2>" +
                            (out / "stderr.txt").string() + " >/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::vector<std::string> argv{"mfgtool"};
  std::istringstream is(args);
  for (std::string w; is >> w;) argv.push_back(w);
  argv.push_back("--out");
  argv.push_back(out.string());
  return mfg::cli::run(argv);
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::string kSmall = "--set model=lq_basic particles=200 grid.steps=10";

}  // namespace

TEST(Cli, SolveWritesSummaryAndPaths) {
  const fs::path d = fresh_dir("solve");
  ASSERT_EQ(tool("solve-mfg " + kSmall + " --seed 3", d), mfg::cli::kExitOk);
  const json s = read_json(d / "summary.json");
  EXPECT_EQ(s.at("model"), "lq_basic");
  EXPECT_EQ(s.at("particles"), 200);
  EXPECT_EQ(s.at("steps"), 10);
  EXPECT_TRUE(s.at("converged").get<bool>());
  EXPECT_GT(s.at("cost").get<double>(), 0.0);
  EXPECT_EQ(slurp(d / "paths.csv").substr(0, 28), "particle,node,time,X1,P1,v1\n");
}

TEST(Cli, SameSeedIsByteIdentical) {
  const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b"), c = fresh_dir("seed_c");
  ASSERT_EQ(tool("solve-mftc " + kSmall + " --seed 5", a), 0);
  ASSERT_EQ(tool("solve-mftc " + kSmall + " --seed 5", b), 0);
  ASSERT_EQ(tool("solve-mftc " + kSmall + " --seed 6", c), 0);
  EXPECT_EQ(slurp(a / "paths.csv"), slurp(b / "paths.csv"));
  EXPECT_NE(slurp(a / "paths.csv"), slurp(c / "paths.csv"));
}

TEST(Cli, ConfigErrorsExitWithFour) {
  const fs::path d = fresh_dir("config");
  EXPECT_EQ(tool("solve-mfg --set model=nope", d), mfg::cli::kExitConfig);
  EXPECT_EQ(tool("solve-mfg --set model=lq_basic bogus=1", d), mfg::cli::kExitConfig);
  EXPECT_EQ(tool("solve-mfg --set model=lq_basic params.zeta=1", d), mfg::cli::kExitConfig);
  EXPECT_EQ(tool("check no_such_check --set model=lq_basic", d), mfg::cli::kExitConfig);
  if (std::getenv("MFGTOOL")) {
    const json e = json::parse(slurp(d / "stderr.txt"));
    EXPECT_EQ(e.at("error"), "ConfigError");
  }
}

TEST(Cli, FailedCheckExitsWithThreeAndWritesWitness) {
  const fs::path d = fresh_dir("check");
  ASSERT_EQ(tool("check displacement_quasi --set model=anti_g check.samples=40", d), mfg::cli::kExitCheckFailed);
  const json r = read_json(d / "check_displacement_quasi.json");
  EXPECT_EQ(r.at("verdict"), "fail");
  EXPECT_TRUE(fs::exists(d / "check_displacement_quasi_witness0_cloud0.csv"));
  EXPECT_TRUE(fs::exists(d / "check_displacement_quasi_witness0_cloud1.csv"));
  EXPECT_EQ(tool("check displacement_quasi --set model=lq_basic check.samples=40", d), mfg::cli::kExitOk);
}

TEST(Cli, Thresholds) {
  const fs::path d = fresh_dir("thresholds");
  ASSERT_EQ(tool("thresholds --set thresholds.T=1 thresholds.K_beta=0.5 thresholds.Gamma_beta=0.1 thresholds.L=1", d),
            0);
  const json t = read_json(d / "thresholds.json");
  EXPECT_NEAR(t.at("big_lambda").at("full").get<double>(), 1.28256, 1e-5);
  EXPECT_NEAR(t.at("big_lambda").at("reduced").get<double>(), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(t.at("c_LT").at("mp_reduced").get<double>(), 4.0);
  EXPECT_FALSE(t.contains("anti_monotonicity_budget"));
  EXPECT_EQ(tool("thresholds", d), mfg::cli::kExitConfig);
}

TEST(Cli, ThresholdsFromModelConstants) {
  const fs::path d = fresh_dir("thresholds_model");
  ASSERT_EQ(tool("thresholds --set model=split_quasi", d), 0);
  const json b = read_json(d / "thresholds.json").at("anti_monotonicity_budget");
  // lambda_x = lambda_v = 1/2, lambda_m = 0.2: D = 0.8.
  EXPECT_NEAR(b.at("D").get<double>(), 0.8, 1e-12);
  EXPECT_TRUE(b.at("budget_ok").get<bool>());
}

TEST(Cli, LqCompare) {
  const fs::path d = fresh_dir("lq");
  ASSERT_EQ(tool("lq-compare --mode mfg " + kSmall, d), 0);
  const json r = read_json(d / "lq_compare.json");
  EXPECT_LT(r.at("control_rel_l2_error").get<double>(), 0.1);
  EXPECT_TRUE(fs::exists(d / "lq_oracle.csv"));
}

TEST(ApplyOverride, DottedKeysAndTypes) {
  json c = json::object();
  mfg::cli::apply_override(c, "grid.steps=12");
  mfg::cli::apply_override(c, "model=lq_mean");
  mfg::cli::apply_override(c, "solver.gamma_schedule=[0,0.5,1]");
  EXPECT_EQ(c["grid"]["steps"], 12);
  EXPECT_EQ(c["model"], "lq_mean");
  EXPECT_EQ(c["solver"]["gamma_schedule"].size(), 3u);
  EXPECT_THROW(mfg::cli::apply_override(c, "novalue"), mfg::Error);
  const mfg::cli::ExperimentConfig cfg = mfg::cli::parse_config(c);
  EXPECT_EQ(cfg.grid.steps, 12);
  EXPECT_EQ(cfg.model, "lq_mean");
}
