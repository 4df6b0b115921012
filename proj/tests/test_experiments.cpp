#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "kolmo/experiments.hpp"

namespace kolmo {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kolmo_experiment_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json small_config(const fs::path& out) {
  return {{"problem", to_json(heat_polynomial_problem(1, 0.0, 1.0, 0.5, {1.0}, 2))},
          {"hypothesis", {{"arch", {1, 8, 1}}, {"R", 5.0}, {"D", 10.0}}},
          {"train", {{"epochs", 3}, {"batch_size", 64}, {"optimizer", {{"method", "adam"}, {"learning_rate", 1e-2}}}}},
          {"data_m", 512},
          {"n_quadrature", 2000},
          {"n_risk_gap", 2000},
          {"n_tail", 100000},
          {"bounds", {{"eps", 0.5}, {"rho", 0.1}}},
          {"seed", 11},
          {"output_dir", out.string()}};
}

int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const std::string cmd = std::string(KOLMO_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return -1;
  std::string text;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) text.append(buf, n);
  const int status = pclose(pipe);
  if (stdout_text) *stdout_text = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunExperiment, WritesEveryArtifact) {
  const auto dir = scratch("artifacts");
  const auto cfg = experiment_config_from_json(small_config(dir));
  const auto res = run_experiment(cfg);
  for (const char* f : {"experiment.json", "train_report.json", "error_report.json", "bound_report.json",
                        "network.json", "risk_curve.csv", "risk_curve.svg", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(res.train.risk_curve.size(), 3u);
  EXPECT_LE(res.risk_gap.residual, 4.0 * res.risk_gap.std_error);

  const auto manifest = read_json_file(dir / "manifest.json");
  ASSERT_EQ(manifest["files"].size(), 7u);
  for (const auto& e : manifest["files"]) {
    if (e["file"] == "risk_curve.svg") {
      EXPECT_TRUE(e["fnv1a64"].is_null());
    } else if (e["file"] == "error_report.json") {
      EXPECT_EQ(e["fnv1a64"], hex64(fnv1a(read_file(dir / "error_report.json"))));
    }
  }
  const auto net = network_from_json(read_json_file(dir / "network.json"));
  EXPECT_EQ(network_hash(net), res.train.trained_network_hash);
  const auto err = read_json_file(dir / "error_report.json");
  EXPECT_EQ(err["oracle_kind"], "closed_form_heat_poly");
  const auto bounds = read_json_file(dir / "bound_report.json");
  EXPECT_TRUE(bounds.contains("tail_fit"));
  EXPECT_TRUE(read_file(dir / "risk_curve.svg").starts_with("<svg"));
}

TEST(RunExperiment, NumericReportsAreDeterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_experiment(experiment_config_from_json(small_config(a)));
  run_experiment(experiment_config_from_json(small_config(b)));
  EXPECT_EQ(read_file(a / "error_report.json"), read_file(b / "error_report.json"));
  EXPECT_EQ(read_file(a / "network.json"), read_file(b / "network.json"));
  EXPECT_EQ(read_file(a / "bound_report.json"), read_file(b / "bound_report.json"));
  auto strip = [](nlohmann::json j) {
    j.erase("wall_time");
    return j;
  };
  EXPECT_EQ(strip(read_json_file(a / "train_report.json")), strip(read_json_file(b / "train_report.json")));
  // Manifests differ only through output_dir inside experiment.json.
  auto ma = read_json_file(a / "manifest.json"), mb = read_json_file(b / "manifest.json");
  for (std::size_t i = 0; i < ma["files"].size(); ++i)
    if (ma["files"][i]["file"] != "experiment.json") {
      EXPECT_EQ(ma["files"][i], mb["files"][i]);
    }
}

TEST(ExperimentConfig, SeedEnvironmentOverride) {
  const auto j = small_config(scratch("env"));
  ::setenv("KOLMO_SEED", "424242", 1);
  const auto cfg = experiment_config_from_json(j);
  ::unsetenv("KOLMO_SEED");
  EXPECT_EQ(cfg.seed, 424242u);
  EXPECT_EQ(cfg.train.seed, mix64(424242u));
  EXPECT_EQ(experiment_config_from_json(j).seed, 11u);
  ::setenv("KOLMO_SEED", "abc", 1);
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  ::unsetenv("KOLMO_SEED");
}

TEST(ExperimentConfig, JsonRoundTrip) {
  const auto cfg = experiment_config_from_json(small_config(scratch("rt")));
  EXPECT_EQ(to_json(experiment_config_from_json(to_json(cfg))), to_json(cfg));
}

TEST(Cli, InvalidEpsilonExitsWithConfigCode) {
  const auto dir = scratch("cli_bad");
  auto j = small_config(dir / "out");
  j["bounds"]["eps"] = 1.5;
  write_json(dir / "config.json", j);
  EXPECT_EQ(run_cli("run " + (dir / "config.json").string()), 2);
  ASSERT_TRUE(fs::exists(dir / "out" / "error.txt"));
  EXPECT_NE(read_file(dir / "out" / "error.txt").find("eps"), std::string::npos);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, RunWritesArtifacts) {
  const auto dir = scratch("cli_run");
  write_json(dir / "config.json", small_config(dir / "out"));
  EXPECT_EQ(run_cli("run " + (dir / "config.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Cli, BoundsReportAndSweep) {
  const auto dir = scratch("cli_bounds");
  nlohmann::json in = {{"arch", {1, 2, 1}}, {"R", 1.0}, {"D", 1.0}, {"B_dK", 1.0}, {"eps", 0.5}, {"rho", 0.1},
                       {"c1", 1.0},         {"K", 2.0}, {"sweep", {{"param", "eps"}, {"values", {0.1, 0.5}}}}};
  write_json(dir / "in.json", in);
  const auto args = "bounds " + (dir / "in.json").string() + " --out " + (dir / "rep.json").string() + " --csv " +
                    (dir / "sweep.csv").string();
  ASSERT_EQ(run_cli(args), 0);
  const auto rep = read_json_file(dir / "rep.json");
  EXPECT_NEAR(rep["m_truncated"].get<double>(), 7836.0, 8.0);
  EXPECT_TRUE(read_file(dir / "sweep.csv").starts_with("eps,covering_log"));
  in["rho"] = 0.0;
  write_json(dir / "bad.json", in);
  EXPECT_EQ(run_cli("bounds " + (dir / "bad.json").string()), 2);
}

TEST(Cli, OraclePrintsClosedFormValue) {
  const auto dir = scratch("cli_oracle");
  write_json(dir / "p.json", to_json(heat_polynomial_problem(1, 0.0, 1.0, 0.5, {1.0}, 2)));
  std::string out;
  ASSERT_EQ(run_cli("oracle " + (dir / "p.json").string() + " --at 0.3", &out), 0);
  const auto j = nlohmann::json::parse(out);
  EXPECT_EQ(j["kind"], "closed_form_heat_poly");
  EXPECT_NEAR(j["value"].get<double>(), 1.09, 1e-12);
  ASSERT_EQ(run_cli("oracle " + (dir / "p.json").string() + " --at 0.3 --kind monte_carlo --n 20000", &out), 0);
  const auto mc = nlohmann::json::parse(out);
  EXPECT_NEAR(mc["value"].get<double>(), 1.09, mc["ci_halfwidth"].get<double>());
  EXPECT_EQ(run_cli("oracle " + (dir / "p.json").string() + " --at 0.3,0.4"), 2);
}

TEST(Cli, DatasetWritesCsvAndSidecar) {
  const auto dir = scratch("cli_data");
  write_json(dir / "p.json", to_json(heat_polynomial_problem(2, 0.0, 1.0, 0.5, {1.0, 1.0}, 2)));
  ASSERT_EQ(run_cli("dataset " + (dir / "p.json").string() + " --m 100 --seed 3 --out " + (dir / "d").string()), 0);
  const auto data = read_dataset((dir / "d.csv").string(), (dir / "d.json").string());
  EXPECT_EQ(data.size(), 100u);
  EXPECT_EQ(data.meta.seed, 3u);
}

nlohmann::json small_scaling_spec(const fs::path& out) {
  auto base = small_config(out / "unused");
  return {{"base", base},
          {"d_list", {1, 2}},
          {"repetitions", 2},
          {"width_factor", 4},
          {"depth", 2},
          {"target_error", 0.5},
          {"output_dir", out.string()}};
}

TEST(ScalingStudy, SummariesAndFits) {
  const auto dir = scratch("scaling");
  const auto spec = scaling_spec_from_json(small_scaling_spec(dir));
  const auto summary = run_scaling_study(spec);
  EXPECT_FALSE(summary.partial_failure);
  ASSERT_EQ(summary.rows.size(), 4u);
  EXPECT_EQ(summary.rows[2].param_count, arch_metrics({{2, 8, 1}}).param_count);
  const auto j = read_json_file(dir / "summary.json");
  EXPECT_EQ(j["per_d"].size(), 2u);
  EXPECT_TRUE(j["per_d"][0].contains("relative_error"));
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "scaling.svg"));
  EXPECT_TRUE(fs::exists(dir / "d_2" / "rep_1" / "manifest.json"));
  EXPECT_NE(read_file(dir / "d_1" / "rep_0" / "network.json"), read_file(dir / "d_1" / "rep_1" / "network.json"));
}

TEST(ScalingStudy, FailingDimensionGivesPartialExitCode) {
  const auto dir = scratch("scaling_partial");
  auto spec = small_scaling_spec(dir / "out");
  spec["repetitions"] = 1;
  spec["overrides"] = {{"2", {{"arch", {3, 4, 1}}}}};  // wrong input size at d = 2
  write_json(dir / "spec.json", spec);
  EXPECT_EQ(run_cli("scaling " + (dir / "spec.json").string()), 4);
  const auto j = read_json_file(dir / "out" / "summary.json");
  EXPECT_TRUE(j["partial_failure"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "out" / "d_2" / "rep_0" / "error.txt"));
}

VerifyConfig quick_verify() {
  VerifyConfig vc;
  vc.n_tail = 200000;
  vc.n_moment = 100000;
  vc.n_identity = 2000;
  vc.n_oracle = 10000;
  vc.seed = 5;
  return vc;
}

TEST(VerifyTheory, HeatPolynomialPasses) {
  const auto p = heat_polynomial_problem(4, 0.0, 1.0, 1.0, {1.0, 1.0, 1.0, 1.0}, 2);
  const auto rep = verify_theory(p, quick_verify());
  EXPECT_TRUE(rep.tail.pass);
  EXPECT_TRUE(rep.growth.pass);
  EXPECT_TRUE(rep.moments_pass) << rep.moments.slope;
  EXPECT_TRUE(rep.identity_pass);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(to_json(rep, p)["pass"], true);
}

TEST(VerifyTheory, BlackScholesBasketPasses) {
  PdeProblem p{{1.0, 2.0, 4}, bs_identity_dynamics(4, 0.05, 0.2),
               make_initial(BasketCallPayoff{{0.25, 0.25, 0.25, 0.25}, 1.0}), 1.0};
  auto vc = quick_verify();
  vc.n_identity = 500;
  const auto rep = verify_theory(p, vc);
  EXPECT_TRUE(rep.pass) << to_json(rep, p).dump(2);
}

TEST(VerifyTheory, HeavyTailedOverrideFailsTailCheck) {
  const auto p = heat_polynomial_problem(1, 0.0, 1.0, 1.0, {1.0}, 2);
  auto vc = quick_verify();
  vc.terminal_override = [](const Matrix& x, RngStream& rng) {
    Matrix y(x.rows(), x.cols());
    for (double& v : y.data()) v = 1.0 / rng.uniform();
    return y;
  };
  const auto rep = verify_theory(p, vc);
  EXPECT_FALSE(rep.tail.pass);
  EXPECT_FALSE(rep.pass);
  ASSERT_FALSE(rep.tail.violations.empty());
  const auto j = to_json(rep, p);
  EXPECT_GT(j["tail"]["violations"][0]["t"].get<double>(), std::numbers::e);
}

TEST(Cli, VerifyWritesReport) {
  const auto dir = scratch("cli_verify");
  write_json(dir / "p.json", to_json(heat_polynomial_problem(2, 0.0, 1.0, 1.0, {1.0, 1.0}, 2)));
  const auto args = "verify " + (dir / "p.json").string() +
                    " --n-tail 100000 --n-moment 100000 --n-identity 1000 --d-list 1,2,4 --out " +
                    (dir / "v.json").string();
  EXPECT_EQ(run_cli(args), 0);
  EXPECT_TRUE(read_json_file(dir / "v.json")["pass"].get<bool>());
}

}  // namespace
}  // namespace kolmo
