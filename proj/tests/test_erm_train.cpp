#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "kolmo/erm_train.hpp"

namespace kolmo {
namespace {

Dataset tiny_dataset() {
  Dataset d;
  d.inputs = matrix_from_rows({{0.0}, {1.0}});
  d.raw_terminals = matrix_from_rows({{0.5}, {3.0}});
  d.labels = {1.0, 3.0};
  return d;
}

PdeProblem heat_square(std::size_t d = 1) {
  return heat_polynomial_problem(d, 0.0, 1.0, 0.5, std::vector<double>(d, 1.0), 2);
}

TEST(EmpiricalRisk, ConstantModelExample) {
  const auto data = tiny_dataset();
  auto two = [](std::span<const double>) { return 2.0; };
  EXPECT_DOUBLE_EQ(empirical_risk(two, data), 1.0);
}

TEST(EmpiricalRisk, LookupTableModelHasZeroRisk) {
  const auto data = make_dataset(heat_square(2), 300, RngStream(1, 1));
  std::map<std::pair<double, double>, double> table;
  for (std::size_t i = 0; i < data.size(); ++i) table[{data.inputs(i, 0), data.inputs(i, 1)}] = data.labels[i];
  auto lookup = [&table](std::span<const double> x) { return table.at({x[0], x[1]}); };
  EXPECT_EQ(empirical_risk(lookup, data), 0.0);
}

TEST(Truncation, LabelCases) {
  const std::vector<double> y{0.5, -3.0};
  EXPECT_EQ(truncate_label(y, 7.0, 2.0), 0.0);
  EXPECT_EQ(truncate_label(y, 7.0, 3.0), 7.0);  // boundary |y|_inf = K is kept
  EXPECT_EQ(truncate_label(y, 7.0, 3.5), 7.0);
  EXPECT_THROW(truncate_label(y, 7.0, 0.0), ConfigError);
}

TEST(Truncation, TinyDatasetExample) {
  const auto data = tiny_dataset();
  auto zero = [](std::span<const double>) { return 0.0; };
  EXPECT_DOUBLE_EQ(truncated_empirical_risk(zero, data, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(truncated_empirical_risk(zero, data, 3.0), empirical_risk(zero, data));
}

// Zeroing a label with |y| > 2D can only lower the loss, so from K = 2D on the gap is monotone.
TEST(Truncation, GapShrinksAsKGrowsAndVanishesPastTheMax) {
  const auto data = make_dataset(heat_square(2), 4000, RngStream(2, 1));
  const Architecture arch{{2, 8, 1}};
  const double clip_d = 0.5;
  ClippedNetwork net(arch, init_params(arch, 1.0, RngStream(3, 0)), clip_d, 1.0);
  const double base = empirical_risk(net, data);
  const double kmax = max_terminal_sup_norm(data);
  double prev = INFINITY;
  for (double K = 2.0 * clip_d; K < 4.0 * kmax; K *= 2.0) {
    const double gap = std::abs(truncated_empirical_risk(net, data, K) - base);
    EXPECT_LE(gap, prev) << "K=" << K;
    prev = gap;
    if (K >= kmax) {
      EXPECT_EQ(gap, 0.0);
    }
  }
  EXPECT_EQ(truncated_empirical_risk(net, data, kmax), base);
}

TEST(Train, ZeroEpochsReturnsInitialNetwork) {
  const auto p = heat_square();
  const auto data = make_dataset(p, 64, RngStream(4, 1));
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 16;
  cfg.seed = 9;
  const HypothesisClass h{{{1, 4, 1}}, 2.0, 3.0};
  const auto res = train(p, data, h, cfg);
  EXPECT_TRUE(res.report.risk_curve.empty());
  EXPECT_EQ(res.net.params(), init_params(h.arch, 2.0, RngStream(9, 0x7261696eULL).substream(0)));
  EXPECT_DOUBLE_EQ(res.report.final_empirical_risk, empirical_risk(res.net, data));
}

TEST(Train, DeterministicInSeed) {
  const auto p = heat_square(2);
  const auto data = make_dataset(p, 512, RngStream(5, 1));
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.seed = 17;
  cfg.optimizer.learning_rate = 1e-2;
  const HypothesisClass h{{{2, 8, 8, 1}}, 2.0, 5.0};
  const auto a = train(p, data, h, cfg);
  const auto b = train(p, data, h, cfg);
  EXPECT_EQ(report_hash(a.report), report_hash(b.report));
  EXPECT_EQ(numeric_json(a.report).dump(), numeric_json(b.report).dump());
  cfg.seed = 18;
  EXPECT_NE(train(p, data, h, cfg).report.trained_network_hash, a.report.trained_network_hash);
}

TEST(Train, FullBatchSgdWithSmallStepDoesNotIncreaseRisk) {
  const auto p = heat_square();
  const auto data = make_dataset(p, 32, RngStream(6, 1));
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.optimizer.method = OptimizerMethod::Sgd;
  cfg.optimizer.learning_rate = 1e-3;
  const auto res = train(p, data, {{{1, 8, 1}}, 3.0, 20.0}, cfg);
  for (std::size_t i = 1; i < res.report.risk_curve.size(); ++i)
    EXPECT_LE(res.report.risk_curve[i], res.report.risk_curve[i - 1] * (1.0 + 1e-12)) << "epoch " << i + 1;
}

TEST(Train, ProjectionKeepsParametersInClass) {
  const auto p = heat_square(2);
  const auto data = make_dataset(p, 256, RngStream(7, 1));
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 32;
  cfg.optimizer.learning_rate = 0.05;
  const auto res = train(p, data, {{{2, 8, 1}}, 0.3, 10.0}, cfg);
  EXPECT_LE(res.net.params().sup_norm(), 0.3);
  EXPECT_GT(res.report.projection_active_fraction, 0.0);
}

TEST(Train, LearnsZeroVolatilityBasketQuickly) {
  PdeProblem p{{1.0, 2.0, 1}, bs_identity_dynamics(1, 0.05, 0.0), make_initial(BasketCallPayoff{{1.0}, 1.0}), 1.0};
  const auto data = make_dataset(p, 2048, RngStream(8, 1));
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.optimizer.learning_rate = 3e-3;
  const auto res = train(p, data, {{{1, 16, 16, 1}}, 10.0, 5.0}, cfg);
  EXPECT_LT(res.report.final_empirical_risk, res.report.risk_curve.front());
  EXPECT_LE(res.report.final_empirical_risk, 1e-2);
}

TEST(Train, RejectsInconsistentInputs) {
  const auto p = heat_square(2);
  const auto data = make_dataset(p, 16, RngStream(9, 1));
  TrainConfig cfg;
  cfg.batch_size = 32;
  EXPECT_THROW(train(p, data, {{{2, 4, 1}}, 1.0, 1.0}, cfg), ConfigError);
  cfg.batch_size = 8;
  EXPECT_THROW(train(p, data, {{{3, 4, 1}}, 1.0, 1.0}, cfg), ConfigError);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.optimizer.method = OptimizerMethod::Sgd;
  cfg.truncation_K = 4.5;
  const auto back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  auto j = to_json(cfg);
  j["optimizer"]["method"] = "lbfgs";
  EXPECT_THROW(train_config_from_json(j), ConfigError);
}

}  // namespace
}  // namespace kolmo
