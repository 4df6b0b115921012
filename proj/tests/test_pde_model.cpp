#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"

namespace kolmo {
namespace {

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
  for (const auto& v : violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

TEST(ValidateProblem, HeatPolynomialIsValid) {
  const auto p = heat_polynomial_problem(2, 0.0, 1.0, 1.0, {1.0, 1.0}, 2);
  EXPECT_TRUE(validate_problem(p).empty());
}

TEST(ValidateProblem, SigmaRowNormMustBeOne) {
  PdeProblem p{{1.0, 2.0, 2}, bs_identity_dynamics(2, 0.0, 0.2),
               make_initial(BasketCallPayoff{{0.5, 0.5}, 1.0}), 1.0};
  std::get<BlackScholesDynamics>(p.dynamics).sigma_rows(0, 0) = 0.5;
  EXPECT_TRUE(mentions(validate_problem(p), "sigma row 0 norm != 1"));
}

TEST(ValidateProblem, BasketWeightsMustSumToOne) {
  PdeProblem p{{1.0, 2.0, 2}, bs_identity_dynamics(2, 0.0, 0.2),
               make_initial(BasketCallPayoff{{0.6, 0.6}, 1.0}), 1.0};
  EXPECT_TRUE(mentions(validate_problem(p), "weights do not sum to 1"));
}

TEST(ValidateProblem, ReportsEveryViolation) {
  PdeProblem p{{1.0, 0.5, 2}, bs_identity_dynamics(2, 0.0, 0.2),
               make_initial(BasketCallPayoff{{0.6, 0.6}, -1.0}), -1.0};
  const auto v = validate_problem(p);
  EXPECT_TRUE(mentions(v, "u must be < v"));
  EXPECT_TRUE(mentions(v, "horizon_T"));
  EXPECT_TRUE(mentions(v, "weights do not sum"));
  EXPECT_TRUE(mentions(v, "strike"));
}

TEST(ValidateProblem, BlackScholesNeedsPositiveDomain) {
  PdeProblem p{{0.0, 2.0, 1}, bs_identity_dynamics(1, 0.0, 0.2), make_initial(BasketCallPayoff{{1.0}, 1.0}), 1.0};
  EXPECT_TRUE(mentions(validate_problem(p), "(0, inf)"));
}

TEST(EvaluateInitial, Examples) {
  EXPECT_DOUBLE_EQ(evaluate_initial(make_initial(BasketCallPayoff{{0.5, 0.5}, 1.0}), std::vector<double>{3, 1}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_initial(make_initial(CallOnMaxPayoff{{1, 1}, 2.0}), std::vector<double>{1.5, 1}), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_initial(make_initial(PolynomialPayoff{{2.0}, 3}), std::vector<double>{2.0}), 16.0);
}

TEST(EvaluateInitial, DimensionMismatchThrows) {
  EXPECT_THROW(evaluate_initial(make_initial(PolynomialPayoff{{1.0, 1.0}, 2}), std::vector<double>{1.0}),
               ConfigError);
}

TEST(EvaluateInitial, BasketWithZeroStrikeIsPositivelyHomogeneous) {
  const auto phi = make_initial(BasketCallPayoff{{0.3, 0.7}, 0.0});
  RngStream rng(17, 0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> y{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double lambda = rng.uniform(0, 10);
    std::vector<double> scaled{lambda * y[0], lambda * y[1]};
    EXPECT_NEAR(evaluate_initial(phi, scaled), lambda * evaluate_initial(phi, y), 1e-12);
  }
}

TEST(EvaluateInitial, EvenPolynomialWithNonnegativeCoefficientsIsNonnegative) {
  const auto phi = make_initial(PolynomialPayoff{{0.5, 2.0, 0.0}, 4});
  RngStream rng(3, 0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> y{rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)};
    EXPECT_GE(evaluate_initial(phi, y), 0.0);
  }
}

TEST(GrowthEnvelope, DefaultsPerVariant) {
  const auto poly = default_growth(PolynomialPayoff{{1.0, -3.0}, 4});
  EXPECT_DOUBLE_EQ(poly.c2, 6.0);
  EXPECT_DOUBLE_EQ(poly.lambda, 4.0);
  EXPECT_DOUBLE_EQ(default_growth(PolynomialPayoff{{1.0}, 1}).lambda, 2.0);
  const auto basket = default_growth(BasketCallPayoff{{0.5, 0.5}, 3.0});
  EXPECT_DOUBLE_EQ(basket.c2, 4.0);
  EXPECT_DOUBLE_EQ(basket.lambda, 2.0);
}

// Basket payoff <= |y|_2 <= 1 + |y|_2^2, so c2 = 1, lambda = 2 holds on a scan.
TEST(GrowthEnvelope, BasketScanPasses) {
  const auto phi = make_initial(BasketCallPayoff{{0.5, 0.5}, 1.0});
  RngStream rng(5, 0);
  Matrix pts(10000, 2);
  for (double& v : pts.data()) v = rng.uniform(0, 10);
  const auto check = growth_envelope_check(phi, {1.0, 2.0}, pts);
  EXPECT_TRUE(check.pass);
  EXPECT_LE(check.worst_ratio, 1.0);
}

TEST(GrowthEnvelope, QuarticFailsQuadraticEnvelope) {
  const auto phi = make_initial(PolynomialPayoff{{1.0}, 4});
  const auto check = growth_envelope_check(phi, {1.0, 2.0}, matrix_from_rows({{10.0}}));
  EXPECT_FALSE(check.pass);
  EXPECT_NEAR(check.worst_ratio, 1e4 / 101.0, 1e-9);
}

TEST(GrowthEnvelope, OriginPassesWhenC2CoversPhiZero) {
  const auto phi = make_initial(CallOnMaxPayoff{{1.0, 1.0}, 0.5});
  EXPECT_TRUE(growth_envelope_check(phi, {1e-9, 2.0}, matrix_from_rows({{0.0, 0.0}})).pass);
}

TEST(GrowthEnvelope, CertifiedPolynomialEnvelopeHoldsEverywhere) {
  RngStream rng(8, 0);
  for (int k = 1; k <= 5; ++k) {
    const auto phi = make_initial(PolynomialPayoff{{0.7, -1.3, 2.1}, k});
    Matrix pts(2000, 3);
    for (double& v : pts.data()) v = rng.uniform(-50, 50);
    EXPECT_TRUE(growth_envelope_check(phi, phi.growth, pts).pass) << "k=" << k;
  }
}

TEST(ProblemJson, RoundTripsAndKeepsFieldNames) {
  PdeProblem p{{1.0, 2.0, 2}, bs_identity_dynamics(2, 0.05, 0.2),
               make_initial(CallOnMaxPayoff{{1.0, 0.5}, 1.5}), 0.75};
  const auto j = to_json(p);
  EXPECT_EQ(j.at("dynamics").at("variant"), "black_scholes");
  EXPECT_EQ(j.at("initial").at("variant"), "call_on_max");
  EXPECT_TRUE(j.contains("horizon_T"));
  const auto back = problem_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(problem_hash(back), problem_hash(p));
}

TEST(ProblemJson, UnknownVariantIsConfigError) {
  auto j = to_json(heat_polynomial_problem(1, 0, 1, 1, {1}, 2));
  j["dynamics"]["variant"] = "nonlinear";
  EXPECT_THROW(problem_from_json(j), ConfigError);
  j.erase("domain");
  EXPECT_THROW(problem_from_json(j), ConfigError);
}

}  // namespace
}  // namespace kolmo
