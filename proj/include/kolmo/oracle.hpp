#ifndef KOLMO_ORACLE_HPP_
#define KOLMO_ORACLE_HPP_

// Reference solutions f(., T) = E[phi(S_T) | S_0 = x] and error measurement.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kolmo/error.hpp"
#include "kolmo/matrix.hpp"
#include "kolmo/neural.hpp"
#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"
#include "kolmo/sde_sim.hpp"
#include "kolmo/stats.hpp"

namespace kolmo {

// E[Z^j] for Z ~ N(0,1): 0 for odd j, (j-1)!! for even j.
inline double gaussian_raw_moment(unsigned j) {
  if (j % 2 == 1) return 0.0;
  double m = 1.0;
  for (unsigned i = j; i > 1; i -= 2) m *= static_cast<double>(i - 1);
  return m;
}

inline double binomial(unsigned n, unsigned k) {
  double c = 1.0;
  for (unsigned i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

// E[sum_i c_i (x_i + sqrt(2T) Z_i)^k] by the binomial expansion over even moments.
inline double heat_polynomial_solution(std::span<const double> coeffs, int degree, double T,
                                       std::span<const double> x) {
  require(degree >= 1, "heat_polynomial_solution: degree must be >= 1");
  require(T >= 0.0, "heat_polynomial_solution: T must be nonnegative");
  require(coeffs.size() == x.size(), "heat_polynomial_solution: dimension mismatch");
  const auto k = static_cast<unsigned>(degree);
  const double var = 2.0 * T;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0.0;
    for (unsigned j = 0; j <= k; j += 2)
      s += binomial(k, j) * std::pow(x[i], static_cast<double>(k - j)) * std::pow(var, j / 2.0) *
           gaussian_raw_moment(j);
    total += coeffs[i] * s;
  }
  return total;
}

// Standard normal CDF through the C library erfc (accurate to a few ulp).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Undiscounted E[max(x exp((alpha - beta^2/2) T + beta sqrt(T) Z) - K, 0)].
inline double bs_call_1d(double x, double strike, double alpha, double beta, double T) {
  if (!(x > 0.0) || !(strike > 0.0)) throw ConfigError("bs_call_1d: x and strike must be positive");
  require(T > 0.0 && beta >= 0.0, "bs_call_1d: need T > 0 and beta >= 0");
  const double forward = x * std::exp(alpha * T);
  if (beta == 0.0) return std::max(forward - strike, 0.0);
  const double vol = beta * std::sqrt(T);
  const double d1 = (std::log(x / strike) + (alpha + 0.5 * beta * beta) * T) / vol;
  const double d2 = d1 - vol;
  return forward * normal_cdf(d1) - strike * normal_cdf(d2);
}

struct McEstimate {
  double value = 0.0;
  double ci_halfwidth = 0.0;  // 99% CLT
  double std_error = 0.0;
};

// Sample mean of phi(S_T) over n paths started at the fixed point x.
inline McEstimate mc_conditional_expectation(const PdeProblem& p, std::span<const double> x, std::size_t n,
                                             RngStream& rng, const EmConfig& em = {}) {
  require(n >= 10000, "mc_conditional_expectation: n_oracle must be >= 1e4");
  require(x.size() == p.domain.d, "mc_conditional_expectation: dimension mismatch");
  constexpr std::size_t kChunk = 1 << 15;
  RunningStats stats;
  Matrix start;
  for (std::size_t done = 0; done < n;) {
    const std::size_t rows = std::min(kChunk, n - done);
    if (start.rows() != rows) {
      start = Matrix(rows, x.size());
      for (std::size_t r = 0; r < rows; ++r) std::copy(x.begin(), x.end(), start.row(r).begin());
    }
    const Matrix y = sample_terminal(p, start, rng, em);
    for (std::size_t r = 0; r < rows; ++r) stats.add(evaluate_initial(p.initial, y.row(r)));
    done += rows;
  }
  return {stats.mean(), stats.ci99(), stats.std_error()};
}

enum class ReferenceKind { ClosedFormHeatPoly, ClosedFormBsCall1d, MonteCarlo };

// f(., T) bound to one problem; callable as a ScalarModel.
class ReferenceSolution {
 public:
  ReferenceSolution(PdeProblem problem, ReferenceKind kind, std::size_t n_oracle = 100000,
                    std::uint64_t seed = 0)
      : problem_(std::move(problem)), kind_(kind), n_oracle_(n_oracle), seed_(seed) {
    if (kind_ == ReferenceKind::ClosedFormHeatPoly) {
      require(std::holds_alternative<HeatDynamics>(problem_.dynamics) &&
                  std::holds_alternative<PolynomialPayoff>(problem_.initial.payoff),
              "reference: closed-form heat polynomial needs heat dynamics and a polynomial payoff");
    } else if (kind_ == ReferenceKind::ClosedFormBsCall1d) {
      require(std::holds_alternative<BlackScholesDynamics>(problem_.dynamics) && problem_.domain.d == 1 &&
                  !std::holds_alternative<PolynomialPayoff>(problem_.initial.payoff),
              "reference: closed-form BS call needs 1-d Black-Scholes with a call payoff");
    } else {
      require(n_oracle_ >= 10000, "reference: Monte Carlo n_oracle must be >= 1e4");
    }
  }

  // Closed form when one exists for the problem, Monte Carlo otherwise.
  static ReferenceSolution best_available(const PdeProblem& p, std::size_t n_oracle, std::uint64_t seed) {
    if (std::holds_alternative<HeatDynamics>(p.dynamics) && std::holds_alternative<PolynomialPayoff>(p.initial.payoff))
      return {p, ReferenceKind::ClosedFormHeatPoly};
    if (std::holds_alternative<BlackScholesDynamics>(p.dynamics) && p.domain.d == 1 &&
        !std::holds_alternative<PolynomialPayoff>(p.initial.payoff))
      return {p, ReferenceKind::ClosedFormBsCall1d};
    return {p, ReferenceKind::MonteCarlo, n_oracle, seed};
  }

  const PdeProblem& problem() const { return problem_; }
  ReferenceKind kind() const { return kind_; }
  std::size_t n_oracle() const { return n_oracle_; }
  std::uint64_t seed() const { return seed_; }

  // Value and 99% CI at x. The Monte Carlo stream is keyed by the bits of x so
  // the reference is a deterministic function of the point.
  McEstimate estimate(std::span<const double> x) const {
    switch (kind_) {
      case ReferenceKind::ClosedFormHeatPoly: {
        const auto& poly = std::get<PolynomialPayoff>(problem_.initial.payoff);
        return {heat_polynomial_solution(poly.coeffs, poly.degree, problem_.horizon, x), 0.0, 0.0};
      }
      case ReferenceKind::ClosedFormBsCall1d: {
        const auto& bs = std::get<BlackScholesDynamics>(problem_.dynamics);
        double weight = 0.0, strike = 0.0;
        std::visit(
            [&](const auto& ph) {
              using T = std::decay_t<decltype(ph)>;
              if constexpr (!std::is_same_v<T, PolynomialPayoff>) {
                weight = ph.weights[0];
                strike = ph.strike;
              }
            },
            problem_.initial.payoff);
        if (weight == 0.0) return {0.0, 0.0, 0.0};
        const double sigma = std::abs(bs.sigma_rows(0, 0));
        return {weight * bs_call_1d(x[0], strike / weight, bs.alpha[0], bs.beta[0] * sigma, problem_.horizon), 0.0,
                0.0};
      }
      case ReferenceKind::MonteCarlo:
      default: {
        RngStream rng(seed_, fnv1a(x));
        return mc_conditional_expectation(problem_, x, n_oracle_, rng);
      }
    }
  }

  double operator()(std::span<const double> x) const { return estimate(x).value; }

 private:
  PdeProblem problem_;
  ReferenceKind kind_;
  std::size_t n_oracle_;
  std::uint64_t seed_;
};

inline const char* to_string(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::ClosedFormHeatPoly: return "closed_form_heat_poly";
    case ReferenceKind::ClosedFormBsCall1d: return "closed_form_bs_call_1d";
    default: return "monte_carlo";
  }
}

inline ReferenceKind reference_kind_from_string(const std::string& s) {
  if (s == "closed_form_heat_poly") return ReferenceKind::ClosedFormHeatPoly;
  if (s == "closed_form_bs_call_1d") return ReferenceKind::ClosedFormBsCall1d;
  if (s == "monte_carlo") return ReferenceKind::MonteCarlo;
  throw ConfigError("unknown oracle kind '" + s + "'");
}

struct ErrorReport {
  double l2_error_sq = 0.0;   // E[(f(X) - ref(X))^2], X uniform on the hypercube
  double ci_halfwidth = 0.0;  // 99%
  std::size_t n_quadrature = 0;
  double risk_estimate = 0.0;
  double risk_gap_residual = 0.0;
  double ref_l2_sq = 0.0;     // E[ref(X)^2]
  double relative_l2_error = 0.0;  // sqrt(l2_error_sq / ref_l2_sq)
};

template <ScalarModel Model>
ErrorReport estimation_error_l2(const Model& model, const ReferenceSolution& ref, const HypercubeDomain& domain,
                                std::size_t n_quadrature, RngStream& rng) {
  require(n_quadrature >= 2, "estimation_error_l2: n_quadrature must be >= 2");
  require(domain.d == ref.problem().domain.d, "estimation_error_l2: reference bound to another dimension");
  RunningStats err, norm;
  std::vector<double> x(domain.d);
  for (std::size_t i = 0; i < n_quadrature; ++i) {
    for (double& v : x) v = rng.uniform(domain.u, domain.v);
    const double g = ref(x);
    const double r = model(x) - g;
    err.add(r * r);
    norm.add(g * g);
  }
  ErrorReport out;
  out.l2_error_sq = err.mean();
  out.ci_halfwidth = err.ci99();
  out.n_quadrature = n_quadrature;
  out.ref_l2_sq = norm.mean();
  out.relative_l2_error = out.ref_l2_sq > 0.0 ? std::sqrt(out.l2_error_sq / out.ref_l2_sq) : 0.0;
  return out;
}

struct RiskGap {
  double residual = 0.0;   // |LHS - RHS|
  double std_error = 0.0;  // of the paired per-sample difference
  double lhs = 0.0;        // E(f) - E(ref)
  double rhs = 0.0;        // E[(f - ref)^2]
  double risk_f = 0.0;
  double risk_ref = 0.0;
  std::size_t n = 0;
};

// Estimates E(f) - E(ref) and E[(f(X) - ref(X))^2] on shared draws (X, Y).
// For the true solution the two agree; the residual is a paired mean.
template <ScalarModel Model>
RiskGap risk_gap_identity_check(const Model& model, const PdeProblem& p, const ReferenceSolution& ref,
                                std::size_t n, RngStream& rng, const EmConfig& em = {}) {
  require(n >= 2, "risk_gap_identity_check: n must be >= 2");
  constexpr std::size_t kChunk = 1 << 14;
  RunningStats diff, lhs, rhs, risk_f, risk_ref;
  for (std::size_t done = 0; done < n;) {
    const std::size_t rows = std::min(kChunk, n - done);
    const Matrix x = sample_uniform_inputs(p.domain, rows, rng);
    const Matrix y = sample_terminal(p, x, rng, em);
    for (std::size_t r = 0; r < rows; ++r) {
      const double phi = evaluate_initial(p.initial, y.row(r));
      const double f = model(x.row(r));
      const double g = ref(x.row(r));
      const double a = (f - phi) * (f - phi) - (g - phi) * (g - phi);
      const double b = (f - g) * (f - g);
      diff.add(a - b);
      lhs.add(a);
      rhs.add(b);
      risk_f.add((f - phi) * (f - phi));
      risk_ref.add((g - phi) * (g - phi));
    }
    done += rows;
  }
  return {std::abs(diff.mean()), diff.std_error(), lhs.mean(), rhs.mean(), risk_f.mean(), risk_ref.mean(), n};
}

inline nlohmann::json to_json(const ErrorReport& e) {
  return {{"l2_error_sq", e.l2_error_sq},         {"ci_halfwidth", e.ci_halfwidth},
          {"n_quadrature", e.n_quadrature},       {"risk_estimate", e.risk_estimate},
          {"risk_gap_residual", e.risk_gap_residual}, {"ref_l2_sq", e.ref_l2_sq},
          {"relative_l2_error", e.relative_l2_error}};
}

inline nlohmann::json to_json(const RiskGap& g) {
  return {{"residual", g.residual}, {"std_error", g.std_error}, {"lhs", g.lhs}, {"rhs", g.rhs},
          {"risk_f", g.risk_f},     {"risk_ref", g.risk_ref},   {"n", g.n}};
}

// Oracle evaluations as CSV: x_1..x_d,value,ci.
inline void write_oracle_csv(const std::string& path, const Matrix& points, std::span<const McEstimate> values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < points.cols(); ++i) out << "x_" << i + 1 << ',';
  out << "value,ci\n" << std::setprecision(17);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    for (double v : points.row(r)) out << v << ',';
    out << values[r].value << ',' << values[r].ci_halfwidth << '\n';
  }
}

}  // namespace kolmo

#endif  // KOLMO_ORACLE_HPP_
