#ifndef KOLMO_PDE_MODEL_HPP_
#define KOLMO_PDE_MODEL_HPP_

// Linear Kolmogorov problem family: hypercube domain, affine dynamics and the
// catalogue of initial (payoff) functions with their polynomial growth
// envelopes |phi(y)| <= c2 (1 + |y|_2^lambda).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kolmo/error.hpp"
#include "kolmo/matrix.hpp"
#include "kolmo/stats.hpp"

namespace kolmo {

using json = nlohmann::json;

struct HypercubeDomain {
  double u = 0.0;
  double v = 1.0;
  std::size_t d = 1;
};

// mu = 0, sigma = sqrt(2) I.
struct HeatDynamics {};

// dS_i = alpha_i S_i dt + beta_i S_i <Sigma_i, dB>.
struct BlackScholesDynamics {
  std::vector<double> alpha;
  std::vector<double> beta;
  Matrix sigma_rows;  // d x d, unit-norm rows
};

// mu(x) = drift_matrix x + drift_offset,
// sigma(x) = diffusion_offset + sum_j x_j diffusion_linear[j].
struct GenericAffineDynamics {
  Matrix drift_matrix;
  std::vector<double> drift_offset;
  Matrix diffusion_offset;
  std::vector<Matrix> diffusion_linear;  // empty, or d matrices of d x d
};

using DynamicsSpec = std::variant<HeatDynamics, BlackScholesDynamics, GenericAffineDynamics>;

struct PolynomialPayoff {
  std::vector<double> coeffs;
  int degree = 2;
};

struct BasketCallPayoff {
  std::vector<double> weights;
  double strike = 1.0;
};

struct CallOnMaxPayoff {
  std::vector<double> weights;
  double strike = 1.0;
};

using Payoff = std::variant<PolynomialPayoff, BasketCallPayoff, CallOnMaxPayoff>;

struct GrowthEnvelope {
  double c2 = 1.0;
  double lambda = 2.0;
};

struct InitialFunction {
  Payoff payoff;
  GrowthEnvelope growth;
};

struct PdeProblem {
  HypercubeDomain domain;
  DynamicsSpec dynamics;
  InitialFunction initial;
  double horizon = 1.0;
};

// Certified envelope: polynomial c2 = d max|c_i|, lambda = max(2, k);
// calls c2 = max(1, sum c_i) + K, lambda = 2.
inline GrowthEnvelope default_growth(const Payoff& payoff) {
  return std::visit(
      [](const auto& p) -> GrowthEnvelope {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          double cmax = 0.0;
          for (double c : p.coeffs) cmax = std::max(cmax, std::abs(c));
          return {static_cast<double>(p.coeffs.size()) * cmax,
                  std::max(2.0, static_cast<double>(p.degree))};
        } else {
          double sum = 0.0;
          for (double c : p.weights) sum += c;
          return {std::max(1.0, sum) + p.strike, 2.0};
        }
      },
      payoff);
}

inline InitialFunction make_initial(Payoff payoff) {
  const GrowthEnvelope env = default_growth(payoff);
  return {std::move(payoff), env};
}

inline std::size_t payoff_dimension(const Payoff& payoff) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          return p.coeffs.size();
        } else {
          return p.weights.size();
        }
      },
      payoff);
}

inline double evaluate_payoff(const Payoff& payoff, std::span<const double> y) {
  if (y.size() != payoff_dimension(payoff)) throw ConfigError("payoff: dimension mismatch");
  return std::visit(
      [y](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += p.coeffs[i] * std::pow(y[i], p.degree);
          return s;
        } else if constexpr (std::is_same_v<T, BasketCallPayoff>) {
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += p.weights[i] * y[i];
          return std::max(s - p.strike, 0.0);
        } else {
          double best = -INFINITY;
          for (std::size_t i = 0; i < y.size(); ++i) best = std::max(best, p.weights[i] * y[i]);
          return std::max(best - p.strike, 0.0);
        }
      },
      payoff);
}

inline double evaluate_initial(const InitialFunction& phi, std::span<const double> y) {
  return evaluate_payoff(phi.payoff, y);
}

inline std::size_t dynamics_dimension(const DynamicsSpec& dyn, std::size_t fallback) {
  if (const auto* bs = std::get_if<BlackScholesDynamics>(&dyn)) return bs->alpha.size();
  if (const auto* ga = std::get_if<GenericAffineDynamics>(&dyn)) return ga->drift_offset.size();
  return fallback;
}

// Every invariant violation, with a reason. Empty means valid.
inline std::vector<std::string> validate_problem(const PdeProblem& p) {
  std::vector<std::string> out;
  auto fail = [&out](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };
  const std::size_t d = p.domain.d;
  if (d < 1) fail("domain: d must be positive");
  if (!(p.domain.u < p.domain.v)) fail("domain: u must be < v");
  if (!(p.horizon > 0.0) || !std::isfinite(p.horizon)) fail("horizon_T must be positive and finite");

  if (const auto* bs = std::get_if<BlackScholesDynamics>(&p.dynamics)) {
    if (!(p.domain.u > 0.0)) fail("black_scholes: domain must lie in (0, inf), got u=", p.domain.u);
    if (bs->alpha.size() != d || bs->beta.size() != d) fail("black_scholes: alpha/beta length != d");
    if (bs->sigma_rows.rows() != d || bs->sigma_rows.cols() != d) {
      fail("black_scholes: sigma_rows must be d x d");
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        double norm2 = 0.0;
        for (double s : bs->sigma_rows.row(i)) norm2 += s * s;
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
          fail("black_scholes: sigma row ", i, " norm != 1 (", std::sqrt(norm2), ")");
      }
    }
    for (double b : bs->beta)
      if (b < 0.0) fail("black_scholes: beta must be >= 0");
  } else if (const auto* ga = std::get_if<GenericAffineDynamics>(&p.dynamics)) {
    if (ga->drift_matrix.rows() != d || ga->drift_matrix.cols() != d)
      fail("generic_affine: drift_matrix must be d x d");
    if (ga->drift_offset.size() != d) fail("generic_affine: drift_offset length != d");
    if (ga->diffusion_offset.rows() != d || ga->diffusion_offset.cols() != d)
      fail("generic_affine: diffusion_offset must be d x d");
    if (!ga->diffusion_linear.empty()) {
      if (ga->diffusion_linear.size() != d) fail("generic_affine: diffusion_linear needs d matrices");
      for (const auto& m : ga->diffusion_linear)
        if (m.rows() != d || m.cols() != d) fail("generic_affine: diffusion_linear entries must be d x d");
    }
  }

  if (payoff_dimension(p.initial.payoff) != d) fail("initial: coefficient length != d");
  std::visit(
      [&](const auto& ph) {
        using T = std::decay_t<decltype(ph)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          if (ph.degree < 1) fail("polynomial: degree must be a positive integer");
          for (double c : ph.coeffs)
            if (!std::isfinite(c)) fail("polynomial: coefficients must be finite");
        } else if constexpr (std::is_same_v<T, BasketCallPayoff>) {
          double sum = 0.0;
          for (double c : ph.weights) {
            if (c < 0.0 || c > 1.0) fail("basket_call: weights must lie in [0,1]");
            sum += c;
          }
          if (std::abs(sum - 1.0) > 1e-12) fail("basket_call: weights do not sum to 1 (", sum, ")");
          if (!(ph.strike > 0.0)) fail("basket_call: strike must be positive");
        } else {
          for (double c : ph.weights)
            if (c < 0.0) fail("call_on_max: weights must be >= 0");
          if (!(ph.strike > 0.0)) fail("call_on_max: strike must be positive");
        }
      },
      p.initial.payoff);
  if (p.initial.growth.lambda < 2.0) fail("growth: lambda must be >= 2");
  if (!(p.initial.growth.c2 > 0.0)) fail("growth: c2 must be positive");
  return out;
}

struct GrowthCheck {
  bool pass = true;
  double worst_ratio = 0.0;  // max |phi(y)| / (1 + |y|_2^lambda)
  std::size_t worst_index = 0;
};

inline GrowthCheck growth_envelope_check(const InitialFunction& phi, const GrowthEnvelope& env,
                                         const Matrix& points) {
  require(points.rows() > 0, "growth_envelope_check: empty sample set");
  GrowthCheck out;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto y = points.row(i);
    double norm2 = 0.0;
    for (double v : y) norm2 += v * v;
    const double ratio = std::abs(evaluate_initial(phi, y)) / (1.0 + std::pow(std::sqrt(norm2), env.lambda));
    if (ratio > out.worst_ratio || i == 0) {
      out.worst_ratio = ratio;
      out.worst_index = i;
    }
  }
  out.pass = out.worst_ratio <= env.c2;
  return out;
}

// ---- JSON ----------------------------------------------------------------

inline json matrix_json(const Matrix& m) { return matrix_to_rows(m); }
inline Matrix matrix_from_json(const json& j) {
  return matrix_from_rows(j.get<std::vector<std::vector<double>>>());
}

inline json to_json(const PdeProblem& p) {
  json dom = {{"u", p.domain.u}, {"v", p.domain.v}, {"d", p.domain.d}};
  json dyn = std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, HeatDynamics>) {
          return {{"variant", "heat"}};
        } else if constexpr (std::is_same_v<T, BlackScholesDynamics>) {
          return {{"variant", "black_scholes"},
                  {"alpha", x.alpha},
                  {"beta", x.beta},
                  {"sigma_rows", matrix_json(x.sigma_rows)}};
        } else {
          json lin = json::array();
          for (const auto& m : x.diffusion_linear) lin.push_back(matrix_json(m));
          return {{"variant", "generic_affine"},
                  {"drift_matrix", matrix_json(x.drift_matrix)},
                  {"drift_offset", x.drift_offset},
                  {"diffusion_offset", matrix_json(x.diffusion_offset)},
                  {"diffusion_linear", lin}};
        }
      },
      p.dynamics);
  json ini = std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          return {{"variant", "polynomial"}, {"coeffs", x.coeffs}, {"degree", x.degree}};
        } else if constexpr (std::is_same_v<T, BasketCallPayoff>) {
          return {{"variant", "basket_call"}, {"weights", x.weights}, {"strike", x.strike}};
        } else {
          return {{"variant", "call_on_max"}, {"weights", x.weights}, {"strike", x.strike}};
        }
      },
      p.initial.payoff);
  ini["growth"] = {{"c2", p.initial.growth.c2}, {"lambda", p.initial.growth.lambda}};
  return {{"domain", dom}, {"dynamics", dyn}, {"initial", ini}, {"horizon_T", p.horizon}};
}

// Parses a problem document. Growth defaults to the certified envelope.
inline PdeProblem problem_from_json(const json& j) {
  try {
    PdeProblem p;
    const auto& dom = j.at("domain");
    p.domain = {dom.at("u").get<double>(), dom.at("v").get<double>(), dom.at("d").get<std::size_t>()};
    p.horizon = j.at("horizon_T").get<double>();

    const auto& dyn = j.at("dynamics");
    const auto variant = dyn.at("variant").get<std::string>();
    if (variant == "heat") {
      p.dynamics = HeatDynamics{};
    } else if (variant == "black_scholes") {
      p.dynamics = BlackScholesDynamics{dyn.at("alpha").get<std::vector<double>>(),
                                        dyn.at("beta").get<std::vector<double>>(),
                                        matrix_from_json(dyn.at("sigma_rows"))};
    } else if (variant == "generic_affine") {
      GenericAffineDynamics ga;
      ga.drift_matrix = matrix_from_json(dyn.at("drift_matrix"));
      ga.drift_offset = dyn.at("drift_offset").get<std::vector<double>>();
      ga.diffusion_offset = matrix_from_json(dyn.at("diffusion_offset"));
      if (dyn.contains("diffusion_linear"))
        for (const auto& m : dyn.at("diffusion_linear")) ga.diffusion_linear.push_back(matrix_from_json(m));
      p.dynamics = std::move(ga);
    } else {
      throw ConfigError("dynamics: unknown variant '" + variant + "'");
    }

    const auto& ini = j.at("initial");
    const auto kind = ini.at("variant").get<std::string>();
    Payoff payoff;
    if (kind == "polynomial") {
      payoff = PolynomialPayoff{ini.at("coeffs").get<std::vector<double>>(), ini.at("degree").get<int>()};
    } else if (kind == "basket_call") {
      payoff = BasketCallPayoff{ini.at("weights").get<std::vector<double>>(), ini.at("strike").get<double>()};
    } else if (kind == "call_on_max") {
      payoff = CallOnMaxPayoff{ini.at("weights").get<std::vector<double>>(), ini.at("strike").get<double>()};
    } else {
      throw ConfigError("initial: unknown variant '" + kind + "'");
    }
    p.initial = make_initial(std::move(payoff));
    if (ini.contains("growth")) {
      p.initial.growth.c2 = ini["growth"].value("c2", p.initial.growth.c2);
      p.initial.growth.lambda = ini["growth"].value("lambda", p.initial.growth.lambda);
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem json: ") + e.what());
  }
}

inline std::uint64_t problem_hash(const PdeProblem& p) { return fnv1a(to_json(p).dump()); }

// Convenience constructors used by tests, examples and scaling studies.
inline PdeProblem heat_polynomial_problem(std::size_t d, double u, double v, double T,
                                          std::vector<double> coeffs, int degree) {
  return {{u, v, d}, HeatDynamics{}, make_initial(PolynomialPayoff{std::move(coeffs), degree}), T};
}

inline BlackScholesDynamics bs_identity_dynamics(std::size_t d, double alpha, double beta) {
  Matrix sigma(d, d);
  for (std::size_t i = 0; i < d; ++i) sigma(i, i) = 1.0;
  return {std::vector<double>(d, alpha), std::vector<double>(d, beta), sigma};
}

}  // namespace kolmo

#endif  // KOLMO_PDE_MODEL_HPP_
