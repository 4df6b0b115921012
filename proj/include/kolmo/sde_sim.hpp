#ifndef KOLMO_SDE_SIM_HPP_
#define KOLMO_SDE_SIM_HPP_

// Training data generation: uniform inputs on the hypercube and terminal values
// S_T of the affine SDE started at each input. Heat and Black-Scholes use their
// exact solutions; generic affine dynamics use Euler-Maruyama.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kolmo/error.hpp"
#include "kolmo/matrix.hpp"
#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"

namespace kolmo {

struct EmConfig {
  std::size_t steps = 256;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t problem_hash = 0;
  std::size_t m = 0;
};

struct Dataset {
  Matrix inputs;         // m x d, inside [u,v]^d
  std::vector<double> labels;  // phi(raw_terminals[i])
  Matrix raw_terminals;  // m x d
  DatasetMeta meta;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
};

inline Matrix sample_uniform_inputs(const HypercubeDomain& domain, std::size_t m, RngStream& rng) {
  require(m >= 1, "sample_uniform_inputs: m must be >= 1");
  Matrix x(m, domain.d);
  for (double& v : x.data()) v = rng.uniform(domain.u, domain.v);
  return x;
}

// Y = X + sqrt(2T) Z.
inline Matrix sample_heat_terminal(const Matrix& x, double T, RngStream& rng) {
  require(T > 0.0, "sample_heat_terminal: T must be positive");
  const double scale = std::sqrt(2.0 * T);
  Matrix y = x;
  for (double& v : y.data()) v += scale * rng.normal();
  return y;
}

// Exact lognormal solution; one Brownian endpoint B_T ~ N(0, T I) per row.
inline Matrix sample_bs_terminal(const Matrix& x, const BlackScholesDynamics& dyn, double T, RngStream& rng) {
  require(T > 0.0, "sample_bs_terminal: T must be positive");
  const std::size_t d = x.cols();
  require(dyn.alpha.size() == d && dyn.sigma_rows.rows() == d, "sample_bs_terminal: dimension mismatch");
  for (double v : x.data())
    if (!(v > 0.0)) throw ConfigError("sample_bs_terminal: nonpositive input coordinate");

  std::vector<double> drift(d);
  for (std::size_t i = 0; i < d; ++i) {
    double norm2 = 0.0;
    for (double s : dyn.sigma_rows.row(i)) norm2 += s * s;
    drift[i] = (dyn.alpha[i] - 0.5 * dyn.beta[i] * dyn.beta[i] * norm2) * T;
  }
  const double sqrt_t = std::sqrt(T);
  std::vector<double> brownian(d);
  Matrix y(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double& b : brownian) b = sqrt_t * rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += dyn.sigma_rows(i, j) * brownian[j];
      y(r, i) = x(r, i) * std::exp(drift[i] + dyn.beta[i] * proj);
    }
  }
  return y;
}

inline Matrix euler_maruyama_terminal(const Matrix& x, const GenericAffineDynamics& dyn, double T,
                                      const EmConfig& cfg, RngStream& rng) {
  require(cfg.steps >= 1, "euler_maruyama: steps must be >= 1");
  require(T > 0.0, "euler_maruyama: T must be positive");
  const std::size_t d = x.cols();
  require(dyn.drift_offset.size() == d, "euler_maruyama: dimension mismatch");
  const double h = T / static_cast<double>(cfg.steps);
  const double sqrt_h = std::sqrt(h);
  const bool state_dependent = !dyn.diffusion_linear.empty();

  Matrix y = x;
  std::vector<double> state(d), drift(d), dw(d), sigma(d * d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = y.row(r);
    std::copy(row.begin(), row.end(), state.begin());
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      for (std::size_t i = 0; i < d; ++i) {
        double mu = dyn.drift_offset[i];
        for (std::size_t j = 0; j < d; ++j) mu += dyn.drift_matrix(i, j) * state[j];
        drift[i] = mu;
      }
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
          double s = dyn.diffusion_offset(i, k);
          if (state_dependent)
            for (std::size_t j = 0; j < d; ++j) s += state[j] * dyn.diffusion_linear[j](i, k);
          sigma[i * d + k] = s;
        }
      for (double& w : dw) w = sqrt_h * rng.normal();
      bool finite = true;
      for (std::size_t i = 0; i < d; ++i) {
        double next = state[i] + drift[i] * h;
        for (std::size_t k = 0; k < d; ++k) next += sigma[i * d + k] * dw[k];
        state[i] = next;
        finite = finite && std::isfinite(next);
      }
      if (!finite) {
        std::ostringstream os;
        os << "euler_maruyama: non-finite state at step " << step + 1 << " (row " << r << ")";
        throw NumericError(os.str());
      }
    }
    std::copy(state.begin(), state.end(), row.begin());
  }
  return y;
}

// Heat dynamics written as constant-coefficient affine dynamics.
inline GenericAffineDynamics heat_as_affine(std::size_t d) {
  GenericAffineDynamics g{Matrix(d, d), std::vector<double>(d, 0.0), Matrix(d, d), {}};
  for (std::size_t i = 0; i < d; ++i) g.diffusion_offset(i, i) = std::sqrt(2.0);
  return g;
}

// Geometric Brownian motion with diagonal correlation, as affine dynamics.
inline GenericAffineDynamics gbm_as_affine(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const std::size_t d = alpha.size();
  GenericAffineDynamics g{Matrix(d, d), std::vector<double>(d, 0.0), Matrix(d, d), {}};
  for (std::size_t i = 0; i < d; ++i) {
    g.drift_matrix(i, i) = alpha[i];
    Matrix lin(d, d);
    lin(i, i) = beta[i];
    g.diffusion_linear.push_back(std::move(lin));
  }
  return g;
}

// Terminal values for any dynamics variant, starting at the rows of x.
inline Matrix sample_terminal(const PdeProblem& p, const Matrix& x, RngStream& rng, const EmConfig& em = {}) {
  return std::visit(
      [&](const auto& dyn) -> Matrix {
        using T = std::decay_t<decltype(dyn)>;
        if constexpr (std::is_same_v<T, HeatDynamics>) {
          return sample_heat_terminal(x, p.horizon, rng);
        } else if constexpr (std::is_same_v<T, BlackScholesDynamics>) {
          return sample_bs_terminal(x, dyn, p.horizon, rng);
        } else {
          return euler_maruyama_terminal(x, dyn, p.horizon, em, rng);
        }
      },
      p.dynamics);
}

inline std::vector<double> evaluate_labels(const InitialFunction& phi, const Matrix& terminals) {
  std::vector<double> labels(terminals.rows());
  for (std::size_t i = 0; i < terminals.rows(); ++i) labels[i] = evaluate_initial(phi, terminals.row(i));
  return labels;
}

// Inputs come from substream 0 of rng and SDE noise from substream 1, so the
// input design does not depend on the dynamics.
inline Dataset make_dataset(const PdeProblem& p, std::size_t m, const RngStream& rng, const EmConfig& em = {}) {
  require(m >= 1, "make_dataset: m must be >= 1");
  const auto violations = validate_problem(p);
  if (!violations.empty()) throw ConfigError("make_dataset: invalid problem: " + violations.front());
  RngStream input_rng = rng.substream(0);
  RngStream noise_rng = rng.substream(1);
  Dataset data;
  data.inputs = sample_uniform_inputs(p.domain, m, input_rng);
  data.raw_terminals = sample_terminal(p, data.inputs, noise_rng, em);
  data.labels = evaluate_labels(p.initial, data.raw_terminals);
  data.meta = {rng.seed(), rng.stream_id(), problem_hash(p), m};
  return data;
}

// ---- persistence -----------------------------------------------------------

inline void write_dataset(const Dataset& data, const std::string& csv_path, const std::string& sidecar_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  const std::size_t d = data.dim();
  for (std::size_t i = 0; i < d; ++i) csv << "x_" << i + 1 << ',';
  for (std::size_t i = 0; i < d; ++i) csv << "y_" << i + 1 << ',';
  csv << "label\n" << std::setprecision(17);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.inputs.row(r)) csv << v << ',';
    for (double v : data.raw_terminals.row(r)) csv << v << ',';
    csv << data.labels[r] << '\n';
  }
  std::ofstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot write " + sidecar_path);
  side << nlohmann::json{{"seed", data.meta.seed},
                         {"stream", data.meta.stream},
                         {"problem_hash", data.meta.problem_hash},
                         {"m", data.meta.m}}
              .dump(2)
       << '\n';
}

inline Dataset read_dataset(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw ConfigError("cannot read " + csv_path);
  std::string line;
  std::getline(csv, line);
  std::size_t columns = 1;
  for (char c : line) columns += (c == ',');
  require(columns >= 3 && columns % 2 == 1, "dataset csv: bad header");
  const std::size_t d = (columns - 1) / 2;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    require(count == columns, "dataset csv: ragged row");
    ++rows;
  }
  Dataset data;
  data.inputs = Matrix(rows, d);
  data.raw_terminals = Matrix(rows, d);
  data.labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = values.data() + r * columns;
    for (std::size_t i = 0; i < d; ++i) {
      data.inputs(r, i) = row[i];
      data.raw_terminals(r, i) = row[d + i];
    }
    data.labels[r] = row[2 * d];
  }
  std::ifstream side(sidecar_path);
  if (side) {
    const auto j = nlohmann::json::parse(side);
    data.meta = {j.at("seed").get<std::uint64_t>(), j.at("stream").get<std::uint64_t>(),
                 j.at("problem_hash").get<std::uint64_t>(), j.at("m").get<std::size_t>()};
  }
  return data;
}

}  // namespace kolmo

#endif  // KOLMO_SDE_SIM_HPP_
