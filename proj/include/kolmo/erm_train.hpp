#ifndef KOLMO_ERM_TRAIN_HPP_
#define KOLMO_ERM_TRAIN_HPP_

// Empirical risk, truncated empirical risk and the minibatch training loop
// that stands in for the empirical risk minimizer over N_{a,R,D}.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kolmo/error.hpp"
#include "kolmo/neural.hpp"
#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"
#include "kolmo/sde_sim.hpp"
#include "kolmo/stats.hpp"

namespace kolmo {

template <ScalarModel Model>
double empirical_risk(const Model& model, const Dataset& data) {
  return mean_squared_residual(model, data.inputs, data.labels);
}

// phi^(K)(y) = 1{|y|_inf <= K} phi(y).
inline double truncate_label(std::span<const double> y_raw, double label, double K) {
  require(K > 0.0, "truncate_label: K must be positive");
  for (double v : y_raw)
    if (std::abs(v) > K) return 0.0;
  return label;
}

inline std::vector<double> truncated_labels(const Dataset& data, double K) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = truncate_label(data.raw_terminals.row(i), data.labels[i], K);
  return out;
}

template <ScalarModel Model>
double truncated_empirical_risk(const Model& model, const Dataset& data, double K) {
  return mean_squared_residual(model, data.inputs, truncated_labels(data, K));
}

inline double max_terminal_sup_norm(const Dataset& data) {
  double m = 0.0;
  for (double v : data.raw_terminals.data()) m = std::max(m, std::abs(v));
  return m;
}

enum class OptimizerMethod { Adam, Sgd };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  bool projection = true;
  std::optional<double> truncation_K;
};

struct HypothesisClass {
  Architecture arch;
  double R = 1.0;
  double D = 1.0;
};

struct TrainReport {
  double final_empirical_risk = 0.0;
  std::vector<double> risk_curve;  // training objective after each epoch
  double wall_time = 0.0;          // seconds
  double projection_active_fraction = 0.0;
  std::uint64_t trained_network_hash = 0;
};

struct TrainResult {
  ClippedNetwork net;
  TrainReport report;
};

namespace detail {

class Adam {
 public:
  Adam(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& theta, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      theta[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace detail

inline void validate_train_config(const TrainConfig& cfg, std::size_t m) {
  require(cfg.batch_size >= 1 && cfg.batch_size <= m, "train: batch_size must be in [1, m]");
  require(cfg.optimizer.learning_rate > 0.0, "train: learning_rate must be positive");
  if (cfg.truncation_K) require(*cfg.truncation_K > 0.0, "train: truncation_K must be positive");
}

// Minibatch Adam/SGD on the (optionally truncated) empirical risk, projecting
// onto |theta|_inf <= R after each step when enabled. Deterministic in cfg.seed.
inline TrainResult train(const PdeProblem& p, const Dataset& data, const HypothesisClass& hclass,
                         const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  require(data.size() >= 1, "train: empty dataset");
  require(data.dim() == p.domain.d, "train: dataset dimension does not match problem");
  require(hclass.arch.sizes.front() == p.domain.d, "train: architecture input size != d");
  validate_train_config(cfg, data.size());

  const RngStream root(cfg.seed, 0x7261696eULL);
  ClippedNetwork net(hclass.arch, init_params(hclass.arch, hclass.R, root.substream(0)), hclass.D, hclass.R);
  if (cfg.projection) project_params(net);
  RngStream shuffle_rng = root.substream(1);

  const std::vector<double> labels = cfg.truncation_K ? truncated_labels(data, *cfg.truncation_K) : data.labels;
  const std::size_t m = data.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> theta = net.params().flatten();
  detail::Adam adam(cfg.optimizer, theta.size());
  std::size_t steps = 0, projected_steps = 0;
  TrainReport report;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    for (std::size_t begin = 0; begin < m; begin += cfg.batch_size) {
      const std::size_t end = std::min(m, begin + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const auto grads = backward_gradients(net, data.inputs, labels, rows);
      const auto g = grads.grad.flatten();
      if (cfg.optimizer.method == OptimizerMethod::Adam) {
        adam.step(theta, g);
      } else {
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= cfg.optimizer.learning_rate * g[k];
      }
      net.mutable_params().assign(theta);
      ++steps;
      if (cfg.projection && project_params(net) > 0) {
        ++projected_steps;
        theta = net.params().flatten();
      }
    }
    const double risk = mean_squared_residual(net, data.inputs, labels);
    if (!std::isfinite(risk))
      throw NumericError("train: risk diverged at epoch " + std::to_string(epoch + 1));
    report.risk_curve.push_back(risk);
  }

  report.final_empirical_risk = empirical_risk(net, data);
  report.projection_active_fraction =
      steps > 0 ? static_cast<double>(projected_steps) / static_cast<double>(steps) : 0.0;
  report.trained_network_hash = network_hash(net);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(net), std::move(report)};
}

// ---- JSON / CSV ------------------------------------------------------------

// Numeric fields only; wall_time is excluded so identical runs hash equal.
inline nlohmann::json numeric_json(const TrainReport& r) {
  return {{"final_empirical_risk", r.final_empirical_risk},
          {"risk_curve", r.risk_curve},
          {"projection_active_fraction", r.projection_active_fraction},
          {"trained_network_hash", r.trained_network_hash}};
}

inline nlohmann::json to_json(const TrainReport& r) {
  auto j = numeric_json(r);
  j["wall_time"] = r.wall_time;
  return j;
}

inline std::uint64_t report_hash(const TrainReport& r) { return fnv1a(numeric_json(r).dump()); }

inline void write_risk_curve_csv(const TrainReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,empirical_risk\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.risk_curve.size(); ++i) out << i + 1 << ',' << r.risk_curve[i] << '\n';
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.projection = j.value("projection", cfg.projection);
    if (j.contains("truncation_K") && !j["truncation_K"].is_null()) cfg.truncation_K = j["truncation_K"].get<double>();
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      const auto method = o.value("method", std::string("adam"));
      if (method == "adam") {
        cfg.optimizer.method = OptimizerMethod::Adam;
      } else if (method == "sgd") {
        cfg.optimizer.method = OptimizerMethod::Sgd;
      } else {
        throw ConfigError("train: unknown optimizer '" + method + "'");
      }
      cfg.optimizer.learning_rate = o.value("learning_rate", cfg.optimizer.learning_rate);
      cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
      cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
      cfg.optimizer.eps = o.value("eps", cfg.optimizer.eps);
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config json: ") + e.what());
  }
}

inline nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j = {{"epochs", cfg.epochs},
                      {"batch_size", cfg.batch_size},
                      {"seed", cfg.seed},
                      {"projection", cfg.projection},
                      {"optimizer",
                       {{"method", cfg.optimizer.method == OptimizerMethod::Adam ? "adam" : "sgd"},
                        {"learning_rate", cfg.optimizer.learning_rate},
                        {"beta1", cfg.optimizer.beta1},
                        {"beta2", cfg.optimizer.beta2},
                        {"eps", cfg.optimizer.eps}}}};
  j["truncation_K"] = cfg.truncation_K ? nlohmann::json(*cfg.truncation_K) : nlohmann::json(nullptr);
  return j;
}

}  // namespace kolmo

#endif  // KOLMO_ERM_TRAIN_HPP_
