#ifndef KOLMO_NEURAL_HPP_
#define KOLMO_NEURAL_HPP_

// Clipped ReLU feedforward networks.
//
//   raw(x) = W_L o rho o W_{L-1} o ... o rho o W_1 (x),   W_l(x) = A_l x + B_l
//   net(x) = sgn(raw) min(|raw|, D)
//
// A_l is stored output x input, row-major. The canonical flat parameter order
// is layer-major with A_l before B_l, giving a vector of length P(a).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kolmo/error.hpp"
#include "kolmo/matrix.hpp"
#include "kolmo/rng.hpp"
#include "kolmo/stats.hpp"

namespace kolmo {

// Anything evaluable at a point of the hypercube.
template <typename F>
concept ScalarModel = requires(const F& f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<double>;
};

struct Architecture {
  std::vector<std::size_t> sizes;  // (d, N_1, ..., N_{L-1}, 1)

  std::size_t input_dim() const { return sizes.front(); }
  std::size_t depth() const { return sizes.size() - 1; }
};

struct ArchMetrics {
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t param_count = 0;
};

inline void validate_architecture(const Architecture& a) {
  require(a.sizes.size() >= 2, "architecture: need at least input and output layer");
  require(a.sizes.back() == 1, "architecture: last layer must have size 1");
  for (std::size_t n : a.sizes) require(n >= 1, "architecture: layer sizes must be positive");
}

// L(a), W(a) = |a|_inf, P(a) = sum_l N_l (N_{l-1} + 1).
inline ArchMetrics arch_metrics(const Architecture& a) {
  validate_architecture(a);
  ArchMetrics m;
  m.depth = a.depth();
  m.width = *std::max_element(a.sizes.begin(), a.sizes.end());
  for (std::size_t l = 1; l < a.sizes.size(); ++l) m.param_count += a.sizes[l] * (a.sizes[l - 1] + 1);
  return m;
}

struct Layer {
  Matrix weights;             // out x in
  std::vector<double> bias;   // out
};

struct NetworkParams {
  std::vector<Layer> layers;

  static NetworkParams zeros(const Architecture& a) {
    NetworkParams p;
    for (std::size_t l = 1; l < a.sizes.size(); ++l)
      p.layers.push_back({Matrix(a.sizes[l], a.sizes[l - 1]), std::vector<double>(a.sizes[l], 0.0)});
    return p;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& layer : layers) {
      for (double& w : layer.weights.data()) fn(w);
      for (double& b : layer.bias) fn(b);
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& layer : layers) {
      for (double w : layer.weights.data()) fn(w);
      for (double b : layer.bias) fn(b);
    }
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for_each([&out](double v) { out.push_back(v); });
    return out;
  }

  void assign(std::span<const double> flat) {
    std::size_t i = 0;
    for_each([&](double& v) { v = flat[i++]; });
  }

  double sup_norm() const {
    double m = 0.0;
    for_each([&m](double v) { m = std::max(m, std::abs(v)); });
    return m;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) { return a.flatten() == b.flatten(); }
};

inline double clip(double raw, double bound) { return std::clamp(raw, -bound, bound); }

class ClippedNetwork {
 public:
  ClippedNetwork(Architecture arch, NetworkParams params, double clip_d, double param_bound_r)
      : arch_(std::move(arch)), params_(std::move(params)), clip_d_(clip_d), bound_r_(param_bound_r) {
    validate_architecture(arch_);
    require(clip_d_ > 0.0, "clipped network: D must be positive");
    require(bound_r_ > 0.0, "clipped network: R must be positive");
    require(params_.layers.size() == arch_.depth(), "clipped network: layer count mismatch");
    for (std::size_t l = 0; l < params_.layers.size(); ++l) {
      const auto& layer = params_.layers[l];
      require(layer.weights.rows() == arch_.sizes[l + 1] && layer.weights.cols() == arch_.sizes[l] &&
                  layer.bias.size() == arch_.sizes[l + 1],
              "clipped network: parameter shape mismatch at layer " + std::to_string(l + 1));
    }
    params_.for_each([](double v) { require(std::isfinite(v), "clipped network: non-finite parameter"); });
  }

  const Architecture& arch() const { return arch_; }
  const NetworkParams& params() const { return params_; }
  NetworkParams& mutable_params() { return params_; }
  double clip_bound() const { return clip_d_; }
  double param_bound() const { return bound_r_; }

  // Member of N_{a,R,D}: |theta|_inf <= R.
  bool in_class() const { return params_.sup_norm() <= bound_r_; }

  double forward_raw(std::span<const double> x) const {
    thread_local std::vector<double> cur, next;
    return forward_raw(x, cur, next);
  }

  double forward(std::span<const double> x) const { return clip(forward_raw(x), clip_d_); }
  double operator()(std::span<const double> x) const { return forward(x); }

 private:
  double forward_raw(std::span<const double> x, std::vector<double>& cur, std::vector<double>& next) const {
    if (x.size() != arch_.input_dim()) throw ConfigError("forward: input dimension mismatch");
    cur.assign(x.begin(), x.end());
    const std::size_t last = params_.layers.size() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      const auto& layer = params_.layers[l];
      next.resize(layer.bias.size());
      for (std::size_t o = 0; o < next.size(); ++o) {
        const auto w = layer.weights.row(o);
        double s = layer.bias[o];
        for (std::size_t i = 0; i < cur.size(); ++i) s += w[i] * cur[i];
        next[o] = (l == last) ? s : std::max(s, 0.0);
      }
      cur.swap(next);
    }
    return cur[0];
  }

  Architecture arch_;
  NetworkParams params_;
  double clip_d_;
  double bound_r_;
};

inline double forward_raw(const ClippedNetwork& net, std::span<const double> x) { return net.forward_raw(x); }
inline double forward(const ClippedNetwork& net, std::span<const double> x) { return net.forward(x); }

// Mean squared residual of a model over the rows of X.
template <ScalarModel Model>
double mean_squared_residual(const Model& model, const Matrix& inputs, std::span<const double> labels) {
  require(inputs.rows() >= 1 && inputs.rows() == labels.size(), "mean_squared_residual: bad batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const double r = model(inputs.row(i)) - labels[i];
    sum += r * r;
  }
  return sum / static_cast<double>(inputs.rows());
}

inline double batch_loss(const ClippedNetwork& net, const Matrix& inputs, std::span<const double> labels) {
  return mean_squared_residual(net, inputs, labels);
}

struct Gradients {
  NetworkParams grad;  // shaped like the network parameters
  double loss = 0.0;
};

// Exact (sub)gradient of batch_loss. Conventions: rho'(0) = 0; the clip has
// slope 1 on [-D, D] (boundary included) and 0 outside.
inline Gradients backward_gradients(const ClippedNetwork& net, const Matrix& inputs,
                                    std::span<const double> labels, std::span<const std::size_t> rows = {}) {
  const auto& layers = net.params().layers;
  const std::size_t depth = layers.size();
  const std::size_t b = rows.empty() ? inputs.rows() : rows.size();
  require(b >= 1, "backward_gradients: empty batch");
  require(inputs.cols() == net.arch().input_dim(), "backward_gradients: input dimension mismatch");

  Gradients out{NetworkParams::zeros(net.arch()), 0.0};
  // activations[0] = x, activations[l] = post-activation of layer l; pre[l] = pre-activation.
  std::vector<std::vector<double>> act(depth + 1), pre(depth + 1);
  for (std::size_t l = 0; l <= depth; ++l) {
    act[l].resize(net.arch().sizes[l]);
    pre[l].resize(net.arch().sizes[l]);
  }
  std::vector<double> delta, delta_prev;
  const double scale = 2.0 / static_cast<double>(b);
  const double bound = net.clip_bound();

  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t idx = rows.empty() ? k : rows[k];
    const auto x = inputs.row(idx);
    std::copy(x.begin(), x.end(), act[0].begin());
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& layer = layers[l];
      for (std::size_t o = 0; o < layer.bias.size(); ++o) {
        const auto w = layer.weights.row(o);
        double s = layer.bias[o];
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * act[l][i];
        pre[l + 1][o] = s;
        act[l + 1][o] = (l + 1 == depth) ? s : std::max(s, 0.0);
      }
    }
    const double raw = act[depth][0];
    const double residual = clip(raw, bound) - labels[idx];
    out.loss += residual * residual;
    if (std::abs(raw) > bound || residual == 0.0) continue;

    delta.assign(1, scale * residual);
    for (std::size_t l = depth; l-- > 0;) {
      auto& g = out.grad.layers[l];
      const auto& layer = layers[l];
      for (std::size_t o = 0; o < delta.size(); ++o) {
        if (delta[o] == 0.0) continue;
        auto gw = g.weights.row(o);
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += delta[o] * act[l][i];
        g.bias[o] += delta[o];
      }
      if (l == 0) break;
      delta_prev.assign(layer.weights.cols(), 0.0);
      for (std::size_t o = 0; o < delta.size(); ++o) {
        if (delta[o] == 0.0) continue;
        const auto w = layer.weights.row(o);
        for (std::size_t i = 0; i < w.size(); ++i) delta_prev[i] += w[i] * delta[o];
      }
      for (std::size_t i = 0; i < delta_prev.size(); ++i)
        if (!(pre[l][i] > 0.0)) delta_prev[i] = 0.0;
      delta.swap(delta_prev);
    }
  }
  out.loss /= static_cast<double>(b);

  bool finite = std::isfinite(out.loss);
  out.grad.for_each([&finite](double v) { finite = finite && std::isfinite(v); });
  if (!finite) throw NumericError("backward_gradients: non-finite gradient");
  return out;
}

// Clamp every parameter to [-R, R]. Returns the number of entries changed.
inline std::size_t project_params(ClippedNetwork& net) {
  const double r = net.param_bound();
  std::size_t changed = 0;
  net.mutable_params().for_each([&](double& v) {
    if (v > r) {
      v = r;
      ++changed;
    } else if (v < -r) {
      v = -r;
      ++changed;
    }
  });
  return changed;
}

// He-style uniform initialization: weights U(-s, s) with s = min(sqrt(6 / fan_in), R),
// giving standard deviation sqrt(2 / fan_in) when the bound is inactive. Biases zero.
inline NetworkParams init_params(const Architecture& arch, double param_bound, RngStream rng) {
  validate_architecture(arch);
  NetworkParams p = NetworkParams::zeros(arch);
  for (auto& layer : p.layers) {
    const double fan_in = static_cast<double>(layer.weights.cols());
    const double s = std::min(std::sqrt(6.0 / fan_in), param_bound);
    for (double& w : layer.weights.data()) w = rng.uniform(-s, s);
  }
  return p;
}

inline std::uint64_t network_hash(const ClippedNetwork& net) {
  const auto flat = net.params().flatten();
  std::uint64_t h = fnv1a(flat);
  const double bounds[2] = {net.clip_bound(), net.param_bound()};
  return fnv1a(std::span<const double>(bounds, 2), h);
}

inline nlohmann::json to_json(const ClippedNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.params().layers)
    layers.push_back({{"A", matrix_to_rows(layer.weights)}, {"B", layer.bias}});
  return {{"arch", net.arch().sizes},
          {"clip_D", net.clip_bound()},
          {"param_bound_R", net.param_bound()},
          {"layers", layers}};
}

inline ClippedNetwork network_from_json(const nlohmann::json& j) {
  try {
    Architecture arch{j.at("arch").get<std::vector<std::size_t>>()};
    NetworkParams params;
    for (const auto& layer : j.at("layers"))
      params.layers.push_back({matrix_from_rows(layer.at("A").get<std::vector<std::vector<double>>>()),
                               layer.at("B").get<std::vector<double>>()});
    return ClippedNetwork(std::move(arch), std::move(params), j.at("clip_D").get<double>(),
                          j.at("param_bound_R").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network json: ") + e.what());
  }
}

}  // namespace kolmo

#endif  // KOLMO_NEURAL_HPP_
