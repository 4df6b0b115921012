#ifndef KOLMO_BOUNDS_HPP_
#define KOLMO_BOUNDS_HPP_

// Explicit generalization-bound thresholds for ERM over clipped ReLU networks
// with polynomially growing payoffs, plus empirical estimators for the tail
// constant c1 and the payoff moments M_{k,d}. All logarithms are natural.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <optional>
#include <span>
#include <string>
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

// log Cov(N_{a,R,D}, r) <= P(a) [ log(4 L(a)^2 max{1,|u|,|v|} / r) + L(a) log(R |a|_inf) ].
inline double covering_log_bound(const Architecture& arch, double R, double r, double u, double v) {
  if (!(r > 0.0)) throw ConfigError("covering_log_bound: radius must be positive");
  require(R > 0.0, "covering_log_bound: R must be positive");
  const ArchMetrics m = arch_metrics(arch);
  const double L = static_cast<double>(m.depth);
  const double scale = std::max({1.0, std::abs(u), std::abs(v)});
  return static_cast<double>(m.param_count) *
         (std::log(4.0 * L * L * scale / r) + L * std::log(R * static_cast<double>(m.width)));
}

// Sup bound of the truncated payoff: c2 (d^{lambda/2} K^lambda + 1).
inline double truncated_payoff_bound(double c2, double lambda, std::size_t d, double K) {
  return c2 * (std::pow(static_cast<double>(d), lambda / 2.0) * std::pow(K, lambda) + 1.0);
}

// m >= 32 (B^2 + D^2)^2 [ log(2/rho) + log Cov(N_{a,R,D}, eps / (16 (D + B))) ].
inline double sample_size_threshold(const Architecture& arch, double R, double D, double u, double v, double eps,
                                    double rho, double B) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("sample_size_bound: eps must lie in (0,1)");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("sample_size_bound: rho must lie in (0,1)");
  require(B >= 0.0 && D > 0.0, "sample_size_bound: need B >= 0 and D > 0");
  const double r = eps / (16.0 * (D + B));
  const double s = B * B + D * D;
  return 32.0 * s * s * (std::log(2.0 / rho) + covering_log_bound(arch, R, r, u, v));
}

// Smallest K with (2D^2 + 2 sqrt(M4)) sqrt(2 d exp(-c1 log(K)^2)) <= eps:
// K = exp{ sqrt( 2/c1 log[(2D^2 + 2 sqrt(M4)) sqrt(2d) / eps] ) }, floored at 1.
inline double truncation_diameter(double eps, std::size_t d, double D, double c1, double M4d) {
  require(eps > 0.0 && d >= 1 && D > 0.0 && c1 > 0.0 && M4d >= 0.0, "truncation_diameter: invalid inputs");
  const double arg = (2.0 * D * D + 2.0 * std::sqrt(M4d)) * std::sqrt(2.0 * static_cast<double>(d)) / eps;
  return std::exp(std::sqrt(std::max(0.0, 2.0 / c1 * std::log(arg))));
}

// 2 m d exp(-c1 log(K)^2); a bound, may exceed 1.
inline double g3_prob_bound(double m, std::size_t d, double K, double c1) {
  require(K >= 1.0, "g3_prob_bound: K must be >= 1");
  const double lk = std::log(K);
  return 2.0 * m * static_cast<double>(d) * std::exp(-c1 * lk * lk);
}

// (c1 / (36 lambda^2)) log(m)^2 - log(m) >= log(d) + log(6 / rho).
inline bool condition3_holds(double m, double c1, double lambda, std::size_t d, double rho) {
  const double lm = std::log(m);
  return c1 / (36.0 * lambda * lambda) * lm * lm - lm >= std::log(static_cast<double>(d)) + std::log(6.0 / rho);
}

// Smallest integer m in [lo, hi] with pred(m), assuming pred stays true once
// it becomes true. Doubling from lo, then bisection.
inline std::optional<double> min_integer_satisfying(const std::function<bool(double)>& pred, double lo = 2.0,
                                                    double hi = 0x1.0p60) {
  if (pred(lo)) return lo;
  double below = lo, above = lo;
  while (!pred(above)) {
    below = above;
    above *= 2.0;
    if (above > hi) return std::nullopt;
  }
  while (above - below > 1.0) {
    const double mid = std::floor((below + above) / 2.0);
    if (mid <= below || mid >= above) break;  // past 2^53 neighbours are not integers apart
    if (pred(mid)) {
      above = mid;
    } else {
      below = mid;
    }
  }
  return above;
}

inline std::optional<double> condition3_min_m(double c1, double lambda, std::size_t d, double rho) {
  return min_integer_satisfying([&](double m) { return condition3_holds(m, c1, lambda, d, rho); });
}

struct BoundInputs {
  Architecture arch;
  double R = 1.0;
  double D = 1.0;
  double u = 0.0;
  double v = 1.0;
  double eps = 0.5;
  double rho = 0.1;
  double lambda = 2.0;
  double c1 = 1.0;
  double c2 = 1.0;
  std::optional<double> B_dK;
  std::optional<double> M4d;
  std::optional<double> K;       // truncation level; derived from M4d when absent
  std::optional<double> m_data;  // sample size for the G3 bound

  std::size_t d() const { return arch.sizes.front(); }
};

inline void validate_bound_inputs(const BoundInputs& in) {
  validate_architecture(in.arch);
  if (!(in.eps > 0.0 && in.eps < 1.0)) throw ConfigError("bounds: eps must lie in (0,1)");
  if (!(in.rho > 0.0 && in.rho < 1.0)) throw ConfigError("bounds: rho must lie in (0,1)");
  require(in.lambda >= 2.0, "bounds: lambda must be >= 2");
  require(in.R > 0.0 && in.D > 0.0 && in.c1 > 0.0 && in.c2 > 0.0, "bounds: R, D, c1, c2 must be positive");
  require(in.u < in.v, "bounds: need u < v");
}

// K from the inputs: explicit K, else the truncation diameter (needs M4d).
inline double resolve_truncation_level(const BoundInputs& in) {
  if (in.K) return *in.K;
  require(in.M4d.has_value(), "bounds: provide K or M4d");
  return truncation_diameter(in.eps, in.d(), in.D, in.c1, *in.M4d);
}

inline double sample_size_bound(const BoundInputs& in) {
  validate_bound_inputs(in);
  const double B = in.B_dK ? *in.B_dK : truncated_payoff_bound(in.c2, in.lambda, in.d(), resolve_truncation_level(in));
  return sample_size_threshold(in.arch, in.R, in.D, in.u, in.v, in.eps, in.rho, B);
}

// The three inequalities of the combined scheme with K = m^{1/(6 lambda)}.
struct CombinedTerms {
  double K = 0.0;
  double m_needed_sample = 0.0;  // sample-size threshold at (eps/6, rho/3, K)
  double K_needed = 0.0;         // truncation diameter at eps/6
  bool sample_ok = false;
  bool truncation_ok = false;
  bool tail_ok = false;
  bool all() const { return sample_ok && truncation_ok && tail_ok; }
};

inline CombinedTerms combined_terms(const BoundInputs& in, double m) {
  require(in.M4d.has_value(), "combined_m_threshold: M4d is required");
  CombinedTerms t;
  t.K = std::pow(m, 1.0 / (6.0 * in.lambda));
  const double B = truncated_payoff_bound(in.c2, in.lambda, in.d(), t.K);
  t.m_needed_sample = sample_size_threshold(in.arch, in.R, in.D, in.u, in.v, in.eps / 6.0, in.rho / 3.0, B);
  t.K_needed = truncation_diameter(in.eps / 6.0, in.d(), in.D, in.c1, *in.M4d);
  t.sample_ok = m >= t.m_needed_sample;
  t.truncation_ok = t.K >= t.K_needed;
  t.tail_ok = condition3_holds(m, in.c1, in.lambda, in.d(), in.rho);
  return t;
}

// Minimal integer m in [2, 2^60] satisfying all three inequalities; nullopt if
// the range holds none.
inline std::optional<double> combined_m_threshold(const BoundInputs& in) {
  validate_bound_inputs(in);
  return min_integer_satisfying([&](double m) { return combined_terms(in, m).all(); });
}

struct BoundReport {
  double covering_log = 0.0;
  double m_truncated = 0.0;
  double K_truncation = 0.0;
  double g3_prob = 0.0;
  std::optional<double> m_combined;  // empty: infeasible in range or M4d unknown
};

inline BoundReport compute_bound_report(const BoundInputs& in) {
  validate_bound_inputs(in);
  BoundReport rep;
  rep.K_truncation = resolve_truncation_level(in);
  const double B = in.B_dK ? *in.B_dK : truncated_payoff_bound(in.c2, in.lambda, in.d(), rep.K_truncation);
  rep.covering_log = covering_log_bound(in.arch, in.R, in.eps / (16.0 * (in.D + B)), in.u, in.v);
  rep.m_truncated = sample_size_threshold(in.arch, in.R, in.D, in.u, in.v, in.eps, in.rho, B);
  const double m = in.m_data ? *in.m_data : std::ceil(rep.m_truncated);
  rep.g3_prob = g3_prob_bound(m, in.d(), std::max(1.0, rep.K_truncation), in.c1);
  if (in.M4d) rep.m_combined = combined_m_threshold(in);
  return rep;
}

inline BoundInputs bound_inputs_from_json(const nlohmann::json& j) {
  try {
    BoundInputs in;
    in.arch.sizes = j.at("arch").get<std::vector<std::size_t>>();
    in.R = j.at("R").get<double>();
    in.D = j.at("D").get<double>();
    in.u = j.value("u", in.u);
    in.v = j.value("v", in.v);
    in.eps = j.at("eps").get<double>();
    in.rho = j.at("rho").get<double>();
    in.lambda = j.value("lambda", in.lambda);
    in.c1 = j.at("c1").get<double>();
    in.c2 = j.value("c2", in.c2);
    auto opt = [&j](const char* key) -> std::optional<double> {
      if (j.contains(key) && !j[key].is_null()) return j[key].get<double>();
      return std::nullopt;
    };
    in.B_dK = opt("B_dK");
    in.M4d = opt("M4d");
    in.K = opt("K");
    in.m_data = opt("m");
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bound inputs json: ") + e.what());
  }
}

inline nlohmann::json to_json(const BoundInputs& in) {
  nlohmann::json j = {{"arch", in.arch.sizes}, {"R", in.R},     {"D", in.D},   {"u", in.u},
                      {"v", in.v},             {"eps", in.eps}, {"rho", in.rho}, {"lambda", in.lambda},
                      {"c1", in.c1},           {"c2", in.c2}};
  auto put = [&j](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  put("B_dK", in.B_dK);
  put("M4d", in.M4d);
  put("K", in.K);
  put("m", in.m_data);
  return j;
}

inline nlohmann::json to_json(const BoundReport& r) {
  return {{"covering_log", r.covering_log},
          {"m_truncated", r.m_truncated},
          {"K_truncation", r.K_truncation},
          {"g3_prob", r.g3_prob},
          {"m_combined", r.m_combined ? nlohmann::json(*r.m_combined) : nlohmann::json(nullptr)},
          {"m_combined_feasible", r.m_combined.has_value()}};
}

// Sweep one scalar input and tabulate the report: value,covering_log,...
inline void write_bound_sweep_csv(const BoundInputs& base, const std::string& param,
                                  std::span<const double> values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << param << ",covering_log,m_truncated,K_truncation,g3_prob,m_combined\n" << std::setprecision(17);
  for (double value : values) {
    BoundInputs in = base;
    if (param == "eps") in.eps = value;
    else if (param == "rho") in.rho = value;
    else if (param == "D") in.D = value;
    else if (param == "R") in.R = value;
    else if (param == "c1") in.c1 = value;
    else if (param == "K") in.K = value;
    else throw ConfigError("bounds sweep: unsupported parameter '" + param + "'");
    const BoundReport r = compute_bound_report(in);
    out << value << ',' << r.covering_log << ',' << r.m_truncated << ',' << r.K_truncation << ',' << r.g3_prob
        << ',';
    if (r.m_combined) out << *r.m_combined;
    out << '\n';
  }
}

// ---- tail condition ----------------------------------------------------------

struct TailPoint {
  double t = 0.0;
  double prob = 0.0;   // pooled empirical P(|Y_i| >= t)
  double bound = 0.0;  // 2 exp(-c log(t)^2) at the constant it was checked against
};

struct TailParams {
  double c1 = 0.0;         // certified constant: 0.9 min(c1_ls, c1_cert)
  double c1_ls = 0.0;      // least-squares fit of log(P/2) = -c1 log(t)^2
  double c1_cert = 0.0;    // largest c satisfied at every grid point
  double fit_quality = 0.0;  // R^2 of the fit
  std::size_t n_fit = 0;
  bool pass = false;
  std::vector<TailPoint> points;
  std::vector<TailPoint> violations;  // upper-grid points heavier than the fitted law
};

inline constexpr double kTailDeflation = 0.9;

// Geometric grid of `count` points from e up to the level exceeded by
// `min_exceedances` pooled magnitudes, so every grid probability rests on at
// least that many samples instead of one or two extreme draws.
inline std::vector<double> default_tail_grid(const Matrix& samples, std::size_t count = 32,
                                             std::size_t min_exceedances = 20) {
  std::vector<double> mags;
  mags.reserve(samples.data().size());
  for (double v : samples.data()) mags.push_back(std::abs(v));
  std::vector<double> grid;
  if (mags.size() <= min_exceedances) return grid;
  const auto cut = mags.end() - static_cast<std::ptrdiff_t>(min_exceedances) - 1;
  std::nth_element(mags.begin(), cut, mags.end());
  const double top = *cut;
  const double lo = std::numbers::e;
  if (!(top > lo)) return grid;
  const double ratio = std::pow(top / lo, 1.0 / static_cast<double>(count - 1));
  double t = lo;
  for (std::size_t i = 0; i < count; ++i, t *= ratio) grid.push_back(t);
  return grid;
}

// Fits P(|Y_i| >= t) <= 2 exp(-c1 log(t)^2) on the pooled coordinates.
// Passes when a positive constant certifies every grid point and no point in
// the upper half of the grid (by log t) is heavier than the deflated
// least-squares law; heavy tails fail the second test.
inline TailParams fit_tail_constant(const Matrix& samples, std::span<const double> t_grid) {
  require(samples.rows() >= 100000, "fit_tail_constant: need n >= 1e5 samples");
  std::vector<double> mags;
  mags.reserve(samples.data().size());
  for (double v : samples.data()) mags.push_back(std::abs(v));
  std::sort(mags.begin(), mags.end());
  const double total = static_cast<double>(mags.size());
  const double top = mags.back();

  TailParams out;
  for (double t : t_grid) {
    if (t < std::numbers::e || t >= top) continue;
    const auto first = std::lower_bound(mags.begin(), mags.end(), t);
    const double p = static_cast<double>(mags.end() - first) / total;
    if (p > 0.0) out.points.push_back({t, p, 0.0});
  }
  if (out.points.empty()) throw ConfigError("fit_tail_constant: empty grid after filtering");
  out.n_fit = out.points.size();

  double sxy = 0.0, sxx = 0.0, cert = INFINITY;
  std::vector<double> s(out.n_fit), a(out.n_fit);
  for (std::size_t k = 0; k < out.n_fit; ++k) {
    const double lt = std::log(out.points[k].t);
    s[k] = lt * lt;
    a[k] = std::log(out.points[k].prob / 2.0);
    sxy += s[k] * a[k];
    sxx += s[k] * s[k];
    cert = std::min(cert, -a[k] / s[k]);
  }
  out.c1_ls = -sxy / sxx;
  out.c1_cert = cert;
  out.c1 = kTailDeflation * std::min(out.c1_ls, out.c1_cert);

  double mean_a = 0.0;
  for (double v : a) mean_a += v;
  mean_a /= static_cast<double>(out.n_fit);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t k = 0; k < out.n_fit; ++k) {
    ss_res += (a[k] + out.c1_ls * s[k]) * (a[k] + out.c1_ls * s[k]);
    ss_tot += (a[k] - mean_a) * (a[k] - mean_a);
  }
  out.fit_quality = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

  const double fitted = kTailDeflation * out.c1_ls;
  const double mid = 0.5 * (std::log(out.points.front().t) + std::log(out.points.back().t));
  for (std::size_t k = 0; k < out.n_fit; ++k) {
    auto& pt = out.points[k];
    pt.bound = 2.0 * std::exp(-out.c1 * s[k]);
    if (std::log(pt.t) >= mid) {
      const double law = 2.0 * std::exp(-fitted * s[k]);
      if (pt.prob > law) out.violations.push_back({pt.t, pt.prob, law});
    }
  }
  out.pass = out.c1 > 0.0 && out.n_fit >= 8 && out.violations.empty();
  return out;
}

inline nlohmann::json to_json(const TailParams& tp) {
  auto pts = [](const std::vector<TailPoint>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : v) arr.push_back({{"t", p.t}, {"prob", p.prob}, {"bound", p.bound}});
    return arr;
  };
  return {{"c1", tp.c1},           {"c1_ls", tp.c1_ls}, {"c1_cert", tp.c1_cert}, {"fit_quality", tp.fit_quality},
          {"n_fit", tp.n_fit},     {"pass", tp.pass},   {"points", pts(tp.points)},
          {"violations", pts(tp.violations)}};
}

// ---- moment growth -----------------------------------------------------------

struct MomentPoint {
  std::size_t d = 0;
  double moment = 0.0;  // estimate of E|phi(Y)|^k
  double ci_halfwidth = 0.0;
};

struct MomentGrowth {
  std::vector<MomentPoint> points;
  double slope = 0.0;  // of log M vs log d
  double r_squared = 0.0;
};

// draw(d, n, rng) returns n payoff samples phi_d(Y_d).
template <typename Draw>
MomentGrowth estimate_moment_growth(std::span<const std::size_t> d_list, double k, std::size_t n, RngStream rng,
                                    Draw&& draw) {
  require(!d_list.empty(), "moment_growth_estimate: empty d list");
  MomentGrowth out;
  std::vector<double> lx, ly;
  for (std::size_t idx = 0; idx < d_list.size(); ++idx) {
    RngStream sub = rng.substream(idx);
    const std::vector<double> payoffs = draw(d_list[idx], n, sub);
    RunningStats stats;
    for (double phi : payoffs) stats.add(std::pow(std::abs(phi), k));
    out.points.push_back({d_list[idx], stats.mean(), stats.ci99()});
    if (stats.mean() > 0.0) {
      lx.push_back(std::log(static_cast<double>(d_list[idx])));
      ly.push_back(std::log(stats.mean()));
    }
  }
  const LineFit fit = fit_line(lx, ly);
  out.slope = fit.slope;
  out.r_squared = fit.r_squared;
  return out;
}

// M_{k,d} along a problem family; problem_for(d) builds the d-dimensional member.
inline MomentGrowth moment_growth_estimate(const std::function<PdeProblem(std::size_t)>& problem_for,
                                           std::span<const std::size_t> d_list, double k, std::size_t n,
                                           RngStream rng) {
  require(n >= 100000, "moment_growth_estimate: need n >= 1e5 per dimension");
  return estimate_moment_growth(d_list, k, n, rng, [&](std::size_t d, std::size_t count, RngStream& sub) {
    const Dataset data = make_dataset(problem_for(d), count, sub);
    return data.labels;
  });
}

inline nlohmann::json to_json(const MomentGrowth& mg) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : mg.points) pts.push_back({{"d", p.d}, {"moment", p.moment}, {"ci", p.ci_halfwidth}});
  return {{"points", pts}, {"slope", mg.slope}, {"r_squared", mg.r_squared}};
}

}  // namespace kolmo

#endif  // KOLMO_BOUNDS_HPP_
