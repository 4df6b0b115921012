#ifndef KOLMO_EXPERIMENTS_HPP_
#define KOLMO_EXPERIMENTS_HPP_

// End-to-end orchestration: dataset -> training -> error vs reference ->
// bound report, scaling studies over the dimension, and empirical checks of
// the tail, moment, growth and risk-gap properties.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kolmo/bounds.hpp"
#include "kolmo/erm_train.hpp"
#include "kolmo/error.hpp"
#include "kolmo/neural.hpp"
#include "kolmo/oracle.hpp"
#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"
#include "kolmo/sde_sim.hpp"
#include "kolmo/stats.hpp"
#include "kolmo/svg.hpp"

namespace kolmo {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitConfig = 2, kExitNumeric = 3, kExitPartial = 4 };

struct OracleChoice {
  std::string kind = "auto";  // auto | closed_form_heat_poly | closed_form_bs_call_1d | monte_carlo
  std::size_t n_oracle = 100000;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  PdeProblem problem;
  HypothesisClass hypothesis;
  TrainConfig train;
  std::size_t data_m = 4096;
  OracleChoice oracle;
  std::size_t n_quadrature = 100000;
  std::size_t n_risk_gap = 100000;
  std::size_t n_tail = 200000;  // terminal draws for the c1 and M4 estimates
  double eps = 0.1;
  double rho = 0.1;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

// Seed from KOLMO_SEED when set, otherwise the configured one.
inline std::uint64_t effective_seed(std::uint64_t configured) {
  if (const char* env = std::getenv("KOLMO_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("KOLMO_SEED is not an unsigned integer: ") + env);
    }
  }
  return configured;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    cfg.problem = problem_from_json(j.at("problem"));
    const auto& h = j.at("hypothesis");
    cfg.hypothesis = {Architecture{h.at("arch").get<std::vector<std::size_t>>()}, h.at("R").get<double>(),
                      h.at("D").get<double>()};
    cfg.seed = effective_seed(j.value("seed", std::uint64_t{0}));
    cfg.train = train_config_from_json(j.value("train", nlohmann::json::object()));
    if (!j.contains("train") || !j["train"].contains("seed")) cfg.train.seed = mix64(cfg.seed);
    cfg.data_m = j.at("data_m").get<std::size_t>();
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      cfg.oracle.kind = o.value("kind", cfg.oracle.kind);
      cfg.oracle.n_oracle = o.value("n_oracle", cfg.oracle.n_oracle);
      cfg.oracle.seed = o.value("seed", cfg.seed);
    } else {
      cfg.oracle.seed = cfg.seed;
    }
    cfg.n_quadrature = j.value("n_quadrature", cfg.n_quadrature);
    cfg.n_risk_gap = j.value("n_risk_gap", cfg.n_quadrature);
    cfg.n_tail = j.value("n_tail", cfg.n_tail);
    if (j.contains("bounds")) {
      cfg.eps = j["bounds"].value("eps", cfg.eps);
      cfg.rho = j["bounds"].value("rho", cfg.rho);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config json: ") + e.what());
  }
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"problem", to_json(cfg.problem)},
          {"hypothesis", {{"arch", cfg.hypothesis.arch.sizes}, {"R", cfg.hypothesis.R}, {"D", cfg.hypothesis.D}}},
          {"train", to_json(cfg.train)},
          {"data_m", cfg.data_m},
          {"oracle", {{"kind", cfg.oracle.kind}, {"n_oracle", cfg.oracle.n_oracle}, {"seed", cfg.oracle.seed}}},
          {"n_quadrature", cfg.n_quadrature},
          {"n_risk_gap", cfg.n_risk_gap},
          {"n_tail", cfg.n_tail},
          {"bounds", {{"eps", cfg.eps}, {"rho", cfg.rho}}},
          {"output_dir", cfg.output_dir},
          {"seed", cfg.seed}};
}

inline void validate_experiment_config(const ExperimentConfig& cfg) {
  const auto violations = validate_problem(cfg.problem);
  if (!violations.empty()) {
    std::string all;
    for (const auto& v : violations) all += "\n  " + v;
    throw ConfigError("invalid problem:" + all);
  }
  validate_architecture(cfg.hypothesis.arch);
  require(cfg.hypothesis.arch.sizes.front() == cfg.problem.domain.d, "hypothesis: arch input size != d");
  require(cfg.hypothesis.R > 0.0 && cfg.hypothesis.D > 0.0, "hypothesis: R and D must be positive");
  require(cfg.data_m >= 1, "data_m must be >= 1");
  validate_train_config(cfg.train, cfg.data_m);
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ConfigError("bounds: eps must lie in (0,1)");
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) throw ConfigError("bounds: rho must lie in (0,1)");
  require(cfg.n_quadrature >= 2 && cfg.n_risk_gap >= 2, "n_quadrature and n_risk_gap must be >= 2");
  require(cfg.n_tail >= 100000, "n_tail must be >= 1e5");
  require(!cfg.output_dir.empty(), "output_dir must be set");
}

inline ReferenceSolution make_reference(const PdeProblem& p, const OracleChoice& choice) {
  if (choice.kind == "auto") return ReferenceSolution::best_available(p, choice.n_oracle, choice.seed);
  return {p, reference_kind_from_string(choice.kind), choice.n_oracle, choice.seed};
}

// ---- artifact helpers -----------------------------------------------------------

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct ManifestEntry {
  std::string file;
  std::optional<std::uint64_t> hash;  // empty for non-numeric artifacts (SVG)
};

inline void write_manifest(const fs::path& dir, const std::vector<ManifestEntry>& entries) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : entries)
    files.push_back({{"file", e.file}, {"fnv1a64", e.hash ? nlohmann::json(hex64(*e.hash)) : nlohmann::json(nullptr)}});
  write_json(dir / "manifest.json", {{"files", files}});
}

// Runs fn and maps failures to exit codes, leaving error.txt in dir.
inline int run_guarded(const fs::path& dir, const std::function<void()>& fn) {
  auto diagnose = [&dir](const std::string& kind, const std::string& what) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "error.txt") << kind << ": " << what << '\n';
  };
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    diagnose("config", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    diagnose("numeric", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    diagnose("error", e.what());
    return kExitIo;
  }
}

// ---- single experiment ----------------------------------------------------------

struct BoundEstimate {
  bool available = false;
  std::string reason;
  TailParams tail;
  double M4d = 0.0;
  BoundInputs inputs;
  BoundReport report;
};

// Plug-in c1 and M4 from n_tail terminal draws, then the full bound report.
inline BoundEstimate estimate_bounds(const ExperimentConfig& cfg, RngStream rng) {
  BoundEstimate be;
  const Dataset sample = make_dataset(cfg.problem, cfg.n_tail, rng);
  RunningStats m4;
  for (double phi : sample.labels) m4.add(phi * phi * phi * phi);
  be.M4d = m4.mean() + 4.0 * m4.std_error();
  const auto grid = default_tail_grid(sample.raw_terminals);
  if (grid.empty()) {
    be.reason = "terminal values never exceed e; tail fit undefined";
    return be;
  }
  be.tail = fit_tail_constant(sample.raw_terminals, grid);
  if (!(be.tail.c1 > 0.0)) {
    be.reason = "no positive tail constant";
    return be;
  }
  be.inputs.arch = cfg.hypothesis.arch;
  be.inputs.R = cfg.hypothesis.R;
  be.inputs.D = cfg.hypothesis.D;
  be.inputs.u = cfg.problem.domain.u;
  be.inputs.v = cfg.problem.domain.v;
  be.inputs.eps = cfg.eps;
  be.inputs.rho = cfg.rho;
  be.inputs.lambda = cfg.problem.initial.growth.lambda;
  be.inputs.c1 = be.tail.c1;
  be.inputs.c2 = cfg.problem.initial.growth.c2;
  be.inputs.M4d = be.M4d;
  be.inputs.m_data = static_cast<double>(cfg.data_m);
  be.report = compute_bound_report(be.inputs);
  be.available = true;
  return be;
}

struct ExperimentResult {
  TrainReport train;
  ErrorReport error;
  RiskGap risk_gap;
  BoundEstimate bounds;
  ArchMetrics metrics;
};

// Full pipeline; writes every artifact into cfg.output_dir. Throws on failure.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_experiment_config(cfg);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  ExperimentResult res;
  res.metrics = arch_metrics(cfg.hypothesis.arch);
  const Dataset data = make_dataset(cfg.problem, cfg.data_m, RngStream(cfg.seed, 1));
  auto [net, train_report] = train(cfg.problem, data, cfg.hypothesis, cfg.train);
  res.train = std::move(train_report);

  const ReferenceSolution ref = make_reference(cfg.problem, cfg.oracle);
  RngStream quad_rng(cfg.seed, 3);
  res.error = estimation_error_l2(net, ref, cfg.problem.domain, cfg.n_quadrature, quad_rng);
  RngStream gap_rng(cfg.seed, 5);
  res.risk_gap = risk_gap_identity_check(net, cfg.problem, ref, cfg.n_risk_gap, gap_rng);
  res.error.risk_estimate = res.risk_gap.risk_f;
  res.error.risk_gap_residual = res.risk_gap.residual;
  res.bounds = estimate_bounds(cfg, RngStream(cfg.seed, 4));

  nlohmann::json error_json = to_json(res.error);
  error_json["oracle_kind"] = to_string(ref.kind());
  error_json["risk_gap"] = to_json(res.risk_gap);

  nlohmann::json bound_json;
  if (res.bounds.available) {
    bound_json = to_json(res.bounds.report);
    bound_json["inputs"] = to_json(res.bounds.inputs);
  } else {
    bound_json = {{"available", false}, {"reason", res.bounds.reason}};
  }
  bound_json["tail_fit"] = to_json(res.bounds.tail);
  bound_json["M4d_estimate"] = res.bounds.M4d;

  const nlohmann::json summary = {
      {"config", to_json(cfg)},
      {"arch_metrics",
       {{"depth", res.metrics.depth}, {"width", res.metrics.width}, {"param_count", res.metrics.param_count}}},
      {"dataset", {{"m", data.size()}, {"problem_hash", hex64(data.meta.problem_hash)}}},
      {"final_empirical_risk", res.train.final_empirical_risk},
      {"l2_error_sq", res.error.l2_error_sq},
      {"relative_l2_error", res.error.relative_l2_error},
      {"error_within_eps", res.error.l2_error_sq <= cfg.eps},
      {"note", "estimates from this run; the bound report evaluates explicit thresholds, not achieved sizes"}};

  write_json(dir / "experiment.json", summary);
  write_json(dir / "train_report.json", to_json(res.train));
  write_json(dir / "error_report.json", error_json);
  write_json(dir / "bound_report.json", bound_json);
  write_json(dir / "network.json", to_json(net));
  write_risk_curve_csv(res.train, (dir / "risk_curve.csv").string());
  std::vector<double> epochs(res.train.risk_curve.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i + 1);
  write_line_chart((dir / "risk_curve.svg").string(), {{"empirical risk", epochs, res.train.risk_curve}},
                   {"Training risk", "epoch", "empirical risk", false, true});

  std::vector<ManifestEntry> manifest;
  for (const char* f : {"experiment.json", "error_report.json", "bound_report.json", "network.json", "risk_curve.csv"})
    manifest.push_back({f, fnv1a(read_file(dir / f))});
  manifest.push_back({"train_report.json", report_hash(res.train)});
  manifest.push_back({"risk_curve.svg", std::nullopt});
  write_manifest(dir, manifest);
  return res;
}

inline int run_experiment_cli(const ExperimentConfig& cfg) {
  return run_guarded(cfg.output_dir, [&] { run_experiment(cfg); });
}

// ---- problem families across dimensions -------------------------------------------

// Same family at dimension d: coefficients replicated from the first entry,
// basket weights uniform, correlation identity.
inline PdeProblem resize_problem(const PdeProblem& base, std::size_t d) {
  require(d >= 1, "resize_problem: d must be >= 1");
  PdeProblem p = base;
  p.domain.d = d;
  if (const auto* bs = std::get_if<BlackScholesDynamics>(&base.dynamics)) {
    p.dynamics = bs_identity_dynamics(d, bs->alpha.at(0), bs->beta.at(0));
  } else if (std::holds_alternative<GenericAffineDynamics>(base.dynamics)) {
    throw ConfigError("resize_problem: generic affine dynamics cannot be resized");
  }
  Payoff payoff = std::visit(
      [d](const auto& ph) -> Payoff {
        using T = std::decay_t<decltype(ph)>;
        if constexpr (std::is_same_v<T, PolynomialPayoff>) {
          return PolynomialPayoff{std::vector<double>(d, ph.coeffs.at(0)), ph.degree};
        } else if constexpr (std::is_same_v<T, BasketCallPayoff>) {
          return BasketCallPayoff{std::vector<double>(d, 1.0 / static_cast<double>(d)), ph.strike};
        } else {
          return CallOnMaxPayoff{std::vector<double>(d, ph.weights.at(0)), ph.strike};
        }
      },
      base.initial.payoff);
  p.initial = make_initial(std::move(payoff));
  return p;
}

// ---- scaling study ----------------------------------------------------------------

struct DimensionOverride {
  std::optional<std::size_t> data_m;
  std::optional<std::vector<std::size_t>> arch;
  std::optional<std::size_t> epochs;
};

struct ScalingStudySpec {
  nlohmann::json base;  // experiment config document; its problem is the family template
  std::vector<std::size_t> d_list;
  double target_error = 0.05;  // relative L2
  std::size_t repetitions = 1;
  std::size_t width_factor = 16;
  std::size_t depth = 3;
  std::map<std::size_t, DimensionOverride> overrides;
  std::string output_dir = "scaling";
};

inline ScalingStudySpec scaling_spec_from_json(const nlohmann::json& j) {
  try {
    ScalingStudySpec s;
    s.base = j.at("base");
    s.d_list = j.at("d_list").get<std::vector<std::size_t>>();
    s.target_error = j.value("target_error", s.target_error);
    s.repetitions = j.value("repetitions", s.repetitions);
    s.width_factor = j.value("width_factor", s.width_factor);
    s.depth = j.value("depth", s.depth);
    s.output_dir = j.value("output_dir", s.output_dir);
    if (j.contains("overrides")) {
      for (const auto& [key, val] : j["overrides"].items()) {
        DimensionOverride o;
        if (val.contains("data_m")) o.data_m = val["data_m"].get<std::size_t>();
        if (val.contains("arch")) o.arch = val["arch"].get<std::vector<std::size_t>>();
        if (val.contains("epochs")) o.epochs = val["epochs"].get<std::size_t>();
        s.overrides[std::stoul(key)] = o;
      }
    }
    require(!s.d_list.empty(), "scaling: d_list must be nonempty");
    for (std::size_t i = 0; i < s.d_list.size(); ++i) {
      require(s.d_list[i] >= 1, "scaling: dimensions must be positive");
      if (i > 0) require(s.d_list[i] > s.d_list[i - 1], "scaling: d_list must be strictly increasing");
    }
    require(s.repetitions >= 1, "scaling: repetitions must be >= 1");
    require(s.depth >= 1, "scaling: depth must be >= 1");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scaling spec json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scaling spec: ") + e.what());
  }
}

// Default architecture at dimension d: depth L with hidden width width_factor * d.
inline Architecture scaled_architecture(std::size_t d, std::size_t width_factor, std::size_t depth) {
  Architecture a{{d}};
  for (std::size_t l = 1; l < depth; ++l) a.sizes.push_back(width_factor * d);
  a.sizes.push_back(1);
  return a;
}

struct ScalingRow {
  std::size_t d = 0;
  std::size_t rep = 0;
  std::size_t m = 0;
  std::size_t param_count = 0;
  double l2_error_sq = 0.0;
  double relative_error = 0.0;
  bool success = false;
  std::string status = "ok";
};

struct ScalingSummary {
  std::vector<ScalingRow> rows;
  LineFit m_vs_d;
  LineFit params_vs_d;
  bool partial_failure = false;
};

inline ExperimentConfig scaling_config_for(const ScalingStudySpec& spec, std::size_t d, std::size_t rep) {
  ExperimentConfig cfg = experiment_config_from_json(spec.base);
  cfg.problem = resize_problem(cfg.problem, d);
  cfg.hypothesis.arch = scaled_architecture(d, spec.width_factor, spec.depth);
  if (auto it = spec.overrides.find(d); it != spec.overrides.end()) {
    if (it->second.data_m) cfg.data_m = *it->second.data_m;
    if (it->second.arch) cfg.hypothesis.arch.sizes = *it->second.arch;
    if (it->second.epochs) cfg.train.epochs = *it->second.epochs;
  }
  cfg.seed = mix64(cfg.seed ^ mix64(d * 1000003ULL + rep));
  cfg.train.seed = mix64(cfg.seed);
  cfg.oracle.seed = cfg.seed;
  cfg.output_dir = (fs::path(spec.output_dir) / ("d_" + std::to_string(d)) / ("rep_" + std::to_string(rep))).string();
  return cfg;
}

inline ScalingSummary run_scaling_study(const ScalingStudySpec& spec) {
  const fs::path dir(spec.output_dir);
  fs::create_directories(dir);
  ScalingSummary summary;
  for (std::size_t d : spec.d_list) {
    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
      ScalingRow row{d, rep};
      try {
        const ExperimentConfig cfg = scaling_config_for(spec, d, rep);
        row.m = cfg.data_m;
        row.param_count = arch_metrics(cfg.hypothesis.arch).param_count;
        const int code = run_guarded(cfg.output_dir, [&] {
          const ExperimentResult r = run_experiment(cfg);
          row.l2_error_sq = r.error.l2_error_sq;
          row.relative_error = r.error.relative_l2_error;
        });
        if (code != kExitOk) {
          row.status = "failed (exit " + std::to_string(code) + ")";
          summary.partial_failure = true;
        } else {
          row.success = row.relative_error <= spec.target_error;
        }
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
        summary.partial_failure = true;
      }
      summary.rows.push_back(row);
    }
  }

  std::vector<double> ld, lm, lp;
  for (std::size_t d : spec.d_list) {
    for (const auto& r : summary.rows)
      if (r.d == d && r.m > 0) {
        ld.push_back(std::log(static_cast<double>(d)));
        lm.push_back(std::log(static_cast<double>(r.m)));
        lp.push_back(std::log(static_cast<double>(r.param_count)));
        break;
      }
  }
  summary.m_vs_d = fit_line(ld, lm);
  summary.params_vs_d = fit_line(ld, lp);

  std::ofstream csv(dir / "summary.csv");
  csv << "d,rep,m,param_count,l2_error_sq,relative_l2_error,success,status\n" << std::setprecision(17);
  for (const auto& r : summary.rows)
    csv << r.d << ',' << r.rep << ',' << r.m << ',' << r.param_count << ',' << r.l2_error_sq << ','
        << r.relative_error << ',' << (r.success ? 1 : 0) << ',' << r.status << '\n';

  nlohmann::json per_d = nlohmann::json::array();
  Series m_series{"m (samples)", {}, {}}, p_series{"P(a) (parameters)", {}, {}};
  Series e_series{"median relative L2 error", {}, {}};
  for (std::size_t d : spec.d_list) {
    std::vector<double> errs;
    std::size_t ok = 0, m = 0, params = 0;
    for (const auto& r : summary.rows)
      if (r.d == d) {
        m = r.m;
        params = r.param_count;
        if (r.status == "ok") errs.push_back(r.relative_error);
        ok += r.success ? 1 : 0;
      }
    std::sort(errs.begin(), errs.end());
    nlohmann::json entry = {{"d", d}, {"m", m}, {"param_count", params},
                            {"success_fraction", static_cast<double>(ok) / static_cast<double>(spec.repetitions)}};
    if (!errs.empty()) {
      const double median = errs.size() % 2 ? errs[errs.size() / 2]
                                            : 0.5 * (errs[errs.size() / 2 - 1] + errs[errs.size() / 2]);
      entry["relative_error"] = {{"min", errs.front()}, {"median", median}, {"max", errs.back()}};
      e_series.x.push_back(static_cast<double>(d));
      e_series.y.push_back(median);
    }
    m_series.x.push_back(static_cast<double>(d));
    m_series.y.push_back(static_cast<double>(m));
    p_series.x.push_back(static_cast<double>(d));
    p_series.y.push_back(static_cast<double>(params));
    per_d.push_back(entry);
  }
  auto fit_json = [](const LineFit& f) { return nlohmann::json{{"slope", f.slope}, {"r_squared", f.r_squared}}; };
  write_json(dir / "summary.json", {{"target_relative_error", spec.target_error},
                                    {"repetitions", spec.repetitions},
                                    {"per_d", per_d},
                                    {"log_m_vs_log_d", fit_json(summary.m_vs_d)},
                                    {"log_params_vs_log_d", fit_json(summary.params_vs_d)},
                                    {"partial_failure", summary.partial_failure},
                                    {"note", "empirical evidence from this study; no theorem constants are claimed"}});
  write_line_chart((dir / "scaling.svg").string(), {m_series, p_series},
                   {"Resources vs dimension", "d", "count", true, true});
  write_line_chart((dir / "scaling_error.svg").string(), {e_series},
                   {"Median relative L2 error vs dimension", "d", "relative error", true, false});
  return summary;
}

// ---- theory verification --------------------------------------------------------------

using TerminalSampler = std::function<Matrix(const Matrix& inputs, RngStream& rng)>;

struct VerifyConfig {
  std::size_t n_tail = 1000000;
  std::vector<std::size_t> d_list{1, 2, 4, 8};
  double moment_k = 2.0;
  std::size_t n_moment = 100000;
  std::size_t n_identity = 20000;
  std::size_t n_oracle = 10000;
  std::uint64_t seed = 0;
  TerminalSampler terminal_override;  // test hook: replaces the SDE terminal law for the tail check
};

struct VerifyReport {
  TailParams tail;
  MomentGrowth moments;
  double moment_slope_limit = 0.0;
  bool moments_pass = false;
  GrowthCheck growth;
  RiskGap identity;
  bool identity_pass = false;
  bool pass = false;
};

inline VerifyReport verify_theory(const PdeProblem& p, const VerifyConfig& vc) {
  const auto violations = validate_problem(p);
  if (!violations.empty()) throw ConfigError("verify: invalid problem: " + violations.front());
  require(!std::holds_alternative<GenericAffineDynamics>(p.dynamics), "verify: needs heat or Black-Scholes dynamics");
  const RngStream root(vc.seed, 0x766572ULL);
  VerifyReport rep;

  RngStream input_rng = root.substream(0), noise_rng = root.substream(1);
  const Matrix x = sample_uniform_inputs(p.domain, vc.n_tail, input_rng);
  const Matrix y = vc.terminal_override ? vc.terminal_override(x, noise_rng) : sample_terminal(p, x, noise_rng);
  auto grid = default_tail_grid(y);
  if (grid.empty()) grid.push_back(std::numbers::e);
  rep.tail = fit_tail_constant(y, grid);

  rep.growth = growth_envelope_check(p.initial, p.initial.growth, y);

  rep.moments = moment_growth_estimate([&p](std::size_t d) { return resize_problem(p, d); }, vc.d_list, vc.moment_k,
                                       vc.n_moment, root.substream(2));
  rep.moment_slope_limit = vc.moment_k * p.initial.growth.lambda / 2.0 + 0.5;
  rep.moments_pass = rep.moments.slope <= rep.moment_slope_limit;

  const Architecture arch = scaled_architecture(p.domain.d, 8, 2);
  double D = 1.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(x.rows(), 1000); ++i)
    D = std::max(D, 2.0 * std::abs(evaluate_initial(p.initial, y.row(i))));
  const ClippedNetwork net(arch, init_params(arch, 10.0, root.substream(3)), D, 10.0);
  const ReferenceSolution ref = ReferenceSolution::best_available(p, vc.n_oracle, vc.seed);
  RngStream gap_rng = root.substream(4);
  rep.identity = risk_gap_identity_check(net, p, ref, vc.n_identity, gap_rng);
  rep.identity_pass = rep.identity.residual <= 4.0 * rep.identity.std_error;

  rep.pass = rep.tail.pass && rep.moments_pass && rep.growth.pass && rep.identity_pass;
  return rep;
}

inline nlohmann::json to_json(const VerifyReport& r, const PdeProblem& p) {
  return {{"tail", to_json(r.tail)},
          {"moment_growth",
           {{"estimate", to_json(r.moments)}, {"slope_limit", r.moment_slope_limit}, {"pass", r.moments_pass}}},
          {"growth_envelope",
           {{"pass", r.growth.pass},
            {"worst_ratio", r.growth.worst_ratio},
            {"c2", p.initial.growth.c2},
            {"lambda", p.initial.growth.lambda}}},
          {"risk_gap_identity", {{"check", to_json(r.identity)}, {"pass", r.identity_pass}}},
          {"pass", r.pass}};
}

}  // namespace kolmo

#endif  // KOLMO_EXPERIMENTS_HPP_
