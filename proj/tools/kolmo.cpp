// kolmo: command line front end for experiments, bounds, theory checks and oracles.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kolmo/kolmo.hpp"

namespace {

using kolmo::ConfigError;
using kolmo::NumericError;

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("--at: cannot parse '" + cell + "'");
    }
  }
  return out;
}

// Exceptions to exit codes, diagnostics on stderr.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kolmo::kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kolmo::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kolmo::kExitIo;
  }
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    kolmo::write_json(out_path, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Kolmogorov ERM solver: experiments, generalization bounds and reference solutions"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one end-to-end experiment");
  run->add_option("config", run_config, "Experiment config JSON")->required();

  std::string scaling_spec;
  auto* scaling = app.add_subcommand("scaling", "Run a scaling study across dimensions");
  scaling->add_option("spec", scaling_spec, "Scaling study spec JSON")->required();

  std::string bounds_inputs, bounds_out, bounds_csv;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the explicit bound thresholds");
  bounds->add_option("inputs", bounds_inputs, "Bound inputs JSON")->required();
  bounds->add_option("--out", bounds_out, "Write the report here instead of stdout");
  bounds->add_option("--csv", bounds_csv, "Write the parameter sweep table here (needs \"sweep\" in the inputs)");

  std::string verify_problem, verify_out, verify_dlist;
  kolmo::VerifyConfig vc;
  auto* verify = app.add_subcommand("verify", "Empirically check tail, moment, growth and risk-gap properties");
  verify->add_option("problem", verify_problem, "Problem JSON")->required();
  verify->add_option("--n-tail", vc.n_tail, "Terminal draws for the tail fit");
  verify->add_option("--n-moment", vc.n_moment, "Draws per dimension for moment growth");
  verify->add_option("--n-identity", vc.n_identity, "Shared draws for the risk-gap identity");
  verify->add_option("--n-oracle", vc.n_oracle, "Paths per point for Monte Carlo references");
  verify->add_option("--d-list", verify_dlist, "Comma separated dimensions for moment growth");
  verify->add_option("--seed", vc.seed, "Seed");
  verify->add_option("--out", verify_out, "Write the report here instead of stdout");

  std::string oracle_problem, oracle_at, oracle_kind = "auto";
  std::size_t oracle_n = 1000000;
  std::uint64_t oracle_seed = 0;
  auto* oracle = app.add_subcommand("oracle", "Evaluate the reference solution at a point");
  oracle->add_option("problem", oracle_problem, "Problem JSON")->required();
  oracle->add_option("--at", oracle_at, "Comma separated point")->required();
  oracle->add_option("--n", oracle_n, "Monte Carlo paths");
  oracle->add_option("--seed", oracle_seed, "Seed");
  oracle->add_option("--kind", oracle_kind, "auto | closed_form_heat_poly | closed_form_bs_call_1d | monte_carlo");

  std::string data_problem, data_prefix;
  std::size_t data_m = 1024;
  std::uint64_t data_seed = 0, data_stream = 1;
  auto* dataset = app.add_subcommand("dataset", "Simulate a dataset and write CSV plus sidecar JSON");
  dataset->add_option("problem", data_problem, "Problem JSON")->required();
  dataset->add_option("--m", data_m, "Number of samples");
  dataset->add_option("--seed", data_seed, "Seed");
  dataset->add_option("--stream", data_stream, "Stream id");
  dataset->add_option("--out", data_prefix, "Output prefix (writes <prefix>.csv and <prefix>.json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kolmo::kExitConfig;
  }

  if (*run) {
    kolmo::ExperimentConfig cfg;
    const int parsed = guarded([&] {
      cfg = kolmo::experiment_config_from_json(kolmo::read_json_file(run_config));
      kolmo::validate_experiment_config(cfg);
      return 0;
    });
    if (parsed != 0) {
      if (!cfg.output_dir.empty()) {
        // Config may have parsed far enough to know where diagnostics belong.
        kolmo::run_guarded(cfg.output_dir, [&] { kolmo::validate_experiment_config(cfg); });
      }
      return parsed;
    }
    const int code = kolmo::run_experiment_cli(cfg);
    if (code == 0) {
      std::cout << "experiment written to " << cfg.output_dir << '\n';
    } else {
      std::cerr << "experiment failed (exit " << code << "), see " << cfg.output_dir << "/error.txt\n";
    }
    return code;
  }

  if (*scaling) {
    return guarded([&] {
      const auto spec = kolmo::scaling_spec_from_json(kolmo::read_json_file(scaling_spec));
      const auto summary = kolmo::run_scaling_study(spec);
      std::cout << "scaling study written to " << spec.output_dir << '\n';
      return summary.partial_failure ? static_cast<int>(kolmo::kExitPartial) : 0;
    });
  }

  if (*bounds) {
    return guarded([&] {
      const auto j = kolmo::read_json_file(bounds_inputs);
      const auto in = kolmo::bound_inputs_from_json(j);
      auto report = kolmo::to_json(kolmo::compute_bound_report(in));
      report["inputs"] = kolmo::to_json(in);
      emit(report, bounds_out);
      if (!bounds_csv.empty()) {
        if (!j.contains("sweep")) throw ConfigError("--csv needs a \"sweep\": {\"param\", \"values\"} entry");
        const auto values = j["sweep"].at("values").get<std::vector<double>>();
        kolmo::write_bound_sweep_csv(in, j["sweep"].at("param").get<std::string>(), values, bounds_csv);
      }
      return 0;
    });
  }

  if (*verify) {
    return guarded([&] {
      const auto p = kolmo::problem_from_json(kolmo::read_json_file(verify_problem));
      if (!verify_dlist.empty()) {
        vc.d_list.clear();
        for (double d : parse_point(verify_dlist)) vc.d_list.push_back(static_cast<std::size_t>(d));
      }
      const auto rep = kolmo::verify_theory(p, vc);
      emit(kolmo::to_json(rep, p), verify_out);
      return rep.pass ? 0 : 1;
    });
  }

  if (*oracle) {
    return guarded([&] {
      const auto p = kolmo::problem_from_json(kolmo::read_json_file(oracle_problem));
      const auto x = parse_point(oracle_at);
      const auto ref = kolmo::make_reference(p, {oracle_kind, oracle_n, oracle_seed});
      const auto est = ref.estimate(x);
      std::cout << std::setprecision(17)
                << nlohmann::json{{"kind", kolmo::to_string(ref.kind())},
                                  {"x", x},
                                  {"value", est.value},
                                  {"ci_halfwidth", est.ci_halfwidth}}
                       .dump(2)
                << '\n';
      return 0;
    });
  }

  if (*dataset) {
    return guarded([&] {
      const auto p = kolmo::problem_from_json(kolmo::read_json_file(data_problem));
      const auto data = kolmo::make_dataset(p, data_m, kolmo::RngStream(data_seed, data_stream));
      kolmo::write_dataset(data, data_prefix + ".csv", data_prefix + ".json");
      return 0;
    });
  }
  return 0;
}
