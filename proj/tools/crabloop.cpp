// Copyright 2026 The crabloop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "crabloop/control_loop.hpp"
#include "crabloop/errors.hpp"
#include "crabloop/landscape.hpp"
#include "crabloop/tof_analysis.hpp"

namespace {

using namespace crabloop;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::digest_mismatch:
      return 2;
    case ErrorKind::fit_nonconvergence:
    case ErrorKind::non_identifiable:
      return 4;
    default:
      return 3;
  }
}

int report_error(std::string_view kind, const std::string& message, int code) {
  const Json record = {{"type", "error"}, {"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << record.dump() << '\n';
  return code;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  int verbosity = 0;
};

RunConfig resolve_config(const CommonArgs& args) {
  Json document = Json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw Error(ErrorKind::config, "cannot read config file '" + args.config_path + "'");
    document = Json::parse(in, nullptr, false);
    if (document.is_discarded()) {
      throw Error(ErrorKind::config, "config file '" + args.config_path + "' is not valid JSON");
    }
  }
  Json merged = default_config_json();
  // Validate the user's keys against the schema before applying overrides.
  RunConfig parsed = config_from_json(document);
  merged = config_to_json(parsed);
  apply_overrides(merged, args.overrides);
  if (const char* seed = std::getenv("CRABLOOP_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long value = std::stoull(seed, &used);
      if (used != std::string(seed).size()) throw std::invalid_argument("trailing characters");
      merged["master_seed"] = static_cast<std::uint64_t>(value);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, std::string("CRABLOOP_SEED must be numeric, got '") + seed + "'");
    }
  }
  RunConfig config = config_from_json(merged);
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Run config (JSON)");
  cmd->add_option("-o,--out", args.out_dir, "Output directory (defaults to output.dir)");
  cmd->add_option("--override", args.overrides, "Config override key=value (repeatable)");
  cmd->add_flag("-v,--verbose", args.verbosity, "Progress on stderr");
}

void print_record(const Json& j, const std::string& path) {
  std::cout << j.dump() << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << j.dump() << '\n';
}

Json fit_json(const FitResult& f) {
  return {
      {"type", "fit_result"},
      {"n_c0", f.model.n_c0},
      {"radius", f.model.radius},
      {"n_t0", f.model.n_t0},
      {"sigma_t", f.model.sigma_t},
      {"x0", f.model.x0},
      {"n_condensed", f.n_condensed},
      {"n_thermal", f.n_thermal},
      {"thermal_fraction", f.thermal_fraction},
      {"residual_rms", f.residual_rms},
      {"converged", f.converged},
      {"condensate_vanishing", f.condensate_vanishing},
      {"evaluations", f.evaluations},
  };
}

std::string override_help() {
  std::string text = "Override keys (--override key=value):\n";
  for (const auto& k : config_keys()) text += "  " + k + "\n";
  text += "Environment: CRABLOOP_SEED overrides master_seed.\n";
  text += "Exit codes: 0 success, 2 config error, 3 runtime/plant error, 4 fit non-convergence.";
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop CRAB optimization of optical-lattice loading ramps"};
  app.require_subcommand(1);
  app.footer(override_help());

  CommonArgs optimize_args;
  bool resume_run = false;
  auto* optimize_cmd = app.add_subcommand("optimize", "Run the closed loop and write log, optimum and traces");
  add_common(optimize_cmd, optimize_args);
  optimize_cmd->add_flag("--resume", resume_run, "Continue an interrupted run from its log");

  CommonArgs map_args;
  auto* map_cmd = app.add_subcommand("map", "Brute-force (delta_t, tau) landscape of the exponential family");
  add_common(map_cmd, map_args);

  CommonArgs eval_args;
  std::string reference;
  double delta_t_ms = 0.0, tau_ms = 0.0, s_max = -1.0;
  std::vector<double> coeffs;
  auto* eval_cmd = app.add_subcommand("eval-ramp", "Evaluate one ramp on the plant");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--reference", reference, "quasi_adiabatic or uncorrected");
  eval_cmd->add_option("--delta-t-ms", delta_t_ms, "Ramp duration");
  eval_cmd->add_option("--tau-ms", tau_ms, "Ramp time constant");
  eval_cmd->add_option("--s-max-er", s_max, "Final depth (defaults to ramp.s_max_Er)");
  eval_cmd->add_option("--coeffs", coeffs, "CRAB coefficients a1 b1 a2 b2 ...")->delimiter(',');

  std::string profile_path, fit_out_dir = ".";
  double tf_initial = 0.0, noise_sigma = 0.0;
  auto* fit_cmd = app.add_subcommand("fit-tof", "Bimodal fit of a density profile CSV (x,n)");
  fit_cmd->add_option("--profile", profile_path, "Profile CSV")->required();
  fit_cmd->add_option("-o,--out", fit_out_dir, "Output directory");
  fit_cmd->add_option("--tf-initial", tf_initial, "Initial thermal fraction; adds F = TF / TF_i");
  fit_cmd->add_option("--noise-sigma", noise_sigma, "Per-point noise level of the profile")->check(CLI::NonNegativeNumber);

  std::string log_path, export_out, format = "csv";
  auto* export_cmd = app.add_subcommand("export", "Merge an iteration log into a plot-ready CSV");
  export_cmd->add_option("--log", log_path, "Iteration log")->required();
  export_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
  export_cmd->add_option("-o,--out", export_out, "Output CSV (defaults to <log>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*optimize_cmd) {
      const RunConfig config = resolve_config(optimize_args);
      std::filesystem::create_directories(config.output_dir);
      const std::string log_file = config.output_dir + "/iterations.jsonl";
      const bool can_resume = resume_run && std::filesystem::exists(log_file);
      const ClosedLoopResult result = can_resume ? resume(log_file, config) : run_closed_loop(config, log_file);
      write_run_outputs(result, config, config.output_dir);
      if (optimize_args.verbosity > 0) {
        std::cerr << "best fom " << result.report.best_fom << " after " << result.report.eval_count
                  << " evaluations (" << to_string(result.report.termination) << ")\n";
      }
    } else if (*map_cmd) {
      const RunConfig config = resolve_config(map_args);
      const LandscapeGrid grid = map_landscape(config);
      write_landscape(grid, config.output_dir);
    } else if (*eval_cmd) {
      const RunConfig config = resolve_config(eval_args);
      ControlField field;
      IterationRecord rec;
      rec.n = 1;
      rec.phase = Phase::reference;
      if (!reference.empty()) {
        field = reference_field(config, reference);
        rec.label = reference;
        rec.params = reference_params(config, reference);
      } else {
        if (!(delta_t_ms > 0.0) || tau_ms == 0.0) {
          throw Error(ErrorKind::config, "eval-ramp needs --reference or --delta-t-ms and --tau-ms");
        }
        field.base = {s_max >= 0.0 ? s_max : config.base_ramp.s_max, delta_t_ms, tau_ms};
        if (!coeffs.empty()) {
          if (coeffs.size() % 2 != 0) throw Error(ErrorKind::config, "--coeffs needs pairs (a_j, b_j)");
          field.correction = CrabCorrection{coeffs, harmonic_frequencies(static_cast<int>(coeffs.size() / 2), delta_t_ms)};
        }
        rec.label = "custom";
        rec.params = coeffs.empty() ? ParameterVector{delta_t_ms, tau_ms} : coeffs;
      }
      const LatticePlant plant(config.plant.hubbard);
      rec.seed = evaluation_seed(config.master_seed, rec.n);
      const EvaluationResult r = evaluate_field(plant, config, field, rec.seed);
      if (!r.ok()) throw Error(ErrorKind::domain, r.error);
      rec.fom = r.sample->fom;
      rec.fidelity = r.sample->fidelity;
      rec.energy_excess = r.sample->energy_excess;
      rec.wall_time_ms = sample_for_plant(config, field).duration();
      std::filesystem::create_directories(config.output_dir);
      print_record(to_json(rec), config.output_dir + "/eval_ramp.json");
    } else if (*fit_cmd) {
      DensityProfile profile = read_profile_csv(profile_path);
      profile.noise_sigma = noise_sigma;
      const FitResult fit = bimodal_fit(profile);
      Json j = fit_json(fit);
      if (tf_initial > 0.0) j["fom"] = fom_from_thermal_fractions(fit.thermal_fraction, tf_initial);
      std::filesystem::create_directories(fit_out_dir);
      print_record(j, fit_out_dir + "/fit_result.json");
      if (!fit.converged) return report_error("fit_nonconvergence", "bimodal fit did not converge", 4);
    } else if (*export_cmd) {
      export_log_csv(log_path, export_out.empty() ? log_path + ".csv" : export_out);
    }
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 3);
  }
  return 0;
}
