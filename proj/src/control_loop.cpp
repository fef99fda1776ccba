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

#include "crabloop/control_loop.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "crabloop/errors.hpp"
#include "crabloop/seeding.hpp"

namespace crabloop {

namespace {

constexpr std::uint64_t kOptimizerStream = 0x6f7074696d697a65ULL;
constexpr std::uint64_t kFrequencyStream = 0x6672657175656e63ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join_violations(const ValidationReport& report) {
  std::string out = "invalid field:";
  for (Violation v : report.violations) out += " " + to_string(v);
  return out;
}

Box search_box(const RunConfig& c) {
  if (c.mode == Mode::crab_sfmi) {
    const std::size_t d = 2 * static_cast<std::size_t>(c.crab.n_f);
    return {std::vector<double>(d, -c.crab.coeff_bound), std::vector<double>(d, c.crab.coeff_bound)};
  }
  const auto& e = c.exponential;
  return {{e.delta_t_min_ms, e.tau_min_ms}, {e.delta_t_max_ms, e.tau_max_ms}};
}

ParameterVector initial_point(const RunConfig& c) {
  if (c.mode == Mode::crab_sfmi) {
    if (!c.crab.initial_coeffs.empty()) return c.crab.initial_coeffs;
    return ParameterVector(2 * static_cast<std::size_t>(c.crab.n_f), 0.0);
  }
  return {c.exponential.delta_t0_ms, c.exponential.tau0_ms};
}

OptimizerOptions optimizer_options(const RunConfig& c) {
  OptimizerOptions o = c.optimizer;
  o.rng_seed = mix_seed(c.master_seed, kOptimizerStream);
  if (o.init_scale.empty()) {
    if (c.mode == Mode::crab_sfmi) {
      o.init_scale.assign(2 * static_cast<std::size_t>(c.crab.n_f), 0.3);
    } else {
      o.init_scale = {20.0, 5.0};
    }
  }
  return o;
}

Json summary_json(const OptimumReport& report, int reference_count) {
  return {
      {"type", "summary"},
      {"best_n", report.best_index < 0 ? -1 : reference_count + report.best_index + 1},
      {"best_fom", report.best_fom},
      {"best_params", report.best_params},
      {"termination", std::string(to_string(report.termination))},
      {"eval_count", report.eval_count},
      {"restart_count", report.restart_count},
  };
}

Json field_json(const ControlField& f) {
  Json j = {{"s_max_Er", f.base.s_max}, {"delta_t_ms", f.base.delta_t}, {"tau_ms", f.base.tau}};
  if (f.correction) {
    j["coeffs"] = f.correction->coeffs;
    j["freqs_per_ms"] = f.correction->freqs;
  }
  return j;
}

ClosedLoopResult run_impl(const RunConfig& config, const std::string& log_path, const LogContents* replay) {
  validate(config);
  if (config.mode == Mode::landscape_map) {
    throw Error(ErrorKind::config, "landscape_map mode is run with map_landscape, not the closed loop");
  }
  const LatticePlant plant(config.plant.hubbard);
  ClosedLoopResult result;

  std::optional<RunLog> log;
  if (!log_path.empty()) {
    log = replay ? RunLog::reopen(log_path, replay->valid_bytes) : RunLog::create(log_path, log_header(config));
  }
  const std::size_t replay_count = replay ? replay->records.size() : 0;
  double clock = 0.0;

  auto replayed = [&](std::size_t i) -> const IterationRecord* {
    return i < replay_count ? &replay->records[i] : nullptr;
  };
  auto diverged = [](int n) {
    return Error(ErrorKind::digest_mismatch, "log diverges from the replayed run at record " + std::to_string(n));
  };
  auto commit = [&](IterationRecord rec) {
    if (const IterationRecord* old = replayed(result.log.size())) {
      if (old->n != rec.n || old->phase != rec.phase || old->params != rec.params || old->label != rec.label ||
          old->reevaluation != rec.reevaluation) {
        throw diverged(rec.n);
      }
      rec = *old;
    } else if (log) {
      log->append(to_json(rec));
    }
    result.log.push_back(std::move(rec));
  };

  // Evaluates (or replays) one point; fills everything except phase.
  auto measure = [&](const ControlField& field, const ParameterVector& params, int n, bool in_box) {
    IterationRecord rec;
    rec.n = n;
    rec.params = params;
    rec.seed = evaluation_seed(config.master_seed, n);
    if (const IterationRecord* old = replayed(static_cast<std::size_t>(n - 1))) {
      if (old->params != params) throw diverged(n);
      clock = old->wall_time_ms;
      return *old;
    }
    if (!in_box) {
      const Box box = search_box(config);
      rec.fom = config.penalty_base + box.squared_distance(params);
      rec.fidelity = rec.energy_excess = kNaN;
      rec.plant_called = false;
      rec.error = "outside search box";
    } else if (const ValidationReport report = validate(field); !report.ok()) {
      rec.fom = config.penalty_base;
      rec.fidelity = rec.energy_excess = kNaN;
      rec.plant_called = false;
      rec.error = join_violations(report);
    } else {
      const EvaluationResult eval = evaluate_field(plant, config, field, rec.seed);
      ++result.new_evaluations;
      if (eval.ok()) {
        rec.fom = eval.sample->fom;
        rec.fidelity = eval.sample->fidelity;
        rec.energy_excess = eval.sample->energy_excess;
      } else {
        rec.fom = config.penalty_base;
        rec.fidelity = rec.energy_excess = kNaN;
        rec.error = eval.error;
      }
      clock += sample_for_plant(config, field).duration() +
               (config.plant.round_trip ? config.plant.hold_ms + 140.0 : 0.0);
    }
    rec.wall_time_ms = clock;
    return rec;
  };

  for (const std::string& name : config.references) {
    const int n = static_cast<int>(result.log.size()) + 1;
    IterationRecord rec = measure(reference_field(config, name), reference_params(config, name), n, true);
    rec.phase = Phase::reference;
    rec.label = name;
    commit(std::move(rec));
  }
  const int reference_count = static_cast<int>(result.log.size());

  const Box box = search_box(config);
  std::optional<IterationRecord> pending;
  const Objective objective = [&](const ParameterVector& x) {
    const int n = static_cast<int>(result.log.size()) + 1;
    const bool in_box = box.contains(x);
    const ControlField field = in_box ? field_from_params(config, x) : ControlField{};
    pending = measure(field, x, n, in_box);
    return pending->fom;
  };
  const EvaluationObserver observer = [&](const Evaluation& e) {
    IterationRecord rec = std::move(*pending);
    pending.reset();
    rec.phase = e.phase;
    rec.reevaluation = e.reevaluation;
    commit(std::move(rec));
  };

  result.report = minimize(objective, initial_point(config), optimizer_options(config), observer);

  const Json summary = summary_json(result.report, reference_count);
  if (replay && replay->summary) {
    if (replay->summary->dump() != summary.dump()) throw diverged(static_cast<int>(result.log.size()));
  } else if (log) {
    log->append(summary);
  }

  result.optimal_field = field_from_params(config, result.report.best_params);
  result.optimal_waveform = sample_for_plant(config, result.optimal_field);
  return result;
}

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t master_seed, int n) {
  return mix_seed(master_seed, static_cast<std::uint64_t>(n));
}

ControlField field_from_params(const RunConfig& config, const ParameterVector& params) {
  ControlField field;
  if (config.mode == Mode::crab_sfmi) {
    field.base = config.base_ramp;
    CrabCorrection c;
    c.coeffs = params;
    c.freqs = config.crab.frequency_policy == FrequencyPolicy::harmonic
                  ? harmonic_frequencies(config.crab.n_f, config.base_ramp.delta_t)
                  : randomized_frequencies(config.crab.n_f, config.base_ramp.delta_t,
                                           mix_seed(config.master_seed, kFrequencyStream));
    field.correction = std::move(c);
  } else {
    if (params.size() != 2) throw Error(ErrorKind::domain, "exponential family takes (delta_t, tau)");
    field.base = {config.base_ramp.s_max, params[0], params[1]};
  }
  return field;
}

ControlField reference_field(const RunConfig& config, const std::string& name) {
  ControlField field;
  if (name == "quasi_adiabatic") {
    field.base = {config.base_ramp.s_max, 140.0, 30.0};
  } else if (name == "uncorrected") {
    field.base = config.mode == Mode::crab_sfmi
                     ? config.base_ramp
                     : ExponentialRamp{config.base_ramp.s_max, config.exponential.delta_t0_ms,
                                       config.exponential.tau0_ms};
  } else {
    throw Error(ErrorKind::config, "unknown reference '" + name + "'");
  }
  return field;
}

ParameterVector reference_params(const RunConfig& config, const std::string& name) {
  if (config.mode == Mode::crab_sfmi) {
    (void)reference_field(config, name);
    return ParameterVector(2 * static_cast<std::size_t>(config.crab.n_f), 0.0);
  }
  const ControlField f = reference_field(config, name);
  return {f.base.delta_t, f.base.tau};
}

Waveform sample_for_plant(const RunConfig& config, const ControlField& field) {
  const long n = std::lround(field.base.delta_t * config.plant.samples_per_ms) + 1;
  return sample_waveform(field, static_cast<int>(std::max(2L, n)));
}

EvaluationResult evaluate_field(const LatticePlant& plant, const RunConfig& config,
                                const ControlField& field, std::uint64_t seed) {
  EvaluationResult result;
  try {
    if (const ValidationReport report = validate(field); !report.ok()) {
      result.error = join_violations(report);
      return result;
    }
    PlantProtocol protocol;
    protocol.ramp_up = sample_for_plant(config, field);
    protocol.hold_ms = config.plant.hold_ms;
    protocol.round_trip = config.plant.round_trip;
    if (protocol.round_trip) {
      protocol.ramp_down = quasi_adiabatic_ramp_down(protocol.ramp_up.samples.back(), config.plant.samples_per_ms);
    }
    protocol.noise_sigma = config.plant.noise_sigma;
    protocol.rng_seed = seed;
    return plant.try_evaluate(protocol);
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

Json log_header(const RunConfig& config) {
  Json cfg = config_to_json(config);
  cfg.erase("output");
  return {
      {"type", "header"},
      {"format", kLogFormat},
      {"config_digest", config_digest(config)},
      {"kappa", config.plant.hubbard.kappa},
      {"recoil_frequency_hz", config.plant.hubbard.recoil_frequency_hz()},
      {"config", cfg},
  };
}

ClosedLoopResult run_closed_loop(const RunConfig& config, const std::string& log_path) {
  return run_impl(config, log_path, nullptr);
}

ClosedLoopResult resume(const std::string& log_path, const RunConfig& config) {
  const LogContents contents = read_log(log_path);
  if (!contents.header.is_object()) {
    throw Error(ErrorKind::digest_mismatch, "log " + log_path + " has no header");
  }
  if (contents.header.value("config_digest", std::string{}) != config_digest(config)) {
    throw Error(ErrorKind::digest_mismatch, "log " + log_path + " was written for a different configuration");
  }
  return run_impl(config, log_path, &contents);
}

void write_fom_trace_csv(const std::string& path, const std::vector<IterationRecord>& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << "n,phase,label,fom,best_so_far\n" << std::setprecision(17);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : log) {
    out << r.n << ',' << to_string(r.phase) << ',' << r.label << ',' << r.fom << ',';
    if (r.phase != Phase::reference) {
      best = std::min(best, r.fom);
      out << best;
    }
    out << '\n';
  }
}

void write_run_outputs(const ClosedLoopResult& result, const RunConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int reference_count = static_cast<int>(config.references.size());
  Json refs = Json::array();
  for (const auto& r : result.log) {
    if (r.phase != Phase::reference) continue;
    refs.push_back({{"label", r.label}, {"n", r.n}, {"fom", r.fom}, {"fidelity", r.fidelity}});
  }
  Json optimum = summary_json(result.report, reference_count);
  optimum.erase("type");
  optimum["mode"] = to_string(config.mode);
  optimum["config_digest"] = config_digest(config);
  optimum["kappa"] = config.plant.hubbard.kappa;
  optimum["references"] = refs;
  optimum["optimal_field"] = field_json(result.optimal_field);
  write_json_file(dir + "/optimum.json", optimum);
  write_waveform_csv(dir + "/optimal_waveform.csv", result.optimal_waveform);
  write_fom_trace_csv(dir + "/fom_vs_iteration.csv", result.log);
}

void export_log_csv(const std::string& log_path, const std::string& csv_path) {
  const LogContents contents = read_log(log_path);
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + csv_path);
  out << "n,phase,label,fom,fidelity,energy_excess,seed,wall_time_ms,plant,reevaluation,params\n";
  out << std::setprecision(17);
  for (const auto& r : contents.records) {
    out << r.n << ',' << to_string(r.phase) << ',' << r.label << ',' << r.fom << ',' << r.fidelity << ','
        << r.energy_excess << ',' << r.seed << ',' << r.wall_time_ms << ',' << (r.plant_called ? 1 : 0) << ','
        << (r.reevaluation ? 1 : 0) << ',';
    for (std::size_t i = 0; i < r.params.size(); ++i) out << (i ? ";" : "") << r.params[i];
    out << '\n';
  }
}

}  // namespace crabloop
