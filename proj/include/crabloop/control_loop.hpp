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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crabloop/lattice_plant.hpp"
#include "crabloop/optimizer.hpp"
#include "crabloop/records.hpp"
#include "crabloop/run_config.hpp"

namespace crabloop {

/// Control field for an optimizer parameter vector: CRAB coefficients on the
/// base ramp, or (delta_t, tau) of the exponential family.
ControlField field_from_params(const RunConfig& config, const ParameterVector& params);

/// Reference field by name ("quasi_adiabatic" or "uncorrected").
ControlField reference_field(const RunConfig& config, const std::string& name);

/// Parameter vector describing a reference field in the run's search space.
ParameterVector reference_params(const RunConfig& config, const std::string& name);

/// Samples a field at the configured density, including both endpoints.
Waveform sample_for_plant(const RunConfig& config, const ControlField& field);

/// Seed of evaluation n: hash(master_seed, n).
std::uint64_t evaluation_seed(std::uint64_t master_seed, int n);

/// Single plant evaluation of a field with the run's protocol settings.
EvaluationResult evaluate_field(const LatticePlant& plant, const RunConfig& config,
                                const ControlField& field, std::uint64_t seed);

struct ClosedLoopResult {
  OptimumReport report;
  std::vector<IterationRecord> log;
  ControlField optimal_field;
  Waveform optimal_waveform;
  /// Plant evaluations issued by this call (replayed records excluded).
  int new_evaluations = 0;
};

/// Reference evaluations, then simplex minimization of the plant FOM. Every
/// record is appended to `log_path` before the next evaluation is issued;
/// pass an empty path to skip persistence.
ClosedLoopResult run_closed_loop(const RunConfig& config, const std::string& log_path = {});

/// Replays the records in `log_path` without plant calls, then continues
/// the run, appending to the same log. Refuses a log written for a
/// different configuration.
ClosedLoopResult resume(const std::string& log_path, const RunConfig& config);

/// Header line written at the top of every iteration log.
Json log_header(const RunConfig& config);

/// optimum.json, optimal_waveform.csv and fom_vs_iteration.csv in `dir`.
void write_run_outputs(const ClosedLoopResult& result, const RunConfig& config, const std::string& dir);

/// FOM-vs-iteration table: n, phase, fom, best_so_far.
void write_fom_trace_csv(const std::string& path, const std::vector<IterationRecord>& log);

/// Merged plot-ready CSV of every record in a log. An empty or header-only
/// log produces the header row alone.
void export_log_csv(const std::string& log_path, const std::string& csv_path);

}  // namespace crabloop
