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
#include <utility>
#include <vector>

#include "crabloop/lattice_plant.hpp"
#include "crabloop/optimizer.hpp"
#include "crabloop/records.hpp"
#include "crabloop/waveform.hpp"

namespace crabloop {

enum class Mode { crab_sfmi, exponential_2param, landscape_map };
enum class FrequencyPolicy { harmonic, randomized };

struct PlantSettings {
  HubbardConfig hubbard;
  double samples_per_ms = 10.0;
  double hold_ms = 5.0;
  bool round_trip = false;
  double noise_sigma = 0.01;
};

struct CrabSettings {
  int n_f = 2;
  FrequencyPolicy frequency_policy = FrequencyPolicy::harmonic;
  std::vector<double> initial_coeffs;
  /// Coefficients are confined to [-coeff_bound, coeff_bound].
  double coeff_bound = 1.0;
};

/// Restricted (delta_t, tau) family used for the 3D-1D crossover.
struct ExponentialSettings {
  double delta_t0_ms = 15.0;
  double tau0_ms = 3.0;
  double delta_t_min_ms = 5.0;
  double delta_t_max_ms = 160.0;
  double tau_min_ms = 1.0;
  double tau_max_ms = 40.0;
};

struct LandscapeSettings {
  double delta_t_min_ms = 10.0;
  double delta_t_max_ms = 160.0;
  int delta_t_points = 16;
  double tau_min_ms = 2.0;
  double tau_max_ms = 40.0;
  int tau_points = 16;
};

struct RunConfig {
  Mode mode = Mode::crab_sfmi;
  std::uint64_t master_seed = 1;
  PlantSettings plant;
  ExponentialRamp base_ramp{25.0, 40.0, 8.0};
  CrabSettings crab;
  ExponentialSettings exponential;
  OptimizerOptions optimizer;
  double penalty_base = 10.0;
  std::vector<std::string> references{"quasi_adiabatic", "uncorrected"};
  LandscapeSettings landscape;
  std::string output_dir = "out";
};

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Every key the config file accepts, with its default value.
Json default_config_json();

/// Dotted key paths of every accepted key, e.g. "optimizer.max_evals".
std::vector<std::string> config_keys();

/// Parses a config document. Missing keys take their defaults; unknown keys
/// are rejected.
RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path);

/// Applies `key=value` overrides to a config document. Values are parsed as
/// JSON when possible and kept as strings otherwise.
void apply_overrides(Json& document, const std::vector<std::string>& overrides);

/// Throws Error(config) on mode-inconsistent or out-of-range settings.
void validate(const RunConfig& config);

/// Digest of everything that influences the evaluation sequence (the output
/// directory is excluded).
std::string config_digest(const RunConfig& config);

}  // namespace crabloop
