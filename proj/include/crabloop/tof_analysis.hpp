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
#include <iosfwd>
#include <string>
#include <vector>

namespace crabloop {

/// Column density sampled on a uniform grid.
struct DensityProfile {
  std::vector<double> x;
  std::vector<double> n;
  double noise_sigma = 0.0;
};

/// Integrated Thomas-Fermi condensate plus Gaussian thermal cloud sharing
/// a common center:
///   n(x) = n_c0 max(0, 1 - ((x - x0)/R)^2)^2 + n_t0 exp(-(x - x0)^2 / (2 sigma_t^2))
struct BimodalModel {
  double n_c0 = 0.0;
  double radius = 1.0;
  double n_t0 = 0.0;
  double sigma_t = 1.0;
  double x0 = 0.0;

  double condensate(double x) const;
  double thermal(double x) const;
  double operator()(double x) const { return condensate(x) + thermal(x); }

  /// Integrals over the real line: 16/15 n_c0 R and sqrt(2 pi) n_t0 sigma_t.
  double condensed_number() const;
  double thermal_number() const;
};

struct FitResult {
  BimodalModel model;
  double n_condensed = 0.0;
  double n_thermal = 0.0;
  double thermal_fraction = 0.0;
  double residual_rms = 0.0;
  bool converged = false;
  /// Condensate amplitude fitted to a negligible share of the signal.
  bool condensate_vanishing = false;
  int evaluations = 0;
};

std::vector<double> uniform_grid(double lo, double hi, int points);

DensityProfile synth_profile(const BimodalModel& model, const std::vector<double>& grid,
                             double noise_sigma, std::uint64_t rng_seed);

/// Least-squares bimodal decomposition of a profile.
FitResult bimodal_fit(const DensityProfile& profile);

/// F = TF / TF_i.
double fom_from_thermal_fractions(double tf_final, double tf_initial);

/// CSV with header `x,n`.
void write_profile_csv(std::ostream& out, const DensityProfile& profile);
void write_profile_csv(const std::string& path, const DensityProfile& profile);
DensityProfile read_profile_csv(std::istream& in);
DensityProfile read_profile_csv(const std::string& path);

}  // namespace crabloop
