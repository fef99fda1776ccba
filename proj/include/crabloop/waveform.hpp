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
#include <optional>
#include <string>
#include <vector>

namespace crabloop {

/// Corrections whose normalization denominator falls below this magnitude
/// are rejected.
inline constexpr double kDenominatorEpsilon = 1e-6;

/// Number of points on the grid used to probe a field for negative depths.
inline constexpr int kProbeGridPoints = 1024;

/// Exponential loading ramp s(t) = s_max (1 - e^{t/tau}) / (1 - e^{dt/tau}).
/// Depths are in recoil units, times in milliseconds.
struct ExponentialRamp {
  double s_max = 0.0;
  double delta_t = 1.0;
  double tau = 1.0;
};

/// Multiplicative trigonometric correction normalized to 1 at t = delta_t.
/// coeffs is laid out as [a_1, b_1, a_2, b_2, ...]; freqs[j] is nu_{j+1} in 1/ms.
struct CrabCorrection {
  std::vector<double> coeffs;
  std::vector<double> freqs;

  std::size_t n_f() const { return freqs.size(); }
};

struct ControlField {
  ExponentialRamp base;
  std::optional<CrabCorrection> correction;

  double duration() const { return base.delta_t; }
};

/// Uniformly spaced depth samples starting at t = 0.
struct Waveform {
  double dt = 0.0;
  std::vector<double> samples;

  double duration() const {
    return samples.empty() ? 0.0 : dt * static_cast<double>(samples.size() - 1);
  }
  double time_at(std::size_t i) const { return dt * static_cast<double>(i); }
};

double eval_exponential(const ExponentialRamp& ramp, double t);

/// Denominator D = 1 + sum_j (a_j sin(2 pi nu_j dt) + b_j cos(2 pi nu_j dt)).
double crab_denominator(const CrabCorrection& correction, double delta_t);

double eval_crab(const CrabCorrection& correction, double delta_t, double t);

double eval_field(const ControlField& field, double t);

Waveform sample_waveform(const ControlField& field, int n_steps);

/// Harmonic frequencies nu_j = j / delta_t, j = 1..n_f.
std::vector<double> harmonic_frequencies(int n_f, double delta_t);

/// nu_j = j (1 + r_j) / delta_t with r_j uniform in [-0.5, 0.5].
std::vector<double> randomized_frequencies(int n_f, double delta_t,
                                           std::uint64_t seed);

enum class Violation {
  non_finite,
  invalid_delta_t,
  invalid_tau,
  negative_s_max,
  empty_correction,
  mismatched_coefficients,
  singular_denominator,
  negative_depth,
};

std::string to_string(Violation v);

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool contains(Violation v) const;
};

ValidationReport validate(const ControlField& field);

/// CSV with header `t_ms,depth_Er`, 17 significant digits.
void write_waveform_csv(std::ostream& out, const Waveform& waveform);
void write_waveform_csv(const std::string& path, const Waveform& waveform);

}  // namespace crabloop
