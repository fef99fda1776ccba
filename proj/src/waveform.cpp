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

#include "crabloop/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "crabloop/errors.hpp"

namespace crabloop {

namespace {

void check_ramp(const ExponentialRamp& ramp) {
  if (!std::isfinite(ramp.delta_t) || ramp.delta_t <= 0.0) {
    throw Error(ErrorKind::invalid_ramp, "ramp duration must be positive");
  }
  if (!std::isfinite(ramp.tau) || ramp.tau == 0.0) {
    throw Error(ErrorKind::invalid_ramp, "ramp time constant must be nonzero");
  }
}

void check_time(double t, double delta_t) {
  if (!(t >= 0.0 && t <= delta_t)) {
    std::ostringstream msg;
    msg << "time " << t << " ms outside [0, " << delta_t << "]";
    throw Error(ErrorKind::domain, msg.str());
  }
}

// 1 + sum_j (a_j sin(2 pi nu_j t) + b_j cos(2 pi nu_j t)); shared by the
// numerator and the denominator so that g(delta_t) == 1 bit for bit.
double crab_series(const CrabCorrection& c, double t) {
  double acc = 1.0;
  for (std::size_t j = 0; j < c.freqs.size(); ++j) {
    const double phase = 2.0 * std::numbers::pi * c.freqs[j] * t;
    acc += c.coeffs[2 * j] * std::sin(phase) + c.coeffs[2 * j + 1] * std::cos(phase);
  }
  return acc;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double eval_exponential(const ExponentialRamp& ramp, double t) {
  check_ramp(ramp);
  check_time(t, ramp.delta_t);
  const double r = ramp.delta_t / ramp.tau;
  const double x = t / ramp.tau;
  // (1 - e^x) / (1 - e^r); rescaled by e^-r when e^r would overflow.
  if (r > 50.0) {
    return ramp.s_max * std::exp(x - r) * (std::expm1(-x) / std::expm1(-r));
  }
  return ramp.s_max * (std::expm1(x) / std::expm1(r));
}

double crab_denominator(const CrabCorrection& correction, double delta_t) {
  return crab_series(correction, delta_t);
}

double eval_crab(const CrabCorrection& correction, double delta_t, double t) {
  check_time(t, delta_t);
  if (correction.coeffs.size() != 2 * correction.freqs.size()) {
    throw Error(ErrorKind::invalid_ramp, "CRAB correction needs two coefficients per frequency");
  }
  const double denom = crab_series(correction, delta_t);
  if (!(std::abs(denom) >= kDenominatorEpsilon)) {
    throw Error(ErrorKind::singular_correction, "CRAB normalization denominator vanishes");
  }
  return crab_series(correction, t) / denom;
}

double eval_field(const ControlField& field, double t) {
  const double base = eval_exponential(field.base, t);
  if (!field.correction) return base;
  return base * eval_crab(*field.correction, field.base.delta_t, t);
}

Waveform sample_waveform(const ControlField& field, int n_steps) {
  if (n_steps < 2) {
    throw Error(ErrorKind::invalid_count, "a waveform needs at least two samples");
  }
  check_ramp(field.base);
  const double delta_t = field.base.delta_t;
  Waveform w;
  w.dt = delta_t / static_cast<double>(n_steps - 1);
  w.samples.resize(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    const double t = (i == n_steps - 1) ? delta_t : std::min(w.dt * i, delta_t);
    w.samples[static_cast<std::size_t>(i)] = eval_field(field, t);
  }
  return w;
}

std::vector<double> harmonic_frequencies(int n_f, double delta_t) {
  std::vector<double> nu(static_cast<std::size_t>(std::max(n_f, 0)));
  for (int j = 0; j < n_f; ++j) nu[static_cast<std::size_t>(j)] = (j + 1) / delta_t;
  return nu;
}

std::vector<double> randomized_frequencies(int n_f, double delta_t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> r(-0.5, 0.5);
  std::vector<double> nu(static_cast<std::size_t>(std::max(n_f, 0)));
  for (int j = 0; j < n_f; ++j) nu[static_cast<std::size_t>(j)] = (j + 1) * (1.0 + r(rng)) / delta_t;
  return nu;
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::non_finite: return "non-finite";
    case Violation::invalid_delta_t: return "invalid-delta-t";
    case Violation::invalid_tau: return "invalid-tau";
    case Violation::negative_s_max: return "negative-s-max";
    case Violation::empty_correction: return "empty-correction";
    case Violation::mismatched_coefficients: return "mismatched-coefficients";
    case Violation::singular_denominator: return "singular-denominator";
    case Violation::negative_depth: return "negative-depth";
  }
  return "unknown";
}

bool ValidationReport::contains(Violation v) const {
  return std::find(violations.begin(), violations.end(), v) != violations.end();
}

ValidationReport validate(const ControlField& field) {
  ValidationReport report;
  auto flag = [&](Violation v) {
    if (!report.contains(v)) report.violations.push_back(v);
  };
  const ExponentialRamp& b = field.base;
  if (!std::isfinite(b.s_max) || !std::isfinite(b.delta_t) || !std::isfinite(b.tau)) {
    flag(Violation::non_finite);
  }
  if (!(b.delta_t > 0.0)) flag(Violation::invalid_delta_t);
  if (b.tau == 0.0) flag(Violation::invalid_tau);
  if (b.s_max < 0.0) flag(Violation::negative_s_max);

  if (field.correction) {
    const CrabCorrection& c = *field.correction;
    if (c.freqs.empty()) flag(Violation::empty_correction);
    if (c.coeffs.size() != 2 * c.freqs.size()) flag(Violation::mismatched_coefficients);
    if (!all_finite(c.coeffs) || !all_finite(c.freqs)) flag(Violation::non_finite);
  }
  if (!report.ok()) return report;

  if (field.correction &&
      !(std::abs(crab_denominator(*field.correction, b.delta_t)) >= kDenominatorEpsilon)) {
    flag(Violation::singular_denominator);
    return report;
  }
  for (int i = 0; i < kProbeGridPoints; ++i) {
    const double t = (i == kProbeGridPoints - 1)
                         ? b.delta_t
                         : b.delta_t * static_cast<double>(i) / (kProbeGridPoints - 1);
    const double s = eval_field(field, t);
    if (!std::isfinite(s)) {
      flag(Violation::non_finite);
      break;
    }
    if (s < 0.0) {
      flag(Violation::negative_depth);
      break;
    }
  }
  return report;
}

void write_waveform_csv(std::ostream& out, const Waveform& waveform) {
  out << "t_ms,depth_Er\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < waveform.samples.size(); ++i) {
    out << waveform.time_at(i) << ',' << waveform.samples[i] << '\n';
  }
}

void write_waveform_csv(const std::string& path, const Waveform& waveform) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  write_waveform_csv(out, waveform);
}

}  // namespace crabloop
