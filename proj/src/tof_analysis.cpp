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

#include "crabloop/tof_analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "crabloop/errors.hpp"
#include "crabloop/optimizer.hpp"

namespace crabloop {

double BimodalModel::condensate(double x) const {
  const double u = (x - x0) / radius;
  const double p = 1.0 - u * u;
  return p > 0.0 ? n_c0 * p * p : 0.0;
}

double BimodalModel::thermal(double x) const {
  const double d = x - x0;
  return n_t0 * std::exp(-d * d / (2.0 * sigma_t * sigma_t));
}

double BimodalModel::condensed_number() const { return 16.0 / 15.0 * n_c0 * radius; }

double BimodalModel::thermal_number() const {
  return std::sqrt(2.0 * std::numbers::pi) * n_t0 * sigma_t;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return x;
}

DensityProfile synth_profile(const BimodalModel& model, const std::vector<double>& grid,
                             double noise_sigma, std::uint64_t rng_seed) {
  DensityProfile p;
  p.x = grid;
  p.noise_sigma = noise_sigma;
  p.n.resize(grid.size());
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double v = model(grid[i]);
    if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
    p.n[i] = std::max(0.0, v);
  }
  return p;
}

namespace {

constexpr int kMinPoints = 64;
constexpr double kRelativeRmsTolerance = 1e-8;
constexpr int kMaxPolishRounds = 40;
constexpr double kVanishingShare = 1e-3;

void check_profile(const DensityProfile& p) {
  if (p.x.size() != p.n.size()) throw Error(ErrorKind::domain, "profile grid and density sizes differ");
  if (p.x.size() < static_cast<std::size_t>(kMinPoints)) {
    throw Error(ErrorKind::domain, "bimodal fit needs at least 64 grid points");
  }
  const double step = p.x[1] - p.x[0];
  if (!(step > 0.0)) throw Error(ErrorKind::domain, "profile grid must be strictly increasing");
  for (std::size_t i = 1; i < p.x.size(); ++i) {
    const double d = p.x[i] - p.x[i - 1];
    if (!(d > 0.0) || std::abs(d - step) > 1e-6 * std::abs(step)) {
      throw Error(ErrorKind::domain, "profile grid must be uniform");
    }
  }
  for (double v : p.n) {
    if (!std::isfinite(v)) throw Error(ErrorKind::domain, "profile contains non-finite density");
  }
}

// Fit is carried out in units where the peak density is 1, the grid starts
// at 0 and spans 1; this makes the search scale- and shift-equivariant.
struct Normalization {
  double origin;
  double span;
  double peak;
};

BimodalModel to_model(const ParameterVector& v) {
  return {v[0], v[1], v[2], v[3], v[4]};
}

// Expected reading of a density mu after additive noise of width s clamped
// at zero: mu Phi(mu/s) + s phi(mu/s). Plain mu when the noise is unknown.
double observed(double mu, double s) {
  if (s <= 0.0) return mu;
  const double z = mu / s;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return mu * cdf + s * pdf;
}

// d observed / d mu.
double observed_slope(double mu, double s) {
  if (s <= 0.0) return 1.0;
  return 0.5 * std::erfc(-(mu / s) / std::numbers::sqrt2);
}

double mean_square_of(const BimodalModel& model, const std::vector<double>& u,
                      const std::vector<double>& y, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = observed(model(u[i]), s) - y[i];
    acc += r * r;
  }
  return acc / static_cast<double>(u.size());
}

// Best nonnegative amplitudes for fixed shapes (2x2 linear least squares).
void fit_amplitudes(BimodalModel& model, const std::vector<double>& u, const std::vector<double>& y) {
  double cc = 0.0, tt = 0.0, ct = 0.0, cy = 0.0, ty = 0.0;
  BimodalModel unit = model;
  unit.n_c0 = 1.0;
  unit.n_t0 = 1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double c = unit.condensate(u[i]);
    const double t = unit.thermal(u[i]);
    cc += c * c;
    tt += t * t;
    ct += c * t;
    cy += c * y[i];
    ty += t * y[i];
  }
  const double det = cc * tt - ct * ct;
  double a = det > 0.0 ? (cy * tt - ty * ct) / det : 0.0;
  double b = det > 0.0 ? (ty * cc - cy * ct) / det : 0.0;
  if (a < 0.0 || det <= 0.0) {
    a = 0.0;
    b = tt > 0.0 ? std::max(ty / tt, 0.0) : 0.0;
  } else if (b < 0.0) {
    b = 0.0;
    a = cc > 0.0 ? std::max(cy / cc, 0.0) : 0.0;
  }
  model.n_c0 = a;
  model.n_t0 = b;
}

ParameterVector as_start(BimodalModel m) {
  // Keep both amplitudes alive so the simplex can move either component.
  const double peak = std::max(m.n_c0 + m.n_t0, 1e-12);
  m.n_c0 = std::max(m.n_c0, 0.02 * peak);
  m.n_t0 = std::max(m.n_t0, 0.02 * peak);
  return {m.n_c0, m.radius, m.n_t0, m.sigma_t, m.x0};
}

// Starting points: the best shape inside the identifiable regime and, when
// different, the best shape overall.
std::vector<ParameterVector> initial_guesses(const std::vector<double>& u, const std::vector<double>& y,
                                             double s) {
  double w = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double wi = std::max(y[i], 0.0);
    w += wi;
    m1 += wi * u[i];
  }
  const double center = m1 / w;
  double m2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - center;
    m2 += std::max(y[i], 0.0) * d * d;
  }
  const double width = std::sqrt(m2 / w);
  // Widths split 1:3 so that an equal-number mixture reproduces the variance.
  const double radius = width / std::sqrt(1.0 / 14.0 + 4.5);
  BimodalModel best{0.0, radius, 0.0, 3.0 * radius, center};
  fit_amplitudes(best, u, y);
  double best_ms = mean_square_of(best, u, y, s);
  BimodalModel overall = best;
  double overall_ms = best_ms;

  // Coarse shape scan around the moment estimate; the moment split alone
  // misplaces narrow condensates on broad thermal clouds.
  const double spacing = u[1] - u[0];
  for (int i = 0; i < 20; ++i) {
    const double r = std::max(width * std::pow(10.0, -1.2 + 1.9 * i / 19.0), 2.0 * spacing);
    for (int j = 0; j < 14; ++j) {
      BimodalModel trial{0.0, r, 0.0, r * std::pow(10.0, -1.0 + 2.2 * j / 13.0), center};
      fit_amplitudes(trial, u, y);
      const double ms = mean_square_of(trial, u, y, s);
      if (ms < overall_ms) {
        overall_ms = ms;
        overall = trial;
      }
      if (trial.sigma_t > trial.radius / 4.0 && ms < best_ms) {
        best_ms = ms;
        best = trial;
      }
    }
  }
  std::vector<ParameterVector> starts{as_start(best)};
  if (overall_ms < best_ms) starts.push_back(as_start(overall));
  return starts;
}

// Levenberg-Marquardt refinement with the analytic Jacobian.
ParameterVector refine(ParameterVector v, const std::vector<double>& u, const std::vector<double>& y,
                       double s) {
  const auto m = static_cast<Eigen::Index>(u.size());
  auto residuals = [&](const ParameterVector& p, Eigen::VectorXd& r) {
    const BimodalModel model = to_model(p);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      r(i) = observed(model(u[k]), s) - y[k];
    }
  };
  auto feasible = [](const ParameterVector& p) {
    return p[0] >= 0.0 && p[1] > 0.0 && p[2] >= 0.0 && p[3] > 0.0;
  };
  Eigen::VectorXd r(m), trial_r(m);
  residuals(v, r);
  double sse = r.squaredNorm();
  double lambda = 1e-3;
  for (int iter = 0; iter < 200 && lambda < 1e12; ++iter) {
    Eigen::MatrixXd jac(m, 5);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = u[static_cast<std::size_t>(i)];
      const double d = x - v[4];
      const double q = d / v[1];
      const double p = 1.0 - q * q;
      const double inside = p > 0.0 ? 1.0 : 0.0;
      const double g = std::exp(-d * d / (2.0 * v[3] * v[3]));
      jac(i, 0) = inside * p * p;
      jac(i, 1) = inside * v[0] * 4.0 * p * q * q / v[1];
      jac(i, 2) = g;
      jac(i, 3) = v[2] * g * d * d / (v[3] * v[3] * v[3]);
      jac(i, 4) = inside * v[0] * 4.0 * p * q / v[1] + v[2] * g * d / (v[3] * v[3]);
      const double mu = inside * v[0] * p * p + v[2] * g;
      jac.row(i) *= observed_slope(mu, s);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
      ParameterVector next = v;
      for (int k = 0; k < 5; ++k) next[static_cast<std::size_t>(k)] += delta(k);
      if (delta.allFinite() && feasible(next)) {
        residuals(next, trial_r);
        const double next_sse = trial_r.squaredNorm();
        if (next_sse <= sse) {
          const bool tiny = sse - next_sse <= 1e-15 * sse;
          v = next;
          r = trial_r;
          sse = next_sse;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (tiny) return v;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  return v;
}

struct Polished {
  ParameterVector x;
  double rms;
  int stable_rounds;
};

// Alternating simplex and Levenberg-Marquardt rounds until the relative
// residual change stays below tolerance twice in a row.
Polished polish(const Objective& mean_square, ParameterVector x, const std::vector<double>& u,
                const std::vector<double>& y, double noise, int& evaluations) {
  // The simplex locates the basin; Levenberg-Marquardt finishes the job.
  OptimizerOptions opts;
  opts.max_evals = 3000;
  opts.f_tol = 1e-16;
  opts.x_tol = 1e-7;
  opts.restarts = 0;
  opts.reeval_best = false;
  double rms = std::sqrt(mean_square(x));
  int stable_rounds = 0;
  for (int round = 0; round < kMaxPolishRounds && stable_rounds < 2; ++round) {
    opts.init_scale.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      opts.init_scale[i] = std::max(0.1 * std::abs(x[i]), 1e-3) * (round == 0 ? 1.0 : 0.5);
    }
    const OptimumReport report = minimize(mean_square, x, opts);
    evaluations += report.eval_count;
    if (report.best_fom <= mean_square(x)) x = report.best_params;
    x = refine(x, u, y, noise);
    const double new_rms = std::sqrt(mean_square(x));
    const double change = std::abs(rms - new_rms) / std::max(new_rms, 1e-300);
    stable_rounds = (change < kRelativeRmsTolerance || new_rms == 0.0) ? stable_rounds + 1 : 0;
    rms = new_rms;
  }
  return {x, rms, stable_rounds};
}

}  // namespace

FitResult bimodal_fit(const DensityProfile& profile) {
  check_profile(profile);
  const std::size_t m = profile.x.size();
  Normalization norm{profile.x.front(), profile.x.back() - profile.x.front(),
                     *std::max_element(profile.n.begin(), profile.n.end())};
  if (!(norm.peak > 0.0)) throw Error(ErrorKind::non_identifiable, "profile has no positive density");

  const double noise = profile.noise_sigma / norm.peak;
  std::vector<double> u(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[i] = (profile.x[i] - norm.origin) / norm.span;
    y[i] = profile.n[i] / norm.peak;
  }

  const Objective mean_square = [&](const ParameterVector& v) {
    if (v[0] < 0.0 || v[2] < 0.0 || !(v[1] > 0.0) || !(v[3] > 0.0)) {
      return std::numeric_limits<double>::max();
    }
    return mean_square_of(to_model(v), u, y, noise);
  };

  FitResult result;
  ParameterVector x;
  double rms = std::numeric_limits<double>::infinity();
  int stable_rounds = 0;
  for (const ParameterVector& start : initial_guesses(u, y, noise)) {
    int evaluations = 0;
    auto [candidate, candidate_rms, stable] = polish(mean_square, start, u, y, noise, evaluations);
    result.evaluations += evaluations;
    if (candidate_rms < rms) {
      x = candidate;
      rms = candidate_rms;
      stable_rounds = stable;
    }
  }
  result.converged = stable_rounds >= 2;

  BimodalModel fitted = to_model(x);
  BimodalModel& out = result.model;
  out.n_c0 = fitted.n_c0 * norm.peak;
  out.n_t0 = fitted.n_t0 * norm.peak;
  out.radius = fitted.radius * norm.span;
  out.sigma_t = fitted.sigma_t * norm.span;
  out.x0 = norm.origin + fitted.x0 * norm.span;
  result.residual_rms = rms * norm.peak;
  result.n_condensed = out.condensed_number();
  result.n_thermal = out.thermal_number();
  const double total = result.n_condensed + result.n_thermal;
  result.thermal_fraction = total > 0.0 ? result.n_thermal / total : 0.0;
  result.condensate_vanishing = result.n_condensed < kVanishingShare * total;
  const bool thermal_vanishing = result.n_thermal < kVanishingShare * total;

  const double spacing = profile.x[1] - profile.x[0];
  if (!result.condensate_vanishing && out.radius < 0.5 * spacing) {
    throw Error(ErrorKind::non_identifiable, "condensate component collapsed to zero width");
  }
  if (!thermal_vanishing && out.sigma_t < 0.5 * spacing) {
    throw Error(ErrorKind::non_identifiable, "thermal component collapsed to zero width");
  }
  if (!result.condensate_vanishing && !thermal_vanishing && out.sigma_t <= out.radius / 4.0) {
    throw Error(ErrorKind::non_identifiable, "thermal width fell below a quarter of the condensate radius");
  }
  return result;
}

double fom_from_thermal_fractions(double tf_final, double tf_initial) {
  if (!(tf_final >= 0.0 && tf_final <= 1.0) || !(tf_initial >= 0.0 && tf_initial <= 1.0)) {
    throw Error(ErrorKind::domain, "thermal fractions must lie in [0, 1]");
  }
  if (tf_initial == 0.0) throw Error(ErrorKind::domain, "initial thermal fraction is zero");
  return tf_final / tf_initial;
}

void write_profile_csv(std::ostream& out, const DensityProfile& profile) {
  out << "x,n\n" << std::setprecision(17);
  for (std::size_t i = 0; i < profile.x.size(); ++i) out << profile.x[i] << ',' << profile.n[i] << '\n';
}

void write_profile_csv(const std::string& path, const DensityProfile& profile) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  write_profile_csv(out, profile);
}

DensityProfile read_profile_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::io, "profile CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,n") throw Error(ErrorKind::io, "profile CSV header must be 'x,n'");
  DensityProfile p;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    double x = 0.0, n = 0.0;
    char comma = 0;
    if (!(row >> x >> comma >> n) || comma != ',') {
      throw Error(ErrorKind::io, "malformed profile row " + std::to_string(line_no));
    }
    p.x.push_back(x);
    p.n.push_back(n);
  }
  return p;
}

DensityProfile read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open profile " + path);
  return read_profile_csv(in);
}

}  // namespace crabloop
