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

#include "crabloop/optimizer.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "crabloop/errors.hpp"
#include "crabloop/seeding.hpp"

namespace crabloop {

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct BudgetExhausted {};

ParameterVector affine(const ParameterVector& origin, double coef, const ParameterVector& toward) {
  // origin + coef * (toward - origin)
  ParameterVector out(origin.size());
  for (std::size_t i = 0; i < origin.size(); ++i) {
    out[i] = origin[i] + coef * (toward[i] - origin[i]);
  }
  return out;
}

double distance(const ParameterVector& a, const ParameterVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace

bool Box::contains(const ParameterVector& x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return true;
}

double Box::squared_distance(const ParameterVector& x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] < lower[i] ? lower[i] - x[i] : (x[i] > upper[i] ? x[i] - upper[i] : 0.0);
    acc += d * d;
  }
  return acc;
}

std::string_view to_string(Move m) {
  switch (m) {
    case Move::reflect: return "reflect";
    case Move::expand: return "expand";
    case Move::contract_outside: return "contract_outside";
    case Move::contract_inside: return "contract_inside";
    case Move::shrink: return "shrink";
  }
  return "unknown";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::reference: return "reference";
    case Phase::simplex: return "simplex";
    case Phase::restart: return "restart";
  }
  return "unknown";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::budget_exhausted: return "budget_exhausted";
    case Termination::restarts_exhausted: return "restarts_exhausted";
  }
  return "unknown";
}

void SimplexState::sort() {
  std::vector<std::size_t> order(vertices.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vertex_foms[a] < vertex_foms[b]; });
  std::vector<ParameterVector> v;
  std::vector<double> f;
  v.reserve(order.size());
  f.reserve(order.size());
  for (std::size_t i : order) {
    v.push_back(std::move(vertices[i]));
    f.push_back(vertex_foms[i]);
  }
  vertices = std::move(v);
  vertex_foms = std::move(f);
}

double SimplexState::fom_spread() const {
  const auto [lo, hi] = std::minmax_element(vertex_foms.begin(), vertex_foms.end());
  return *hi - *lo;
}

double SimplexState::diameter() const {
  const std::size_t best = static_cast<std::size_t>(
      std::min_element(vertex_foms.begin(), vertex_foms.end()) - vertex_foms.begin());
  double d = 0.0;
  for (const auto& v : vertices) d = std::max(d, distance(v, vertices[best]));
  return d;
}

SimplexState init_simplex(const ParameterVector& x0, std::span<const double> scale,
                          bool randomized, std::uint64_t rng_seed) {
  const std::size_t d = x0.size();
  if (d == 0) throw Error(ErrorKind::degenerate_simplex, "simplex needs at least one dimension");
  if (scale.size() != d) {
    throw Error(ErrorKind::degenerate_simplex, "one initial scale per coordinate is required");
  }
  for (double s : scale) {
    if (!(std::abs(s) > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::degenerate_simplex, "initial simplex scale must be nonzero");
    }
  }
  SimplexState state;
  state.vertices.assign(d + 1, x0);
  for (std::size_t i = 0; i < d; ++i) state.vertices[i + 1][i] += scale[i];
  if (randomized) {
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& v : state.vertices) {
      for (std::size_t i = 0; i < d; ++i) v[i] += scale[i] * u(rng);
    }
  }
  state.vertex_foms.assign(d + 1, kUnset);
  return state;
}

void evaluate_vertices(SimplexState& state, const Objective& objective) {
  for (std::size_t i = 0; i < state.vertices.size(); ++i) {
    if (std::isnan(state.vertex_foms[i])) {
      state.vertex_foms[i] = objective(state.vertices[i]);
      ++state.eval_count;
    }
  }
}

void step(SimplexState& state, const Objective& objective, const SimplexCoefficients& k) {
  state.sort();
  const std::size_t n = state.vertices.size();
  const std::size_t d = n - 1;
  auto eval = [&](const ParameterVector& x) {
    const double f = objective(x);
    ++state.eval_count;
    return f;
  };

  ParameterVector centroid(d, 0.0);
  for (std::size_t v = 0; v < d; ++v) {
    for (std::size_t i = 0; i < d; ++i) centroid[i] += state.vertices[v][i];
  }
  for (double& c : centroid) c /= static_cast<double>(d);

  const ParameterVector& worst = state.vertices[d];
  const double f_best = state.vertex_foms[0];
  const double f_second = state.vertex_foms[d - (d > 0 ? 1 : 0)];
  const double f_worst = state.vertex_foms[d];

  auto accept = [&](ParameterVector x, double f, Move m) {
    state.vertices[d] = std::move(x);
    state.vertex_foms[d] = f;
    state.moves.push_back(m);
  };

  const ParameterVector xr = affine(centroid, -k.reflection, worst);
  const double fr = eval(xr);
  if (fr < f_best) {
    ParameterVector xe = affine(centroid, k.expansion, xr);
    const double fe = eval(xe);
    if (fe < fr) {
      accept(std::move(xe), fe, Move::expand);
    } else {
      accept(xr, fr, Move::reflect);
    }
    return;
  }
  if (fr < f_second) {
    accept(xr, fr, Move::reflect);
    return;
  }
  if (fr < f_worst) {
    ParameterVector xc = affine(centroid, k.contraction, xr);
    const double fc = eval(xc);
    if (fc <= fr) {
      accept(std::move(xc), fc, Move::contract_outside);
      return;
    }
  } else {
    ParameterVector xc = affine(centroid, k.contraction, worst);
    const double fc = eval(xc);
    if (fc < f_worst) {
      accept(std::move(xc), fc, Move::contract_inside);
      return;
    }
  }
  state.moves.push_back(Move::shrink);
  for (std::size_t v = 1; v < n; ++v) {
    state.vertices[v] = affine(state.vertices[0], k.shrink, state.vertices[v]);
    state.vertex_foms[v] = eval(state.vertices[v]);
  }
}

bool step_converged(const SimplexState& state, double f_tol, double x_tol) {
  return state.fom_spread() < f_tol && state.diameter() < x_tol;
}

namespace {

// Picks the live (non-superseded) record with the lowest FOM; records within
// f_tol of that minimum are resolved toward the earliest evaluation.
int select_incumbent(const std::vector<Evaluation>& history, double f_tol) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : history) {
    if (!e.superseded && e.phase != Phase::reference) best = std::min(best, e.fom);
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& e = history[i];
    if (!e.superseded && e.phase != Phase::reference && e.fom <= best + f_tol) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

// Simplex around x with edges of length factor*scale_i along randomly rotated axes.
SimplexState restart_simplex(const ParameterVector& x, double fx, std::span<const double> scale,
                             double factor, std::uint64_t seed) {
  const std::size_t d = x.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = gauss(rng);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  SimplexState state;
  state.vertices.assign(d + 1, x);
  state.vertex_foms.assign(d + 1, kUnset);
  state.vertex_foms[0] = fx;
  for (std::size_t v = 0; v < d; ++v) {
    for (std::size_t i = 0; i < d; ++i) {
      state.vertices[v + 1][i] += factor * scale[i] * q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v));
    }
  }
  return state;
}

}  // namespace

OptimumReport minimize(const Objective& objective, const ParameterVector& x0,
                       const OptimizerOptions& options, const EvaluationObserver& observer) {
  const int d = static_cast<int>(x0.size());
  if (options.max_evals < d + 2) {
    throw Error(ErrorKind::budget, "max_evals must be at least dimension + 2");
  }
  if (!(options.f_tol > 0.0) || !(options.x_tol > 0.0)) {
    throw Error(ErrorKind::config, "optimizer tolerances must be positive");
  }
  std::vector<double> scale = options.init_scale;
  if (scale.empty()) scale.assign(x0.size(), 0.1);

  OptimumReport report;
  Phase phase = Phase::simplex;
  bool reevaluating = false;
  const Objective counted = [&](const ParameterVector& x) {
    if (static_cast<int>(report.history.size()) >= options.max_evals) throw BudgetExhausted{};
    const double f = objective(x);
    Evaluation e;
    e.index = static_cast<int>(report.history.size());
    e.params = x;
    e.fom = f;
    e.phase = phase;
    e.reevaluation = reevaluating;
    report.history.push_back(std::move(e));
    if (observer) observer(report.history.back());
    return f;
  };

  SimplexState state = init_simplex(x0, scale, options.randomize_init, options.rng_seed);
  int segment_start = 0;
  try {
    evaluate_vertices(state, counted);
    while (true) {
      step(state, counted, options.coefficients);
      state.stable_steps = step_converged(state, options.f_tol, options.x_tol) ? state.stable_steps + 1 : 0;
      if (state.stable_steps < 2) continue;

      if (state.restart_count >= options.restarts) {
        // The last restart either confirmed the incumbent or was still improving on it.
        const bool improved = state.restart_count > 0 &&
                              select_incumbent(report.history, options.f_tol) >= segment_start;
        report.termination = improved ? Termination::restarts_exhausted : Termination::converged;
        break;
      }
      const int restarts_done = state.restart_count + 1;
      std::vector<Move> moves = std::move(state.moves);
      const int evals = state.eval_count;
      phase = Phase::restart;

      const int inc = select_incumbent(report.history, options.f_tol);
      ParameterVector x = report.history[static_cast<std::size_t>(inc)].params;
      double fx = report.history[static_cast<std::size_t>(inc)].fom;
      if (options.reeval_best) {
        reevaluating = true;
        fx = counted(x);
        reevaluating = false;
        for (std::size_t i = 0; i + 1 < report.history.size(); ++i) {
          if (report.history[i].params == x) report.history[i].superseded = true;
        }
      }
      segment_start = static_cast<int>(report.history.size());
      // Each restart doubles the exploration scale.
      const double factor = std::ldexp(1.0, restarts_done);
      state = restart_simplex(x, fx, scale, factor,
                              mix_seed(options.rng_seed, static_cast<std::uint64_t>(restarts_done)));
      state.restart_count = restarts_done;
      state.moves = std::move(moves);
      state.eval_count = evals + (options.reeval_best ? 1 : 0);
      evaluate_vertices(state, counted);
    }
  } catch (const BudgetExhausted&) {
    report.termination = Termination::budget_exhausted;
  }

  report.moves = std::move(state.moves);
  report.eval_count = static_cast<int>(report.history.size());
  report.restart_count = state.restart_count;
  report.best_index = select_incumbent(report.history, options.f_tol);
  if (report.best_index >= 0) {
    report.best_params = report.history[static_cast<std::size_t>(report.best_index)].params;
    report.best_fom = report.history[static_cast<std::size_t>(report.best_index)].fom;
  }
  return report;
}

Objective penalty_wrap(Objective objective, Box bounds, double penalty_base,
                       std::function<bool(const ParameterVector&)> feasible) {
  return [objective = std::move(objective), bounds = std::move(bounds), penalty_base,
          feasible = std::move(feasible)](const ParameterVector& x) {
    if (!bounds.contains(x)) return penalty_base + bounds.squared_distance(x);
    if (feasible && !feasible(x)) return penalty_base;
    return objective(x);
  };
}

}  // namespace crabloop
