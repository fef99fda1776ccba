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
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace crabloop {

/// A point in the optimizer's search space: CRAB coefficients
/// [a_1, b_1, ...] or (delta_t, tau) for the restricted exponential family.
using ParameterVector = std::vector<double>;

/// Scalar objective to be minimized. May be noisy.
using Objective = std::function<double(const ParameterVector&)>;

/// Closed per-coordinate box.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(const ParameterVector& x) const;
  /// Squared Euclidean distance from x to the box.
  double squared_distance(const ParameterVector& x) const;
};

enum class Move { reflect, expand, contract_outside, contract_inside, shrink };
enum class Phase { reference, simplex, restart };
enum class Termination { converged, budget_exhausted, restarts_exhausted };

std::string_view to_string(Move m);
std::string_view to_string(Phase p);
std::string_view to_string(Termination t);

/// Nelder-Mead coefficients.
struct SimplexCoefficients {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct SimplexState {
  std::vector<ParameterVector> vertices;
  std::vector<double> vertex_foms;
  int eval_count = 0;
  int restart_count = 0;
  /// Consecutive steps for which both convergence tests held.
  int stable_steps = 0;
  std::vector<Move> moves;

  std::size_t dimension() const { return vertices.empty() ? 0 : vertices.size() - 1; }
  /// Sorts vertices by FOM, ascending. Stable, so ties keep their order.
  void sort();
  double fom_spread() const;
  /// Largest distance from the best vertex to any other vertex.
  double diameter() const;
};

struct OptimizerOptions {
  int max_evals = 45;
  double f_tol = 1e-3;
  double x_tol = 1e-3;
  int restarts = 2;
  std::vector<double> init_scale;
  bool reeval_best = true;
  bool randomize_init = false;
  std::uint64_t rng_seed = 0;
  SimplexCoefficients coefficients{};
};

/// One objective invocation as seen by the optimizer.
struct Evaluation {
  int index = 0;
  ParameterVector params;
  double fom = 0.0;
  Phase phase = Phase::simplex;
  /// Set when a later re-measurement of the same point replaced this value.
  bool superseded = false;
  bool reevaluation = false;
};

struct OptimumReport {
  ParameterVector best_params;
  double best_fom = 0.0;
  int best_index = -1;
  std::vector<Evaluation> history;
  std::vector<Move> moves;
  Termination termination = Termination::converged;
  int eval_count = 0;
  int restart_count = 0;
};

/// Axis-aligned simplex x0, x0 + scale_i e_i. In randomized mode every vertex
/// is additionally displaced by uniform noise in +-scale/2. FOMs are left
/// unset (NaN) until the vertices are evaluated.
SimplexState init_simplex(const ParameterVector& x0, std::span<const double> scale,
                          bool randomized = false, std::uint64_t rng_seed = 0);

/// Evaluates every vertex whose FOM is still NaN.
void evaluate_vertices(SimplexState& state, const Objective& objective);

/// One Nelder-Mead iteration. Vertices must already be evaluated.
void step(SimplexState& state, const Objective& objective,
          const SimplexCoefficients& coefficients = {});

bool step_converged(const SimplexState& state, double f_tol, double x_tol);

/// Called after every objective invocation, before the next one is issued.
using EvaluationObserver = std::function<void(const Evaluation&)>;

/// Simplex minimization with restart exploration around the incumbent.
OptimumReport minimize(const Objective& objective, const ParameterVector& x0,
                       const OptimizerOptions& options,
                       const EvaluationObserver& observer = {});

/// Wraps an objective so that points outside the box return
/// penalty_base + squared distance to the box and points rejected by
/// `feasible` return penalty_base. Neither case calls the objective.
Objective penalty_wrap(Objective objective, Box bounds, double penalty_base,
                       std::function<bool(const ParameterVector&)> feasible = {});

}  // namespace crabloop
