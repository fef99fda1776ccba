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

#include "crabloop/run_config.hpp"

namespace crabloop {

/// FOM of the exponential family over a (delta_t, tau) grid. Row-major with
/// delta_t along rows.
struct LandscapeGrid {
  std::vector<double> delta_t_ms;
  std::vector<double> tau_ms;
  std::vector<double> fom;
  std::vector<std::uint64_t> seeds;
  /// Empty for evaluated cells; the failure reason for skipped ones.
  std::vector<std::string> errors;

  std::size_t rows() const { return delta_t_ms.size(); }
  std::size_t cols() const { return tau_ms.size(); }
  std::size_t cell(std::size_t i, std::size_t j) const { return i * cols() + j; }
  double at(std::size_t i, std::size_t j) const { return fom[cell(i, j)]; }
  bool skipped(std::size_t i, std::size_t j) const { return !errors[cell(i, j)].empty(); }
};

enum class Execution { serial, parallel };

/// Seed of landscape cell `index`, independent of the closed-loop stream.
std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t index);

/// Evaluates every grid cell. The parallel path fans cells out over OpenMP
/// threads; results are stored by cell index, so both paths produce
/// identical grids.
LandscapeGrid map_landscape(const RunConfig& config, Execution execution = Execution::parallel);

/// landscape_fom.csv (matrix, no header), landscape_delta_t_ms.csv and
/// landscape_tau_ms.csv (one value per line under a header).
void write_landscape(const LandscapeGrid& grid, const std::string& dir);

}  // namespace crabloop
