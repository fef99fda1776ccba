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

#include "crabloop/landscape.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "crabloop/control_loop.hpp"
#include "crabloop/errors.hpp"
#include "crabloop/seeding.hpp"

namespace crabloop {

namespace {

constexpr std::uint64_t kLandscapeStream = 0x6c616e6473636170ULL;

std::vector<double> axis(double lo, double hi, int points) {
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    v[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }
  return v;
}

void write_axis(const std::string& path, const char* header, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << header << '\n' << std::setprecision(17);
  for (double v : values) out << v << '\n';
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t index) {
  return mix_seed(master_seed ^ kLandscapeStream, static_cast<std::uint64_t>(index));
}

LandscapeGrid map_landscape(const RunConfig& config_in, Execution execution) {
  RunConfig config = config_in;
  // Cells are exponential ramps regardless of which mode requested the map.
  config.mode = Mode::landscape_map;
  validate(config);
  const LandscapeSettings& s = config.landscape;

  LandscapeGrid grid;
  grid.delta_t_ms = axis(s.delta_t_min_ms, s.delta_t_max_ms, s.delta_t_points);
  grid.tau_ms = axis(s.tau_min_ms, s.tau_max_ms, s.tau_points);
  const std::size_t cells = grid.rows() * grid.cols();
  grid.fom.assign(cells, std::numeric_limits<double>::quiet_NaN());
  grid.seeds.resize(cells);
  grid.errors.assign(cells, {});

  const LatticePlant plant(config.plant.hubbard);
  auto evaluate_cell = [&](std::size_t k) {
    const std::size_t i = k / grid.cols();
    const std::size_t j = k % grid.cols();
    grid.seeds[k] = cell_seed(config.master_seed, k);
    const ControlField field = field_from_params(config, {grid.delta_t_ms[i], grid.tau_ms[j]});
    const EvaluationResult r = evaluate_field(plant, config, field, grid.seeds[k]);
    if (r.ok()) {
      grid.fom[k] = r.sample->fom;
    } else {
      grid.errors[k] = r.error.empty() ? "evaluation failed" : r.error;
    }
  };

  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(cells); ++k) {
      evaluate_cell(static_cast<std::size_t>(k));
    }
  } else {
    for (std::size_t k = 0; k < cells; ++k) evaluate_cell(k);
  }
  return grid;
}

void write_landscape(const LandscapeGrid& grid, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/landscape_fom.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write landscape matrix");
    out << std::setprecision(17);
    for (std::size_t i = 0; i < grid.rows(); ++i) {
      for (std::size_t j = 0; j < grid.cols(); ++j) {
        if (j) out << ',';
        if (grid.skipped(i, j)) {
          out << "nan";
        } else {
          out << grid.at(i, j);
        }
      }
      out << '\n';
    }
  }
  write_axis(dir + "/landscape_delta_t_ms.csv", "delta_t_ms", grid.delta_t_ms);
  write_axis(dir + "/landscape_tau_ms.csv", "tau_ms", grid.tau_ms);
}

}  // namespace crabloop
