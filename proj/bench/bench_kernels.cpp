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

// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>

#include "crabloop/landscape.hpp"
#include "crabloop/lattice_plant.hpp"
#include "crabloop/run_config.hpp"
#include "crabloop/waveform.hpp"

using namespace crabloop;

namespace {

RunConfig map_config() {
  RunConfig c;
  c.mode = Mode::landscape_map;
  c.plant.hubbard.sites = 4;
  c.plant.hubbard.bosons = 4;
  c.plant.samples_per_ms = 2.0;
  c.landscape = {10.0, 60.0, 4, 2.0, 20.0, 4};
  return c;
}

void BM_LandscapeSerial(benchmark::State& state) {
  const RunConfig c = map_config();
  for (auto _ : state) benchmark::DoNotOptimize(map_landscape(c, Execution::serial));
}

void BM_LandscapeParallel(benchmark::State& state) {
  const RunConfig c = map_config();
  for (auto _ : state) benchmark::DoNotOptimize(map_landscape(c, Execution::parallel));
}

struct EvolveFixture {
  LatticePlant plant;
  QuantumState psi;
  Waveform w;

  explicit EvolveFixture(int sites) : plant(make_config(sites)) {
    psi = QuantumState::Random(static_cast<Eigen::Index>(plant.dimension()));
    psi.normalize();
    w = sample_waveform({{25.0, 40.0, 8.0}, std::nullopt}, 81);
  }
  static HubbardConfig make_config(int sites) {
    HubbardConfig c;
    c.sites = sites;
    c.bosons = sites;
    return c;
  }
};

void BM_EvolveSectors(benchmark::State& state) {
  const EvolveFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f.plant.evolve(f.psi, f.w));
}

void BM_EvolveDenseReference(benchmark::State& state) {
  const EvolveFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f.plant.evolve_dense_reference(f.psi, f.w));
}

}  // namespace

BENCHMARK(BM_LandscapeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LandscapeParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvolveSectors)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvolveDenseReference)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
