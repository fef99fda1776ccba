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

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "crabloop/errors.hpp"
#include "crabloop/tof_analysis.hpp"

#include "oracles.hpp"

using namespace crabloop;
using namespace crabloop_test;

TEST_CASE("model integrals match quadrature") {
  const BimodalModel m{2.0, 3.0, 0.5, 8.0, 1.0};
  CHECK(m.condensed_number() == doctest::Approx(16.0 / 15.0 * 2.0 * 3.0).epsilon(1e-14));
  CHECK(m.thermal_number() == doctest::Approx(std::sqrt(2.0 * M_PI) * 0.5 * 8.0).epsilon(1e-14));
  const double tf = m.thermal_number() / (m.thermal_number() + m.condensed_number());
  CHECK(tf == doctest::Approx(tf_by_quadrature(m)).epsilon(1e-9));
}

TEST_CASE("synth_profile") {
  const auto grid = uniform_grid(-10.0, 10.0, 201);
  CHECK(grid.front() == -10.0);
  CHECK(grid.back() == 10.0);
  const DensityProfile pure_c = synth_profile({1.0, 3.0, 0.0, 5.0, 0.5}, grid, 0.0, 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - 0.5) > 3.0) CHECK(pure_c.n[i] == 0.0);
  }
  CHECK(pure_c.n[105] == doctest::Approx(1.0).epsilon(1e-12));

  const DensityProfile pure_t = synth_profile({0.0, 3.0, 2.0, 4.0, 0.0}, grid, 0.0, 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(pure_t.n[i] == doctest::Approx(2.0 * std::exp(-grid[i] * grid[i] / 32.0)).epsilon(1e-14));
  }

  const BimodalModel m{1.0, 3.0, 0.5, 7.0, 0.0};
  const DensityProfile a = synth_profile(m, grid, 0.05, 9);
  const DensityProfile b = synth_profile(m, grid, 0.05, 9);
  CHECK(a.n == b.n);
  CHECK(a.noise_sigma == 0.05);
  for (double v : a.n) CHECK(v >= 0.0);
  CHECK(synth_profile(m, grid, 0.05, 10).n != a.n);
}

TEST_CASE("noiseless round trip recovers the generating model") {
  const auto grid = uniform_grid(-40.0, 40.0, 401);
  for (double tf : {0.1, 0.3, 0.5, 0.9}) {
    for (double x0 : {-1.3, 0.0, 2.2}) {
      const BimodalModel truth = model_with_tf(tf, 5.0, 10.0 + 2.0 * tf, x0);
      const FitResult fit = bimodal_fit(synth_profile(truth, grid, 0.0, 0));
      CHECK(fit.converged);
      CHECK(std::abs(fit.thermal_fraction - tf) <= 1e-6);
      CHECK(std::abs(fit.thermal_fraction - tf_by_quadrature(truth)) <= 1e-6);
      CHECK(fit.model.n_c0 == doctest::Approx(truth.n_c0).epsilon(1e-6));
      CHECK(fit.model.radius == doctest::Approx(truth.radius).epsilon(1e-6));
      CHECK(fit.model.n_t0 == doctest::Approx(truth.n_t0).epsilon(1e-6));
      CHECK(fit.model.sigma_t == doctest::Approx(truth.sigma_t).epsilon(1e-6));
      CHECK(std::abs(fit.model.x0 - truth.x0) <= 1e-6 * truth.radius);
      CHECK(fit.residual_rms < 1e-6);
      CHECK(fit.n_condensed == doctest::Approx(fit.model.condensed_number()));
      CHECK(fit.n_thermal == doctest::Approx(fit.model.thermal_number()));
    }
  }
}

TEST_CASE("thermal fraction at SNR 20 over 50 seeds") {
  // sigma_t = 2R, frame +-2.5 sigma_t, 1001 pixels.
  const auto grid = uniform_grid(-25.0, 25.0, 1001);
  const BimodalModel truth = model_with_tf(0.30, 5.0, 10.0, 0.0);
  const double peak = truth(truth.x0);
  int within = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const FitResult fit = bimodal_fit(synth_profile(truth, grid, peak / 20.0, seed));
    const double err = std::abs(fit.thermal_fraction - 0.30);
    worst = std::max(worst, err);
    if (err <= 0.02) ++within;
  }
  MESSAGE("TF within 0.02 in " << within << "/50 seeds, worst error " << worst);
  CHECK(within >= 45);
}

TEST_CASE("pure Gaussian flags a vanishing condensate") {
  const auto grid = uniform_grid(-40.0, 40.0, 401);
  const FitResult fit = bimodal_fit(synth_profile({0.0, 5.0, 1.0, 10.0, 0.0}, grid, 0.0, 0));
  CHECK(fit.condensate_vanishing);
  CHECK(fit.thermal_fraction == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("scale and translation equivariance") {
  const auto grid = uniform_grid(-40.0, 40.0, 401);
  const BimodalModel truth = model_with_tf(0.4, 5.0, 11.0, 0.7);
  const DensityProfile base = synth_profile(truth, grid, 0.02, 3);
  const FitResult ref = bimodal_fit(base);

  for (double c : {0.25, 3.0, 1000.0}) {
    DensityProfile scaled = base;
    for (double& v : scaled.n) v *= c;
    scaled.noise_sigma *= c;
    const FitResult f = bimodal_fit(scaled);
    CHECK(std::abs(f.thermal_fraction - ref.thermal_fraction) <= 1e-9);
    CHECK(f.n_condensed == doctest::Approx(c * ref.n_condensed).epsilon(1e-9));
    CHECK(f.n_thermal == doctest::Approx(c * ref.n_thermal).epsilon(1e-9));
  }
  for (double shift : {-7.5, 0.125, 30.0}) {
    DensityProfile moved = base;
    for (double& x : moved.x) x += shift;
    const FitResult f = bimodal_fit(moved);
    CHECK(std::abs(f.model.x0 - (ref.model.x0 + shift)) <= 1e-9);
    CHECK(std::abs(f.model.radius - ref.model.radius) <= 1e-9);
    CHECK(std::abs(f.model.sigma_t - ref.model.sigma_t) <= 1e-9);
    CHECK(std::abs(f.model.n_c0 - ref.model.n_c0) <= 1e-9);
    CHECK(std::abs(f.model.n_t0 - ref.model.n_t0) <= 1e-9);
  }
}

TEST_CASE("fit preconditions and identifiability") {
  CHECK_THROWS_AS(bimodal_fit(synth_profile({1.0, 3.0, 0.5, 8.0, 0.0}, uniform_grid(-20.0, 20.0, 63), 0.0, 0)),
                  Error);
  DensityProfile ragged = synth_profile({1.0, 3.0, 0.5, 8.0, 0.0}, uniform_grid(-20.0, 20.0, 100), 0.0, 0);
  ragged.x[50] += 0.01;
  CHECK_THROWS_AS(bimodal_fit(ragged), Error);

  // A thermal component narrower than a quarter of the condensate radius.
  try {
    bimodal_fit(synth_profile({1.0, 10.0, 3.0, 1.5, 0.0}, uniform_grid(-40.0, 40.0, 401), 0.0, 0));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_identifiable);
  }
  try {
    bimodal_fit(DensityProfile{uniform_grid(0.0, 1.0, 64), std::vector<double>(64, 0.0), 0.0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_identifiable);
  }
}

TEST_CASE("thermal-fraction figure of merit") {
  CHECK(fom_from_thermal_fractions(0.3, 0.3) == 1.0);
  CHECK(fom_from_thermal_fractions(0.6, 0.3) == 2.0);
  CHECK(fom_from_thermal_fractions(0.415, 0.25) == 0.415 / 0.25);
  CHECK(fom_from_thermal_fractions(0.415, 0.25) == doctest::Approx(1.66).epsilon(1e-15));
  try {
    fom_from_thermal_fractions(0.3, 0.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::domain);
  }
  CHECK_THROWS_AS(fom_from_thermal_fractions(1.2, 0.3), Error);
}

TEST_CASE("profile csv round trip") {
  const DensityProfile p = synth_profile({1.0, 3.0, 0.5, 8.0, 0.2}, uniform_grid(-20.0, 20.0, 101), 0.01, 4);
  std::stringstream io;
  write_profile_csv(io, p);
  CHECK(io.str().rfind("x,n\n", 0) == 0);
  const DensityProfile back = read_profile_csv(io);
  CHECK(back.x == p.x);
  CHECK(back.n == p.n);

  std::istringstream bad("x,y\n1,2\n");
  CHECK_THROWS_AS(read_profile_csv(bad), Error);
  std::istringstream garbage("x,n\n1,abc\n");
  CHECK_THROWS_AS(read_profile_csv(garbage), Error);
}
