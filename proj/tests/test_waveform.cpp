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
#include "crabloop/waveform.hpp"

#include "oracles.hpp"

using namespace crabloop;
using namespace crabloop_test;

namespace {

CrabCorrection random_correction(std::mt19937_64& rng, int n_f, double delta_t) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  while (true) {
    CrabCorrection c;
    for (int j = 0; j < 2 * n_f; ++j) c.coeffs.push_back(u(rng));
    c.freqs = harmonic_frequencies(n_f, delta_t);
    if (std::abs(crab_denominator(c, delta_t)) >= kDenominatorEpsilon) return c;
  }
}

}  // namespace

TEST_CASE("exponential ramp endpoints and midpoint") {
  const ExponentialRamp r{32.0, 15.0, 3.0};
  CHECK(eval_exponential(r, 0.0) == 0.0);
  CHECK(eval_exponential(r, 15.0) == doctest::Approx(32.0).epsilon(1e-12));
  const double oracle = static_cast<double>(ramp_oracle(32.0L, 15.0L, 3.0L, 7.5L));
  CHECK(eval_exponential(r, 7.5) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(eval_exponential(r, 7.5) == doctest::Approx(2.4275).epsilon(1e-4));
}

TEST_CASE("exponential ramp matches long-double oracle across regimes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dt(1.0, 200.0), tau(-50.0, 50.0), frac(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    double ta = tau(rng);
    if (std::abs(ta) < 0.5) ta = 0.5;
    const ExponentialRamp r{25.0, dt(rng), ta};
    const double t = frac(rng) * r.delta_t;
    const double oracle = static_cast<double>(ramp_oracle(r.s_max, r.delta_t, r.tau, t));
    CHECK(eval_exponential(r, t) == doctest::Approx(oracle).epsilon(1e-11).scale(1e-300));
  }
}

TEST_CASE("steep ramps do not overflow") {
  const ExponentialRamp r{25.0, 200.0, 1.0};
  CHECK(eval_exponential(r, 200.0) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(std::isfinite(eval_exponential(r, 100.0)));
  CHECK(eval_exponential(r, 100.0) < 1e-30);
}

TEST_CASE("exponential ramp is monotone for positive tau") {
  for (double tau : {0.5, 3.0, 30.0, 1e4}) {
    const ExponentialRamp r{32.0, 40.0, tau};
    double prev = eval_exponential(r, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double s = eval_exponential(r, 40.0 * i / 1000.0);
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("exponential ramp errors") {
  CHECK_THROWS_AS(eval_exponential({32.0, 15.0, 3.0}, 15.5), Error);
  CHECK_THROWS_AS(eval_exponential({32.0, 15.0, 3.0}, -1e-9), Error);
  try {
    eval_exponential({32.0, 15.0, 0.0}, 1.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_ramp);
  }
  try {
    eval_exponential({32.0, 0.0, 3.0}, 0.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_ramp);
  }
}

TEST_CASE("crab correction examples") {
  CrabCorrection zero{{0.0, 0.0, 0.0, 0.0}, harmonic_frequencies(2, 40.0)};
  for (double t : {0.0, 3.3, 20.0, 40.0}) CHECK(eval_crab(zero, 40.0, t) == 1.0);

  CrabCorrection two_harmonic{{0.2, 0.2, 0.1, 0.1}, harmonic_frequencies(2, 40.0)};
  CHECK(eval_crab(two_harmonic, 40.0, 20.0) == doctest::Approx(0.9 / 1.3).epsilon(1e-12));
  CHECK(std::abs(eval_crab(two_harmonic, 40.0, 20.0) - 0.9 / 1.3) <= 1e-12);
  CHECK(eval_crab(two_harmonic, 40.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval_crab(two_harmonic, 40.0, 40.0) == 1.0);

  CrabCorrection singular{{0.0, -1.0}, harmonic_frequencies(1, 40.0)};
  try {
    eval_crab(singular, 40.0, 10.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_correction);
  }
}

TEST_CASE("normalization and endpoint preservation over random corrections") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nf(1, 4);
  std::uniform_real_distribution<double> dt(5.0, 160.0), tau(1.0, 40.0);
  for (int k = 0; k < 1000; ++k) {
    const double delta_t = dt(rng);
    const CrabCorrection c = random_correction(rng, nf(rng), delta_t);
    const ControlField f{{25.0, delta_t, tau(rng)}, c};
    CHECK(std::abs(eval_crab(c, delta_t, delta_t) - 1.0) <= 1e-12);
    CHECK(std::abs(eval_crab(c, delta_t, 0.0) - 1.0) <= 1e-12);
    CHECK(eval_field(f, 0.0) == 0.0);
    CHECK(std::abs(eval_field(f, delta_t) - 25.0) <= 1e-9 * 25.0);
  }
}

TEST_CASE("zero coefficients reproduce the base ramp") {
  const ExponentialRamp base{25.0, 40.0, 8.0};
  const ControlField f{base, CrabCorrection{{0.0, 0.0, 0.0, 0.0}, harmonic_frequencies(2, 40.0)}};
  const ControlField plain{base, std::nullopt};
  for (int i = 0; i < kProbeGridPoints; ++i) {
    const double t = 40.0 * i / (kProbeGridPoints - 1);
    const double s0 = eval_exponential(base, t);
    CHECK(eval_field(plain, t) == s0);
    CHECK(std::abs(eval_field(f, t) - s0) <= 1e-14 * std::max(s0, 1e-300));
  }
}

TEST_CASE("randomized frequencies stay within the jitter band") {
  const auto nu = randomized_frequencies(3, 40.0, 99);
  REQUIRE(nu.size() == 3);
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const double base = (j + 1) / 40.0;
    CHECK(nu[j] >= 0.5 * base);
    CHECK(nu[j] <= 1.5 * base);
  }
  CHECK(randomized_frequencies(3, 40.0, 99) == nu);
  CHECK(randomized_frequencies(3, 40.0, 100) != nu);
}

TEST_CASE("sample_waveform") {
  const ControlField f{{32.0, 15.0, 3.0}, std::nullopt};
  const Waveform two = sample_waveform(f, 2);
  REQUIRE(two.samples.size() == 2);
  CHECK(two.samples[0] == 0.0);
  CHECK(two.samples[1] == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(two.dt == 15.0);

  const Waveform three = sample_waveform(f, 3);
  REQUIRE(three.samples.size() == 3);
  CHECK(three.dt == 7.5);
  CHECK(three.samples[1] == doctest::Approx(static_cast<double>(ramp_oracle(32, 15, 3, 7.5))).epsilon(1e-13));
  CHECK(three.samples[2] == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(three.duration() == 15.0);

  const Waveform again = sample_waveform(f, 3);
  CHECK(again.samples == three.samples);

  const Waveform odd = sample_waveform({{25.0, 40.0, 8.0}, std::nullopt}, 401);
  CHECK(odd.samples.back() == doctest::Approx(25.0).epsilon(1e-9));

  CHECK_THROWS_AS(sample_waveform(f, 1), Error);
}

TEST_CASE("validate") {
  const ControlField ok{{25.0, 40.0, 8.0},
                        CrabCorrection{{0.2, 0.2, 0.1, 0.1}, harmonic_frequencies(2, 40.0)}};
  CHECK(validate(ok).ok());

  ControlField tau0 = ok;
  tau0.base.tau = 0.0;
  CHECK(validate(tau0).contains(Violation::invalid_tau));

  ControlField bad_dt = ok;
  bad_dt.base.delta_t = -1.0;
  CHECK(validate(bad_dt).contains(Violation::invalid_delta_t));

  ControlField nan = ok;
  nan.correction->coeffs[1] = std::nan("");
  CHECK(validate(nan).contains(Violation::non_finite));

  const ControlField singular{{25.0, 40.0, 8.0},
                              CrabCorrection{{0.0, -1.0}, harmonic_frequencies(1, 40.0)}};
  CHECK(validate(singular).contains(Violation::singular_denominator));

  // a1 = -3 drives the correction negative in the first half of the ramp.
  const ControlField negative{{25.0, 40.0, 8.0},
                              CrabCorrection{{-3.0, 0.0}, harmonic_frequencies(1, 40.0)}};
  CHECK(validate(negative).contains(Violation::negative_depth));

  const ControlField empty{{25.0, 40.0, 8.0}, CrabCorrection{}};
  CHECK(validate(empty).contains(Violation::empty_correction));

  const ControlField mismatched{{25.0, 40.0, 8.0},
                                CrabCorrection{{0.1}, harmonic_frequencies(1, 40.0)}};
  CHECK(validate(mismatched).contains(Violation::mismatched_coefficients));

  // Several problems at once are all reported.
  const ControlField many{{-1.0, -2.0, 0.0}, std::nullopt};
  const auto report = validate(many);
  CHECK(report.contains(Violation::invalid_tau));
  CHECK(report.contains(Violation::invalid_delta_t));
  CHECK(report.contains(Violation::negative_s_max));
  CHECK(to_string(Violation::invalid_tau) == "invalid-tau");
}

TEST_CASE("waveform csv") {
  const Waveform w = sample_waveform({{32.0, 15.0, 3.0}, std::nullopt}, 3);
  std::ostringstream out;
  write_waveform_csv(out, w);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t_ms,depth_Er");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double v = std::stod(line.substr(comma + 1));
    CHECK(v == w.samples[static_cast<std::size_t>(rows)]);
    ++rows;
  }
  CHECK(rows == 3);
}
