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

#include "crabloop/lattice_plant.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "crabloop/errors.hpp"

namespace crabloop {

namespace {

constexpr double kPlanck = 6.62607015e-34;
constexpr double kAtomicMassUnit = 1.66053906660e-27;
constexpr double kDegeneracyGap = 1e-10;
constexpr double kNormDriftTolerance = 1e-8;

using Complex = std::complex<double>;

struct Propagator {
  HubbardParams params{-1.0, -1.0};
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

void check_waveform(const Waveform& w, const char* what) {
  if (w.samples.size() < 2 || !(w.dt >= 0.0) || !std::isfinite(w.dt)) {
    throw Error(ErrorKind::invalid_count, std::string(what) + " waveform needs two samples and dt >= 0");
  }
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw Error(ErrorKind::domain, std::string(what) + " waveform has non-finite depth");
    if (s < 0.0) throw Error(ErrorKind::domain, std::string(what) + " waveform has negative depth");
  }
}

void check_norm(const QuantumState& psi) {
  const double drift = std::abs(psi.norm() - 1.0);
  if (!(drift <= kNormDriftTolerance)) {
    std::ostringstream msg;
    msg << "state norm drifted by " << drift;
    throw Error(ErrorKind::norm_drift, msg.str());
  }
}

// Applies exp(-i diag(values) h) in the eigenbasis `vectors`.
void apply_exponential(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& values, double h,
                       Eigen::VectorXcd& psi) {
  Eigen::VectorXcd coeffs = vectors.transpose().cast<Complex>() * psi;
  for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
    coeffs(k) *= std::polar(1.0, -values(k) * h);
  }
  psi = vectors.cast<Complex>() * coeffs;
}

}  // namespace

double HubbardConfig::atomic_mass_kg() const {
  if (atom == "Rb87") return 86.909180527 * kAtomicMassUnit;
  if (atom == "K39") return 38.963706486 * kAtomicMassUnit;
  if (atom == "Na23") return 22.989769282 * kAtomicMassUnit;
  throw Error(ErrorKind::config, "unknown atom tag '" + atom + "'");
}

double HubbardConfig::recoil_energy_joule() const {
  const double lambda = lambda_nm * 1e-9;
  return kPlanck * kPlanck / (2.0 * atomic_mass_kg() * lambda * lambda);
}

double HubbardConfig::recoil_frequency_hz() const { return recoil_energy_joule() / kPlanck; }

void validate(const HubbardConfig& config) {
  if (config.sites < 1 || config.sites > kMaxSites || config.bosons < 1 || config.bosons > kMaxBosons) {
    throw Error(ErrorKind::config, "lattice must have 1..8 sites and 1..8 bosons");
  }
  if (fock_dimension(config.sites, config.bosons) > kMaxHilbertDimension) {
    throw Error(ErrorKind::dimension_overflow, "Hilbert space exceeds the desk-scale cap of 5000 states");
  }
  if (!(config.kappa > 0.0) || !std::isfinite(config.kappa)) {
    throw Error(ErrorKind::config, "time-unit factor kappa must be positive");
  }
  if (!(config.mapping.u_scale > 0.0) || !(config.mapping.s_min > 0.0)) {
    throw Error(ErrorKind::config, "depth mapping constants must be positive");
  }
  if (!(config.lambda_nm > 0.0)) throw Error(ErrorKind::config, "wavelength must be positive");
  (void)config.atomic_mass_kg();
}

HubbardParams depth_to_hubbard(double s, const DepthMapping& mapping) {
  if (!(s >= mapping.s_min)) {
    std::ostringstream msg;
    msg << "depth " << s << " E_r is below the mapping's validity bound " << mapping.s_min;
    throw Error(ErrorKind::shallow_depth, msg.str());
  }
  const double s34 = std::pow(s, 0.75);
  return {4.0 / std::sqrt(std::numbers::pi) * s34 * std::exp(-2.0 * std::sqrt(s)),
          mapping.u_scale * s34};
}

double PlantProtocol::duration_ms() const {
  double total = ramp_up.duration();
  if (round_trip) total += hold_ms + ramp_down.duration();
  return total;
}

LatticePlant::LatticePlant(HubbardConfig config)
    : config_((validate(config), std::move(config))), basis_(config_.sites, config_.bosons) {
  const std::size_t dim = basis_.size();
  const int sites = config_.sites;
  std::vector<std::pair<int, int>> bonds;
  for (int i = 0; i + 1 < sites; ++i) bonds.emplace_back(i, i + 1);
  if (config_.boundary == Boundary::periodic && sites > 2) bonds.emplace_back(sites - 1, 0);

  hopping_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  interaction_.resize(static_cast<Eigen::Index>(dim));

  // Each iteration writes only column `a`.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(dim); ++a) {
    const auto src = basis_.state(static_cast<std::size_t>(a));
    std::vector<FockBasis::Occupation> occ(src.begin(), src.end());
    double onsite = 0.0;
    for (auto n : occ) onsite += 0.5 * n * (n - 1.0);
    interaction_(a) = onsite;
    for (auto [i, j] : bonds) {
      for (auto [to, from] : {std::pair{i, j}, std::pair{j, i}}) {
        const int n_from = occ[static_cast<std::size_t>(from)];
        const int n_to = occ[static_cast<std::size_t>(to)];
        if (n_from == 0) continue;
        const double amp = std::sqrt(static_cast<double>(n_from) * (n_to + 1));
        occ[static_cast<std::size_t>(from)] -= 1;
        occ[static_cast<std::size_t>(to)] += 1;
        const std::size_t b = *basis_.index_of(occ);
        hopping_(static_cast<Eigen::Index>(b), a) -= amp;
        occ[static_cast<std::size_t>(from)] += 1;
        occ[static_cast<std::size_t>(to)] -= 1;
      }
    }
  }

  const double r = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t j = basis_.reflected(i);
    if (i == j) {
      even_.first.push_back(i);
      even_.second.push_back(i);
      even_.weight_first.push_back(1.0);
      even_.weight_second.push_back(0.0);
    } else if (i < j) {
      for (auto* sector : {&even_, &odd_}) {
        sector->first.push_back(i);
        sector->second.push_back(j);
        sector->weight_first.push_back(r);
        sector->weight_second.push_back(sector == &even_ ? r : -r);
      }
    }
  }
  for (Sector* sector : {&even_, &odd_}) {
    const auto n = static_cast<Eigen::Index>(sector->size());
    sector->hopping = Eigen::MatrixXd::Zero(n, n);
    sector->interaction.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto ci = static_cast<Eigen::Index>(sector->first[static_cast<std::size_t>(c)]);
      const auto cj = static_cast<Eigen::Index>(sector->second[static_cast<std::size_t>(c)]);
      const Eigen::VectorXd col = sector->weight_first[static_cast<std::size_t>(c)] * hopping_.col(ci) +
                                  sector->weight_second[static_cast<std::size_t>(c)] * hopping_.col(cj);
      for (Eigen::Index row = 0; row < n; ++row) {
        const auto ri = static_cast<Eigen::Index>(sector->first[static_cast<std::size_t>(row)]);
        const auto rj = static_cast<Eigen::Index>(sector->second[static_cast<std::size_t>(row)]);
        sector->hopping(row, c) = sector->weight_first[static_cast<std::size_t>(row)] * col(ri) +
                                  sector->weight_second[static_cast<std::size_t>(row)] * col(rj);
      }
      // The interaction is reflection invariant, so each block stays diagonal.
      sector->interaction(c) = interaction_(ci);
    }
  }
}

Eigen::MatrixXd LatticePlant::hamiltonian(double J, double U) const {
  Eigen::MatrixXd h = J * hopping_;
  h.diagonal() += U * interaction_;
  return h;
}

GroundState LatticePlant::ground_state(double J, double U) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hamiltonian(J, U));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::norm_drift, "eigensolver failed to converge");
  }
  GroundState gs;
  Eigen::VectorXd v = solver.eigenvectors().col(0);
  gs.energy = solver.eigenvalues()(0);
  gs.gap = v.size() > 1 ? solver.eigenvalues()(1) - gs.energy : 0.0;
  gs.degenerate = v.size() > 1 && gs.gap < kDegeneracyGap;

  // Largest-magnitude amplitude made positive; ties go to the first index.
  const double peak = v.cwiseAbs().maxCoeff();
  Eigen::Index pivot = 0;
  while (std::abs(v(pivot)) < peak - 1e-12) ++pivot;
  if (v(pivot) < 0.0) v = -v;
  gs.state = v.normalized().cast<Complex>();
  return gs;
}

HubbardParams LatticePlant::hubbard_at(double depth) const {
  return depth_to_hubbard(std::max(depth, config_.mapping.s_min), config_.mapping);
}

Eigen::VectorXcd LatticePlant::project(const QuantumState& state, const Sector& sector) const {
  Eigen::VectorXcd c(static_cast<Eigen::Index>(sector.size()));
  for (std::size_t k = 0; k < sector.size(); ++k) {
    Complex v = sector.weight_first[k] * state(static_cast<Eigen::Index>(sector.first[k]));
    if (sector.second[k] != sector.first[k]) {
      v += sector.weight_second[k] * state(static_cast<Eigen::Index>(sector.second[k]));
    }
    c(static_cast<Eigen::Index>(k)) = v;
  }
  return c;
}

void LatticePlant::embed(const Eigen::VectorXcd& coeffs, const Sector& sector, QuantumState& out) const {
  for (std::size_t k = 0; k < sector.size(); ++k) {
    const Complex c = coeffs(static_cast<Eigen::Index>(k));
    out(static_cast<Eigen::Index>(sector.first[k])) += sector.weight_first[k] * c;
    if (sector.second[k] != sector.first[k]) {
      out(static_cast<Eigen::Index>(sector.second[k])) += sector.weight_second[k] * c;
    }
  }
}

void LatticePlant::propagate(Eigen::VectorXcd& coeffs, const Sector& sector,
                             const Waveform& waveform) const {
  if (sector.size() == 0) return;
  Propagator cache;
  double pending = 0.0;
  auto flush = [&] {
    if (pending > 0.0) apply_exponential(cache.vectors, cache.values, pending, coeffs);
    pending = 0.0;
  };
  const double h = config_.kappa * waveform.dt;
  for (std::size_t k = 0; k + 1 < waveform.samples.size(); ++k) {
    const HubbardParams p = hubbard_at(0.5 * (waveform.samples[k] + waveform.samples[k + 1]));
    if (p.J != cache.params.J || p.U != cache.params.U) {
      flush();
      Eigen::MatrixXd block = p.J * sector.hopping;
      block.diagonal() += p.U * sector.interaction;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
      cache.params = p;
      cache.vectors = solver.eigenvectors();
      cache.values = solver.eigenvalues();
    }
    // Consecutive intervals with the same Hamiltonian are merged.
    pending += h;
  }
  flush();
}

QuantumState LatticePlant::evolve(const QuantumState& state, const Waveform& waveform) const {
  check_waveform(waveform, "evolution");
  if (state.size() != static_cast<Eigen::Index>(dimension())) {
    throw Error(ErrorKind::domain, "state dimension does not match the basis");
  }
  check_norm(state);
  QuantumState out = QuantumState::Zero(state.size());
  for (const Sector* sector : {&even_, &odd_}) {
    Eigen::VectorXcd c = project(state, *sector);
    if (c.squaredNorm() == 0.0) continue;
    propagate(c, *sector, waveform);
    embed(c, *sector, out);
  }
  check_norm(out);
  return out;
}

QuantumState LatticePlant::evolve_dense_reference(const QuantumState& state,
                                                  const Waveform& waveform) const {
  check_waveform(waveform, "evolution");
  check_norm(state);
  QuantumState psi = state;
  const double h = config_.kappa * waveform.dt;
  for (std::size_t k = 0; k + 1 < waveform.samples.size(); ++k) {
    const HubbardParams p = hubbard_at(0.5 * (waveform.samples[k] + waveform.samples[k + 1]));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hamiltonian(p));
    apply_exponential(solver.eigenvectors(), solver.eigenvalues(), h, psi);
  }
  check_norm(psi);
  return psi;
}

FomSample LatticePlant::evaluate(const PlantProtocol& protocol) const {
  check_waveform(protocol.ramp_up, "ramp-up");
  if (!(protocol.hold_ms >= 0.0)) throw Error(ErrorKind::domain, "hold time must be nonnegative");
  if (!(protocol.noise_sigma >= 0.0)) throw Error(ErrorKind::domain, "noise width must be nonnegative");

  const HubbardParams start = hubbard_at(protocol.ramp_up.samples.front());
  const GroundState initial = ground_state(start.J, start.U);
  QuantumState psi = evolve(initial.state, protocol.ramp_up);

  HubbardParams final_params;
  double fidelity = 0.0;
  double energy_excess = 0.0;
  auto excess = [&](const HubbardParams& p, double e0) {
    const double e = (psi.adjoint() * hamiltonian(p).cast<Complex>() * psi)(0).real();
    return (e - e0) / p.J;
  };
  if (!protocol.round_trip) {
    final_params = hubbard_at(protocol.ramp_up.samples.back());
    const GroundState target = ground_state(final_params.J, final_params.U);
    fidelity = std::norm(target.state.dot(psi));
    energy_excess = excess(final_params, target.energy);
  } else {
    const double top = protocol.ramp_up.samples.back();
    if (protocol.hold_ms > 0.0) {
      psi = evolve(psi, Waveform{protocol.hold_ms, {top, top}});
    }
    Waveform down = protocol.ramp_down;
    if (down.samples.empty()) {
      const double spm = protocol.ramp_up.dt > 0.0 ? 1.0 / protocol.ramp_up.dt : 10.0;
      down = quasi_adiabatic_ramp_down(top, spm);
    }
    check_waveform(down, "ramp-down");
    psi = evolve(psi, down);
    fidelity = std::norm(initial.state.dot(psi));
    final_params = hubbard_at(down.samples.back());
    energy_excess = excess(final_params, ground_state(final_params.J, final_params.U).energy);
  }

  FomSample sample;
  sample.fidelity = std::clamp(fidelity, 0.0, 1.0);
  sample.fom = 1.0 - sample.fidelity;
  sample.energy_excess = energy_excess;
  sample.seed = protocol.rng_seed;
  if (protocol.noise_sigma > 0.0) {
    std::mt19937_64 rng(protocol.rng_seed);
    std::normal_distribution<double> noise(0.0, protocol.noise_sigma);
    sample.fom = std::max(0.0, sample.fom + noise(rng));
    sample.noisy = true;
  }
  return sample;
}

EvaluationResult LatticePlant::try_evaluate(const PlantProtocol& protocol) const noexcept {
  EvaluationResult result;
  try {
    result.sample = evaluate(protocol);
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

Eigen::MatrixXd build_hamiltonian(const HubbardConfig& config, double J, double U) {
  return LatticePlant(config).hamiltonian(J, U);
}

GroundState ground_state(const HubbardConfig& config, double J, double U) {
  return LatticePlant(config).ground_state(J, U);
}

QuantumState evolve(const QuantumState& state, const Waveform& waveform, const HubbardConfig& config) {
  return LatticePlant(config).evolve(state, waveform);
}

FomSample evaluate(const PlantProtocol& protocol, const HubbardConfig& config) {
  return LatticePlant(config).evaluate(protocol);
}

QuantumState fock_state(const FockBasis& basis, std::span<const FockBasis::Occupation> occupations) {
  const auto idx = basis.index_of(occupations);
  if (!idx) throw Error(ErrorKind::domain, "occupation tuple is not in the basis");
  QuantumState psi = QuantumState::Zero(static_cast<Eigen::Index>(basis.size()));
  psi(static_cast<Eigen::Index>(*idx)) = 1.0;
  return psi;
}

ReferenceProtocols reference_protocols(Experiment experiment) {
  ReferenceProtocols refs;
  if (experiment == Experiment::crossover_3d1d) {
    refs.quasi_adiabatic.base = {32.0, 140.0, 30.0};
    refs.initial_guess.base = {32.0, 15.0, 3.0};
  } else {
    refs.quasi_adiabatic.base = {25.0, 140.0, 30.0};
    refs.initial_guess.base = {25.0, 40.0, 8.0};
  }
  return refs;
}

Waveform quasi_adiabatic_ramp_down(double s_max, double samples_per_ms) {
  ControlField field;
  field.base = {s_max, 140.0, 30.0};
  const int n = std::max(2, static_cast<int>(std::lround(140.0 * samples_per_ms)) + 1);
  Waveform w = sample_waveform(field, n);
  std::reverse(w.samples.begin(), w.samples.end());
  return w;
}

}  // namespace crabloop
