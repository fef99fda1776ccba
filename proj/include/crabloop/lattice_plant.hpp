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

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crabloop/fock_basis.hpp"
#include "crabloop/waveform.hpp"

namespace crabloop {

inline constexpr std::size_t kMaxHilbertDimension = 5000;
inline constexpr int kMaxSites = 8;
inline constexpr int kMaxBosons = 8;

enum class Boundary { open, periodic };

/// Depth -> Hubbard parameter mapping. J uses the deep-lattice tight-binding
/// form, U a power law with a tunable prefactor.
struct DepthMapping {
  double u_scale = 0.2;
  double s_min = 2.0;
};

/// Hopping and on-site interaction in recoil units.
struct HubbardParams {
  double J = 0.0;
  double U = 0.0;
};

struct HubbardConfig {
  int sites = 5;
  int bosons = 5;
  Boundary boundary = Boundary::periodic;
  DepthMapping mapping{};
  /// One plant millisecond equals kappa * hbar / E_r.
  double kappa = 0.6;
  double lambda_nm = 830.0;
  std::string atom = "Rb87";

  double atomic_mass_kg() const;
  /// E_r = h^2 / (2 m lambda^2).
  double recoil_energy_joule() const;
  double recoil_frequency_hz() const;
};

void validate(const HubbardConfig& config);

HubbardParams depth_to_hubbard(double s, const DepthMapping& mapping = {});

using QuantumState = Eigen::VectorXcd;

struct GroundState {
  QuantumState state;
  double energy = 0.0;
  /// E_1 - E_0; zero for a one-dimensional Hilbert space.
  double gap = 0.0;
  bool degenerate = false;
};

struct PlantProtocol {
  Waveform ramp_up;
  double hold_ms = 5.0;
  bool round_trip = false;
  /// Used in round-trip mode. Left empty, the time-reversed quasi-adiabatic
  /// exponential from the final ramp-up depth is used.
  Waveform ramp_down;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  double duration_ms() const;
};

struct FomSample {
  double fom = 0.0;
  double fidelity = 0.0;
  /// <H_f> - E_0(H_f), in units of the final hopping J.
  double energy_excess = 0.0;
  std::uint64_t seed = 0;
  bool noisy = false;
};

/// Either a sample or the reason the evaluation failed.
struct EvaluationResult {
  std::optional<FomSample> sample;
  std::string error;

  bool ok() const { return sample.has_value(); }
};

/// Bose-Hubbard chain in a fixed-N occupation basis. Construction builds the
/// hopping and interaction operators once, plus their restriction to the
/// even and odd site-reflection sectors used by the propagator. All member
/// functions are const and safe to call concurrently.
class LatticePlant {
 public:
  explicit LatticePlant(HubbardConfig config);

  const HubbardConfig& config() const { return config_; }
  const FockBasis& basis() const { return basis_; }
  std::size_t dimension() const { return basis_.size(); }

  /// H = -J sum_<ij> (b_i^+ b_j + h.c.) + U/2 sum_i n_i (n_i - 1).
  Eigen::MatrixXd hamiltonian(double J, double U) const;
  Eigen::MatrixXd hamiltonian(const HubbardParams& p) const { return hamiltonian(p.J, p.U); }

  GroundState ground_state(double J, double U) const;

  /// Hubbard parameters used for a control value, clamped at the mapping's
  /// lower validity bound.
  HubbardParams hubbard_at(double depth) const;

  /// Piecewise-constant propagation; each interval uses the midpoint depth
  /// and is applied exactly through the eigendecomposition of its
  /// reflection-sector blocks.
  QuantumState evolve(const QuantumState& state, const Waveform& waveform) const;

  /// Same propagation on the full Hilbert space without symmetry blocks.
  /// Serial reference kept for cross-checking.
  QuantumState evolve_dense_reference(const QuantumState& state, const Waveform& waveform) const;

  FomSample evaluate(const PlantProtocol& protocol) const;
  EvaluationResult try_evaluate(const PlantProtocol& protocol) const noexcept;

 private:
  struct Sector {
    // Columns are orthonormal combinations of Fock states: (i, partner, weight).
    std::vector<std::size_t> first;
    std::vector<std::size_t> second;
    std::vector<double> weight_first;
    std::vector<double> weight_second;
    Eigen::MatrixXd hopping;
    Eigen::VectorXd interaction;

    std::size_t size() const { return first.size(); }
  };

  Eigen::VectorXcd project(const QuantumState& state, const Sector& sector) const;
  void embed(const Eigen::VectorXcd& coeffs, const Sector& sector, QuantumState& out) const;
  void propagate(Eigen::VectorXcd& coeffs, const Sector& sector, const Waveform& waveform) const;

  HubbardConfig config_;
  FockBasis basis_;
  Eigen::MatrixXd hopping_;       // sum over bonds of -(b_i^+ b_j + h.c.)
  Eigen::VectorXd interaction_;   // sum_i n_i (n_i - 1) / 2
  Sector even_;
  Sector odd_;
};

Eigen::MatrixXd build_hamiltonian(const HubbardConfig& config, double J, double U);
GroundState ground_state(const HubbardConfig& config, double J, double U);
QuantumState evolve(const QuantumState& state, const Waveform& waveform, const HubbardConfig& config);
FomSample evaluate(const PlantProtocol& protocol, const HubbardConfig& config);

/// Fock state |n_1, ..., n_L> as a normalized amplitude vector.
QuantumState fock_state(const FockBasis& basis, std::span<const FockBasis::Occupation> occupations);

enum class Experiment { crossover_3d1d, superfluid_mott };

struct ReferenceProtocols {
  ControlField quasi_adiabatic;
  ControlField initial_guess;
};

/// Quasi-adiabatic (140 ms, 30 ms) and the experiment's starting ramp:
/// (15 ms, 3 ms, s_max = 32) for the 3D-1D crossover, (40 ms, 8 ms, s_max = 25)
/// for the superfluid to Mott insulator ramp.
ReferenceProtocols reference_protocols(Experiment experiment);

/// Time-reversed quasi-adiabatic exponential from `s_max` back to zero.
Waveform quasi_adiabatic_ramp_down(double s_max, double samples_per_ms);

}  // namespace crabloop
