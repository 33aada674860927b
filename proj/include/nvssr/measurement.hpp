// Copyright 2026 The nvssr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// One readout cycle: electron prepared in (|0> + |1>)/sqrt2, conditional CPMG
// evolution of the nucleus, a closing electron pi/2 pulse, then optical
// readout. Outcome 0 is the bright class (electron |0>), 1 the dark class.

#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "nvssr/coherence.hpp"

namespace nvssr {

// Phase of the closing pi/2 pulse relative to the opening one. 0 is the plain
// Hadamard, which maps both locked states to the same outcome statistics; 90
// degrees turns the conditional phase into a population difference.
inline constexpr double kDefaultReadoutPhase = std::numbers::pi / 2.0;

struct MeasurementChannel {
  Mat2 k0 = Mat2::Identity();  // bright
  Mat2 k1 = Mat2::Zero();      // dark

  const Mat2& kraus(int outcome) const { return outcome == 0 ? k0 : k1; }
  // || K0^dagger K0 + K1^dagger K1 - I ||_F
  double completeness_defect() const;
  std::array<double, 2> probabilities(const Mat2& rho) const;
  // Descending singular values of K_m.
  std::array<double, 2> singular_values(int outcome) const;
  // Applies the non-selective channel rho -> sum_m K_m rho K_m^dagger.
  Mat2 apply(const Mat2& rho) const;
};

MeasurementChannel channel_from_propagators(const PropagatorPair& props,
                                            double readout_phase = kDefaultReadoutPhase);

MeasurementChannel measurement_channel(const HyperfineSpin& spin, const FieldConfig& field,
                                       const PhysicalConstants& consts, const CpmgSequence& seq,
                                       PropagatorMode mode,
                                       double readout_phase = kDefaultReadoutPhase);

/// Trace distance between the post-cycle nuclear states conditioned on the two
/// outcomes, starting from rho. 0 when either outcome has zero probability.
double distinguishability(const MeasurementChannel& channel, const Mat2& rho);

/// Locked basis of a channel: eigenvectors of K0^dagger K0. up is the state
/// more likely to give a bright outcome.
struct ReadoutBasis {
  Vec2c up;
  Vec2c down;
  double p_bright_up = 0.5;
  double p_bright_down = 0.5;
};

ReadoutBasis readout_basis(const MeasurementChannel& channel);

/// Population of the locked state that survives n_cycles of the non-selective
/// channel, minimized over the two locked states. 1 for a QND channel.
double qnd_retention(const MeasurementChannel& channel, int n_cycles);

/// Probability that n_cycles consecutive outcomes all equal the outcome most
/// likely for the starting locked state, minimized over the two states.
double outcome_repetition(const MeasurementChannel& channel, int n_cycles);

struct EntanglementPoint {
  int n = 0;
  double entropy = 0.0;  // bits
  // 2 N Phi folded into [0, pi], from the exact overlap of the branches.
  double accumulated_phase = 0.0;
};

struct EntanglementCurve {
  std::vector<EntanglementPoint> points;
  double phi_analytic = 0.0;   // a_perp / (2 omega)
  double phi_extracted = 0.0;  // from the propagators, see entanglement_vs_n
};

/// Electron-nuclear entanglement entropy after N = 1..n_max pulses at fixed
/// tau. The nuclear input is (|up> + |down>)/sqrt2 in the I_perp eigenbasis.
/// phi_extracted is pi / P where P is the least-squares period of the
/// infinite-temperature coherence cos(2 N Phi) over the sweep.
EntanglementCurve entanglement_vs_n(const HyperfineSpin& spin, const FieldConfig& field,
                                    const PhysicalConstants& consts, double tau, int n_max,
                                    PropagatorMode mode = PropagatorMode::kExact);

/// Spin whose locked phase satisfies 2 N Phi = pi/2 exactly at the first CPMG
/// resonance for the given tau: omega = pi/(2 tau), a_perp = pi omega/(2 N).
HyperfineSpin projective_target_spin(double tau, int n_pulses, const FieldConfig& field,
                                     const PhysicalConstants& consts);

struct ReadoutConfig {
  int cycles_per_point = 40000;
  double photon_rate_bright = 0.063;
  double photon_rate_dark = 0.0575;
  double t1n_up = 15.0;    // s; infinity disables jumps
  double t1n_down = 15.0;  // s
  double point_duration = 0.189;  // s
  double electron_init_error = 0.10;
  double pi_pulse_error = 0.0;
  std::uint64_t seed = 20150801;

  void validate() const;
};

enum class NuclearLabel : int { kDown = 0, kUp = 1 };

struct PhotonTrace {
  std::vector<std::int64_t> counts;
  // Ground truth from the simulation; empty for measured data.
  std::vector<NuclearLabel> hidden_states;
  ReadoutConfig config;
  std::uint64_t seed = 0;
};

/// splitmix64 of (seed, index), used to seed the per-point generator.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

struct PointResult {
  std::int64_t photon_count = 0;
  int bright_cycles = 0;
  int jumps = 0;
};

/// Runs config.cycles_per_point cycles on rho in place. Photons are summed per
/// outcome class, so the count is Poisson with mean
/// n_bright rate_bright + n_dark rate_dark after electron_init_error relabeling.
/// n_pulses sets the per-cycle pi_pulse_error kick probability.
PointResult simulate_point(Mat2& rho, const MeasurementChannel& channel,
                           const ReadoutBasis& basis, const ReadoutConfig& config,
                           int n_pulses, std::mt19937_64& rng);

PhotonTrace simulate_trace(const MeasurementChannel& channel, const ReadoutConfig& config,
                           int n_pulses, int n_points);

PhotonTrace simulate_trace(const HyperfineSpin& spin, const FieldConfig& field,
                           const PhysicalConstants& consts, const CpmgSequence& seq,
                           const ReadoutConfig& config, int n_points,
                           PropagatorMode mode = PropagatorMode::kMagnus,
                           double readout_phase = kDefaultReadoutPhase);

}  // namespace nvssr
