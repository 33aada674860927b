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

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nvssr/sequence.hpp"
#include "nvssr/spin_core.hpp"

namespace nvssr {

using Vec2c = Eigen::Vector2cd;

/// Non-interacting nuclear spins sharing one field.
struct SpinBath {
  std::vector<HyperfineSpin> spins;
  FieldConfig field;
  PhysicalConstants consts;
};

/// Throws InvalidArgumentError unless rho is Hermitian, unit-trace and
/// positive semidefinite within tol.
void validate_density_matrix(const Mat2& rho, double tol = 1e-10);

/// Re Tr(rho U+^dagger U-).
double coherence_from_propagators(const PropagatorPair& props, const Mat2& rho);

double coherence_single(const HyperfineSpin& spin, const FieldConfig& field,
                        const PhysicalConstants& consts, const CpmgSequence& seq,
                        const Mat2& nuclear_state, PropagatorMode mode);

/// Product of single-spin coherences at rho = I/2. t2 > 0 multiplies an
/// exp(-2 N tau / t2) envelope for the unresolved bath; t2 = 0 disables it.
double coherence_bath(std::span<const HyperfineSpin> spins, const FieldConfig& field,
                      const PhysicalConstants& consts, const CpmgSequence& seq,
                      PropagatorMode mode, double t2 = 0.0);

enum class ScanAxis { kTau, kPulses };

struct CurvePoint {
  double x = 0.0;  // tau in seconds or pulse count
  double coherence = 1.0;
};

struct CoherenceCurve {
  ScanAxis axis = ScanAxis::kTau;
  // The held-fixed parameter: pulse count for tau sweeps, tau for N sweeps.
  int fixed_pulses = 0;
  double fixed_tau = 0.0;
  std::vector<CurvePoint> points;
};

struct CoherenceMap2D {
  std::vector<double> tau_grid;
  std::vector<int> n_grid;
  // values(i, j) is the coherence at n_grid[i], tau_grid[j].
  Eigen::MatrixXd values;
};

struct ScanOptions {
  PropagatorMode mode = PropagatorMode::kExact;
  double t2 = 0.0;
  // 0 picks std::thread::hardware_concurrency().
  int threads = 1;
};

/// Inclusive grid tau_min, tau_min + step, ... <= tau_max (with 1e-9 step slack).
std::vector<double> tau_grid(double tau_min, double tau_max, double step);

CoherenceCurve scan_tau(const SpinBath& bath, int n_pulses, double tau_min, double tau_max,
                        double step, const ScanOptions& options = {});
/// N = 1 .. n_max at fixed tau.
CoherenceCurve scan_n(const SpinBath& bath, double tau, int n_max, const ScanOptions& options = {});
CoherenceMap2D scan_2d(const SpinBath& bath, double tau_min, double tau_max, double step,
                       std::span<const int> n_list, const ScanOptions& options = {});

struct Dip {
  double position = 0.0;
  double depth = 0.0;  // interpolated coherence at the minimum
};

/// Interior local minima below threshold, refined by a parabola through the
/// three bracketing samples.
std::vector<Dip> find_dips(const CoherenceCurve& curve, double threshold = 0.8);

/// Least-squares period P of L(N) = cos(2 pi N / P) over an N sweep.
double oscillation_period(const CoherenceCurve& curve);

/// Tau near the first CPMG resonance pi/(2 omega) where the exact coherence
/// after n_pulses is smallest. The exact dip sits slightly away from the
/// first-order position.
double exact_resonant_tau(const HyperfineSpin& spin, const FieldConfig& field,
                          const PhysicalConstants& consts, int n_pulses);

struct LockedStates {
  Vec2c up;    // eigenvector of U+ closest to the +1/2 eigenstate of I_perp
  Vec2c down;  // ... closest to the -1/2 eigenstate
  double phase = 0.0;    // extracted phase per 2 tau
  double overlap = 0.0;  // min |<eigvec|I_perp eigvec>|
  bool degenerate = false;
};

/// Eigenstates of the exact plus-branch propagator for even N. Degenerate when
/// I_perp is undefined (a_perp = 0) or U+ has a repeated eigenvalue.
LockedStates locked_states(const HyperfineSpin& spin, const FieldConfig& field,
                           const PhysicalConstants& consts, const CpmgSequence& seq);

/// Eigenvectors (+1/2, -1/2) of n.I.
std::pair<Vec2c, Vec2c> spin_half_eigenstates(const Vec3& n);

}  // namespace nvssr
