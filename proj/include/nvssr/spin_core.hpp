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

// Spin-1/2 algebra for one weakly coupled nucleus next to a two-level electron
// (NV |0>, |-1>) under CPMG control. Spin operators are I = sigma / 2, so
// exp(-i theta n.I) rotates the Bloch vector by theta about n.

#pragma once

#include <complex>

#include <Eigen/Dense>

#include "nvssr/sequence.hpp"

namespace nvssr {

using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2cd;

struct PhysicalConstants {
  double gamma_n = 6.73e7;   // rad s^-1 T^-1
  double gamma_e = 1.76e11;  // rad s^-1 T^-1, not used by the pure-dephasing dynamics

  void validate() const;
};

/// Static field along the NV axis (internal z), in tesla.
struct FieldConfig {
  double b_magnitude = 0.0;

  static FieldConfig from_gauss(double gauss);
  void validate() const;
};

/// Hyperfine vector A (rad/s) coupling S_z to the nuclear spin, in the frame
/// whose z axis is the NV axis.
struct HyperfineSpin {
  Vec3 a_vec = Vec3::Zero();

  void validate() const;
};

/// Average nuclear Hamiltonian omega n_par.I = (A/2 + gamma_n B).I and the
/// split of A into components along and across n_par.
struct EffectiveFrame {
  double omega = 0.0;
  Vec3 n_par = Vec3::UnitZ();
  Vec3 n_perp = Vec3::UnitX();
  double a_par = 0.0;
  double a_perp = 0.0;
  // False when a_perp vanishes. n_perp is then an arbitrary unit vector
  // orthogonal to n_par.
  bool perp_defined = false;

  // Phase a locked state picks up per 2 tau at resonance.
  double locked_phase() const { return a_perp / (2.0 * omega); }
  // Pulse count after which the resonant coherence revives.
  double revival_period() const;
};

inline constexpr double kDegenerateOmega = 1e-3;  // rad/s

EffectiveFrame effective_frame(const HyperfineSpin& spin, const FieldConfig& field,
                               const PhysicalConstants& consts);

/// Build A from its frame components at a given field. The weak-coupling root
/// omega = a_par/2 + sqrt(b^2 - a_perp^2/4) is used, which needs
/// a_perp <= 2 gamma_n B. A lies in the x-z plane with A_x >= 0.
HyperfineSpin spin_from_frame_components(double a_par, double a_perp, const FieldConfig& field,
                                         const PhysicalConstants& consts);

/// Same, but specified by the average precession frequency instead of a_par.
HyperfineSpin spin_from_precession(double omega, double a_perp, const FieldConfig& field,
                                   const PhysicalConstants& consts);

class Su2Unitary {
 public:
  // Throws InvalidArgumentError unless m is unitary to 1e-10.
  explicit Su2Unitary(const Mat2& m);

  static Su2Unitary identity();
  // exp(-i angle axis.I); axis must be a unit vector.
  static Su2Unitary rotation(double angle, const Vec3& axis);
  // exp(-i v.I): rotation by |v| about v.
  static Su2Unitary rotation(const Vec3& v);

  const Mat2& matrix() const { return m_; }
  Su2Unitary adjoint() const;
  Su2Unitary operator*(const Su2Unitary& rhs) const;
  double unitarity_defect() const;

 private:
  struct Unchecked {};
  Su2Unitary(const Mat2& m, Unchecked) : m_(m) {}

  Mat2 m_;
};

double frobenius_distance(const Su2Unitary& a, const Su2Unitary& b);

enum class Branch { kPlus, kMinus };
enum class PropagatorMode { kExact, kMagnus };

/// Signed toggling sum sum_{p=0}^{N} (-1)^p (e^{-i omega t_{p+1}} - e^{-i omega t_p})
/// with t_0 = 0 and t_{N+1} = 2 N tau, evaluated in closed form.
std::complex<double> filter_sum(double omega, const CpmgSequence& seq);

/// |filter_sum|.
double filter_function(double omega, const CpmgSequence& seq);

/// Time-ordered product of the piecewise-constant conditional Hamiltonians.
/// kPlus starts with (A + gamma_n B).I on the first interval and every pulse
/// swaps it with gamma_n B.I; kMinus starts with the latter.
Su2Unitary conditional_propagator_exact(const HyperfineSpin& spin, const FieldConfig& field,
                                        const PhysicalConstants& consts,
                                        const CpmgSequence& seq, Branch branch);

/// First-order Magnus form exp(-i omega t I_par) exp(-+i theta m.I) with
/// theta = a_perp F / (2 omega). The rotation axis m is the first-order axis
/// in the n_perp, n_par x n_perp plane; it equals n_perp at resonance for
/// even N.
Su2Unitary conditional_propagator_magnus(const EffectiveFrame& frame, const CpmgSequence& seq,
                                         Branch branch);

struct PropagatorPair {
  Su2Unitary plus;
  Su2Unitary minus;
};

PropagatorPair conditional_propagators(const HyperfineSpin& spin, const FieldConfig& field,
                                       const PhysicalConstants& consts,
                                       const CpmgSequence& seq, PropagatorMode mode);

std::string to_string(PropagatorMode mode);
PropagatorMode propagator_mode_from_string(const std::string& name);

}  // namespace nvssr
