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

#include "nvssr/spin_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nvssr/error.hpp"
#include "nvssr/units.hpp"

namespace nvssr {
namespace {

using cd = std::complex<double>;

const Mat2& pauli_x() {
  static const Mat2 m = (Mat2() << 0, 1, 1, 0).finished();
  return m;
}
const Mat2& pauli_y() {
  static const Mat2 m = (Mat2() << 0, cd(0, -1), cd(0, 1), 0).finished();
  return m;
}
const Mat2& pauli_z() {
  static const Mat2 m = (Mat2() << 1, 0, 0, -1).finished();
  return m;
}

Mat2 rotation_matrix(double angle, const Vec3& axis) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  Mat2 m = c * Mat2::Identity();
  m -= cd(0, s) * (axis.x() * pauli_x() + axis.y() * pauli_y() + axis.z() * pauli_z());
  return m;
}

Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 trial = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return (trial - trial.dot(n) * n).normalized();
}

}  // namespace

void PhysicalConstants::validate() const {
  if (!(gamma_n > 0.0) || !(gamma_e > 0.0) || !std::isfinite(gamma_n) || !std::isfinite(gamma_e)) {
    throw InvalidArgumentError("gyromagnetic ratios must be positive and finite");
  }
}

FieldConfig FieldConfig::from_gauss(double gauss) {
  FieldConfig f;
  f.b_magnitude = gauss * 1e-4;
  f.validate();
  return f;
}

void FieldConfig::validate() const {
  if (!(b_magnitude >= 0.0) || !std::isfinite(b_magnitude)) {
    throw InvalidArgumentError("field magnitude must be finite and non-negative");
  }
}

void HyperfineSpin::validate() const {
  if (!a_vec.allFinite()) {
    throw InvalidArgumentError("hyperfine vector has non-finite components");
  }
}

double EffectiveFrame::revival_period() const {
  if (!(a_perp > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return kTwoPi * omega / a_perp;
}

EffectiveFrame effective_frame(const HyperfineSpin& spin, const FieldConfig& field,
                               const PhysicalConstants& consts) {
  spin.validate();
  field.validate();
  consts.validate();

  const Vec3 larmor(0.0, 0.0, consts.gamma_n * field.b_magnitude);
  const Vec3 average = 0.5 * spin.a_vec + larmor;
  EffectiveFrame frame;
  frame.omega = average.norm();
  if (frame.omega < kDegenerateOmega) {
    throw DegenerateFrameError("average nuclear precession frequency vanishes; n_par undefined");
  }
  frame.n_par = average / frame.omega;
  frame.a_par = spin.a_vec.dot(frame.n_par);
  const Vec3 perp = spin.a_vec - frame.a_par * frame.n_par;
  frame.a_perp = perp.norm();
  frame.perp_defined = frame.a_perp > 1e-12 * frame.omega;
  if (frame.perp_defined) {
    frame.n_perp = perp / frame.a_perp;
  } else {
    frame.a_perp = 0.0;
    frame.n_perp = any_perpendicular(frame.n_par);
  }
  return frame;
}

HyperfineSpin spin_from_frame_components(double a_par, double a_perp, const FieldConfig& field,
                                         const PhysicalConstants& consts) {
  field.validate();
  consts.validate();
  if (!std::isfinite(a_par) || !std::isfinite(a_perp) || a_perp < 0.0) {
    throw InvalidArgumentError("a_par must be finite and a_perp non-negative");
  }
  const double b = consts.gamma_n * field.b_magnitude;
  HyperfineSpin spin;
  if (b == 0.0) {
    if (a_perp != 0.0) {
      throw InvalidArgumentError("at zero field every hyperfine vector is parallel to n_par");
    }
    spin.a_vec = Vec3(0.0, 0.0, a_par);
    return spin;
  }
  if (a_perp > 2.0 * b) {
    throw InvalidArgumentError("a_perp exceeds 2 gamma_n B; no weak-coupling frame exists");
  }
  // The Larmor vector decomposes as (omega - a_par/2) n_par - (a_perp/2) n_perp.
  const double along = std::sqrt(b * b - 0.25 * a_perp * a_perp);
  const double cos_tilt = along / b;
  const double sin_tilt = 0.5 * a_perp / b;
  const Vec3 n_par(sin_tilt, 0.0, cos_tilt);
  const Vec3 n_perp(cos_tilt, 0.0, -sin_tilt);
  spin.a_vec = a_par * n_par + a_perp * n_perp;
  if (0.5 * a_par + along < kDegenerateOmega) {
    throw DegenerateFrameError("requested components give a vanishing precession frequency");
  }
  return spin;
}

HyperfineSpin spin_from_precession(double omega, double a_perp, const FieldConfig& field,
                                   const PhysicalConstants& consts) {
  const double b = consts.gamma_n * field.b_magnitude;
  if (!(omega > 0.0) || a_perp < 0.0 || a_perp > 2.0 * b) {
    throw InvalidArgumentError("need omega > 0 and 0 <= a_perp <= 2 gamma_n B");
  }
  const double a_par = 2.0 * (omega - std::sqrt(b * b - 0.25 * a_perp * a_perp));
  return spin_from_frame_components(a_par, a_perp, field, consts);
}

Su2Unitary::Su2Unitary(const Mat2& m) : m_(m) {
  if (!m.allFinite() || unitarity_defect() > 1e-10) {
    throw InvalidArgumentError("matrix is not unitary");
  }
}

Su2Unitary Su2Unitary::identity() { return Su2Unitary(Mat2::Identity(), Unchecked{}); }

Su2Unitary Su2Unitary::rotation(double angle, const Vec3& axis) {
  return Su2Unitary(rotation_matrix(angle, axis), Unchecked{});
}

Su2Unitary Su2Unitary::rotation(const Vec3& v) {
  const double angle = v.norm();
  if (angle == 0.0) {
    return identity();
  }
  return rotation(angle, v / angle);
}

Su2Unitary Su2Unitary::adjoint() const { return Su2Unitary(m_.adjoint(), Unchecked{}); }

Su2Unitary Su2Unitary::operator*(const Su2Unitary& rhs) const {
  return Su2Unitary(m_ * rhs.m_, Unchecked{});
}

double Su2Unitary::unitarity_defect() const {
  return (m_.adjoint() * m_ - Mat2::Identity()).norm();
}

double frobenius_distance(const Su2Unitary& a, const Su2Unitary& b) {
  return (a.matrix() - b.matrix()).norm();
}

std::complex<double> filter_sum(double omega, const CpmgSequence& seq) {
  using cl = std::complex<long double>;
  const int n = seq.n_pulses();
  // Phases reach ~2N omega tau; extended precision keeps the rounding below 1e-12.
  const long double phase = static_cast<long double>(omega) * seq.tau();
  // Interior pulses contribute 2 sum_k (-1)^{k-1} e^{-i omega (2k-1) tau}, a
  // geometric series equal to -i e^{iNu} sin(Nu) / sin(u) with u = pi/2 - omega tau.
  const long double u = std::numbers::pi_v<long double> / 2 - phase;
  const long double su = std::sin(u);
  long double kernel;
  if (std::abs(su) < 1e-15L) {
    kernel = n * std::cos(n * u) / std::cos(u);
  } else {
    kernel = std::sin(n * u) / su;
  }
  const cl interior = cl(0.0L, -2.0L * kernel) * std::polar(1.0L, n * u);
  const long double sign_last = (n % 2 == 0) ? 1.0L : -1.0L;
  const cl z = cl(-1.0L, 0.0L) + interior + sign_last * std::polar(1.0L, -2.0L * n * phase);
  return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

double filter_function(double omega, const CpmgSequence& seq) {
  return std::abs(filter_sum(omega, seq));
}

Su2Unitary conditional_propagator_exact(const HyperfineSpin& spin, const FieldConfig& field,
                                        const PhysicalConstants& consts,
                                        const CpmgSequence& seq, Branch branch) {
  spin.validate();
  field.validate();
  const Vec3 larmor(0.0, 0.0, consts.gamma_n * field.b_magnitude);
  const Vec3 coupled = spin.a_vec + larmor;
  const double tau = seq.tau();

  // Interval k lasts tau at both ends and 2 tau in between.
  const Su2Unitary coupled_half = Su2Unitary::rotation(coupled * tau);
  const Su2Unitary coupled_full = Su2Unitary::rotation(coupled * (2.0 * tau));
  const Su2Unitary bare_half = Su2Unitary::rotation(larmor * tau);
  const Su2Unitary bare_full = Su2Unitary::rotation(larmor * (2.0 * tau));

  const int n = seq.n_pulses();
  bool coupled_now = branch == Branch::kPlus;
  Su2Unitary u = coupled_now ? coupled_half : bare_half;
  for (int k = 1; k <= n; ++k) {
    coupled_now = !coupled_now;
    const bool last = k == n;
    const Su2Unitary& step = coupled_now ? (last ? coupled_half : coupled_full)
                                         : (last ? bare_half : bare_full);
    u = step * u;
  }
  return u;
}

Su2Unitary conditional_propagator_magnus(const EffectiveFrame& frame, const CpmgSequence& seq,
                                         Branch branch) {
  if (frame.omega < kDegenerateOmega) {
    throw DegenerateFrameError("Magnus propagator needs a non-degenerate frame");
  }
  const double t = seq.total_time();
  const Su2Unitary precession = Su2Unitary::rotation(frame.omega * t, frame.n_par);

  // Integral of the toggling function against e^{-i omega t'} equals i Z / omega.
  const cd z = filter_sum(frame.omega, seq);
  const double c = -z.imag() / frame.omega;
  const double s = -z.real() / frame.omega;
  const Vec3 e2 = frame.n_par.cross(frame.n_perp);
  // CPMG toggling has zero mean, so a_par drops out at this order.
  Vec3 kick = 0.5 * frame.a_perp * (c * frame.n_perp - s * e2);
  if (branch == Branch::kMinus) {
    kick = -kick;
  }
  return precession * Su2Unitary::rotation(kick);
}

PropagatorPair conditional_propagators(const HyperfineSpin& spin, const FieldConfig& field,
                                       const PhysicalConstants& consts,
                                       const CpmgSequence& seq, PropagatorMode mode) {
  if (mode == PropagatorMode::kExact) {
    return {conditional_propagator_exact(spin, field, consts, seq, Branch::kPlus),
            conditional_propagator_exact(spin, field, consts, seq, Branch::kMinus)};
  }
  const EffectiveFrame frame = effective_frame(spin, field, consts);
  return {conditional_propagator_magnus(frame, seq, Branch::kPlus),
          conditional_propagator_magnus(frame, seq, Branch::kMinus)};
}

std::string to_string(PropagatorMode mode) {
  return mode == PropagatorMode::kExact ? "exact" : "magnus";
}

PropagatorMode propagator_mode_from_string(const std::string& name) {
  if (name == "exact") return PropagatorMode::kExact;
  if (name == "magnus") return PropagatorMode::kMagnus;
  throw InvalidArgumentError("unknown propagator mode '" + name + "' (expected exact|magnus)");
}

}  // namespace nvssr
