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

#include "nvssr/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nvssr/error.hpp"

namespace nvssr {
namespace {

double binary_entropy(double p) {
  double h = 0.0;
  for (double x : {p, 1.0 - p}) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

double jump_probability(double t_cycle, double t1) {
  if (!std::isfinite(t1)) return 0.0;
  return -std::expm1(-t_cycle / t1);
}

Mat2 projector(const Vec2c& v) { return v * v.adjoint(); }

}  // namespace

double MeasurementChannel::completeness_defect() const {
  return (k0.adjoint() * k0 + k1.adjoint() * k1 - Mat2::Identity()).norm();
}

std::array<double, 2> MeasurementChannel::probabilities(const Mat2& rho) const {
  return {(k0 * rho * k0.adjoint()).trace().real(), (k1 * rho * k1.adjoint()).trace().real()};
}

std::array<double, 2> MeasurementChannel::singular_values(int outcome) const {
  Eigen::JacobiSVD<Mat2> svd(kraus(outcome));
  const auto& s = svd.singularValues();
  return {s(0), s(1)};
}

Mat2 MeasurementChannel::apply(const Mat2& rho) const {
  return k0 * rho * k0.adjoint() + k1 * rho * k1.adjoint();
}

MeasurementChannel channel_from_propagators(const PropagatorPair& props, double readout_phase) {
  const std::complex<double> phase = std::polar(1.0, readout_phase);
  const Mat2& u_minus = props.minus.matrix();
  const Mat2& u_plus = props.plus.matrix();
  MeasurementChannel channel;
  channel.k0 = 0.5 * (u_minus + phase * u_plus);
  channel.k1 = 0.5 * (u_minus - phase * u_plus);
  return channel;
}

MeasurementChannel measurement_channel(const HyperfineSpin& spin, const FieldConfig& field,
                                       const PhysicalConstants& consts, const CpmgSequence& seq,
                                       PropagatorMode mode, double readout_phase) {
  return channel_from_propagators(conditional_propagators(spin, field, consts, seq, mode),
                                  readout_phase);
}

double distinguishability(const MeasurementChannel& channel, const Mat2& rho) {
  validate_density_matrix(rho);
  const auto p = channel.probabilities(rho);
  if (p[0] <= 0.0 || p[1] <= 0.0) return 0.0;
  const Mat2 diff = channel.k0 * rho * channel.k0.adjoint() / p[0] -
                    channel.k1 * rho * channel.k1.adjoint() / p[1];
  Eigen::SelfAdjointEigenSolver<Mat2> solver(0.5 * (diff + diff.adjoint()),
                                             Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

ReadoutBasis readout_basis(const MeasurementChannel& channel) {
  Eigen::SelfAdjointEigenSolver<Mat2> solver(channel.k0.adjoint() * channel.k0);
  ReadoutBasis basis;
  basis.up = solver.eigenvectors().col(1);
  basis.down = solver.eigenvectors().col(0);
  basis.p_bright_up = solver.eigenvalues()(1);
  basis.p_bright_down = solver.eigenvalues()(0);
  return basis;
}

double qnd_retention(const MeasurementChannel& channel, int n_cycles) {
  const ReadoutBasis basis = readout_basis(channel);
  double worst = 1.0;
  for (const Vec2c& s : {basis.up, basis.down}) {
    Mat2 rho = projector(s);
    for (int i = 0; i < n_cycles; ++i) rho = channel.apply(rho);
    worst = std::min(worst, (s.adjoint() * rho * s).value().real());
  }
  return worst;
}

double outcome_repetition(const MeasurementChannel& channel, int n_cycles) {
  const ReadoutBasis basis = readout_basis(channel);
  double worst = 1.0;
  for (const Vec2c& s : {basis.up, basis.down}) {
    const double p_bright = (channel.k0 * s).squaredNorm();
    const Mat2& k = p_bright >= 0.5 ? channel.k0 : channel.k1;
    Vec2c v = s;
    double log_p = 0.0;
    for (int i = 0; i < n_cycles; ++i) {
      v = k * v;
      const double norm2 = v.squaredNorm();
      if (norm2 <= 0.0) return 0.0;
      log_p += std::log(norm2);
      v /= std::sqrt(norm2);
    }
    worst = std::min(worst, std::exp(log_p));
  }
  return worst;
}

EntanglementCurve entanglement_vs_n(const HyperfineSpin& spin, const FieldConfig& field,
                                    const PhysicalConstants& consts, double tau, int n_max,
                                    PropagatorMode mode) {
  if (n_max < 1) {
    throw InvalidArgumentError("entanglement sweep needs n_max >= 1");
  }
  const EffectiveFrame frame = effective_frame(spin, field, consts);
  const auto [up, down] = spin_half_eigenstates(frame.n_perp);
  const Vec2c psi = (up + down) / std::sqrt(2.0);
  const Mat2 mixed = 0.5 * Mat2::Identity();

  EntanglementCurve curve;
  curve.phi_analytic = frame.locked_phase();
  CoherenceCurve coherence;
  coherence.axis = ScanAxis::kPulses;
  coherence.fixed_tau = tau;
  for (int n = 1; n <= n_max; ++n) {
    const PropagatorPair props =
        conditional_propagators(spin, field, consts, CpmgSequence(n, tau), mode);
    const std::complex<double> overlap =
        (props.plus.matrix() * psi).dot(props.minus.matrix() * psi);
    const double c = std::min(1.0, std::abs(overlap));
    const double l = coherence_from_propagators(props, mixed);
    curve.points.push_back({n, binary_entropy(0.5 * (1.0 + c)),
                            std::acos(std::clamp(l, -1.0, 1.0))});
    coherence.points.push_back({static_cast<double>(n), l});
  }
  if (n_max >= 4) {
    curve.phi_extracted = std::numbers::pi / oscillation_period(coherence);
  } else {
    curve.phi_extracted = 0.5 * curve.points.front().accumulated_phase;
  }
  return curve;
}

HyperfineSpin projective_target_spin(double tau, int n_pulses, const FieldConfig& field,
                                     const PhysicalConstants& consts) {
  if (!(tau > 0.0) || n_pulses < 1) {
    throw InvalidArgumentError("projective target needs tau > 0 and n_pulses >= 1");
  }
  const double omega = std::numbers::pi / (2.0 * tau);
  const double a_perp = std::numbers::pi * omega / (2.0 * n_pulses);
  return spin_from_precession(omega, a_perp, field, consts);
}

void ReadoutConfig::validate() const {
  if (cycles_per_point < 1) {
    throw InvalidArgumentError("cycles_per_point must be >= 1");
  }
  if (!(photon_rate_bright >= 0.0) || !(photon_rate_dark >= 0.0) ||
      !std::isfinite(photon_rate_bright) || !std::isfinite(photon_rate_dark)) {
    throw InvalidArgumentError("photon rates must be finite and >= 0");
  }
  if (!(t1n_up > 0.0) || !(t1n_down > 0.0)) {
    throw InvalidArgumentError("t1n_up and t1n_down must be > 0");
  }
  if (!(point_duration > 0.0) || !std::isfinite(point_duration)) {
    throw InvalidArgumentError("point_duration must be finite and > 0");
  }
  for (double p : {electron_init_error, pi_pulse_error}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgumentError("error probabilities must lie in [0, 1]");
    }
  }
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PointResult simulate_point(Mat2& rho, const MeasurementChannel& channel,
                           const ReadoutBasis& basis, const ReadoutConfig& config,
                           int n_pulses, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Mat2 e0 = channel.k0.adjoint() * channel.k0;
  const Mat2 up_proj = projector(basis.up);
  const Mat2 down_proj = projector(basis.down);
  const double t_cycle = config.point_duration / config.cycles_per_point;
  const double jump_up = jump_probability(t_cycle, config.t1n_up);
  const double jump_down = jump_probability(t_cycle, config.t1n_down);
  const double kick = 1.0 - std::pow(1.0 - config.pi_pulse_error, std::max(n_pulses, 1));

  Mat2 paulis[3];
  paulis[0] << 0, 1, 1, 0;
  paulis[1] << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
  paulis[2] << 1, 0, 0, -1;

  PointResult result;
  for (int cycle = 0; cycle < config.cycles_per_point; ++cycle) {
    const double p0 = std::clamp((e0 * rho).trace().real(), 0.0, 1.0);
    if (uniform(rng) < p0) {
      rho = channel.k0 * rho * channel.k0.adjoint() / p0;
      ++result.bright_cycles;
    } else {
      rho = channel.k1 * rho * channel.k1.adjoint() / (1.0 - p0);
    }
    if (kick > 0.0 && uniform(rng) < kick) {
      const Mat2& p = paulis[std::min(2, static_cast<int>(3.0 * uniform(rng)))];
      rho = p * rho * p;
    }
    if (jump_up > 0.0 || jump_down > 0.0) {
      const double pop_up = (basis.up.adjoint() * rho * basis.up).value().real();
      const double to_down = jump_up * pop_up;
      const double to_up = jump_down * (1.0 - pop_up);
      const double u = uniform(rng);
      if (u < to_down) {
        rho = down_proj;
        ++result.jumps;
      } else if (u < to_down + to_up) {
        rho = up_proj;
        ++result.jumps;
      }
    }
  }
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();

  std::int64_t bright = result.bright_cycles;
  std::int64_t dark = config.cycles_per_point - bright;
  if (config.electron_init_error > 0.0) {
    std::binomial_distribution<std::int64_t> lose(bright, config.electron_init_error);
    std::binomial_distribution<std::int64_t> gain(dark, config.electron_init_error);
    const std::int64_t from_bright = lose(rng);
    const std::int64_t from_dark = gain(rng);
    bright += from_dark - from_bright;
    dark += from_bright - from_dark;
  }
  const double mean = static_cast<double>(bright) * config.photon_rate_bright +
                      static_cast<double>(dark) * config.photon_rate_dark;
  if (mean > 0.0) {
    std::poisson_distribution<std::int64_t> photons(mean);
    result.photon_count = photons(rng);
  }
  return result;
}

PhotonTrace simulate_trace(const MeasurementChannel& channel, const ReadoutConfig& config,
                           int n_pulses, int n_points) {
  config.validate();
  if (n_points < 1) {
    throw InvalidArgumentError("n_points must be >= 1");
  }
  if (channel.completeness_defect() > 1e-9) {
    throw InvalidArgumentError("measurement channel is not trace preserving");
  }
  const ReadoutBasis basis = readout_basis(channel);
  PhotonTrace trace;
  trace.config = config;
  trace.seed = config.seed;
  trace.counts.reserve(static_cast<std::size_t>(n_points));
  trace.hidden_states.reserve(static_cast<std::size_t>(n_points));
  Mat2 rho = 0.5 * Mat2::Identity();
  for (int i = 0; i < n_points; ++i) {
    std::mt19937_64 rng(substream_seed(config.seed, static_cast<std::uint64_t>(i)));
    const PointResult point = simulate_point(rho, channel, basis, config, n_pulses, rng);
    trace.counts.push_back(point.photon_count);
    const double pop_up = (basis.up.adjoint() * rho * basis.up).value().real();
    trace.hidden_states.push_back(pop_up >= 0.5 ? NuclearLabel::kUp : NuclearLabel::kDown);
  }
  return trace;
}

PhotonTrace simulate_trace(const HyperfineSpin& spin, const FieldConfig& field,
                           const PhysicalConstants& consts, const CpmgSequence& seq,
                           const ReadoutConfig& config, int n_points, PropagatorMode mode,
                           double readout_phase) {
  const MeasurementChannel channel =
      measurement_channel(spin, field, consts, seq, mode, readout_phase);
  return simulate_trace(channel, config, seq.n_pulses(), n_points);
}

}  // namespace nvssr
