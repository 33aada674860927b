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

#include "gtest/gtest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/KroneckerProduct>

#include "nvssr/analysis.hpp"
#include "nvssr/error.hpp"
#include "nvssr/measurement.hpp"
#include "test_util.hpp"

using namespace nvssr;
using namespace nvssr::testing;

namespace {

using Mat4 = Eigen::Matrix4cd;
using cd = std::complex<double>;

double reference_tau() { return resonant_tau(effective_frame(reference_spin(), field_305(), {}).omega); }

MeasurementChannel reference_channel(int n, PropagatorMode mode) {
  return measurement_channel(reference_spin(), field_305(), {}, CpmgSequence(n, reference_tau()), mode);
}

// 2 N Phi = pi/2 exactly in the first-order model.
struct Projective {
  HyperfineSpin spin;
  CpmgSequence seq;
  MeasurementChannel channel;
};

Projective projective_setup(int n = 12, double tau_ns = 248.0) {
  const FieldConfig f = FieldConfig::from_gauss(691.0);
  const double tau = ns_to_s(tau_ns);
  const HyperfineSpin s = projective_target_spin(tau, n, f, {});
  const CpmgSequence seq(n, tau);
  return {s, seq, measurement_channel(s, f, {}, seq, PropagatorMode::kMagnus)};
}

ReadoutConfig noiseless(int cycles) {
  ReadoutConfig c;
  c.cycles_per_point = cycles;
  c.electron_init_error = 0.0;
  c.pi_pulse_error = 0.0;
  c.t1n_up = std::numeric_limits<double>::infinity();
  c.t1n_down = std::numeric_limits<double>::infinity();
  return c;
}

Mat2 pure(const Vec2c& v) { return v * v.adjoint(); }

double mean_of(const std::vector<std::int64_t>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<std::int64_t>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (auto x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(measurement_channel, completeness_over_grid) {
  for (auto mode : {PropagatorMode::kExact, PropagatorMode::kMagnus}) {
    for (int n : {1, 2, 3, 4, 8, 16, 32}) {
      for (double tau_ns : {150.0, 300.0, 483.0, 700.0}) {
        for (double phase : {0.0, kDefaultReadoutPhase, 1.0}) {
          const MeasurementChannel ch = measurement_channel(
              reference_spin(), field_305(), {}, CpmgSequence(n, ns_to_s(tau_ns)), mode, phase);
          EXPECT_LT(ch.completeness_defect(), 1e-12);
          const auto p = ch.probabilities(mixed_state());
          EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
          EXPECT_GE(p[0], 0.0);
          EXPECT_GE(p[1], 0.0);
        }
      }
    }
  }
}

TEST(measurement_channel, matches_joint_state_construction) {
  const PropagatorPair props = conditional_propagators(
      reference_spin(), field_305(), {}, CpmgSequence(6, ns_to_s(410)), PropagatorMode::kExact);
  const double r = 1.0 / std::sqrt(2.0);
  for (double phi : {0.0, kDefaultReadoutPhase, 2.2}) {
    // Opening Hadamard, controlled evolution, closing Hadamard after a phase gate.
    Eigen::Matrix2cd h;
    h << r, r, r, -r;
    Eigen::Matrix2cd closing = h * Eigen::Vector2cd(1.0, std::polar(1.0, phi)).asDiagonal();
    Mat4 controlled = Mat4::Zero();
    controlled.topLeftCorner<2, 2>() = props.minus.matrix();
    controlled.bottomRightCorner<2, 2>() = props.plus.matrix();
    const Mat4 total = Eigen::kroneckerProduct(closing, Mat2::Identity()).eval() * controlled *
                       Eigen::kroneckerProduct(h, Mat2::Identity()).eval();
    const MeasurementChannel ch = channel_from_propagators(props, phi);
    for (int m = 0; m < 2; ++m) {
      // (<m| x I) total (|0> x I)
      const Mat2 expected = total.block<2, 2>(2 * m, 0);
      EXPECT_LT((ch.kraus(m) - expected).norm(), 1e-13) << phi << " " << m;
    }
  }
}

TEST(measurement_channel, zero_filter_extracts_nothing) {
  // a_perp = 0 under even-N CPMG: both branches see the same net precession.
  const HyperfineSpin s =
      spin_from_frame_components(khz_to_rad_per_s(150), 0.0, field_305(), {});
  const CpmgSequence seq(8, ns_to_s(350));
  const MeasurementChannel hadamard =
      measurement_channel(s, field_305(), {}, seq, PropagatorMode::kExact, 0.0);
  EXPECT_LT(hadamard.k1.norm(), 1e-12);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    Vec2c v(cd(g(rng), g(rng)), cd(g(rng), g(rng)));
    v.normalize();
    EXPECT_NEAR(hadamard.probabilities(pure(v))[0], 1.0, 1e-12);
  }
  // Quadrature readout: fair coin for every nuclear state, no back-action.
  const MeasurementChannel quad = measurement_channel(s, field_305(), {}, seq, PropagatorMode::kExact);
  const auto sv = quad.singular_values(0);
  EXPECT_NEAR(sv[0], sv[1], 1e-12);
  EXPECT_NEAR(quad.probabilities(mixed_state())[0], 0.5, 1e-12);
  EXPECT_NEAR(distinguishability(quad, mixed_state()), 0.0, 1e-12);
}

TEST(measurement_channel, projective_at_quarter_period) {
  // Reference spin, N = 4: 2 N Phi = 1.547 ~ pi/2.
  const MeasurementChannel magnus = reference_channel(4, PropagatorMode::kMagnus);
  for (int m = 0; m < 2; ++m) {
    const auto sv = magnus.singular_values(m);
    EXPECT_GT(sv[0], 0.98);
    EXPECT_LT(sv[1], 0.02);
  }
  // Exact propagators: rank-1 up to O((a_perp / omega)^2).
  const EffectiveFrame f = effective_frame(reference_spin(), field_305(), {});
  const double bound = std::pow(f.a_perp / f.omega, 2);
  const MeasurementChannel exact = reference_channel(4, PropagatorMode::kExact);
  for (int m = 0; m < 2; ++m) EXPECT_LT(exact.singular_values(m)[1], bound);
  // The projectors select the I_perp eigenstates.
  const auto [up, down] = spin_half_eigenstates(f.n_perp);
  const ReadoutBasis basis = readout_basis(magnus);
  EXPECT_GT(std::abs(basis.up.dot(up)), 0.999);
  EXPECT_GT(std::abs(basis.down.dot(down)), 0.999);
  EXPECT_GT(basis.p_bright_up, 0.999);
  EXPECT_LT(basis.p_bright_down, 1e-3);
}

TEST(measurement_channel, weak_at_two_pulses) {
  const MeasurementChannel ch = reference_channel(2, PropagatorMode::kExact);
  for (int m = 0; m < 2; ++m) {
    const auto sv = ch.singular_values(m);
    EXPECT_GT(sv[1], 0.05);
    EXPECT_LT(sv[0], 0.95);
    EXPECT_GT(sv[0] - sv[1], 0.1);
  }
}

TEST(measurement_channel, qnd_at_projective_point) {
  const Projective p = projective_setup();
  EXPECT_GE(outcome_repetition(p.channel, 1000), 1.0 - 1e-6);
  EXPECT_NEAR(qnd_retention(p.channel, 1000), 1.0, 1e-12);
  // The reference spin misses pi/2 by 0.024 rad, which leaks ~1.4e-4 per cycle.
  const double leak = outcome_repetition(reference_channel(4, PropagatorMode::kMagnus), 1000);
  EXPECT_GT(leak, 0.8);
  EXPECT_LT(leak, 0.95);
}

TEST(measurement_channel, distinguishability_grows_with_phase) {
  // 2 N Phi = N pi / 32 for N = 2..16 covers (0, pi/2].
  const FieldConfig f = FieldConfig::from_gauss(691.0);
  const double tau = ns_to_s(248.0);
  const HyperfineSpin s = projective_target_spin(tau, 16, f, {});
  double previous = 0.0;
  for (int n = 2; n <= 16; n += 2) {
    const MeasurementChannel ch =
        measurement_channel(s, f, {}, CpmgSequence(n, tau), PropagatorMode::kMagnus);
    const double d = distinguishability(ch, mixed_state());
    EXPECT_GT(d, previous) << n;
    previous = d;
  }
  EXPECT_NEAR(previous, 1.0, 1e-9);
}

TEST(entanglement, vanishes_without_filter) {
  // omega tau = pi zeroes the even-N filter.
  const EffectiveFrame f = effective_frame(reference_spin(), field_305(), {});
  const EntanglementCurve c = entanglement_vs_n(reference_spin(), field_305(), {},
                                                std::numbers::pi / f.omega, 8,
                                                PropagatorMode::kMagnus);
  for (const auto& p : c.points) {
    if (p.n % 2 == 0) EXPECT_NEAR(p.entropy, 0.0, 1e-9) << p.n;
    EXPECT_GE(p.entropy, 0.0);
    EXPECT_LE(p.entropy, 1.0 + 1e-12);
  }
}

TEST(entanglement, reference_spin_peaks_at_four_pulses) {
  const double tau = exact_resonant_tau(reference_spin(), field_305(), {}, 8);
  const EntanglementCurve c = entanglement_vs_n(reference_spin(), field_305(), {}, tau, 16);
  ASSERT_EQ(c.points.size(), 16u);
  const auto best = std::max_element(c.points.begin(), c.points.begin() + 8,
                                     [](const auto& a, const auto& b) { return a.entropy < b.entropy; });
  EXPECT_EQ(best->n, 4);
  EXPECT_GT(best->entropy, 0.99);
  EXPECT_NEAR(c.phi_analytic, 0.19342, 1e-4);
  EXPECT_NEAR(c.phi_extracted, c.phi_analytic, 0.05 * c.phi_analytic);
}

TEST(entanglement, periodic_in_accumulated_phase) {
  // Target spin with 2 N Phi = N pi / 8: N and N + 8 differ by pi.
  const Projective p = projective_setup(4);
  const EntanglementCurve c = entanglement_vs_n(p.spin, FieldConfig::from_gauss(691.0), {},
                                                p.seq.tau(), 12, PropagatorMode::kMagnus);
  for (int n : {2, 4}) {
    EXPECT_NEAR(c.points[n - 1].entropy, c.points[n + 7].entropy, 1e-9) << n;
  }
  EXPECT_NEAR(c.points[3].entropy, 1.0, 1e-9);
}

TEST(entanglement, invalid) {
  EXPECT_THROW(entanglement_vs_n(reference_spin(), field_305(), {}, reference_tau(), 0), InvalidArgumentError);
  EXPECT_THROW(projective_target_spin(0.0, 4, field_305(), {}), InvalidArgumentError);
}

TEST(readout_config, validation) {
  ReadoutConfig c;
  EXPECT_NO_THROW(c.validate());
  c.cycles_per_point = 0;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = {};
  c.photon_rate_dark = -0.1;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = {};
  c.electron_init_error = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
  c = {};
  c.t1n_up = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgumentError);
}

TEST(simulate_point, projective_outcomes_repeat) {
  const Projective p = projective_setup();
  const ReadoutBasis basis = readout_basis(p.channel);
  const ReadoutConfig config = noiseless(5000);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Mat2 rho = mixed_state();
    std::mt19937_64 rng(seed);
    const PointResult first = simulate_point(rho, p.channel, basis, config, 12, rng);
    EXPECT_TRUE(first.bright_cycles == 0 || first.bright_cycles == 5000) << first.bright_cycles;
    EXPECT_EQ(first.jumps, 0);
    const Vec2c& selected = first.bright_cycles > 0 ? basis.up : basis.down;
    EXPECT_NEAR((selected.adjoint() * rho * selected).value().real(), 1.0, 1e-9);
    const PointResult second = simulate_point(rho, p.channel, basis, config, 12, rng);
    EXPECT_EQ(second.bright_cycles, first.bright_cycles);
  }
}

TEST(simulate_point, poisson_mixture_means) {
  const Projective p = projective_setup();
  const ReadoutBasis basis = readout_basis(p.channel);
  ReadoutConfig config = noiseless(40000);
  config.electron_init_error = 0.10;
  const double rb = config.photon_rate_bright, rd = config.photon_rate_dark, e = 0.10;
  const double n = config.cycles_per_point;
  const double mean_up = n * ((1 - e) * rb + e * rd);
  const double mean_down = n * ((1 - e) * rd + e * rb);
  EXPECT_NEAR(mean_up, 2498.0, 1e-9);
  EXPECT_NEAR(mean_down, 2322.0, 1e-9);

  std::mt19937_64 rng(77);
  std::vector<std::int64_t> up, down;
  for (int i = 0; i < 150; ++i) {
    Mat2 rho = pure(basis.up);
    up.push_back(simulate_point(rho, p.channel, basis, config, 12, rng).photon_count);
    rho = pure(basis.down);
    down.push_back(simulate_point(rho, p.channel, basis, config, 12, rng).photon_count);
  }
  // Relabeling adds binomial variance n e (1 - e) (rb - rd)^2 on top of Poisson.
  const double extra = 2 * n * e * (1 - e) * (rb - rd) * (rb - rd);
  for (auto [v, mu] : {std::pair{&up, mean_up}, std::pair{&down, mean_down}}) {
    EXPECT_NEAR(mean_of(*v), mu, 4.0 * std::sqrt((mu + extra) / v->size()));
    EXPECT_NEAR(variance_of(*v) / (mu + extra), 1.0, 0.35);
  }
  // 95.5% fidelity pins the separation near 3.4 sigma; see README.
  const double sigma = std::sqrt(0.5 * (variance_of(up) + variance_of(down)));
  EXPECT_GT((mean_of(up) - mean_of(down)) / sigma, 3.0);
}

TEST(simulate_point, pi_pulse_errors_scramble_state) {
  const Projective p = projective_setup();
  const ReadoutBasis basis = readout_basis(p.channel);
  ReadoutConfig config = noiseless(2000);
  config.pi_pulse_error = 0.01;
  std::mt19937_64 rng(3);
  int flips = 0;
  for (int i = 0; i < 50; ++i) {
    Mat2 rho = pure(basis.up);
    const PointResult r = simulate_point(rho, p.channel, basis, config, 12, rng);
    flips += r.bright_cycles < 2000;
  }
  EXPECT_GT(flips, 40);
}

TEST(simulate_trace, equal_rates_carry_no_information) {
  const Projective p = projective_setup();
  ReadoutConfig config;
  config.cycles_per_point = 1000;
  config.photon_rate_bright = 2.4;
  config.photon_rate_dark = 2.4;
  const PhotonTrace trace = simulate_trace(p.channel, config, 12, 4000);
  const FidelityReport r = analyze_trace(trace, {2390, 2410, 2400});
  EXPECT_NEAR(r.fidelity_up, 0.5, 0.05);
  EXPECT_NEAR(r.fidelity_down, 0.5, 0.05);
}

TEST(simulate_trace, hidden_dwells_match_t1) {
  // Fewer cycles per point keep the per-point flip probability unchanged.
  const Projective p = projective_setup();
  ReadoutConfig config;
  config.cycles_per_point = 100;
  const PhotonTrace trace = simulate_trace(p.channel, config, 12, 100000);
  ASSERT_EQ(trace.hidden_states.size(), 100000u);
  const auto dwells = dwells_from_labels(labels_from_hidden(trace.hidden_states));
  const T1Estimate t1 = estimate_t1n(dwells, config.point_duration);
  const double expected = 15.0 / 0.189;
  EXPECT_NEAR(t1.mean_dwell_points, expected, 0.1 * expected);
  EXPECT_NEAR(t1.t1n_up, 15.0, 1.5);
  EXPECT_NEAR(t1.t1n_down, 15.0, 1.5);
  // Exponential: a fraction 1/e of dwells outlast the mean.
  int longer = 0, total = 0;
  for (const auto& d : dwells) {
    if (d.censored) continue;
    ++total;
    longer += static_cast<double>(d.length) > expected;
  }
  EXPECT_NEAR(static_cast<double>(longer) / total, std::exp(-1.0), 0.05);
}

TEST(simulate_trace, frozen_t1_never_jumps) {
  const Projective p = projective_setup();
  ReadoutConfig config = noiseless(200);
  config.electron_init_error = 0.1;
  const PhotonTrace trace = simulate_trace(p.channel, config, 12, 2000);
  for (std::size_t i = 1; i < trace.hidden_states.size(); ++i) {
    ASSERT_EQ(trace.hidden_states[i], trace.hidden_states[0]) << i;
  }
}

TEST(simulate_trace, deterministic_per_seed) {
  const Projective p = projective_setup();
  ReadoutConfig config;
  config.cycles_per_point = 500;
  const PhotonTrace a = simulate_trace(p.channel, config, 12, 300);
  const PhotonTrace b = simulate_trace(p.channel, config, 12, 300);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.hidden_states, b.hidden_states);
  EXPECT_EQ(a.seed, config.seed);
  config.seed += 1;
  const PhotonTrace c = simulate_trace(p.channel, config, 12, 300);
  EXPECT_NE(a.counts, c.counts);
  for (auto x : a.counts) EXPECT_GE(x, 0);
}

TEST(simulate_trace, rejects_bad_input) {
  const Projective p = projective_setup();
  EXPECT_THROW(simulate_trace(p.channel, ReadoutConfig{}, 12, 0), InvalidArgumentError);
  MeasurementChannel broken = p.channel;
  broken.k1 *= 2.0;
  EXPECT_THROW(simulate_trace(broken, ReadoutConfig{}, 12, 10), InvalidArgumentError);
}

TEST(substream_seed, distinct_and_stable) {
  EXPECT_EQ(substream_seed(1, 2), substream_seed(1, 2));
  EXPECT_NE(substream_seed(1, 2), substream_seed(1, 3));
  EXPECT_NE(substream_seed(1, 2), substream_seed(2, 2));
}
