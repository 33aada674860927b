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

// Randomized invariants that hold for any spin, sequence and calibration.

#include "gtest/gtest.h"

#include <cmath>
#include <random>

#include "nvssr/coherence.hpp"
#include "nvssr/measurement.hpp"
#include "test_util.hpp"

using namespace nvssr;
using namespace nvssr::testing;

namespace {

struct Draw {
  HyperfineSpin spin;
  FieldConfig field;
  CpmgSequence seq;
};

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Draw draw() {
    std::uniform_real_distribution<double> gauss(200.0, 800.0), khz(5.0, 500.0), tau_ns(50.0, 1500.0);
    std::uniform_int_distribution<int> n(1, 32);
    HyperfineSpin s;
    s.a_vec = khz_to_rad_per_s(khz(rng_)) * random_unit(rng_);
    return {s, FieldConfig::from_gauss(gauss(rng_)), CpmgSequence(n(rng_), ns_to_s(tau_ns(rng_)))};
  }

  Mat2 state() {
    std::normal_distribution<double> g;
    Mat2 m;
    for (int i = 0; i < 4; ++i) m(i / 2, i % 2) = {g(rng_), g(rng_)};
    Mat2 rho = m * m.adjoint();
    return rho / rho.trace().real();
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

bool is_unitary(const Mat2& u, double tol) {
  return (u.adjoint() * u - Mat2::Identity()).norm() < tol && std::abs(u.determinant() - 1.0) < tol;
}

}  // namespace

TEST(properties, propagators_are_unitary) {
  Sampler s(1);
  for (int i = 0; i < 500; ++i) {
    const Draw d = s.draw();
    for (auto mode : {PropagatorMode::kExact, PropagatorMode::kMagnus}) {
      const PropagatorPair p = conditional_propagators(d.spin, d.field, {}, d.seq, mode);
      EXPECT_TRUE(is_unitary(p.plus.matrix(), 1e-12)) << i;
      EXPECT_TRUE(is_unitary(p.minus.matrix(), 1e-12)) << i;
    }
  }
}

TEST(properties, kraus_completeness_and_probabilities) {
  Sampler s(2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 500; ++i) {
    const Draw d = s.draw();
    const auto mode = i % 2 ? PropagatorMode::kExact : PropagatorMode::kMagnus;
    const MeasurementChannel ch = measurement_channel(d.spin, d.field, {}, d.seq, mode, phase(s.rng()));
    EXPECT_LT(ch.completeness_defect(), 1e-12) << i;
    const Mat2 rho = s.state();
    const auto p = ch.probabilities(rho);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    EXPECT_GE(p[0], -1e-15);
    EXPECT_LE(p[0], 1.0 + 1e-15);
    EXPECT_NO_THROW(validate_density_matrix(ch.apply(rho)));
  }
}

TEST(properties, coherence_bounded_and_factorizes) {
  Sampler s(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<HyperfineSpin> bath;
    const Draw d = s.draw();
    double product = 1.0;
    for (int k = 0; k < 3; ++k) {
      const HyperfineSpin spin = k == 0 ? d.spin : s.draw().spin;
      bath.push_back(spin);
      const double l = coherence_single(spin, d.field, {}, d.seq, mixed_state(), PropagatorMode::kExact);
      EXPECT_LE(std::abs(l), 1.0 + 1e-12);
      product *= l;
      const double lr = coherence_single(spin, d.field, {}, d.seq, s.state(), PropagatorMode::kExact);
      EXPECT_LE(std::abs(lr), 1.0 + 1e-12);
    }
    EXPECT_NEAR(coherence_bath(bath, d.field, {}, d.seq, PropagatorMode::kExact), product, 1e-12);
  }
}

TEST(properties, longitudinal_coupling_refocuses) {
  Sampler s(4);
  std::uniform_real_distribution<double> a_par(-800.0, 800.0);
  for (int i = 0; i < 300; ++i) {
    Draw d = s.draw();
    d.spin.a_vec = Vec3(0.0, 0.0, khz_to_rad_per_s(a_par(s.rng())));
    EXPECT_NEAR(coherence_single(d.spin, d.field, {}, d.seq, s.state(), PropagatorMode::kExact),
                1.0, 1e-12)
        << i;
  }
}

TEST(properties, deterministic_under_fixed_seed) {
  const SpinBath bath{{reference_spin()}, field_305(), {}};
  ScanOptions one, many;
  many.threads = 4;
  const CoherenceCurve a = scan_tau(bath, 8, ns_to_s(300), ns_to_s(700), ns_to_s(1), one);
  const CoherenceCurve b = scan_tau(bath, 8, ns_to_s(300), ns_to_s(700), ns_to_s(1), many);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].coherence, b.points[i].coherence);
  }

  ReadoutConfig config;
  config.cycles_per_point = 300;
  config.pi_pulse_error = 1e-3;
  const PhotonTrace t1 = simulate_trace(ssr_channel(), config, 12, 500);
  const PhotonTrace t2 = simulate_trace(ssr_channel(), config, 12, 500);
  EXPECT_EQ(t1.counts, t2.counts);
  EXPECT_EQ(t1.hidden_states, t2.hidden_states);
}
