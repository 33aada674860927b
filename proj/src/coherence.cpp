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

#include "nvssr/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <thread>

#include <Eigen/Eigenvalues>

#include "nvssr/error.hpp"
#include "nvssr/units.hpp"

namespace nvssr {
namespace {

// Runs fn(i) for i in [0, count). Every index writes only its own output slot,
// so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                       double tol) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

void validate_density_matrix(const Mat2& rho, double tol) {
  if (!rho.allFinite()) {
    throw InvalidArgumentError("density matrix has non-finite entries");
  }
  if ((rho - rho.adjoint()).norm() > tol) {
    throw InvalidArgumentError("density matrix is not Hermitian");
  }
  if (std::abs(rho.trace() - 1.0) > tol) {
    throw InvalidArgumentError("density matrix does not have unit trace");
  }
  Eigen::SelfAdjointEigenSolver<Mat2> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tol) {
    throw InvalidArgumentError("density matrix is not positive semidefinite");
  }
}

double coherence_from_propagators(const PropagatorPair& props, const Mat2& rho) {
  return (rho * props.plus.matrix().adjoint() * props.minus.matrix()).trace().real();
}

double coherence_single(const HyperfineSpin& spin, const FieldConfig& field,
                        const PhysicalConstants& consts, const CpmgSequence& seq,
                        const Mat2& nuclear_state, PropagatorMode mode) {
  validate_density_matrix(nuclear_state);
  return coherence_from_propagators(conditional_propagators(spin, field, consts, seq, mode),
                                    nuclear_state);
}

double coherence_bath(std::span<const HyperfineSpin> spins, const FieldConfig& field,
                      const PhysicalConstants& consts, const CpmgSequence& seq,
                      PropagatorMode mode, double t2) {
  const Mat2 mixed = 0.5 * Mat2::Identity();
  double total = 1.0;
  for (const HyperfineSpin& spin : spins) {
    total *= coherence_from_propagators(conditional_propagators(spin, field, consts, seq, mode),
                                        mixed);
  }
  if (t2 > 0.0) {
    total *= std::exp(-seq.total_time() / t2);
  }
  return total;
}

std::vector<double> tau_grid(double tau_min, double tau_max, double step) {
  if (!(step > 0.0) || !(tau_min > 0.0) || !(tau_max >= tau_min)) {
    throw InvalidArgumentError("tau range must satisfy 0 < tau_min <= tau_max with step > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((tau_max - tau_min) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = tau_min + static_cast<double>(i) * step;
  }
  return grid;
}

CoherenceCurve scan_tau(const SpinBath& bath, int n_pulses, double tau_min, double tau_max,
                        double step, const ScanOptions& options) {
  const std::vector<double> grid = tau_grid(tau_min, tau_max, step);
  CoherenceCurve curve;
  curve.axis = ScanAxis::kTau;
  curve.fixed_pulses = n_pulses;
  curve.points.resize(grid.size());
  CpmgSequence(n_pulses, tau_min);  // validates n_pulses up front
  parallel_for(grid.size(), options.threads, [&](std::size_t i) {
    const CpmgSequence seq(n_pulses, grid[i]);
    curve.points[i] = {grid[i], coherence_bath(bath.spins, bath.field, bath.consts, seq,
                                               options.mode, options.t2)};
  });
  return curve;
}

CoherenceCurve scan_n(const SpinBath& bath, double tau, int n_max, const ScanOptions& options) {
  if (n_max < 1) {
    throw InvalidArgumentError("N sweep needs n_max >= 1");
  }
  CpmgSequence(1, tau);
  CoherenceCurve curve;
  curve.axis = ScanAxis::kPulses;
  curve.fixed_tau = tau;
  curve.points.resize(static_cast<std::size_t>(n_max));
  parallel_for(curve.points.size(), options.threads, [&](std::size_t i) {
    const int n = static_cast<int>(i) + 1;
    const CpmgSequence seq(n, tau);
    curve.points[i] = {static_cast<double>(n),
                       coherence_bath(bath.spins, bath.field, bath.consts, seq, options.mode,
                                      options.t2)};
  });
  return curve;
}

CoherenceMap2D scan_2d(const SpinBath& bath, double tau_min, double tau_max, double step,
                       std::span<const int> n_list, const ScanOptions& options) {
  if (n_list.empty()) {
    throw InvalidArgumentError("2D scan needs at least one pulse count");
  }
  CoherenceMap2D map;
  map.tau_grid = tau_grid(tau_min, tau_max, step);
  map.n_grid.assign(n_list.begin(), n_list.end());
  for (int n : map.n_grid) CpmgSequence(n, tau_min);
  const std::size_t cols = map.tau_grid.size();
  map.values.resize(static_cast<Eigen::Index>(map.n_grid.size()), static_cast<Eigen::Index>(cols));
  parallel_for(map.n_grid.size() * cols, options.threads, [&](std::size_t k) {
    const std::size_t row = k / cols;
    const std::size_t col = k % cols;
    const CpmgSequence seq(map.n_grid[row], map.tau_grid[col]);
    map.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
        coherence_bath(bath.spins, bath.field, bath.consts, seq, options.mode, options.t2);
  });
  return map;
}

std::vector<Dip> find_dips(const CoherenceCurve& curve, double threshold) {
  if (curve.points.empty()) {
    throw InvalidArgumentError("cannot search an empty curve for dips");
  }
  std::vector<Dip> dips;
  const auto& pts = curve.points;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double l0 = pts[i - 1].coherence, l1 = pts[i].coherence, l2 = pts[i + 1].coherence;
    if (!(l1 < l0 && l1 <= l2) || l1 >= threshold) continue;
    const double x0 = pts[i - 1].x, x1 = pts[i].x, x2 = pts[i + 1].x;
    // Vertex of the parabola through the three samples.
    const double d01 = (l1 - l0) / (x1 - x0);
    const double d12 = (l2 - l1) / (x2 - x1);
    const double curvature = (d12 - d01) / (x2 - x0);
    Dip dip{x1, l1};
    if (curvature > 0.0) {
      const double slope = d01 - curvature * (x0 + x1);
      dip.position = std::clamp(-slope / (2.0 * curvature), x0, x2);
      dip.depth = l0 + d01 * (dip.position - x0) +
                  curvature * (dip.position - x0) * (dip.position - x1);
    }
    dips.push_back(dip);
  }
  return dips;
}

double oscillation_period(const CoherenceCurve& curve) {
  if (curve.points.size() < 4) {
    throw InvalidArgumentError("period fit needs at least four samples");
  }
  auto cost = [&](double period) {
    double sum = 0.0;
    for (const CurvePoint& p : curve.points) {
      const double r = p.coherence - std::cos(kTwoPi * p.x / period);
      sum += r * r;
    }
    return sum;
  };
  const double x_max = curve.points.back().x;
  // Coarse scan in frequency, then golden refinement around the best bin.
  const int bins = 4000;
  const double f_lo = 1.0 / (4.0 * x_max), f_hi = 0.5;
  double best_f = f_lo, best_cost = cost(1.0 / f_lo);
  const double df = (f_hi - f_lo) / bins;
  for (int i = 1; i <= bins; ++i) {
    const double f = f_lo + i * df;
    const double c = cost(1.0 / f);
    if (c < best_cost) {
      best_cost = c;
      best_f = f;
    }
  }
  const double f = golden_minimize([&](double ff) { return cost(1.0 / ff); },
                                   std::max(f_lo, best_f - df), std::min(f_hi, best_f + df),
                                   1e-12);
  return 1.0 / f;
}

double exact_resonant_tau(const HyperfineSpin& spin, const FieldConfig& field,
                          const PhysicalConstants& consts, int n_pulses) {
  const EffectiveFrame frame = effective_frame(spin, field, consts);
  const double guess = resonant_tau(frame.omega);
  const Mat2 mixed = 0.5 * Mat2::Identity();
  auto coherence_at = [&](double tau) {
    const CpmgSequence seq(n_pulses, tau);
    return coherence_from_propagators(
        conditional_propagators(spin, field, consts, seq, PropagatorMode::kExact), mixed);
  };
  const double lo = 0.9 * guess, hi = 1.1 * guess;
  const int samples = 200;
  double best_tau = guess, best = coherence_at(guess);
  for (int i = 0; i <= samples; ++i) {
    const double tau = lo + (hi - lo) * i / samples;
    const double l = coherence_at(tau);
    if (l < best) {
      best = l;
      best_tau = tau;
    }
  }
  const double width = (hi - lo) / samples;
  return golden_minimize(coherence_at, best_tau - width, best_tau + width, 1e-6 * width);
}

std::pair<Vec2c, Vec2c> spin_half_eigenstates(const Vec3& n) {
  const double theta = std::acos(std::clamp(n.z() / n.norm(), -1.0, 1.0));
  const double phi = std::atan2(n.y(), n.x());
  const std::complex<double> e = std::polar(1.0, phi);
  Vec2c up(std::cos(0.5 * theta), e * std::sin(0.5 * theta));
  Vec2c down(std::sin(0.5 * theta), -e * std::cos(0.5 * theta));
  return {up, down};
}

LockedStates locked_states(const HyperfineSpin& spin, const FieldConfig& field,
                           const PhysicalConstants& consts, const CpmgSequence& seq) {
  if (seq.n_pulses() % 2 != 0) {
    throw InvalidArgumentError("locked states exist only for even pulse counts");
  }
  const EffectiveFrame frame = effective_frame(spin, field, consts);
  const Su2Unitary u_plus = conditional_propagator_exact(spin, field, consts, seq, Branch::kPlus);
  Eigen::ComplexEigenSolver<Mat2> solver(u_plus.matrix());
  const Vec2c lambda = solver.eigenvalues();
  Vec2c v0 = solver.eigenvectors().col(0).normalized();
  Vec2c v1 = solver.eigenvectors().col(1).normalized();

  LockedStates out;
  out.degenerate = !frame.perp_defined || std::abs(lambda(0) - lambda(1)) < 1e-9;
  const auto [perp_up, perp_down] = spin_half_eigenstates(frame.n_perp);
  std::complex<double> lambda_up = lambda(0);
  if (std::abs(perp_up.dot(v1)) > std::abs(perp_up.dot(v0))) {
    std::swap(v0, v1);
    lambda_up = lambda(1);
  }
  out.up = v0;
  out.down = v1;
  out.overlap = std::min(std::abs(perp_up.dot(out.up)), std::abs(perp_down.dot(out.down)));
  if (!out.degenerate) {
    // U+ |up> = (-1)^{N/2} e^{-i N phi} |up>.
    const double sign = (seq.n_pulses() / 2) % 2 == 0 ? 1.0 : -1.0;
    out.phase = -std::arg(sign * lambda_up) / seq.n_pulses();
  }
  return out;
}

}  // namespace nvssr
