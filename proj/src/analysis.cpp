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

#include "nvssr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "nvssr/error.hpp"

namespace nvssr {

void ThresholdPolicy::validate() const {
  if (!(init_low >= 0.0) || !(init_high >= 0.0) || !(readout_threshold >= 0.0)) {
    throw InvalidArgumentError("thresholds must be >= 0");
  }
  if (init_low > init_high) {
    throw InvalidArgumentError("init_low must not exceed init_high");
  }
}

std::map<std::int64_t, std::pair<double, double>> ConditionalHistograms::frequencies() const {
  std::map<std::int64_t, std::pair<double, double>> out;
  for (std::int64_t c : up) out[c].first += 1.0 / static_cast<double>(up.size());
  for (std::int64_t c : down) out[c].second += 1.0 / static_cast<double>(down.size());
  return out;
}

ConditionalHistograms conditional_histograms(const PhotonTrace& trace,
                                             const ThresholdPolicy& policy) {
  policy.validate();
  const auto& counts = trace.counts;
  if (counts.size() < 2) {
    throw InsufficientDataError("trace needs at least two points for prepare-measure pairs");
  }
  ConditionalHistograms hist;
  std::size_t i = 0;
  while (i + 1 < counts.size()) {
    const auto c = static_cast<double>(counts[i]);
    if (c > policy.init_high) {
      hist.up.push_back(counts[i + 1]);
      hist.up_prepared_at.push_back(i);
      i += 2;
    } else if (c < policy.init_low) {
      hist.down.push_back(counts[i + 1]);
      hist.down_prepared_at.push_back(i);
      i += 2;
    } else {
      ++i;
    }
  }
  hist.low_statistics =
      hist.up.size() < kMinQualifyingPairs || hist.down.size() < kMinQualifyingPairs;
  return hist;
}

ThresholdPoint fidelity_at_threshold(const ConditionalHistograms& hist, std::int64_t threshold) {
  if (hist.up.empty() || hist.down.empty()) {
    throw InsufficientDataError("fidelity needs both conditional histograms to be nonempty");
  }
  const auto above = std::count_if(hist.up.begin(), hist.up.end(),
                                   [&](std::int64_t c) { return c >= threshold; });
  const auto below = std::count_if(hist.down.begin(), hist.down.end(),
                                   [&](std::int64_t c) { return c < threshold; });
  ThresholdPoint p;
  p.threshold = threshold;
  p.f_up = static_cast<double>(above) / static_cast<double>(hist.up.size());
  p.f_down = static_cast<double>(below) / static_cast<double>(hist.down.size());
  p.f_avg = 0.5 * (p.f_up + p.f_down);
  return p;
}

FidelityReport fidelity_vs_threshold(const ConditionalHistograms& hist) {
  if (hist.up.empty() || hist.down.empty()) {
    throw InsufficientDataError("fidelity needs both conditional histograms to be nonempty");
  }
  std::vector<std::int64_t> up = hist.up, down = hist.down;
  std::sort(up.begin(), up.end());
  std::sort(down.begin(), down.end());
  const std::int64_t lo = std::min(up.front(), down.front());
  const std::int64_t hi = std::max(up.back(), down.back()) + 1;

  FidelityReport report;
  report.n_up = up.size();
  report.n_down = down.size();
  report.low_statistics = hist.low_statistics;
  report.threshold_curve.reserve(static_cast<std::size_t>(hi - lo + 1));
  double best = -1.0;
  for (std::int64_t th = lo; th <= hi; ++th) {
    const auto n_above = up.end() - std::lower_bound(up.begin(), up.end(), th);
    const auto n_below = std::lower_bound(down.begin(), down.end(), th) - down.begin();
    ThresholdPoint p;
    p.threshold = th;
    p.f_up = static_cast<double>(n_above) / static_cast<double>(up.size());
    p.f_down = static_cast<double>(n_below) / static_cast<double>(down.size());
    p.f_avg = 0.5 * (p.f_up + p.f_down);
    report.threshold_curve.push_back(p);
    const double worst = std::min(p.f_up, p.f_down);
    if (worst > best) {
      best = worst;
      report.optimal_threshold = th;
      report.fidelity_up = p.f_up;
      report.fidelity_down = p.f_down;
    }
  }
  return report;
}

FidelityReport analyze_trace(const PhotonTrace& trace, const ThresholdPolicy& policy) {
  if (!trace.hidden_states.empty() && trace.hidden_states.size() != trace.counts.size()) {
    throw InvalidArgumentError("hidden_states and counts have different lengths");
  }
  const ConditionalHistograms hist = conditional_histograms(trace, policy);
  FidelityReport report = fidelity_vs_threshold(hist);
  if (!trace.hidden_states.empty()) {
    auto fraction = [&](const std::vector<std::size_t>& at, NuclearLabel want) {
      const auto hits = std::count_if(at.begin(), at.end(), [&](std::size_t i) {
        return trace.hidden_states[i] == want;
      });
      return static_cast<double>(hits) / static_cast<double>(at.size());
    };
    report.init_fidelity_up = fraction(hist.up_prepared_at, NuclearLabel::kUp);
    report.init_fidelity_down = fraction(hist.down_prepared_at, NuclearLabel::kDown);
    report.init_fidelity_source = "hidden_states";
  } else {
    auto tail = [](const std::vector<std::int64_t>& h, auto pred) {
      return static_cast<double>(std::count_if(h.begin(), h.end(), pred)) /
             static_cast<double>(h.size());
    };
    auto above = [&](std::int64_t c) { return static_cast<double>(c) > policy.init_high; };
    auto below = [&](std::int64_t c) { return static_cast<double>(c) < policy.init_low; };
    const double up_hi = tail(hist.up, above), down_hi = tail(hist.down, above);
    const double down_lo = tail(hist.down, below), up_lo = tail(hist.up, below);
    if (up_hi + down_hi > 0.0) report.init_fidelity_up = up_hi / (up_hi + down_hi);
    if (down_lo + up_lo > 0.0) report.init_fidelity_down = down_lo / (down_lo + up_lo);
    report.init_fidelity_source = "histogram_model";
  }
  return report;
}

namespace {

std::vector<Dwell> collect_dwells(const std::vector<StateLabel>& labels) {
  std::vector<Dwell> dwells;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == StateLabel::kUnknown) continue;
    if (!dwells.empty() && dwells.back().state == labels[i] &&
        dwells.back().start + dwells.back().length == i) {
      ++dwells.back().length;
    } else {
      dwells.push_back({labels[i], i, 1, false});
    }
  }
  if (!dwells.empty()) {
    dwells.front().censored = true;
    dwells.back().censored = true;
  }
  return dwells;
}

}  // namespace

JumpAnalysis detect_jumps(const std::vector<std::int64_t>& counts, const ThresholdPolicy& policy) {
  policy.validate();
  if (counts.empty()) {
    throw InsufficientDataError("cannot detect jumps in an empty trace");
  }
  JumpAnalysis out;
  out.states.reserve(counts.size());
  StateLabel state = StateLabel::kUnknown;
  for (std::int64_t c : counts) {
    const auto x = static_cast<double>(c);
    if (x > policy.init_high) {
      state = StateLabel::kUp;
    } else if (x < policy.init_low) {
      state = StateLabel::kDown;
    }
    out.states.push_back(state);
  }
  out.dwells = collect_dwells(out.states);
  return out;
}

std::vector<Dwell> dwells_from_labels(const std::vector<StateLabel>& labels) {
  return collect_dwells(labels);
}

std::vector<StateLabel> labels_from_hidden(const std::vector<NuclearLabel>& hidden) {
  std::vector<StateLabel> labels;
  labels.reserve(hidden.size());
  for (NuclearLabel h : hidden) {
    labels.push_back(h == NuclearLabel::kUp ? StateLabel::kUp : StateLabel::kDown);
  }
  return labels;
}

double classification_agreement(const std::vector<StateLabel>& classified,
                                const std::vector<NuclearLabel>& hidden) {
  if (classified.size() != hidden.size()) {
    throw InvalidArgumentError("classified and hidden sequences differ in length");
  }
  std::size_t known = 0, match = 0;
  for (std::size_t i = 0; i < classified.size(); ++i) {
    if (classified[i] == StateLabel::kUnknown) continue;
    ++known;
    const bool up = classified[i] == StateLabel::kUp;
    if (up == (hidden[i] == NuclearLabel::kUp)) ++match;
  }
  if (known == 0) {
    throw InsufficientDataError("no classified points to compare");
  }
  return static_cast<double>(match) / static_cast<double>(known);
}

T1Estimate estimate_t1n(const std::vector<Dwell>& dwells, double point_duration) {
  if (!(point_duration > 0.0)) {
    throw InvalidArgumentError("point_duration must be > 0");
  }
  double sum_up = 0.0, sum_down = 0.0;
  T1Estimate est;
  for (const Dwell& d : dwells) {
    if (d.censored) continue;
    if (d.state == StateLabel::kUp) {
      sum_up += static_cast<double>(d.length);
      ++est.n_up;
    } else if (d.state == StateLabel::kDown) {
      sum_down += static_cast<double>(d.length);
      ++est.n_down;
    }
  }
  if (est.n_up < kMinDwellsPerState || est.n_down < kMinDwellsPerState) {
    throw InsufficientDataError("T1 estimate needs at least 10 uncensored dwells per state (got " +
                                std::to_string(est.n_up) + " up, " + std::to_string(est.n_down) +
                                " down)");
  }
  const double mean_up = sum_up / static_cast<double>(est.n_up);
  const double mean_down = sum_down / static_cast<double>(est.n_down);
  est.t1n_up = mean_up * point_duration;
  est.t1n_down = mean_down * point_duration;
  est.se_up = est.t1n_up / std::sqrt(static_cast<double>(est.n_up));
  est.se_down = est.t1n_down / std::sqrt(static_cast<double>(est.n_down));
  est.mean_dwell_points = (sum_up + sum_down) / static_cast<double>(est.n_up + est.n_down);
  return est;
}

namespace {

std::size_t total_points(const std::vector<CoherenceCurve>& curves) {
  std::size_t n = 0;
  for (const auto& c : curves) n += c.points.size();
  return n;
}

// Residuals model - data, with parameters in kHz so both axes are O(100).
struct HyperfineFunctor : Eigen::DenseFunctor<double> {
  HyperfineFunctor(const std::vector<CoherenceCurve>& curves, const FieldConfig& field,
                   const PhysicalConstants& consts)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(total_points(curves))),
        curves_(curves),
        field_(field),
        consts_(consts),
        a_perp_max_khz_(rad_per_s_to_khz(2.0 * consts.gamma_n * field.b_magnitude)) {}

  int operator()(const InputType& x, ValueType& f) const {
    double a_perp = std::abs(x(1));
    double excess = 0.0;
    if (a_perp > a_perp_max_khz_) {
      excess = a_perp - a_perp_max_khz_;
      a_perp = a_perp_max_khz_;
    }
    Eigen::Index k = 0;
    try {
      const HyperfineSpin spin = spin_from_frame_components(
          khz_to_rad_per_s(x(0)), khz_to_rad_per_s(a_perp), field_, consts_);
      const Mat2 mixed = 0.5 * Mat2::Identity();
      for (const CoherenceCurve& curve : curves_) {
        for (const CurvePoint& p : curve.points) {
          const CpmgSequence seq = curve.axis == ScanAxis::kTau
                                       ? CpmgSequence(curve.fixed_pulses, p.x)
                                       : CpmgSequence(static_cast<int>(std::lround(p.x)),
                                                      curve.fixed_tau);
          const double model = coherence_from_propagators(
              conditional_propagators(spin, field_, consts_, seq, PropagatorMode::kExact), mixed);
          f(k++) = model - p.coherence + excess;
        }
      }
    } catch (const Error&) {
      // Parameters with no valid frame: flat, large residual.
      f.setConstant(2.0 + excess);
    }
    return 0;
  }

  int df(const InputType& x, JacobianType& jac) const {
    const double h = 1e-4;  // kHz
    ValueType fp(values()), fm(values());
    for (int j = 0; j < 2; ++j) {
      InputType xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      (*this)(xp, fp);
      (*this)(xm, fm);
      jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return 0;
  }

  const std::vector<CoherenceCurve>& curves_;
  const FieldConfig& field_;
  const PhysicalConstants& consts_;
  double a_perp_max_khz_;
};

struct StartResult {
  double a_par_khz = 0.0;
  double a_perp_khz = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool valid = false;
};

bool lm_converged(Eigen::LevenbergMarquardtSpace::Status status) {
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (status) {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      return true;
    default:
      return false;
  }
}

}  // namespace

double hyperfine_residual(const std::vector<CoherenceCurve>& curves, double a_par, double a_perp,
                          const FieldConfig& field, const PhysicalConstants& consts) {
  HyperfineFunctor functor(curves, field, consts);
  Eigen::VectorXd x(2), f(functor.values());
  x << rad_per_s_to_khz(a_par), rad_per_s_to_khz(a_perp);
  functor(x, f);
  return f.squaredNorm();
}

HyperfineFit fit_hyperfine(const std::vector<CoherenceCurve>& curves, const FieldConfig& field,
                           const PhysicalConstants& consts, const FitOptions& options) {
  field.validate();
  bool has_tau = false, has_n = false;
  for (const CoherenceCurve& c : curves) {
    has_tau |= c.axis == ScanAxis::kTau && !c.points.empty();
    has_n |= c.axis == ScanAxis::kPulses && !c.points.empty();
  }
  if (!has_tau || !has_n) {
    throw InvalidArgumentError("hyperfine fit needs at least one tau scan and one N scan");
  }
  if (options.grid_size < 1 || !(options.grid_min > 0.0) ||
      !(options.grid_max >= options.grid_min)) {
    throw InvalidArgumentError("invalid fit start grid");
  }
  const HyperfineFunctor functor(curves, field, consts);
  const double lo = rad_per_s_to_khz(options.grid_min);
  const double hi = rad_per_s_to_khz(options.grid_max);
  const int g = options.grid_size;
  auto grid_value = [&](int i) { return g == 1 ? lo : lo + (hi - lo) * i / (g - 1); };

  std::vector<StartResult> results(static_cast<std::size_t>(g * g));
  auto run_start = [&](std::size_t k) {
    const double a_par0 = grid_value(static_cast<int>(k) / g);
    const double a_perp0 = grid_value(static_cast<int>(k) % g);
    if (a_perp0 > functor.a_perp_max_khz_) return;
    HyperfineFunctor local(curves, field, consts);
    Eigen::LevenbergMarquardt<HyperfineFunctor> lm(local);
    lm.setMaxfev(200);
    Eigen::VectorXd x(2);
    x << a_par0, a_perp0;
    const auto status = lm.minimize(x);
    Eigen::VectorXd f(local.values());
    local(x, f);
    StartResult& r = results[k];
    r.valid = true;
    r.converged = lm_converged(status);
    r.a_par_khz = x(0);
    r.a_perp_khz = std::min(std::abs(x(1)), local.a_perp_max_khz_);
    r.residual = f.squaredNorm();
  };

  const std::size_t n_starts = results.size();
  std::size_t workers = options.threads > 0 ? static_cast<std::size_t>(options.threads)
                                            : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n_starts);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n_starts; ++k) run_start(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < n_starts; k += workers) run_start(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  HyperfineFit fit;
  const StartResult* best = nullptr;
  double best_any = std::numeric_limits<double>::infinity();
  for (const StartResult& r : results) {
    if (!r.valid) continue;
    ++fit.starts;
    best_any = std::min(best_any, r.residual);
    if (!r.converged) continue;
    ++fit.converged_starts;
    if (best == nullptr || r.residual < best->residual ||
        (r.residual == best->residual &&
         std::tie(r.a_par_khz, r.a_perp_khz) < std::tie(best->a_par_khz, best->a_perp_khz))) {
      best = &r;
    }
  }
  if (best == nullptr) {
    throw FitError("hyperfine fit did not converge from any start", best_any);
  }
  fit.a_par = khz_to_rad_per_s(best->a_par_khz);
  fit.a_perp = khz_to_rad_per_s(best->a_perp_khz);
  fit.residual_norm = std::sqrt(best->residual);

  // The data constrain a_par only through a_perp != 0. A vanishing a_par
  // column of the Jacobian means any a_par fits equally well.
  Eigen::VectorXd x(2);
  x << best->a_par_khz, best->a_perp_khz;
  Eigen::MatrixXd jac(functor.values(), 2);
  functor.df(x, jac);
  if (jac.col(0).norm() < 1e-6) {
    fit.degenerate = true;
    fit.a_par = std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

}  // namespace nvssr
