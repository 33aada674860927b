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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nvssr/coherence.hpp"
#include "nvssr/measurement.hpp"
#include "nvssr/units.hpp"

namespace nvssr {

/// Counts strictly above init_high prepare up, strictly below init_low prepare
/// down. readout_threshold is only a default for reports; the analysis picks
/// its own optimum.
struct ThresholdPolicy {
  double init_low = 2300.0;
  double init_high = 2520.0;
  double readout_threshold = 2400.0;

  void validate() const;
};

inline constexpr std::size_t kMinQualifyingPairs = 100;

struct ConditionalHistograms {
  // Counts of the readout point following each preparation.
  std::vector<std::int64_t> up;
  std::vector<std::int64_t> down;
  // Preparation indices, parallel to up / down.
  std::vector<std::size_t> up_prepared_at;
  std::vector<std::size_t> down_prepared_at;
  bool low_statistics = false;

  // count -> (freq_up, freq_down), each normalized to its own histogram.
  std::map<std::int64_t, std::pair<double, double>> frequencies() const;
};

/// Non-overlapping prepare-then-measure pairs: a qualifying point i is paired
/// with i + 1 and the search resumes at i + 2.
ConditionalHistograms conditional_histograms(const PhotonTrace& trace,
                                             const ThresholdPolicy& policy);

struct ThresholdPoint {
  std::int64_t threshold = 0;
  double f_up = 0.0;    // P(count >= threshold | up)
  double f_down = 0.0;  // P(count < threshold | down)
  double f_avg = 0.0;
};

struct FidelityReport {
  std::int64_t optimal_threshold = 0;
  double fidelity_up = 0.0;
  double fidelity_down = 0.0;
  std::optional<double> init_fidelity_up;
  std::optional<double> init_fidelity_down;
  std::string init_fidelity_source;  // "hidden_states" or "histogram_model"
  std::vector<ThresholdPoint> threshold_curve;
  std::size_t n_up = 0;
  std::size_t n_down = 0;
  bool low_statistics = false;
};

ThresholdPoint fidelity_at_threshold(const ConditionalHistograms& hist, std::int64_t threshold);

/// Sweeps every integer threshold from min(count) to max(count) + 1. The
/// optimum maximizes min(f_up, f_down); ties go to the lowest threshold.
/// Throws InsufficientDataError if either histogram is empty.
FidelityReport fidelity_vs_threshold(const ConditionalHistograms& hist);

/// Histogram analysis plus initialization fidelity. With hidden states the
/// initialization fidelity is the fraction of preparations whose true state
/// at the preparation point matches. Without them it is a Bayes estimate that
/// uses the conditional histograms as likelihoods with equal priors.
FidelityReport analyze_trace(const PhotonTrace& trace, const ThresholdPolicy& policy);

enum class StateLabel : int { kUnknown = -1, kDown = 0, kUp = 1 };

struct Dwell {
  StateLabel state = StateLabel::kUnknown;
  std::size_t start = 0;
  std::size_t length = 0;
  bool censored = false;  // first or last dwell: true length unknown
};

struct JumpAnalysis {
  std::vector<StateLabel> states;
  std::vector<Dwell> dwells;
  std::size_t jumps() const { return dwells.empty() ? 0 : dwells.size() - 1; }
};

/// Hysteresis classifier: enter up above init_high, enter down below init_low,
/// otherwise hold. Points before the first crossing are kUnknown.
JumpAnalysis detect_jumps(const std::vector<std::int64_t>& counts, const ThresholdPolicy& policy);

/// Dwells of a fully known label sequence, with the same censoring rule.
std::vector<Dwell> dwells_from_labels(const std::vector<StateLabel>& labels);
std::vector<StateLabel> labels_from_hidden(const std::vector<NuclearLabel>& hidden);

/// Fraction of classified (not kUnknown) points that match the ground truth.
double classification_agreement(const std::vector<StateLabel>& classified,
                                const std::vector<NuclearLabel>& hidden);

struct T1Estimate {
  double t1n_up = 0.0;  // s
  double t1n_down = 0.0;
  double se_up = 0.0;
  double se_down = 0.0;
  std::size_t n_up = 0;
  std::size_t n_down = 0;
  double mean_dwell_points = 0.0;  // over both states
};

inline constexpr std::size_t kMinDwellsPerState = 10;

/// Exponential maximum likelihood on uncensored dwells: the mean dwell length
/// times point_duration, with standard error mean / sqrt(n).
T1Estimate estimate_t1n(const std::vector<Dwell>& dwells, double point_duration);

struct HyperfineFit {
  double a_par = 0.0;   // rad/s; NaN when degenerate
  double a_perp = 0.0;  // rad/s
  double residual_norm = 0.0;
  bool degenerate = false;
  int starts = 0;
  int converged_starts = 0;
};

struct FitOptions {
  double grid_min = khz_to_rad_per_s(10.0);
  double grid_max = khz_to_rad_per_s(1000.0);
  int grid_size = 20;
  int threads = 1;
};

/// Least squares over (a_par, a_perp) with exact propagators at rho = I/2,
/// started from every point of a grid_size x grid_size grid. Starts with
/// a_perp above 2 gamma_n B are skipped. Throws FitError if no start converges.
HyperfineFit fit_hyperfine(const std::vector<CoherenceCurve>& curves, const FieldConfig& field,
                           const PhysicalConstants& consts, const FitOptions& options = {});

/// Sum of squared residuals of the forward model against the curves.
double hyperfine_residual(const std::vector<CoherenceCurve>& curves, double a_par, double a_perp,
                          const FieldConfig& field, const PhysicalConstants& consts);

}  // namespace nvssr
