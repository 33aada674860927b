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

#include "nvssr/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvssr/error.hpp"

namespace nvssr {

std::string to_string(SequenceFamily family) {
  switch (family) {
    case SequenceFamily::kCpmg:
      return "cpmg";
    case SequenceFamily::kXy4:
      return "xy4";
    case SequenceFamily::kXy8:
      return "xy8";
  }
  return "unknown";
}

CpmgSequence::CpmgSequence(int n_pulses, double tau, SequenceFamily family)
    : n_pulses_(n_pulses), tau_(tau), family_(family) {
  if (family != SequenceFamily::kCpmg) {
    throw InvalidArgumentError("only CPMG sequences are supported, got " + to_string(family));
  }
  if (n_pulses < 1) {
    throw InvalidArgumentError("CPMG sequence needs at least one pulse");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgumentError("CPMG half-interval tau must be positive and finite");
  }
}

std::vector<double> CpmgSequence::pulse_times() const {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_pulses_));
  for (int p = 1; p <= n_pulses_; ++p) {
    times.push_back((2.0 * p - 1.0) * tau_);
  }
  return times;
}

std::vector<double> CpmgSequence::boundary_times() const {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_pulses_) + 2);
  times.push_back(0.0);
  for (int p = 1; p <= n_pulses_; ++p) {
    times.push_back((2.0 * p - 1.0) * tau_);
  }
  times.push_back(total_time());
  return times;
}

double resonant_tau(double omega, int harmonic) {
  if (!(omega > 0.0)) {
    throw InvalidArgumentError("resonant_tau needs a positive precession frequency");
  }
  if (harmonic < 1) {
    throw InvalidArgumentError("resonance harmonic index starts at 1");
  }
  return (2.0 * harmonic - 1.0) * std::numbers::pi / (2.0 * omega);
}

ReadoutCycleTiming match_wait_to_precession(double cpmg_total, double optical_readout,
                                            double nuclear_period, double overhead) {
  if (cpmg_total < 0.0 || optical_readout < 0.0 || overhead < 0.0) {
    throw InvalidArgumentError("cycle durations must be non-negative");
  }
  ReadoutCycleTiming timing;
  timing.cpmg_total = cpmg_total;
  timing.optical_readout = optical_readout;
  timing.overhead = overhead;
  const double busy = cpmg_total + optical_readout + overhead;

  // Below a femtosecond the period is treated as missing.
  if (!(nuclear_period > 1e-15) || !std::isfinite(nuclear_period)) {
    timing.wait = 0.0;
    timing.cycle_total = busy;
    timing.warning = "nuclear precession period is zero or invalid; no wait inserted";
    return timing;
  }

  // Relative slack so that an exact multiple does not round up a whole period.
  const double periods = std::ceil(busy / nuclear_period - 1e-9);
  timing.cycle_total = std::max(periods, 0.0) * nuclear_period;
  timing.wait = std::max(timing.cycle_total - busy, 0.0);
  timing.cycle_total = busy + timing.wait;
  return timing;
}

}  // namespace nvssr
