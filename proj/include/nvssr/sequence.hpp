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

#include <string>
#include <vector>

namespace nvssr {

/// Only CPMG is simulated. The tag exists so that configuration files can name
/// a family explicitly; anything else is rejected at construction.
enum class SequenceFamily { kCpmg, kXy4, kXy8 };

std::string to_string(SequenceFamily family);

/// N instantaneous pi pulses at t_p = (2p - 1) tau, p = 1..N. The pulse
/// spacing is 2 tau and the sequence ends at 2 N tau.
class CpmgSequence {
 public:
  CpmgSequence(int n_pulses, double tau, SequenceFamily family = SequenceFamily::kCpmg);

  int n_pulses() const { return n_pulses_; }
  double tau() const { return tau_; }
  SequenceFamily family() const { return family_; }
  double total_time() const { return 2.0 * n_pulses_ * tau_; }

  std::vector<double> pulse_times() const;

  // t_0 = 0, the N pulse times, then t_{N+1} = 2 N tau.
  std::vector<double> boundary_times() const;

  bool operator==(const CpmgSequence&) const = default;

 private:
  int n_pulses_;
  double tau_;
  SequenceFamily family_;
};

/// Half-interval that puts the k-th odd harmonic of the CPMG filter on a
/// precession frequency omega (rad/s): omega tau = (2k - 1) pi / 2.
double resonant_tau(double omega, int harmonic = 1);

struct ReadoutCycleTiming {
  double cpmg_total = 0.0;
  double optical_readout = 0.0;
  double wait = 0.0;
  // pi/2 pulses and electron re-initialization dead time.
  double overhead = 0.0;
  double cycle_total = 0.0;
  std::string warning;
};

/// Smallest wait >= 0 that makes the whole cycle an integer number of nuclear
/// precession periods. A vanishing period leaves wait = 0 and sets a warning.
ReadoutCycleTiming match_wait_to_precession(double cpmg_total, double optical_readout,
                                            double nuclear_period, double overhead = 0.0);

}  // namespace nvssr
