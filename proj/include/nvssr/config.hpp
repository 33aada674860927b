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

// Run configuration. Values are stored in file units (kHz, ns, gauss, ...),
// as named by the key suffixes, and converted when physics objects are built.
// The JSON form is the on-disk schema; unknown keys are rejected.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nvssr/analysis.hpp"
#include "nvssr/measurement.hpp"
#include "nvssr/spin_core.hpp"

namespace nvssr {

struct SpinSpec {
  enum class Form { kFrame, kVector, kPrecession };
  Form form = Form::kFrame;
  double a_par_khz = 0.0;
  double a_perp_khz = 0.0;
  double omega_khz = 0.0;
  std::array<double, 3> vector_khz{0.0, 0.0, 0.0};

  HyperfineSpin build(const FieldConfig& field, const PhysicalConstants& consts) const;
};

struct SequenceSpec {
  std::string family = "cpmg";
  int n_pulses = 12;
  double tau_ns = 248.0;
};

struct ScanSpec {
  std::string axis = "tau";  // "tau" or "n"
  double tau_min_ns = 200.0;
  double tau_max_ns = 800.0;
  double tau_step_ns = 1.0;
  int n_max = 40;
  std::vector<int> n_list{4, 8, 12, 16, 20, 24, 28, 32};
  double t2_us = 0.0;  // 0 disables the envelope
  std::string propagator_mode = "exact";
  bool normalized = false;
};

struct ReadoutSpec {
  int cycles_per_point = 40000;
  double photon_rate_bright_per_cycle = 0.063;
  double photon_rate_dark_per_cycle = 0.0575;
  double t1n_up_s = 15.0;
  double t1n_down_s = 15.0;
  double point_duration_ms = 189.0;
  double electron_init_error = 0.10;
  double pi_pulse_error = 0.0;
  int n_points = 5000;
  double readout_phase_deg = 90.0;
  std::string propagator_mode = "magnus";
  // "projective": a spin tuned to 2 N Phi = pi/2 at the configured sequence.
  // "first_spin": spins[0].
  std::string target = "projective";

  ReadoutConfig to_readout_config(std::uint64_t seed) const;
};

struct FitSpec {
  double grid_min_khz = 10.0;
  double grid_max_khz = 1000.0;
  int grid_size = 20;
};

struct RunConfig {
  double gamma_n_rad_per_s_per_t = 6.73e7;
  double gamma_e_rad_per_s_per_t = 1.76e11;
  double field_gauss = 691.0;
  std::vector<SpinSpec> spins;
  SequenceSpec sequence;
  ScanSpec scan;
  ReadoutSpec readout;
  ThresholdPolicy analysis;
  FitSpec fit;
  std::uint64_t seed = 20150801;
  int threads = 1;
  std::string output_dir = "out";

  PhysicalConstants constants() const;
  FieldConfig field() const;
  CpmgSequence cpmg() const;
  std::vector<HyperfineSpin> build_spins() const;
  // Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Overlays the keys present in j on base. Throws ConfigError on unknown keys,
/// wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});
nlohmann::json config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path, const RunConfig& base = {});
void save_config(const RunConfig& config, const std::string& path);

/// SHA-256 (hex) of the canonical JSON dump of the effective configuration,
/// leaving out output.dir and threads, which do not change results.
std::string config_sha256(const RunConfig& config);
std::string sha256_hex(const std::string& data);

}  // namespace nvssr
