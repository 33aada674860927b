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

#include "nvssr/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <openssl/evp.h>

#include "nvssr/error.hpp"
#include "nvssr/units.hpp"

namespace nvssr {

using nlohmann::json;

namespace {

SequenceFamily family_from_string(const std::string& name) {
  for (SequenceFamily f : {SequenceFamily::kCpmg, SequenceFamily::kXy4, SequenceFamily::kXy8}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown sequence family '" + name + "'");
}

// Typed access to one JSON object; rejects keys outside the allowed set.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where, std::set<std::string> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j.is_object()) {
      throw ConfigError(where_ + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
      if (!allowed.contains(key)) {
        throw ConfigError("unknown key '" + key + "' in " + where_);
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return where_ + "." + key; }

  void read(const std::string& key, double& out) const {
    if (!has(key)) return;
    if (!at(key).is_number()) throw ConfigError(path(key) + " must be a number");
    out = at(key).get<double>();
  }
  void read(const std::string& key, int& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) throw ConfigError(path(key) + " must be an integer");
    out = at(key).get<int>();
  }
  void read(const std::string& key, std::uint64_t& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) {
      throw ConfigError(path(key) + " must be a non-negative integer");
    }
    out = at(key).get<std::uint64_t>();
  }
  void read(const std::string& key, bool& out) const {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw ConfigError(path(key) + " must be true or false");
    out = at(key).get<bool>();
  }
  void read(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    if (!at(key).is_string()) throw ConfigError(path(key) + " must be a string");
    out = at(key).get<std::string>();
  }
  void read(const std::string& key, std::vector<int>& out) const {
    if (!has(key)) return;
    const json& a = at(key);
    if (!a.is_array()) throw ConfigError(path(key) + " must be an array of integers");
    out.clear();
    for (const json& v : a) {
      if (!v.is_number_integer()) throw ConfigError(path(key) + " must be an array of integers");
      out.push_back(v.get<int>());
    }
  }

 private:
  const json& j_;
  std::string where_;
};

SpinSpec spin_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, {"a_par_khz", "a_perp_khz", "omega_khz", "vector_khz"});
  SpinSpec s;
  if (r.has("vector_khz")) {
    if (r.has("a_par_khz") || r.has("a_perp_khz") || r.has("omega_khz")) {
      throw ConfigError(where + ": vector_khz cannot be combined with other spin keys");
    }
    const json& v = r.at("vector_khz");
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      throw ConfigError(where + ".vector_khz must be an array of three numbers");
    }
    s.form = SpinSpec::Form::kVector;
    for (int i = 0; i < 3; ++i) s.vector_khz[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<double>();
    return s;
  }
  if (!r.has("a_perp_khz")) {
    throw ConfigError(where + " needs a_perp_khz (with a_par_khz or omega_khz) or vector_khz");
  }
  r.read("a_perp_khz", s.a_perp_khz);
  if (r.has("omega_khz")) {
    if (r.has("a_par_khz")) {
      throw ConfigError(where + ": give either a_par_khz or omega_khz, not both");
    }
    s.form = SpinSpec::Form::kPrecession;
    r.read("omega_khz", s.omega_khz);
  } else if (r.has("a_par_khz")) {
    s.form = SpinSpec::Form::kFrame;
    r.read("a_par_khz", s.a_par_khz);
  } else {
    throw ConfigError(where + " needs a_par_khz or omega_khz next to a_perp_khz");
  }
  return s;
}

json spin_to_json(const SpinSpec& s) {
  switch (s.form) {
    case SpinSpec::Form::kVector:
      return {{"vector_khz", s.vector_khz}};
    case SpinSpec::Form::kPrecession:
      return {{"omega_khz", s.omega_khz}, {"a_perp_khz", s.a_perp_khz}};
    case SpinSpec::Form::kFrame:
      break;
  }
  return {{"a_par_khz", s.a_par_khz}, {"a_perp_khz", s.a_perp_khz}};
}

}  // namespace

HyperfineSpin SpinSpec::build(const FieldConfig& field, const PhysicalConstants& consts) const {
  switch (form) {
    case Form::kVector: {
      HyperfineSpin spin;
      spin.a_vec = Vec3(khz_to_rad_per_s(vector_khz[0]), khz_to_rad_per_s(vector_khz[1]),
                        khz_to_rad_per_s(vector_khz[2]));
      spin.validate();
      return spin;
    }
    case Form::kPrecession:
      return spin_from_precession(khz_to_rad_per_s(omega_khz), khz_to_rad_per_s(a_perp_khz),
                                  field, consts);
    case Form::kFrame:
      break;
  }
  return spin_from_frame_components(khz_to_rad_per_s(a_par_khz), khz_to_rad_per_s(a_perp_khz),
                                    field, consts);
}

ReadoutConfig ReadoutSpec::to_readout_config(std::uint64_t seed) const {
  ReadoutConfig c;
  c.cycles_per_point = cycles_per_point;
  c.photon_rate_bright = photon_rate_bright_per_cycle;
  c.photon_rate_dark = photon_rate_dark_per_cycle;
  c.t1n_up = t1n_up_s;
  c.t1n_down = t1n_down_s;
  c.point_duration = point_duration_ms * 1e-3;
  c.electron_init_error = electron_init_error;
  c.pi_pulse_error = pi_pulse_error;
  c.seed = seed;
  return c;
}

PhysicalConstants RunConfig::constants() const {
  PhysicalConstants c;
  c.gamma_n = gamma_n_rad_per_s_per_t;
  c.gamma_e = gamma_e_rad_per_s_per_t;
  return c;
}

FieldConfig RunConfig::field() const { return FieldConfig::from_gauss(field_gauss); }

CpmgSequence RunConfig::cpmg() const {
  return CpmgSequence(sequence.n_pulses, ns_to_s(sequence.tau_ns),
                      family_from_string(sequence.family));
}

std::vector<HyperfineSpin> RunConfig::build_spins() const {
  const FieldConfig f = field();
  const PhysicalConstants c = constants();
  std::vector<HyperfineSpin> out;
  for (const SpinSpec& s : spins) out.push_back(s.build(f, c));
  return out;
}

void RunConfig::validate() const {
  try {
    constants().validate();
    field();
    cpmg();
    build_spins();
    if (scan.axis != "tau" && scan.axis != "n") {
      throw ConfigError("scan.axis must be \"tau\" or \"n\"");
    }
    tau_grid(ns_to_s(scan.tau_min_ns), ns_to_s(scan.tau_max_ns), ns_to_s(scan.tau_step_ns));
    if (scan.n_max < 1) throw ConfigError("scan.n_max must be >= 1");
    if (scan.n_list.empty() ||
        std::any_of(scan.n_list.begin(), scan.n_list.end(), [](int n) { return n < 1; })) {
      throw ConfigError("scan.n_list must be a nonempty list of pulse counts >= 1");
    }
    if (!(scan.t2_us >= 0.0)) throw ConfigError("scan.t2_us must be >= 0");
    propagator_mode_from_string(scan.propagator_mode);
    propagator_mode_from_string(readout.propagator_mode);
    readout.to_readout_config(seed).validate();
    if (readout.n_points < 1) throw ConfigError("readout.n_points must be >= 1");
    if (!std::isfinite(readout.readout_phase_deg)) {
      throw ConfigError("readout.readout_phase_deg must be finite");
    }
    if (readout.target != "projective" && readout.target != "first_spin") {
      throw ConfigError("readout.target must be \"projective\" or \"first_spin\"");
    }
    if (readout.target == "first_spin" && spins.empty()) {
      throw ConfigError("readout.target \"first_spin\" needs at least one entry in spins");
    }
    analysis.validate();
    if (!(fit.grid_min_khz > 0.0) || !(fit.grid_max_khz >= fit.grid_min_khz) ||
        fit.grid_size < 1) {
      throw ConfigError("fit grid needs 0 < grid_min_khz <= grid_max_khz and grid_size >= 1");
    }
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig config_from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  const ObjectReader top(j, "config",
                         {"constants", "field_gauss", "spins", "sequence", "scan", "readout",
                          "analysis", "fit", "seed", "threads", "output"});
  if (top.has("constants")) {
    const ObjectReader r(top.at("constants"), "constants",
                         {"gamma_n_rad_per_s_per_t", "gamma_e_rad_per_s_per_t"});
    r.read("gamma_n_rad_per_s_per_t", c.gamma_n_rad_per_s_per_t);
    r.read("gamma_e_rad_per_s_per_t", c.gamma_e_rad_per_s_per_t);
  }
  top.read("field_gauss", c.field_gauss);
  if (top.has("spins")) {
    const json& a = top.at("spins");
    if (!a.is_array()) throw ConfigError("spins must be an array");
    c.spins.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      c.spins.push_back(spin_from_json(a[i], "spins[" + std::to_string(i) + "]"));
    }
  }
  if (top.has("sequence")) {
    const ObjectReader r(top.at("sequence"), "sequence", {"family", "n_pulses", "tau_ns"});
    r.read("family", c.sequence.family);
    r.read("n_pulses", c.sequence.n_pulses);
    r.read("tau_ns", c.sequence.tau_ns);
  }
  if (top.has("scan")) {
    const ObjectReader r(top.at("scan"), "scan",
                         {"axis", "tau_min_ns", "tau_max_ns", "tau_step_ns", "n_max", "n_list",
                          "t2_us", "propagator_mode", "normalized"});
    r.read("axis", c.scan.axis);
    r.read("tau_min_ns", c.scan.tau_min_ns);
    r.read("tau_max_ns", c.scan.tau_max_ns);
    r.read("tau_step_ns", c.scan.tau_step_ns);
    r.read("n_max", c.scan.n_max);
    r.read("n_list", c.scan.n_list);
    r.read("t2_us", c.scan.t2_us);
    r.read("propagator_mode", c.scan.propagator_mode);
    r.read("normalized", c.scan.normalized);
  }
  if (top.has("readout")) {
    const ObjectReader r(top.at("readout"), "readout",
                         {"cycles_per_point", "photon_rate_bright_per_cycle",
                          "photon_rate_dark_per_cycle", "t1n_up_s", "t1n_down_s",
                          "point_duration_ms", "electron_init_error", "pi_pulse_error",
                          "n_points", "readout_phase_deg", "propagator_mode", "target"});
    r.read("cycles_per_point", c.readout.cycles_per_point);
    r.read("photon_rate_bright_per_cycle", c.readout.photon_rate_bright_per_cycle);
    r.read("photon_rate_dark_per_cycle", c.readout.photon_rate_dark_per_cycle);
    r.read("t1n_up_s", c.readout.t1n_up_s);
    r.read("t1n_down_s", c.readout.t1n_down_s);
    r.read("point_duration_ms", c.readout.point_duration_ms);
    r.read("electron_init_error", c.readout.electron_init_error);
    r.read("pi_pulse_error", c.readout.pi_pulse_error);
    r.read("n_points", c.readout.n_points);
    r.read("readout_phase_deg", c.readout.readout_phase_deg);
    r.read("propagator_mode", c.readout.propagator_mode);
    r.read("target", c.readout.target);
  }
  if (top.has("analysis")) {
    const ObjectReader r(top.at("analysis"), "analysis",
                         {"init_low_counts", "init_high_counts", "readout_threshold_counts"});
    r.read("init_low_counts", c.analysis.init_low);
    r.read("init_high_counts", c.analysis.init_high);
    r.read("readout_threshold_counts", c.analysis.readout_threshold);
  }
  if (top.has("fit")) {
    const ObjectReader r(top.at("fit"), "fit", {"grid_min_khz", "grid_max_khz", "grid_size"});
    r.read("grid_min_khz", c.fit.grid_min_khz);
    r.read("grid_max_khz", c.fit.grid_max_khz);
    r.read("grid_size", c.fit.grid_size);
  }
  top.read("seed", c.seed);
  top.read("threads", c.threads);
  if (top.has("output")) {
    const ObjectReader r(top.at("output"), "output", {"dir"});
    r.read("dir", c.output_dir);
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json spins = json::array();
  for (const SpinSpec& s : c.spins) spins.push_back(spin_to_json(s));
  return {
      {"constants",
       {{"gamma_n_rad_per_s_per_t", c.gamma_n_rad_per_s_per_t},
        {"gamma_e_rad_per_s_per_t", c.gamma_e_rad_per_s_per_t}}},
      {"field_gauss", c.field_gauss},
      {"spins", spins},
      {"sequence",
       {{"family", c.sequence.family},
        {"n_pulses", c.sequence.n_pulses},
        {"tau_ns", c.sequence.tau_ns}}},
      {"scan",
       {{"axis", c.scan.axis},
        {"tau_min_ns", c.scan.tau_min_ns},
        {"tau_max_ns", c.scan.tau_max_ns},
        {"tau_step_ns", c.scan.tau_step_ns},
        {"n_max", c.scan.n_max},
        {"n_list", c.scan.n_list},
        {"t2_us", c.scan.t2_us},
        {"propagator_mode", c.scan.propagator_mode},
        {"normalized", c.scan.normalized}}},
      {"readout",
       {{"cycles_per_point", c.readout.cycles_per_point},
        {"photon_rate_bright_per_cycle", c.readout.photon_rate_bright_per_cycle},
        {"photon_rate_dark_per_cycle", c.readout.photon_rate_dark_per_cycle},
        {"t1n_up_s", c.readout.t1n_up_s},
        {"t1n_down_s", c.readout.t1n_down_s},
        {"point_duration_ms", c.readout.point_duration_ms},
        {"electron_init_error", c.readout.electron_init_error},
        {"pi_pulse_error", c.readout.pi_pulse_error},
        {"n_points", c.readout.n_points},
        {"readout_phase_deg", c.readout.readout_phase_deg},
        {"propagator_mode", c.readout.propagator_mode},
        {"target", c.readout.target}}},
      {"analysis",
       {{"init_low_counts", c.analysis.init_low},
        {"init_high_counts", c.analysis.init_high},
        {"readout_threshold_counts", c.analysis.readout_threshold}}},
      {"fit",
       {{"grid_min_khz", c.fit.grid_min_khz},
        {"grid_max_khz", c.fit.grid_max_khz},
        {"grid_size", c.fit.grid_size}}},
      {"seed", c.seed},
      {"threads", c.threads},
      {"output", {{"dir", c.output_dir}}},
  };
}

RunConfig load_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, base);
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write '" + path + "'");
  }
  out << config_to_json(config).dump(2) << "\n";
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string config_sha256(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("output");
  j.erase("threads");
  return sha256_hex(j.dump());
}

}  // namespace nvssr
