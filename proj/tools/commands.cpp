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

#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvssr/analysis.hpp"
#include "nvssr/coherence.hpp"
#include "nvssr/config.hpp"
#include "nvssr/error.hpp"
#include "nvssr/io.hpp"
#include "nvssr/measurement.hpp"
#include "nvssr/units.hpp"

namespace nvssr::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool normalized = false;
  std::optional<int> threads;
  std::optional<double> field_gauss;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out_dir, "output directory");
  app->add_flag("--normalized", f.normalized, "write P = (1 + L)/2 instead of L");
  app->add_option("--threads", f.threads, "worker threads, 0 = auto");
  app->add_option("--field-gauss", f.field_gauss, "static field in gauss");
}

RunConfig base_config(const CommonFlags& f) {
  RunConfig c;
  if (!f.config_path.empty()) c = load_config(f.config_path, c);
  if (f.seed) c.seed = *f.seed;
  if (f.out_dir) c.output_dir = *f.out_dir;
  if (f.normalized) c.scan.normalized = true;
  if (f.threads) c.threads = *f.threads;
  if (f.field_gauss) c.field_gauss = *f.field_gauss;
  return c;
}

// Writes a file inside the output directory and records it in the manifest.
class OutputDir {
 public:
  explicit OutputDir(const RunConfig& config)
      : dir_(config.output_dir),
        meta_{config_sha256(config), config.seed} {
    fs::create_directories(dir_);
    save_config(config, (dir_ / "config.snapshot.json").string());
    files_.push_back("config.snapshot.json");
  }

  const CsvMetadata& meta() const { return meta_; }

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name);
    if (!out) throw Error("cannot write '" + (dir_ / name).string() + "'");
    files_.push_back(name);
    return out;
  }

  void write_json(const std::string& name, const json& j) {
    auto out = open(name);
    out << j.dump(2) << "\n";
  }

  void write_manifest(const std::string& command, json extra) {
    extra["command"] = command;
    extra["config_sha256"] = meta_.config_sha;
    extra["seed"] = meta_.seed;
    extra["outputs"] = files_;
    std::ofstream out(dir_ / "run.json");
    out << extra.dump(2) << "\n";
  }

  fs::path path() const { return dir_; }

 private:
  fs::path dir_;
  CsvMetadata meta_;
  std::vector<std::string> files_;
};

SpinBath make_bath(const RunConfig& c) { return {c.build_spins(), c.field(), c.constants()}; }

ScanOptions scan_options(const RunConfig& c) {
  ScanOptions o;
  o.mode = propagator_mode_from_string(c.scan.propagator_mode);
  o.t2 = us_to_s(c.scan.t2_us);
  o.threads = c.threads;
  return o;
}

struct ScanFlags {
  std::optional<std::string> axis;
  std::optional<int> n_pulses;
  std::optional<double> tau_ns;
  std::optional<double> tau_min_ns;
  std::optional<double> tau_max_ns;
  std::optional<double> tau_step_ns;
  std::optional<int> n_max;
  std::optional<std::string> mode;
  std::optional<double> t2_us;
  std::vector<int> n_list;
};

void add_scan_flags(CLI::App* app, ScanFlags& f, bool with_axis) {
  if (with_axis) {
    app->add_option("--axis", f.axis, "tau or n")->check(CLI::IsMember({"tau", "n"}));
    app->add_option("--n-max", f.n_max, "largest pulse count of an N sweep");
    app->add_option("--n-pulses", f.n_pulses, "pulse count of a tau sweep");
    app->add_option("--tau-ns", f.tau_ns, "tau of an N sweep");
  } else {
    app->add_option("--n-list", f.n_list, "pulse counts of the map rows");
  }
  app->add_option("--tau-min-ns", f.tau_min_ns, "first tau of a sweep");
  app->add_option("--tau-max-ns", f.tau_max_ns, "last tau of a sweep (inclusive)");
  app->add_option("--tau-step-ns", f.tau_step_ns, "tau increment");
  app->add_option("--mode", f.mode, "exact or magnus")->check(CLI::IsMember({"exact", "magnus"}));
  app->add_option("--t2-us", f.t2_us, "exponential bath envelope, 0 = off");
}

void apply_scan_flags(const ScanFlags& f, RunConfig& c) {
  if (f.axis) c.scan.axis = *f.axis;
  if (f.n_pulses) c.sequence.n_pulses = *f.n_pulses;
  if (f.tau_ns) c.sequence.tau_ns = *f.tau_ns;
  if (f.tau_min_ns) c.scan.tau_min_ns = *f.tau_min_ns;
  if (f.tau_max_ns) c.scan.tau_max_ns = *f.tau_max_ns;
  if (f.tau_step_ns) c.scan.tau_step_ns = *f.tau_step_ns;
  if (f.n_max) c.scan.n_max = *f.n_max;
  if (f.mode) c.scan.propagator_mode = *f.mode;
  if (f.t2_us) c.scan.t2_us = *f.t2_us;
  if (!f.n_list.empty()) c.scan.n_list = f.n_list;
}

int cmd_scan(const RunConfig& c, std::ostream& out) {
  OutputDir dir(c);
  const SpinBath bath = make_bath(c);
  const ScanOptions options = scan_options(c);
  CoherenceCurve curve;
  std::string name;
  json extra;
  if (c.scan.axis == "tau") {
    curve = scan_tau(bath, c.sequence.n_pulses, ns_to_s(c.scan.tau_min_ns),
                     ns_to_s(c.scan.tau_max_ns), ns_to_s(c.scan.tau_step_ns), options);
    name = "scan_tau.csv";
    json dips = json::array();
    for (const Dip& d : find_dips(curve)) {
      dips.push_back({{"tau_ns", s_to_ns(d.position)}, {"L", d.depth}});
    }
    extra["n_pulses"] = c.sequence.n_pulses;
    extra["dips"] = dips;
  } else {
    curve = scan_n(bath, ns_to_s(c.sequence.tau_ns), c.scan.n_max, options);
    name = "scan_n.csv";
    extra["tau_ns"] = c.sequence.tau_ns;
  }
  {
    auto csv = dir.open(name);
    write_curve_csv(csv, curve, dir.meta(), c.scan.normalized);
  }
  dir.write_manifest("scan", extra);
  out << "wrote " << (dir.path() / name).string() << " (" << curve.points.size() << " points)\n";
  return kOk;
}

int cmd_map2d(const RunConfig& c, std::ostream& out) {
  OutputDir dir(c);
  const CoherenceMap2D map =
      scan_2d(make_bath(c), ns_to_s(c.scan.tau_min_ns), ns_to_s(c.scan.tau_max_ns),
              ns_to_s(c.scan.tau_step_ns), c.scan.n_list, scan_options(c));
  {
    auto csv = dir.open("map2d.csv");
    write_map_csv(csv, map, dir.meta(), c.scan.normalized);
  }
  dir.write_manifest("map2d", {});
  out << "wrote " << (dir.path() / "map2d.csv").string() << " (" << map.values.size()
      << " points)\n";
  return kOk;
}

int cmd_ssr(const RunConfig& c, std::ostream& out) {
  const FieldConfig field = c.field();
  const PhysicalConstants consts = c.constants();
  const CpmgSequence seq = c.cpmg();
  const HyperfineSpin target = c.readout.target == "projective"
                                   ? projective_target_spin(seq.tau(), seq.n_pulses(), field, consts)
                                   : c.spins.front().build(field, consts);
  const MeasurementChannel channel =
      measurement_channel(target, field, consts, seq,
                          propagator_mode_from_string(c.readout.propagator_mode),
                          c.readout.readout_phase_deg * kTwoPi / 360.0);
  const PhotonTrace trace = simulate_trace(channel, c.readout.to_readout_config(c.seed),
                                           seq.n_pulses(), c.readout.n_points);
  OutputDir dir(c);
  {
    auto csv = dir.open("trace.csv");
    write_trace_csv(csv, trace, dir.meta());
  }
  const ReadoutBasis basis = readout_basis(channel);
  const EffectiveFrame frame = effective_frame(target, field, consts);
  dir.write_manifest(
      "ssr", {{"n_points", c.readout.n_points},
              {"target_omega_khz", rad_per_s_to_khz(frame.omega)},
              {"target_a_perp_khz", rad_per_s_to_khz(frame.a_perp)},
              {"p_bright_up", basis.p_bright_up},
              {"p_bright_down", basis.p_bright_down}});
  out << "wrote " << (dir.path() / "trace.csv").string() << " (" << trace.counts.size()
      << " points)\n";
  return kOk;
}

json report_to_json(const FidelityReport& r) {
  json curve = json::array();
  for (const ThresholdPoint& p : r.threshold_curve) {
    curve.push_back({{"threshold", p.threshold}, {"f_up", p.f_up}, {"f_down", p.f_down},
                     {"f_avg", p.f_avg}});
  }
  json j = {{"optimal_threshold", r.optimal_threshold},
            {"fidelity_up", r.fidelity_up},
            {"fidelity_down", r.fidelity_down},
            {"init_fidelity_up", nullptr},
            {"init_fidelity_down", nullptr},
            {"init_fidelity_source", r.init_fidelity_source},
            {"n_up", r.n_up},
            {"n_down", r.n_down},
            {"low_statistics", r.low_statistics},
            {"threshold_curve", curve}};
  if (r.init_fidelity_up) j["init_fidelity_up"] = *r.init_fidelity_up;
  if (r.init_fidelity_down) j["init_fidelity_down"] = *r.init_fidelity_down;
  return j;
}

int cmd_analyze(const RunConfig& c, const std::string& trace_path, std::ostream& out) {
  PhotonTrace trace = read_trace_csv(trace_path);
  trace.config = c.readout.to_readout_config(c.seed);
  OutputDir dir(c);
  const ConditionalHistograms hist = conditional_histograms(trace, c.analysis);
  {
    auto csv = dir.open("histogram.csv");
    write_histogram_csv(csv, hist, dir.meta());
  }
  if (hist.up.empty() || hist.down.empty()) {
    dir.write_manifest("analyze", {{"low_statistics", true}});
    throw InsufficientDataError("no prepare-measure pairs for one of the states");
  }
  const FidelityReport report = analyze_trace(trace, c.analysis);
  json j = report_to_json(report);
  j["readout_threshold"] = fidelity_at_threshold(hist, std::llround(c.analysis.readout_threshold)).f_avg;

  const JumpAnalysis jumps = detect_jumps(trace.counts, c.analysis);
  json jj = {{"jumps", jumps.jumps()}, {"dwells", jumps.dwells.size()}};
  try {
    const T1Estimate t1 = estimate_t1n(jumps.dwells, trace.config.point_duration);
    jj["t1n_up_s"] = t1.t1n_up;
    jj["t1n_down_s"] = t1.t1n_down;
    jj["se_up_s"] = t1.se_up;
    jj["se_down_s"] = t1.se_down;
    jj["mean_dwell_points"] = t1.mean_dwell_points;
  } catch (const InsufficientDataError& e) {
    jj["t1n_error"] = e.what();
  }
  j["quantum_jumps"] = jj;
  j["config_sha256"] = dir.meta().config_sha;
  j["seed"] = dir.meta().seed;
  dir.write_json("fidelity.json", j);
  dir.write_manifest("analyze", {{"trace", trace_path}, {"low_statistics", report.low_statistics}});
  out << "threshold " << report.optimal_threshold << ": fidelity up " << report.fidelity_up
      << ", down " << report.fidelity_down << "\n";
  if (report.low_statistics) {
    out << "low statistics: fewer than " << kMinQualifyingPairs << " pairs for a state\n";
    return kLowStatistics;
  }
  return kOk;
}

// PATH:VALUE with the value after the last colon.
std::pair<std::string, double> split_curve_arg(const std::string& arg) {
  const auto colon = arg.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == arg.size()) {
    throw ConfigError("curve argument '" + arg + "' must look like PATH:VALUE");
  }
  const std::string path = arg.substr(0, colon);
  if (!fs::exists(path)) {
    throw ConfigError("curve file '" + path + "' does not exist");
  }
  try {
    std::size_t used = 0;
    const std::string v = arg.substr(colon + 1);
    const double value = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return {path, value};
  } catch (const std::exception&) {
    throw ConfigError("curve argument '" + arg + "' has a non-numeric value");
  }
}

int cmd_fit(const RunConfig& c, const std::vector<std::string>& tau_curves,
            const std::vector<std::string>& n_curves, std::ostream& out) {
  std::vector<CoherenceCurve> curves;
  for (const std::string& arg : tau_curves) {
    const auto [path, n] = split_curve_arg(arg);
    if (n < 1 || n != std::floor(n)) throw ConfigError("pulse count in '" + arg + "' must be a positive integer");
    curves.push_back(read_curve_csv(path, ScanAxis::kTau, static_cast<int>(n), 0.0));
  }
  for (const std::string& arg : n_curves) {
    const auto [path, tau_ns] = split_curve_arg(arg);
    if (!(tau_ns > 0.0)) throw ConfigError("tau in '" + arg + "' must be positive");
    curves.push_back(read_curve_csv(path, ScanAxis::kPulses, 0, ns_to_s(tau_ns)));
  }
  FitOptions options;
  options.grid_min = khz_to_rad_per_s(c.fit.grid_min_khz);
  options.grid_max = khz_to_rad_per_s(c.fit.grid_max_khz);
  options.grid_size = c.fit.grid_size;
  options.threads = c.threads;
  const HyperfineFit fit = fit_hyperfine(curves, c.field(), c.constants(), options);
  OutputDir dir(c);
  json j = {{"a_par_khz", nullptr},
            {"a_perp_khz", rad_per_s_to_khz(fit.a_perp)},
            {"residual_norm", fit.residual_norm},
            {"degenerate", fit.degenerate},
            {"starts", fit.starts},
            {"converged_starts", fit.converged_starts},
            {"field_gauss", c.field_gauss},
            {"config_sha256", dir.meta().config_sha},
            {"seed", dir.meta().seed}};
  if (!fit.degenerate) j["a_par_khz"] = rad_per_s_to_khz(fit.a_par);
  dir.write_json("fit.json", j);
  dir.write_manifest("fit", {{"tau_curves", tau_curves}, {"n_curves", n_curves}});
  if (fit.degenerate) {
    out << "degenerate fit: the data do not constrain a_par (a_perp "
        << rad_per_s_to_khz(fit.a_perp) << " kHz)\n";
  } else {
    out << "a_par " << rad_per_s_to_khz(fit.a_par) << " kHz, a_perp "
        << rad_per_s_to_khz(fit.a_perp) << " kHz, residual " << fit.residual_norm << "\n";
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coherence, readout and analysis tools for a nuclear spin read out by an NV electron",
               "nvssr"};
  app.require_subcommand(1);

  CommonFlags common;
  ScanFlags scan_flags, map_flags;
  std::optional<int> points;
  std::optional<std::string> ssr_mode;
  std::string trace_path;
  std::optional<double> init_low, init_high, readout_threshold;
  std::vector<std::string> tau_curves, n_curves;

  CLI::App* scan = app.add_subcommand("scan", "coherence versus tau or pulse count");
  add_common(scan, common);
  add_scan_flags(scan, scan_flags, true);

  CLI::App* map2d = app.add_subcommand("map2d", "coherence over a (tau, N) grid");
  add_common(map2d, common);
  add_scan_flags(map2d, map_flags, false);

  CLI::App* ssr = app.add_subcommand("ssr", "simulate a single-shot readout photon trace");
  add_common(ssr, common);
  ssr->add_option("--points", points, "number of binned points");
  ssr->add_option("--mode", ssr_mode, "exact or magnus")->check(CLI::IsMember({"exact", "magnus"}));

  CLI::App* analyze = app.add_subcommand("analyze", "histograms, fidelity and jumps of a trace");
  add_common(analyze, common);
  analyze->add_option("--trace", trace_path, "trace CSV")->required()->check(CLI::ExistingFile);
  analyze->add_option("--init-low", init_low, "prepare down below this count");
  analyze->add_option("--init-high", init_high, "prepare up above this count");
  analyze->add_option("--readout-threshold", readout_threshold, "threshold reported next to the optimum");

  CLI::App* fit = app.add_subcommand("fit", "fit a_par and a_perp to coherence curves");
  add_common(fit, common);
  fit->add_option("--tau-curve", tau_curves, "tau scan CSV as PATH:N");
  fit->add_option("--n-curve", n_curves, "N scan CSV as PATH:TAU_NS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig config = base_config(common);
    if (scan->parsed()) apply_scan_flags(scan_flags, config);
    if (map2d->parsed()) apply_scan_flags(map_flags, config);
    if (points) config.readout.n_points = *points;
    if (ssr_mode) config.readout.propagator_mode = *ssr_mode;
    if (init_low) config.analysis.init_low = *init_low;
    if (init_high) config.analysis.init_high = *init_high;
    if (readout_threshold) config.analysis.readout_threshold = *readout_threshold;
    config.validate();
    if (scan->parsed()) return cmd_scan(config, out);
    if (map2d->parsed()) return cmd_map2d(config, out);
    if (ssr->parsed()) return cmd_ssr(config, out);
    if (analyze->parsed()) return cmd_analyze(config, trace_path, out);
    return cmd_fit(config, tau_curves, n_curves, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InsufficientDataError& e) {
    err << "low statistics: " << e.what() << "\n";
    return kLowStatistics;
  } catch (const FitError& e) {
    err << "error: " << e.what() << " (best residual " << e.best_residual() << ")\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace nvssr::cli
