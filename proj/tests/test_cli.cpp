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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nvssr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = nvssr::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nvssr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump();
  return p.string();
}

// Small but well-separated readout: same count scale as the defaults.
json fast_readout(int points) {
  return {{"readout",
           {{"cycles_per_point", 4000},
            {"photon_rate_bright_per_cycle", 0.63},
            {"photon_rate_dark_per_cycle", 0.575},
            {"n_points", points}}}};
}

}  // namespace

TEST(cli, zero_coupling_gives_flat_coherence) {
  const fs::path dir = scratch("flat");
  const std::string cfg = write_json(
      dir / "c.json", {{"field_gauss", 305}, {"spins", {{{"vector_khz", {0, 0, 0}}}}}});
  const Result r = run_cli({"scan", "--config", cfg, "--out", (dir / "o").string(),
                            "--tau-min-ns", "200", "--tau-max-ns", "300", "--tau-step-ns", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "o" / "scan_tau.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# config_sha=", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "tau_ns,L");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NEAR(std::stod(line.substr(line.find(',') + 1)), 1.0, 1e-12) << line;
  }
  EXPECT_EQ(rows, 21);
  const json manifest = json::parse(slurp(dir / "o" / "run.json"));
  EXPECT_EQ(manifest["command"], "scan");
  EXPECT_TRUE(manifest["dips"].empty());
  EXPECT_TRUE(fs::exists(dir / "o" / "config.snapshot.json"));
}

TEST(cli, n_scan_and_map) {
  const fs::path dir = scratch("nscan");
  const std::string cfg = write_json(
      dir / "c.json", {{"field_gauss", 305}, {"spins", {{{"omega_khz", 517}, {"a_perp_khz", 200}}}}});
  Result r = run_cli({"scan", "--config", cfg, "--out", (dir / "n").string(), "--axis", "n",
                      "--n-max", "20", "--tau-ns", "483.56", "--normalized"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "n" / "scan_n.csv").find("\nn,P\n"), std::string::npos);
  r = run_cli({"map2d", "--config", cfg, "--out", (dir / "m").string(), "--tau-min-ns", "470",
               "--tau-max-ns", "490", "--tau-step-ns", "10", "--n-list", "2", "4", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string map = slurp(dir / "m" / "map2d.csv");
  EXPECT_NE(map.find("tau_ns,n,L"), std::string::npos);
  EXPECT_EQ(std::count(map.begin(), map.end(), '\n'), 2 + 9);
}

TEST(cli, same_seed_same_bytes_and_snapshot_replay) {
  const fs::path dir = scratch("seed");
  const std::string cfg = write_json(dir / "c.json", fast_readout(300));
  ASSERT_EQ(run_cli({"ssr", "--config", cfg, "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run_cli({"ssr", "--config", cfg, "--out", (dir / "b").string()}).code, 0);
  ASSERT_EQ(run_cli({"ssr", "--config", cfg, "--out", (dir / "c").string(), "--seed", "5"}).code, 0);
  const std::string a = slurp(dir / "a" / "trace.csv");
  EXPECT_GT(a.size(), 1000u);
  EXPECT_EQ(a, slurp(dir / "b" / "trace.csv"));
  EXPECT_NE(a, slurp(dir / "c" / "trace.csv"));

  // The snapshot of run c reproduces it without the flag.
  ASSERT_EQ(run_cli({"ssr", "--config", (dir / "c" / "config.snapshot.json").string(), "--out",
                     (dir / "d").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "c" / "trace.csv"), slurp(dir / "d" / "trace.csv"));
  const json mc = json::parse(slurp(dir / "c" / "run.json"));
  const json md = json::parse(slurp(dir / "d" / "run.json"));
  EXPECT_EQ(mc["seed"], 5);
  EXPECT_EQ(mc["config_sha256"], md["config_sha256"]);
}

TEST(cli, analyze_reports_fidelity_and_low_statistics) {
  const fs::path dir = scratch("analyze");
  const std::string cfg = write_json(dir / "c.json", fast_readout(1500));
  ASSERT_EQ(run_cli({"ssr", "--config", cfg, "--out", (dir / "s").string()}).code, 0);
  const std::string trace = (dir / "s" / "trace.csv").string();
  const Result r = run_cli({"analyze", "--trace", trace, "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json f = json::parse(slurp(dir / "a" / "fidelity.json"));
  EXPECT_GT(f["fidelity_up"].get<double>(), 0.8);
  EXPECT_GT(f["fidelity_down"].get<double>(), 0.8);
  EXPECT_EQ(f["init_fidelity_source"], "hidden_states");
  EXPECT_TRUE(f.contains("quantum_jumps"));
  EXPECT_TRUE(fs::exists(dir / "a" / "histogram.csv"));

  // Thresholds nobody clears.
  const Result low = run_cli({"analyze", "--trace", trace, "--out", (dir / "b").string(),
                              "--init-low", "0", "--init-high", "100000"});
  EXPECT_EQ(low.code, nvssr::cli::kLowStatistics);
}

TEST(cli, fit_recovers_couplings) {
  const fs::path dir = scratch("fit");
  const std::string cfg = write_json(
      dir / "c.json", {{"field_gauss", 305},
                       {"spins", {{{"a_par_khz", 330}, {"a_perp_khz", 200}}}},
                       {"fit", {{"grid_size", 8}}}});
  ASSERT_EQ(run_cli({"scan", "--config", cfg, "--out", (dir / "t").string(), "--n-pulses", "8",
                     "--tau-min-ns", "400", "--tau-max-ns", "640", "--tau-step-ns", "4"})
                .code,
            0);
  ASSERT_EQ(run_cli({"scan", "--config", cfg, "--out", (dir / "n").string(), "--axis", "n",
                     "--n-max", "32", "--tau-ns", "487"})
                .code,
            0);
  const Result r = run_cli({"fit", "--config", cfg, "--out", (dir / "f").string(), "--tau-curve",
                            (dir / "t" / "scan_tau.csv").string() + ":8", "--n-curve",
                            (dir / "n" / "scan_n.csv").string() + ":487"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json fit = json::parse(slurp(dir / "f" / "fit.json"));
  EXPECT_NEAR(fit["a_par_khz"].get<double>(), 330.0, 3.3);
  EXPECT_NEAR(fit["a_perp_khz"].get<double>(), 200.0, 2.0);
}

TEST(cli, exit_codes) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run_cli({}).code, nvssr::cli::kConfigError);
  EXPECT_EQ(run_cli({"bogus"}).code, nvssr::cli::kConfigError);
  EXPECT_EQ(run_cli({"--help"}).code, nvssr::cli::kOk);
  EXPECT_EQ(run_cli({"scan", "--config", write_json(dir / "u.json", {{"sequnce", 1}})}).code,
            nvssr::cli::kConfigError);
  EXPECT_EQ(run_cli({"scan", "--out", (dir / "o").string(), "--tau-min-ns", "500",
                     "--tau-max-ns", "100"})
                .code,
            nvssr::cli::kConfigError);
  EXPECT_EQ(run_cli({"analyze"}).code, nvssr::cli::kConfigError);
  std::ofstream(dir / "bad.csv") << "x,y\n1,2\n";
  EXPECT_EQ(run_cli({"analyze", "--trace", (dir / "bad.csv").string(), "--out",
                     (dir / "o").string()})
                .code,
            nvssr::cli::kRuntimeError);
}

TEST(cli, installed_binary_runs) {
  const std::string cmd = std::string("\"") + NVSSR_TOOL_PATH + "\" --help > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string("\"") + NVSSR_TOOL_PATH + "\" nope > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
