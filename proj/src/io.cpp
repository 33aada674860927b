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

#include "nvssr/io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "nvssr/error.hpp"
#include "nvssr/units.hpp"

namespace nvssr {
namespace {

void write_metadata(std::ostream& out, const CsvMetadata& meta) {
  out << "# config_sha=" << meta.config_sha << " seed=" << meta.seed << "\n";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

// Data rows of a CSV file, header checked and removed.
std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open '" + path + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      header = split(line);
      have_header = true;
      continue;
    }
    rows.push_back(split(line));
  }
  if (!have_header) {
    throw Error("'" + path + "' has no header row");
  }
  return rows;
}

double parse_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("'" + path + "': cannot parse number '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("'" + path + "': cannot parse integer '" + s + "'");
  }
}

double scaled(double l, bool normalized) { return normalized ? 0.5 * (1.0 + l) : l; }

}  // namespace

std::string format_full(double x) { return fmt::format("{:.17g}", x); }

// Grids are built in seconds; 12 digits hide the ns round trip.
std::string format_tau_ns(double tau) { return fmt::format("{:.12g}", s_to_ns(tau)); }

void write_curve_csv(std::ostream& out, const CoherenceCurve& curve, const CsvMetadata& meta,
                     bool normalized) {
  write_metadata(out, meta);
  const char* value = normalized ? "P" : "L";
  if (curve.axis == ScanAxis::kTau) {
    out << "tau_ns," << value << "\n";
    for (const CurvePoint& p : curve.points) {
      out << format_tau_ns(p.x) << "," << format_full(scaled(p.coherence, normalized))
          << "\n";
    }
  } else {
    out << "n," << value << "\n";
    for (const CurvePoint& p : curve.points) {
      out << static_cast<long long>(p.x) << "," << format_full(scaled(p.coherence, normalized))
          << "\n";
    }
  }
}

CoherenceCurve read_curve_csv(const std::string& path, ScanAxis axis, int fixed_pulses,
                              double fixed_tau) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  const std::string x_name = axis == ScanAxis::kTau ? "tau_ns" : "n";
  if (header.size() != 2 || header[0] != x_name || (header[1] != "L" && header[1] != "P")) {
    throw Error("'" + path + "': expected header " + x_name + ",L or " + x_name + ",P");
  }
  const bool normalized = header[1] == "P";
  CoherenceCurve curve;
  curve.axis = axis;
  curve.fixed_pulses = fixed_pulses;
  curve.fixed_tau = fixed_tau;
  for (const auto& row : rows) {
    if (row.size() != 2) throw Error("'" + path + "': expected two columns per row");
    double x = parse_double(row[0], path);
    if (axis == ScanAxis::kTau) x = ns_to_s(x);
    double l = parse_double(row[1], path);
    if (normalized) l = 2.0 * l - 1.0;
    curve.points.push_back({x, l});
  }
  return curve;
}

void write_map_csv(std::ostream& out, const CoherenceMap2D& map, const CsvMetadata& meta,
                   bool normalized) {
  write_metadata(out, meta);
  out << "tau_ns,n," << (normalized ? "P" : "L") << "\n";
  for (std::size_t i = 0; i < map.n_grid.size(); ++i) {
    for (std::size_t j = 0; j < map.tau_grid.size(); ++j) {
      const double l =
          map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << format_tau_ns(map.tau_grid[j]) << "," << map.n_grid[i] << ","
          << format_full(scaled(l, normalized)) << "\n";
    }
  }
}

void write_trace_csv(std::ostream& out, const PhotonTrace& trace, const CsvMetadata& meta) {
  write_metadata(out, meta);
  out << "point_index,photon_count,hidden_state\n";
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    out << i << "," << trace.counts[i] << ",";
    if (i < trace.hidden_states.size()) {
      out << static_cast<int>(trace.hidden_states[i]);
    }
    out << "\n";
  }
}

PhotonTrace read_trace_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (header.size() < 2 || header[0] != "point_index" || header[1] != "photon_count" ||
      (header.size() == 3 && header[2] != "hidden_state") || header.size() > 3) {
    throw Error("'" + path + "': expected header point_index,photon_count[,hidden_state]");
  }
  PhotonTrace trace;
  bool any_hidden = false, all_hidden = true;
  std::vector<NuclearLabel> hidden;
  for (const auto& row : rows) {
    if (row.size() < 2 || row.size() > 3) {
      throw Error("'" + path + "': malformed row");
    }
    const std::int64_t count = parse_int(row[1], path);
    if (count < 0) throw Error("'" + path + "': negative photon count");
    trace.counts.push_back(count);
    if (row.size() == 3 && !row[2].empty()) {
      const std::int64_t h = parse_int(row[2], path);
      if (h != 0 && h != 1) throw Error("'" + path + "': hidden_state must be 0 or 1");
      hidden.push_back(h == 1 ? NuclearLabel::kUp : NuclearLabel::kDown);
      any_hidden = true;
    } else {
      all_hidden = false;
    }
  }
  if (any_hidden && !all_hidden) {
    throw Error("'" + path + "': hidden_state is present on some rows only");
  }
  if (any_hidden) trace.hidden_states = std::move(hidden);
  return trace;
}

void write_histogram_csv(std::ostream& out, const ConditionalHistograms& hist,
                         const CsvMetadata& meta) {
  write_metadata(out, meta);
  out << "count,freq_up,freq_down\n";
  for (const auto& [count, freq] : hist.frequencies()) {
    out << count << "," << format_full(freq.first) << "," << format_full(freq.second) << "\n";
  }
}

}  // namespace nvssr
