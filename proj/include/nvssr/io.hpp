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

// CSV files. Every file starts with a "# config_sha=<hex> seed=<n>" line,
// then a header row. Readers skip lines that start with '#'.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "nvssr/analysis.hpp"
#include "nvssr/coherence.hpp"
#include "nvssr/measurement.hpp"

namespace nvssr {

struct CsvMetadata {
  std::string config_sha;
  std::uint64_t seed = 0;
};

std::string format_full(double x);  // 17 significant digits

/// Columns (tau_ns, L) or (n, L). normalized writes P = (1 + L) / 2 instead.
void write_curve_csv(std::ostream& out, const CoherenceCurve& curve, const CsvMetadata& meta,
                     bool normalized = false);
/// Reads a curve written by write_curve_csv. The fixed parameter is not stored
/// in the file, so the caller supplies it.
CoherenceCurve read_curve_csv(const std::string& path, ScanAxis axis, int fixed_pulses,
                              double fixed_tau);

/// Long format (tau_ns, n, L).
void write_map_csv(std::ostream& out, const CoherenceMap2D& map, const CsvMetadata& meta,
                   bool normalized = false);

/// Columns (point_index, photon_count, hidden_state) with hidden_state 1 for up
/// and 0 for down.
void write_trace_csv(std::ostream& out, const PhotonTrace& trace, const CsvMetadata& meta);
/// Accepts an empty or missing hidden_state column (measured data).
PhotonTrace read_trace_csv(const std::string& path);

/// Columns (count, freq_up, freq_down).
void write_histogram_csv(std::ostream& out, const ConditionalHistograms& hist,
                         const CsvMetadata& meta);

}  // namespace nvssr
