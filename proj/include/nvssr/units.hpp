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

#include <numbers>

namespace nvssr {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Internal frequencies are angular (rad/s), times are seconds and fields are
// tesla. Files and flags use kHz, ns and gauss.
inline constexpr double khz_to_rad_per_s(double khz) { return kTwoPi * 1e3 * khz; }
inline constexpr double rad_per_s_to_khz(double w) { return w / (kTwoPi * 1e3); }
inline constexpr double ns_to_s(double ns) { return ns * 1e-9; }
inline constexpr double s_to_ns(double s) { return s * 1e9; }
inline constexpr double us_to_s(double us) { return us * 1e-6; }
inline constexpr double gauss_to_tesla(double g) { return g * 1e-4; }
inline constexpr double tesla_to_gauss(double t) { return t * 1e4; }

}  // namespace nvssr
