// Copyright 2026 The flexopf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "flexopf/flex_config.hpp"
#include "flexopf/matpower.hpp"

namespace flexopf::testing {

inline std::string data_path(const std::string& name) { return std::string(FLEXOPF_DATA_DIR) + "/" + name; }

inline const NetworkCase& case118() {
  static const NetworkCase c = read_matpower_file(data_path("case118.m"));
  return c;
}

inline const FlexConfig& config118() {
  static const FlexConfig c = read_flex_config_file(data_path("case118_flex.cfg"));
  return c;
}

// Two buses, one line r=0 x=0.1, one generator, 0.5 pu load.
inline constexpr const char* kTwoBus = R"(
function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0 0 0 1 1 0 230 1 1.1 0.9;
  2 1 50 0 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 100 -100 1 100 1 200 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.01 40 0;
];
)";

}  // namespace flexopf::testing
