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

// Small conic programs with known optima.

#pragma once

#include "flexopf/conic_program.hpp"

namespace flexopf::testing {

// minimize t  s.t.  t >= (P - 1)^2,  0 <= P <= 2.  Optimum 0 at P = 1.
// Linear block [P, s] with P + s = 2; PSD block [[t, P - 1], [P - 1, 1]].
inline ConicProgram quadratic_micro() {
  ConicProgram p;
  const auto lin = p.add_block(BlockKind::kLinear, 2, "lin");
  const auto psd = p.add_block(BlockKind::kPsd, 2, "epi");
  p.objective.push_back({psd, 0, 0, 1.0});
  p.rows.push_back({{{lin, 0, 0, 1.0}, {lin, 1, 1, 1.0}}, 2.0, "box", "P + s = 2"});
  p.rows.push_back({{{psd, 1, 1, 1.0}}, 1.0, "unit", "corner"});
  p.rows.push_back({{{psd, 0, 1, 0.5}, {lin, 0, 0, -1.0}}, -1.0, "link", "X01 = P - 1"});
  return p;
}

// minimize scale * trace(W)  s.t.  W_11 = 1,  W PSD (2x2).  Optimum scale.
inline ConicProgram trace_micro(double scale = 1.0) {
  ConicProgram p;
  const auto w = p.add_block(BlockKind::kPsd, 2, "W");
  p.objective = {{w, 0, 0, scale}, {w, 1, 1, scale}};
  p.rows.push_back({{{w, 0, 0, 1.0}}, 1.0, "fix", "W11 = 1"});
  return p;
}

}  // namespace flexopf::testing
