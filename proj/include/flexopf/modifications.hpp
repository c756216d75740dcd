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

// Case modifications used by the study workflows.

#pragma once

#include <optional>
#include <vector>

#include "flexopf/network.hpp"

namespace flexopf {

struct CaseModifications {
  std::optional<double> scale_p_max;    // multiply every generator P_max
  std::optional<double> flow_limit_pu;  // set every branch active-flow limit
  std::vector<std::size_t> zero_resistance_branches;
  std::vector<std::size_t> zero_charging_branches;
  // Each group of parallel branches collapses into its first member; the
  // others are taken out of service.
  std::vector<std::vector<std::size_t>> merge_groups;

  [[nodiscard]] bool empty() const {
    return !scale_p_max && !flow_limit_pu && zero_resistance_branches.empty() &&
           zero_charging_branches.empty() && merge_groups.empty();
  }
};

/// Returns a modified copy of `base`; the input is left untouched. Flex-line
/// ratings bound to a modified branch are refreshed from the new impedance.
inline NetworkCase apply_case_modifications(const NetworkCase& base, const CaseModifications& mods) {
  NetworkCase c = base;
  if (mods.scale_p_max)
    for (auto& g : c.generators) g.p_max *= *mods.scale_p_max;
  for (const auto& group : mods.merge_groups) {
    if (group.size() < 2) continue;
    Complex y{0.0, 0.0};
    double charging = 0.0, limit = 0.0;
    for (std::size_t k : group) {
      if (k >= c.branches.size()) throw ValidationError("modification references a missing branch");
      const auto& br = c.branches[k];
      if (br.tap != 1.0 || br.shift_deg != 0.0) throw ValidationError("cannot merge transformer branches");
      y += Complex(br.series_g, br.series_b);
      charging += br.charging_b;
      limit += br.p_flow_max;
    }
    auto& keep = c.branches[group.front()];
    const Complex z = 1.0 / y;
    keep.set_impedance(z.real(), z.imag());
    keep.charging_b = charging;
    // Limits of the merged corridor add up; a global override replaces them below.
    keep.p_flow_max = limit;
    for (std::size_t i = 1; i < group.size(); ++i) c.branches[group[i]].in_service = false;
  }
  if (mods.flow_limit_pu)
    for (auto& br : c.branches) br.p_flow_max = *mods.flow_limit_pu;
  for (std::size_t k : mods.zero_resistance_branches) {
    if (k >= c.branches.size()) throw ValidationError("modification references a missing branch");
    c.branches[k].set_impedance(0.0, c.branches[k].reactance);
  }
  for (std::size_t k : mods.zero_charging_branches) {
    if (k >= c.branches.size()) throw ValidationError("modification references a missing branch");
    c.branches[k].charging_b = 0.0;
  }
  for (auto& f : c.flex_lines) {
    const auto& br = c.branches[f.branch_index];
    f.b_rated = br.series_b;
    if (f.g_rated > 0.0) f.g_rated = br.series_g;
  }
  validate(c);
  return c;
}

}  // namespace flexopf
