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

// Per-unit power network model shared by every stage of the pipeline.

#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace flexopf {

using Complex = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised for malformed input text (case files, configuration files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a structurally valid object violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusKind { kPQ = 1, kPV = 2, kSlack = 3 };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::kPQ;
  double p_load = 0.0;  // p.u.
  double q_load = 0.0;  // p.u.
  double shunt_g = 0.0; // p.u. at 1 p.u. voltage
  double shunt_b = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  // Carried through for serialization only.
  int area = 1;
  double vm = 1.0;
  double va_deg = 0.0;
  double base_kv = 0.0;
  int zone = 1;

  bool operator==(const Bus&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;  // p.u.
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  // Cost f(P) = c2 P^2 + c1 P + c0 in $/h with P in MW.
  double cost_c2 = 0.0;
  double cost_c1 = 1.0;
  double cost_c0 = 0.0;
  bool in_service = true;
  double vg = 1.0;  // setpoint, informational

  /// Evaluates the cost of a dispatch given in MW.
  [[nodiscard]] double cost_mw(double p_mw) const {
    return (cost_c2 * p_mw + cost_c1) * p_mw + cost_c0;
  }

  bool operator==(const Generator&) const = default;
};

/// A pi-model branch. The series admittance is stored both as the raw
/// impedance (for lossless re-serialization) and as g + jb.
struct Branch {
  int from = 0;
  int to = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double series_g = 0.0;
  double series_b = 0.0;
  double charging_b = 0.0;   // total, split half to each end
  double p_flow_max = kInf;  // p.u., active power
  double tap = 1.0;          // off-nominal ratio at the from end
  double shift_deg = 0.0;
  bool in_service = true;

  [[nodiscard]] Complex series_admittance() const { return {series_g, series_b}; }

  /// Sets r + jx and recomputes the series admittance.
  void set_impedance(double r, double x) {
    resistance = r;
    reactance = x;
    const double d = r * r + x * x;
    if (d == 0.0) {
      series_g = series_b = 0.0;
      return;
    }
    series_g = r / d;
    series_b = -x / d;
  }

  bool operator==(const Branch&) const = default;
};

/// Two-port admittance of a branch: I_f = ff V_f + ft V_t, I_t = tf V_f + tt V_t.
struct TwoPort {
  Complex ff, ft, tf, tt;
};

/// MATPOWER-convention pi model with an off-nominal tap at the from end.
inline TwoPort branch_two_port(const Branch& br) {
  const Complex ys = br.series_admittance();
  const Complex half_charge{0.0, br.charging_b / 2.0};
  const double tau = br.tap == 0.0 ? 1.0 : br.tap;
  const Complex t = std::polar(tau, br.shift_deg * 3.14159265358979323846 / 180.0);
  TwoPort p;
  p.ff = (ys + half_charge) / (tau * tau);
  p.ft = -ys / std::conj(t);
  p.tf = -ys / t;
  p.tt = ys + half_charge;
  return p;
}

struct FlexLineSpec {
  int from = 0;
  int to = 0;
  std::size_t branch_index = 0;  // index into NetworkCase::branches
  double b_rated = 0.0;          // < 0
  double g_rated = 0.0;          // > 0 only in proportional mode
  double k_min = 1.0;
  double k_max = 1.0;

  [[nodiscard]] Complex rated_admittance() const { return {g_rated, b_rated}; }

  bool operator==(const FlexLineSpec&) const = default;
};

struct NetworkCase {
  std::string name = "case";
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<FlexLineSpec> flex_lines;

  bool operator==(const NetworkCase&) const = default;

  /// Index of the bus with the given id; throws if absent.
  [[nodiscard]] std::size_t bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return i;
    throw ValidationError(fmt::format("unknown bus id {}", id));
  }

  [[nodiscard]] std::size_t slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].kind == BusKind::kSlack) return i;
    throw ValidationError("case has no slack bus");
  }

  [[nodiscard]] std::size_t in_service_branch_count() const {
    std::size_t n = 0;
    for (const auto& br : branches) n += br.in_service ? 1 : 0;
    return n;
  }

  /// Flex-line index for a branch, if that branch is flexible.
  [[nodiscard]] std::optional<std::size_t> flex_of_branch(std::size_t branch) const {
    for (std::size_t f = 0; f < flex_lines.size(); ++f)
      if (flex_lines[f].branch_index == branch) return f;
    return std::nullopt;
  }
};

/// Checks every structural and numeric invariant of a case.
inline void validate(const NetworkCase& c) {
  if (!(c.base_mva > 0.0)) throw ValidationError("base MVA must be positive");
  if (c.buses.empty()) throw ValidationError("case has no buses");
  std::set<int> ids;
  int slack = 0;
  for (const auto& b : c.buses) {
    if (!ids.insert(b.id).second) throw ValidationError(fmt::format("duplicate bus id {}", b.id));
    if (!(b.v_min > 0.0)) throw ValidationError(fmt::format("bus {}: V_min must be positive", b.id));
    if (b.v_min > b.v_max) throw ValidationError(fmt::format("bus {}: V_min > V_max", b.id));
    slack += b.kind == BusKind::kSlack ? 1 : 0;
  }
  if (slack != 1)
    throw ValidationError(fmt::format("case must have exactly one slack bus, found {}", slack));

  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    if (!ids.count(gen.bus))
      throw ValidationError(fmt::format("generator {} references missing bus {}", g + 1, gen.bus));
    if (gen.p_min > gen.p_max) throw ValidationError(fmt::format("generator {}: P_min > P_max", g + 1));
    if (gen.q_min > gen.q_max) throw ValidationError(fmt::format("generator {}: Q_min > Q_max", g + 1));
    if (gen.cost_c2 < 0.0) throw ValidationError(fmt::format("generator {}: nonconvex cost", g + 1));
  }

  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!ids.count(br.from) || !ids.count(br.to))
      throw ValidationError(fmt::format("branch {} ({}-{}) references a missing bus", k + 1, br.from, br.to));
    if (br.from == br.to) throw ValidationError(fmt::format("branch {} is a self loop", k + 1));
    if (br.in_service && br.series_g == 0.0 && br.series_b == 0.0)
      throw ValidationError(fmt::format("branch {} ({}-{}) has zero impedance", k + 1, br.from, br.to));
    if (!(br.p_flow_max > 0.0))
      throw ValidationError(fmt::format("branch {}: flow limit must be positive", k + 1));
  }

  std::set<std::size_t> seen;
  for (const auto& f : c.flex_lines) {
    if (f.branch_index >= c.branches.size())
      throw ValidationError(fmt::format("flex line {}-{} has no branch", f.from, f.to));
    const auto& br = c.branches[f.branch_index];
    if (!br.in_service)
      throw ValidationError(fmt::format("flex line {}-{} is out of service", f.from, f.to));
    if (!seen.insert(f.branch_index).second)
      throw ValidationError(fmt::format("flex line {}-{} listed twice", f.from, f.to));
    if (!(f.b_rated < 0.0))
      throw ValidationError(fmt::format("flex line {}-{}: b_rated must be negative", f.from, f.to));
    if (f.g_rated < 0.0)
      throw ValidationError(fmt::format("flex line {}-{}: g_rated must be nonnegative", f.from, f.to));
    if (!(f.k_min > 0.0) || f.k_min > 1.0 || f.k_max < 1.0)
      throw ValidationError(
          fmt::format("flex line {}-{}: tuning range [{}, {}] must satisfy 0 < k_min <= 1 <= k_max",
                      f.from, f.to, f.k_min, f.k_max));
  }
}

}  // namespace flexopf
