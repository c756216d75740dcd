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

// Transformer-pair equivalent of flexible-impedance lines.
//
// A flexible line (i, j) with admittance k * y_rated is replaced by a fixed
// line y_rated between two secondary buses i_j and j_i. Each secondary bus
// hangs off its primary through an ideal transformer of ratio sqrt(k) and,
// in parallel, a small fictitious conductance eps * |b_rated| that keeps the
// two sides weakly coupled.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flexopf/network.hpp"

namespace flexopf {

struct LineFlows {
  Complex s_ij;  // complex power leaving bus i into the line
  Complex s_ji;  // complex power leaving bus j into the line
};

/// Terminal flows of a flexible line with admittance k * (g_rated + j b_rated).
inline LineFlows flexible_line_flow(Complex v_i, Complex v_j, double k, double b_rated, double g_rated = 0.0) {
  const Complex y = k * Complex{g_rated, b_rated};
  return {std::conj(y) * v_i * std::conj(v_i - v_j), std::conj(y) * v_j * std::conj(v_j - v_i)};
}

struct TransformerPairFlows {
  Complex s_ij;         // total injection at primary bus i
  Complex s_ji;         // total injection at primary bus j
  double loss = 0.0;    // active power absorbed by both fictitious conductances
  Complex coupling_i;   // flow i -> i_j through the fictitious conductance
  Complex coupling_j;   // flow j -> j_i through the fictitious conductance
  Complex v_ij, v_ji;   // secondary voltages
};

/// Evaluates the transformer-pair circuit with secondaries sqrt(k) V_i and
/// sqrt(k) V_j. The ideal transformers pass power losslessly, so the primary
/// injection is the secondary bus outflow plus the coupling branch flow.
inline TransformerPairFlows transformer_pair_flow(Complex v_i, Complex v_j, double k, double b_rated,
                                                  double epsilon, double g_rated = 0.0) {
  const double tap = std::sqrt(k);
  const double gc = epsilon * std::abs(b_rated);
  const Complex y{g_rated, b_rated};
  TransformerPairFlows r;
  r.v_ij = tap * v_i;
  r.v_ji = tap * v_j;
  r.coupling_i = gc * v_i * std::conj(v_i - r.v_ij);
  r.coupling_j = gc * v_j * std::conj(v_j - r.v_ji);
  // Power the ideal transformers carry into each secondary bus.
  const Complex s_sec_i = gc * r.v_ij * std::conj(r.v_ij - v_i) + std::conj(y) * r.v_ij * std::conj(r.v_ij - r.v_ji);
  const Complex s_sec_j = gc * r.v_ji * std::conj(r.v_ji - v_j) + std::conj(y) * r.v_ji * std::conj(r.v_ji - r.v_ij);
  r.s_ij = s_sec_i + r.coupling_i;
  r.s_ji = s_sec_j + r.coupling_j;
  r.loss = gc * (std::norm(v_i - r.v_ij) + std::norm(v_j - r.v_ji));
  return r;
}

enum class BranchRole { kConstant, kCoupling, kCore };

inline const char* to_string(BranchRole r) {
  switch (r) {
    case BranchRole::kConstant: return "constant";
    case BranchRole::kCoupling: return "coupling";
    case BranchRole::kCore: return "core";
  }
  return "?";
}

struct AugmentedBranch {
  std::size_t from = 0;  // augmented bus indices
  std::size_t to = 0;
  TwoPort y;
  BranchRole role = BranchRole::kConstant;
  std::size_t source = 0;   // original branch index (constant) or flex index
  double flow_limit = kInf; // p.u., active power; infinite for coupling branches
};

/// Augmented bus slots of one flexible line.
struct FlexSlots {
  std::size_t i = 0, j = 0;    // primaries
  std::size_t ij = 0, ji = 0;  // secondaries
};

struct AugmentedNetwork {
  NetworkCase base;
  double epsilon = 0.0;
  std::size_t n_original = 0;
  /// Original bus whose power balance each augmented bus contributes to.
  std::vector<std::size_t> balance_bus;
  std::vector<std::string> labels;
  /// Shunt admittance per original bus, including lumped flex-line charging.
  std::vector<Complex> shunt;
  std::vector<AugmentedBranch> branches;
  std::vector<FlexSlots> flex;

  [[nodiscard]] std::size_t size() const { return balance_bus.size(); }
};

/// Builds the augmented network. eps must be positive unless `allow_ideal`
/// is set; the ideal limit is only meaningful for point evaluation.
inline AugmentedNetwork augment(const NetworkCase& c, double epsilon, bool allow_ideal = false) {
  if (!(epsilon > 0.0) && !(allow_ideal && epsilon == 0.0))
    throw ValidationError(fmt::format("fictitious conductance factor must be positive, got {}", epsilon));
  validate(c);
  AugmentedNetwork a;
  a.base = c;
  a.epsilon = epsilon;
  const std::size_t n = c.buses.size();
  a.n_original = n;
  for (std::size_t i = 0; i < n; ++i) {
    a.balance_bus.push_back(i);
    a.labels.push_back(std::to_string(c.buses[i].id));
    a.shunt.emplace_back(c.buses[i].shunt_g, c.buses[i].shunt_b);
  }

  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!br.in_service || c.flex_of_branch(k)) continue;
    AugmentedBranch ab;
    ab.from = c.bus_index(br.from);
    ab.to = c.bus_index(br.to);
    ab.y = branch_two_port(br);
    ab.role = BranchRole::kConstant;
    ab.source = k;
    ab.flow_limit = br.p_flow_max;
    a.branches.push_back(ab);
  }

  for (std::size_t f = 0; f < c.flex_lines.size(); ++f) {
    const auto& spec = c.flex_lines[f];
    const auto& br = c.branches[spec.branch_index];
    FlexSlots s;
    s.i = c.bus_index(spec.from);
    s.j = c.bus_index(spec.to);
    s.ij = a.balance_bus.size();
    a.balance_bus.push_back(s.i);
    a.labels.push_back(fmt::format("{}>{}", spec.from, spec.to));
    s.ji = a.balance_bus.size();
    a.balance_bus.push_back(s.j);
    a.labels.push_back(fmt::format("{}>{}", spec.to, spec.from));
    a.flex.push_back(s);

    a.shunt[s.i] += Complex{0.0, br.charging_b / 2.0};
    a.shunt[s.j] += Complex{0.0, br.charging_b / 2.0};

    const double gc = epsilon * std::abs(spec.b_rated);
    const TwoPort coupling{gc, -gc, -gc, gc};
    a.branches.push_back({s.i, s.ij, coupling, BranchRole::kCoupling, f, kInf});
    a.branches.push_back({s.j, s.ji, coupling, BranchRole::kCoupling, f, kInf});
    const Complex y = spec.rated_admittance();
    a.branches.push_back({s.ij, s.ji, TwoPort{y, -y, -y, y}, BranchRole::kCore, f, br.p_flow_max});
  }
  return a;
}

enum class TapClause { kNone, kRangeFrom, kRangeTo, kCrossProduct, kImagZero, kRealNonnegative };

inline const char* to_string(TapClause c) {
  switch (c) {
    case TapClause::kNone: return "none";
    case TapClause::kRangeFrom: return "tap range at i";
    case TapClause::kRangeTo: return "tap range at j";
    case TapClause::kCrossProduct: return "V_ij conj(V_j) = V_i conj(V_ji)";
    case TapClause::kImagZero: return "Im V_i conj(V_ij) = Im V_j conj(V_ji) = 0";
    case TapClause::kRealNonnegative: return "Re V_i conj(V_ij) >= 0";
  }
  return "?";
}

struct TapCheck {
  bool holds = true;
  TapClause violated = TapClause::kNone;
  double witness = 0.0;  // magnitude of the violation
};

/// Tests whether secondary voltages are consistent with one shared real tap
/// ratio sqrt(k), k in [k_min, k_max]. Clauses are checked in a fixed order
/// and the first violation is reported.
inline TapCheck check_tap_constraints(Complex v_i, Complex v_j, Complex v_ij, Complex v_ji, double k_min,
                                      double k_max, double tol = 1e-9) {
  auto fail = [](TapClause c, double w) { return TapCheck{false, c, w}; };
  const double wi = std::norm(v_i), wj = std::norm(v_j);
  const double wij = std::norm(v_ij), wji = std::norm(v_ji);
  if (double d = std::max(k_min * wi - wij, wij - k_max * wi); d > tol) return fail(TapClause::kRangeFrom, d);
  if (double d = std::max(k_min * wj - wji, wji - k_max * wj); d > tol) return fail(TapClause::kRangeTo, d);
  if (double d = std::abs(v_ij * std::conj(v_j) - v_i * std::conj(v_ji)); d > tol)
    return fail(TapClause::kCrossProduct, d);
  const Complex ci = v_i * std::conj(v_ij), cj = v_j * std::conj(v_ji);
  if (double d = std::max(std::abs(ci.imag()), std::abs(cj.imag())); d > tol) return fail(TapClause::kImagZero, d);
  if (double d = std::max(-ci.real(), -cj.real()); d > tol) return fail(TapClause::kRealNonnegative, d);
  return {};
}

/// Tabular dump used by the CLI's --dump-augmented option.
inline std::string dump_augmented(const AugmentedNetwork& a) {
  std::string out = fmt::format("# augmented network: {} buses ({} original, {} secondary), {} branches, epsilon={}\n",
                                a.size(), a.n_original, a.size() - a.n_original, a.branches.size(), a.epsilon);
  out += "# bus index label balance_bus\n";
  for (std::size_t b = 0; b < a.size(); ++b)
    out += fmt::format("bus {} {} {}\n", b, a.labels[b], a.base.buses[a.balance_bus[b]].id);
  out += "# branch index role from to Re(yff) Im(yff) Re(yft) Im(yft) Re(ytf) Im(ytf) Re(ytt) Im(ytt) flow_limit\n";
  for (std::size_t k = 0; k < a.branches.size(); ++k) {
    const auto& br = a.branches[k];
    out += fmt::format("branch {} {} {} {} {:.12g} {:.12g} {:.12g} {:.12g} {:.12g} {:.12g} {:.12g} {:.12g} {}\n", k,
                       to_string(br.role), a.labels[br.from], a.labels[br.to], br.y.ff.real(), br.y.ff.imag(),
                       br.y.ft.real(), br.y.ft.imag(), br.y.tf.real(), br.y.tf.imag(), br.y.tt.real(),
                       br.y.tt.imag(), std::isinf(br.flow_limit) ? std::string("inf")
                                                                 : fmt::format("{:.12g}", br.flow_limit));
  }
  return out;
}

}  // namespace flexopf
