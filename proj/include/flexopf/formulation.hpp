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

// Assembly of the relaxed flexible-line OPF as a ConicProgram.
//
// Variables: one PSD block holding the real embedding of W over the
// augmented buses, one nonnegative block holding dispatch offsets and
// slacks, and one 2x2 PSD block per quadratic cost (u >= c2 P^2 iff
// [[u, sqrt(c2) P], [sqrt(c2) P, 1]] is PSD, a rotated second-order cone).
//
// The secondary-bus power balances only define the transformer transfers
// S_ij and S_ji, which appear nowhere else; they are substituted into the
// primary balances, so each augmented bus contributes its branch flows to
// the balance of the original bus it hangs off.

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flexopf/circuit_transform.hpp"
#include "flexopf/conic_program.hpp"
#include "flexopf/hermitian_embedding.hpp"
#include "flexopf/network.hpp"

namespace flexopf {

struct FormulationOptions {
  double wq = 0.0;               // $/h per MVAr of reactive generation
  bool conventional_mode = false;
  bool both_ends = false;        // enforce active-flow limits at both ends

  void validate() const {
    if (!(wq >= 0.0)) throw ValidationError("penalty weight wq must be nonnegative");
  }
};

/// value = offset + sign * x[var] (a constant when var is empty).
struct ScalarExpr {
  std::optional<std::size_t> var;
  double offset = 0.0;
  double sign = 1.0;

  [[nodiscard]] double eval(const Eigen::MatrixXd& scalars) const {
    return var ? offset + sign * scalars(static_cast<Eigen::Index>(*var), 0) : offset;
  }
};

struct GeneratorSlots {
  std::size_t generator = 0;  // index into the case's generator list
  std::size_t bus = 0;        // original bus index
  ScalarExpr p, q;            // p.u.
  std::optional<std::size_t> epigraph_block;
};

struct Formulation {
  ConicProgram program;
  AugmentedNetwork network;
  FormulationOptions options;
  std::size_t scalar_block = 0;
  std::size_t w_block = 0;
  std::vector<GeneratorSlots> generators;
  /// Rows per constraint family.
  std::map<std::string, std::size_t> census;
  /// For each scalar variable that is a slack: (row, coefficient).
  std::map<std::size_t, std::pair<std::size_t, double>> slack_rows;

  [[nodiscard]] std::size_t w_dim() const { return network.size(); }
};

namespace detail {

class Assembler {
 public:
  Assembler(const AugmentedNetwork& aug, const FormulationOptions& opt) {
    f_.network = aug;
    f_.options = opt;
    f_.scalar_block = f_.program.add_block(BlockKind::kLinear, 0, "scalars");
  }

  Formulation build() {
    const auto& net = f_.network;
    const auto& c = net.base;
    const double base = c.base_mva;

    // Generators: dispatch variables, box rows, cost epigraphs.
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
      const auto& gen = c.generators[g];
      if (!gen.in_service) continue;
      GeneratorSlots s;
      s.generator = g;
      s.bus = c.bus_index(gen.bus);
      s.p = bounded(gen.p_min, gen.p_max, "gen_p_upper", fmt::format("P_G{} (bus {})", g + 1, gen.bus));
      s.q = bounded(gen.q_min, gen.q_max, "gen_q_upper", fmt::format("Q_G{} (bus {})", g + 1, gen.bus));

      // Cost: c2 (base P)^2 + c1 base P + c0.
      f_.program.objective_offset += gen.cost_c0 + gen.cost_c1 * base * s.p.offset;
      if (s.p.var) {
        add_objective_scalar(*s.p.var, gen.cost_c1 * base * s.p.sign);
        if (gen.cost_c2 > 0.0) {
          const std::size_t blk = f_.program.add_block(BlockKind::kPsd, 2, fmt::format("cost{}", g + 1));
          s.epigraph_block = blk;
          f_.program.objective.push_back({blk, 0, 0, 1.0});
          add_row({{blk, 1, 1, 1.0}}, 1.0, "cost_epigraph_unit", fmt::format("cost {} unit", g + 1));
          const double sc = std::sqrt(gen.cost_c2) * base;
          add_row({{blk, 0, 1, 0.5}, {f_.scalar_block, *s.p.var, *s.p.var, -sc * s.p.sign}}, sc * s.p.offset,
                  "cost_epigraph_link", fmt::format("cost {} link", g + 1));
        }
      }
      if (gen.cost_c2 > 0.0 && !s.p.var) f_.program.objective_offset += gen.cost_c2 * std::pow(base * s.p.offset, 2);
      if (f_.options.wq > 0.0) {
        f_.program.objective_offset += f_.options.wq * base * s.q.offset;
        if (s.q.var) add_objective_scalar(*s.q.var, f_.options.wq * base * s.q.sign);
      }
      f_.generators.push_back(s);
    }

    const std::size_t m = net.size();
    f_.w_block = f_.program.add_block(BlockKind::kPsd, 2 * m, "W");

    power_balance();
    voltage_limits();
    flow_limits();
    tap_constraints();

    f_.program.blocks[f_.scalar_block].dim = n_scalars_;
    return std::move(f_);
  }

 private:
  std::size_t new_scalar() { return n_scalars_++; }

  std::size_t new_slack(std::size_t row, double coef) {
    const std::size_t v = new_scalar();
    f_.slack_rows[v] = {row, coef};
    return v;
  }

  void add_objective_scalar(std::size_t var, double coef) {
    if (coef != 0.0) f_.program.objective.push_back({f_.scalar_block, var, var, coef});
  }

  Entry scalar(std::size_t var, double coef) const { return {f_.scalar_block, var, var, coef}; }

  std::size_t add_row(std::vector<Entry> entries, double rhs, const std::string& family, std::string label) {
    f_.program.rows.push_back({std::move(entries), rhs, family, std::move(label)});
    ++f_.census[family];
    return f_.program.rows.size() - 1;
  }

  /// Scalar in [lo, hi] as offset + sign * x with x >= 0, plus a row for the
  /// opposite bound when it is finite.
  ScalarExpr bounded(double lo, double hi, const std::string& family, const std::string& what) {
    ScalarExpr e;
    if (std::isinf(lo) && std::isinf(hi))
      throw ValidationError(fmt::format("{}: the cone form requires at least one finite bound", what));
    if (lo == hi) {
      e.offset = lo;
      return e;
    }
    e.var = new_scalar();
    if (!std::isinf(lo)) {
      e.offset = lo;
      e.sign = 1.0;
    } else {
      e.offset = hi;
      e.sign = -1.0;
    }
    if (!std::isinf(lo) && !std::isinf(hi)) {
      const std::size_t row = f_.program.rows.size();
      const std::size_t s = new_slack(row, 1.0);
      add_row({scalar(*e.var, 1.0), scalar(s, 1.0)}, hi - lo, family, what);
    }
    return e;
  }

  void power_balance() {
    const auto& net = f_.network;
    const auto& c = net.base;
    const std::size_t n = net.n_original;
    const std::size_t m = net.size();
    std::vector<HermitianFunctional> re(n, HermitianFunctional(f_.w_block, m));
    std::vector<HermitianFunctional> im(n, HermitianFunctional(f_.w_block, m));
    auto add_term = [&](std::size_t bus, std::size_t a, std::size_t b, Complex coef) {
      re[bus].add_re_of(a, b, coef);
      im[bus].add_im_of(a, b, coef);
    };
    for (std::size_t i = 0; i < n; ++i) add_term(i, i, i, std::conj(net.shunt[i]));
    for (const auto& br : net.branches) {
      const std::size_t bf = net.balance_bus[br.from], bt = net.balance_bus[br.to];
      add_term(bf, br.from, br.from, std::conj(br.y.ff));
      add_term(bf, br.from, br.to, std::conj(br.y.ft));
      add_term(bt, br.to, br.to, std::conj(br.y.tt));
      add_term(bt, br.to, br.from, std::conj(br.y.tf));
    }
    for (std::size_t i = 0; i < n; ++i) {
      double p_rhs = c.buses[i].p_load, q_rhs = c.buses[i].q_load;
      std::vector<Entry> pe, qe;
      for (const auto& g : f_.generators) {
        if (g.bus != i) continue;
        p_rhs -= g.p.offset;
        q_rhs -= g.q.offset;
        if (g.p.var) pe.push_back(scalar(*g.p.var, g.p.sign));
        if (g.q.var) qe.push_back(scalar(*g.q.var, g.q.sign));
      }
      for (auto e : re[i].entries()) pe.push_back({e.block, e.row, e.col, -e.value});
      for (auto e : im[i].entries()) qe.push_back({e.block, e.row, e.col, -e.value});
      add_row(std::move(pe), p_rhs, "power_balance_p", fmt::format("P balance bus {}", c.buses[i].id));
      add_row(std::move(qe), q_rhs, "power_balance_q", fmt::format("Q balance bus {}", c.buses[i].id));
    }
  }

  void voltage_limits() {
    const auto& net = f_.network;
    for (std::size_t i = 0; i < net.n_original; ++i) {
      const auto& bus = net.base.buses[i];
      HermitianFunctional w(f_.w_block, net.size());
      w.add_re(i, i, 1.0);
      {
        auto e = w.entries();
        const std::size_t row = f_.program.rows.size();
        e.push_back(scalar(new_slack(row, -1.0), -1.0));
        add_row(std::move(e), bus.v_min * bus.v_min, "voltage_lower", fmt::format("V_min bus {}", bus.id));
      }
      if (!std::isinf(bus.v_max)) {
        auto e = w.entries();
        const std::size_t row = f_.program.rows.size();
        e.push_back(scalar(new_slack(row, 1.0), 1.0));
        add_row(std::move(e), bus.v_max * bus.v_max, "voltage_upper", fmt::format("V_max bus {}", bus.id));
      }
    }
  }

  void flow_limit_rows(std::size_t a, std::size_t b, Complex self, Complex mutual, double limit,
                       const std::string& label) {
    HermitianFunctional w(f_.w_block, f_.network.size());
    w.add_re_of(a, a, std::conj(self));
    w.add_re_of(a, b, std::conj(mutual));
    for (double sgn : {1.0, -1.0}) {
      std::vector<Entry> e;
      for (auto x : w.entries()) e.push_back({x.block, x.row, x.col, sgn * x.value});
      const std::size_t row = f_.program.rows.size();
      e.push_back(scalar(new_slack(row, 1.0), 1.0));
      add_row(std::move(e), limit, sgn > 0 ? "flow_limit_upper" : "flow_limit_lower", label);
    }
  }

  void flow_limits() {
    const auto& net = f_.network;
    for (const auto& br : net.branches) {
      if (br.role == BranchRole::kCoupling || std::isinf(br.flow_limit)) continue;
      const std::string label = fmt::format("flow {}-{}", net.labels[br.from], net.labels[br.to]);
      flow_limit_rows(br.from, br.to, br.y.ff, br.y.ft, br.flow_limit, label + " (from)");
      if (f_.options.both_ends) flow_limit_rows(br.to, br.from, br.y.tt, br.y.tf, br.flow_limit, label + " (to)");
    }
  }

  void tap_constraints() {
    const auto& net = f_.network;
    const std::size_t m = net.size();
    for (std::size_t f = 0; f < net.flex.size(); ++f) {
      const auto& s = net.flex[f];
      const auto& spec = net.base.flex_lines[f];
      const std::string tag = fmt::format("flex {}-{}", spec.from, spec.to);
      for (auto [prim, sec] : {std::pair{s.i, s.ij}, std::pair{s.j, s.ji}}) {
        // k_min W_pp <= W_ss <= k_max W_pp
        for (int side = 0; side < 2; ++side) {
          HermitianFunctional w(f_.w_block, m);
          if (side == 0) {
            w.add_re(sec, sec, 1.0);
            w.add_re(prim, prim, -spec.k_min);
          } else {
            w.add_re(prim, prim, spec.k_max);
            w.add_re(sec, sec, -1.0);
          }
          auto e = w.take();
          const std::size_t row = f_.program.rows.size();
          e.push_back(scalar(new_slack(row, -1.0), -1.0));
          add_row(std::move(e), 0.0, side == 0 ? "tap_range_lower" : "tap_range_upper",
                  fmt::format("{} tap range at {}", tag, net.labels[sec]));
        }
        // Im W_ps = 0
        {
          HermitianFunctional w(f_.w_block, m);
          w.add_im(prim, sec, 1.0);
          add_row(w.take(), 0.0, "tap_imag_zero", fmt::format("{} Im W at {}", tag, net.labels[sec]));
        }
        // Re W_ps >= 0
        {
          HermitianFunctional w(f_.w_block, m);
          w.add_re(prim, sec, 1.0);
          auto e = w.take();
          const std::size_t row = f_.program.rows.size();
          e.push_back(scalar(new_slack(row, -1.0), -1.0));
          add_row(std::move(e), 0.0, "tap_real_nonneg", fmt::format("{} Re W at {}", tag, net.labels[sec]));
        }
      }
      // W_(ij, j) = W_(i, ji)
      {
        HermitianFunctional w(f_.w_block, m);
        w.add_re(s.ij, s.j, 1.0);
        w.add_re(s.i, s.ji, -1.0);
        add_row(w.take(), 0.0, "tap_cross_re", fmt::format("{} cross product (re)", tag));
      }
      {
        HermitianFunctional w(f_.w_block, m);
        w.add_im(s.ij, s.j, 1.0);
        w.add_im(s.i, s.ji, -1.0);
        add_row(w.take(), 0.0, "tap_cross_im", fmt::format("{} cross product (im)", tag));
      }
    }
  }

  Formulation f_;
  std::size_t n_scalars_ = 0;
};

}  // namespace detail

/// Assembles the relaxed program over an augmented network.
inline Formulation assemble(const AugmentedNetwork& aug, const FormulationOptions& opts) {
  opts.validate();
  if (opts.conventional_mode && !aug.flex.empty())
    throw ValidationError("conventional mode requires a network without flexible lines");
  Formulation f = detail::Assembler(aug, opts).build();
  check_program(f.program);
  return f;
}

/// Copy of a case with every flexible line demoted to a constant branch at
/// its current (rated) admittance.
inline NetworkCase conventional_case(const NetworkCase& c) {
  NetworkCase out = c;
  out.flex_lines.clear();
  return out;
}

struct Dispatch {
  std::vector<double> p;  // p.u., one entry per case generator (0 when out of service)
  std::vector<double> q;
};

inline Dispatch extract_dispatch(const Formulation& f, const BlockMatrix& x) {
  Dispatch d;
  d.p.assign(f.network.base.generators.size(), 0.0);
  d.q.assign(f.network.base.generators.size(), 0.0);
  for (const auto& g : f.generators) {
    d.p[g.generator] = g.p.eval(x[f.scalar_block]);
    d.q[g.generator] = g.q.eval(x[f.scalar_block]);
  }
  return d;
}

struct ObjectiveBreakdown {
  double cost = 0.0;     // sum of f_i(P_Gi), $/h
  double penalty = 0.0;  // wq * sum Q_Gi (MVAr)
  [[nodiscard]] double total() const { return cost + penalty; }
};

/// Generation cost and reactive penalty of a dispatch.
inline ObjectiveBreakdown objective_value(const NetworkCase& c, const Dispatch& d, double wq) {
  ObjectiveBreakdown o;
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    if (!c.generators[g].in_service) continue;
    o.cost += c.generators[g].cost_mw(d.p[g] * c.base_mva);
    o.penalty += wq * d.q[g] * c.base_mva;
  }
  return o;
}

inline ObjectiveBreakdown objective_value(const Formulation& f, const BlockMatrix& x) {
  return objective_value(f.network.base, extract_dispatch(f, x), f.options.wq);
}

/// Hermitian W over the augmented buses held by a program point.
inline Eigen::MatrixXcd w_matrix(const Formulation& f, const BlockMatrix& x) {
  return collapse_embedding(x[f.w_block]);
}

/// Lifts a physical operating point into program variables: W = v v^H with
/// secondaries sqrt(k) V, dispatch offsets from (P, Q), slacks from their
/// rows and epigraphs at equality. Used to test relaxation soundness.
inline BlockMatrix lift_point(const Formulation& f, const std::vector<Complex>& v, const std::vector<double>& k,
                              const Dispatch& d) {
  const auto& net = f.network;
  if (v.size() != net.n_original || k.size() != net.flex.size())
    throw ValidationError("lift_point: dimension mismatch");
  Eigen::VectorXcd full(static_cast<Eigen::Index>(net.size()));
  for (std::size_t i = 0; i < net.n_original; ++i) full(static_cast<Eigen::Index>(i)) = v[i];
  for (std::size_t l = 0; l < net.flex.size(); ++l) {
    const auto& s = net.flex[l];
    full(static_cast<Eigen::Index>(s.ij)) = std::sqrt(k[l]) * v[s.i];
    full(static_cast<Eigen::Index>(s.ji)) = std::sqrt(k[l]) * v[s.j];
  }
  BlockMatrix x = zero_blocks(f.program);
  x[f.w_block] = lift_hermitian(full * full.adjoint());
  const double base = net.base.base_mva;
  for (const auto& g : f.generators) {
    if (g.p.var) x[f.scalar_block](static_cast<Eigen::Index>(*g.p.var), 0) = (d.p[g.generator] - g.p.offset) / g.p.sign;
    if (g.q.var) x[f.scalar_block](static_cast<Eigen::Index>(*g.q.var), 0) = (d.q[g.generator] - g.q.offset) / g.q.sign;
    if (g.epigraph_block) {
      const double val = std::sqrt(net.base.generators[g.generator].cost_c2) * base * d.p[g.generator];
      auto& e = x[*g.epigraph_block];
      e << val * val, val, val, 1.0;
    }
  }
  for (const auto& [var, rc] : f.slack_rows) {
    const auto& row = f.program.rows[rc.first];
    const double act = apply_entries(row.entries, x, f.program.blocks);
    x[f.scalar_block](static_cast<Eigen::Index>(var), 0) = (row.rhs - act) / rc.second;
  }
  return x;
}

}  // namespace flexopf
