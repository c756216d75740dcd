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

// Formulation-free checks of operating points and a brute-force optimum for
// very small cases. Nothing in here goes through the conic program; the
// branch equations are written out again on purpose.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flexopf/network.hpp"

namespace flexopf {

struct EvaluationOptions {
  double epsilon = 0.0;     // coupling conductance factor of the augmented model
  bool both_ends = false;   // check active-flow limits at both terminals
  double limit_tol = 1e-6;  // a limit counts as violated beyond this
};

struct ConstraintSlack {
  std::string name;
  double slack = 0.0;  // >= 0 when satisfied
};

struct ResidualReport {
  std::vector<Complex> mismatch;            // per bus, p.u., original equations
  std::vector<Complex> mismatch_augmented;  // with the coupling loss booked
  std::vector<double> coupling_loss;        // per bus, p.u.
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double max_abs_augmented = 0.0;
  double mean_abs_augmented = 0.0;
  std::vector<ConstraintSlack> slacks;
  ConstraintSlack worst;  // smallest slack
  std::size_t worst_bus = 0;

  [[nodiscard]] bool limits_ok(double tol) const { return worst.slack >= -tol; }
};

namespace oracle_detail {

struct Flow {
  Complex from, to;
};

/// Terminal injections of one branch: pi model with the tap on the from
/// side, or a flexible line with its susceptance scaled by k.
inline Flow flow_of(const Branch& br, const FlexLineSpec* flex, double k, Complex vf, Complex vt) {
  Complex ys;
  Complex t{1.0, 0.0};
  if (flex) {
    ys = k * Complex(flex->g_rated, flex->b_rated);
  } else {
    const double d = br.resistance * br.resistance + br.reactance * br.reactance;
    ys = Complex(br.resistance / d, -br.reactance / d);
    const double shift = br.shift_deg * std::numbers::pi / 180.0;
    t = std::polar(br.tap, shift);
  }
  const Complex half(0.0, br.charging_b / 2.0);
  const Complex i_f = (ys + half) / std::norm(t) * vf - ys / std::conj(t) * vt;
  const Complex i_t = -ys / t * vf + (ys + half) * vt;
  return {vf * std::conj(i_f), vt * std::conj(i_t)};
}

/// Net complex power leaving each bus through shunts and branches.
inline std::vector<Complex> withdrawals(const NetworkCase& c, const std::vector<Complex>& v,
                                        const std::vector<double>& k, std::vector<Flow>* flows = nullptr) {
  std::vector<Complex> out(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    out[i] = Complex(c.buses[i].shunt_g, -c.buses[i].shunt_b) * std::norm(v[i]);
  if (flows) flows->assign(c.branches.size(), Flow{});
  for (std::size_t b = 0; b < c.branches.size(); ++b) {
    const auto& br = c.branches[b];
    if (!br.in_service) continue;
    const FlexLineSpec* flex = nullptr;
    double kk = 1.0;
    for (std::size_t l = 0; l < c.flex_lines.size(); ++l)
      if (c.flex_lines[l].branch_index == b) {
        flex = &c.flex_lines[l];
        kk = k[l];
      }
    const std::size_t f = c.bus_index(br.from), t = c.bus_index(br.to);
    const Flow fl = flow_of(br, flex, kk, v[f], v[t]);
    out[f] += fl.from;
    out[t] += fl.to;
    if (flows) (*flows)[b] = fl;
  }
  return out;
}

/// Active power dissipated in the two coupling conductances of each flexible
/// line, booked at the primary buses.
inline std::vector<double> coupling_losses(const NetworkCase& c, const std::vector<Complex>& v,
                                           const std::vector<double>& k, double epsilon) {
  std::vector<double> out(c.buses.size(), 0.0);
  if (epsilon == 0.0) return out;
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) {
    const auto& f = c.flex_lines[l];
    const double gc = epsilon * std::abs(f.b_rated);
    const double s = std::sqrt(k[l]) - 1.0;
    const std::size_t i = c.bus_index(f.from), j = c.bus_index(f.to);
    out[i] += gc * s * s * std::norm(v[i]);
    out[j] += gc * s * s * std::norm(v[j]);
  }
  return out;
}

}  // namespace oracle_detail

/// Evaluates the AC equations and every operating limit at a given point.
/// `v`, `p_g`, `q_g` are in p.u. and indexed like the case's buses and
/// generators; `k` has one entry per flexible line.
inline ResidualReport evaluate_acopf_point(const NetworkCase& c, const std::vector<Complex>& v,
                                           const std::vector<double>& p_g, const std::vector<double>& q_g,
                                           const std::vector<double>& k, const EvaluationOptions& opt = {}) {
  if (v.size() != c.buses.size() || p_g.size() != c.generators.size() || q_g.size() != c.generators.size() ||
      k.size() != c.flex_lines.size())
    throw ValidationError("evaluate_acopf_point: dimension mismatch");
  ResidualReport r;
  std::vector<oracle_detail::Flow> flows;
  const auto out = oracle_detail::withdrawals(c, v, k, &flows);
  r.coupling_loss = oracle_detail::coupling_losses(c, v, k, opt.epsilon);
  std::vector<Complex> gen(c.buses.size());
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    if (c.generators[g].in_service) gen[c.bus_index(c.generators[g].bus)] += Complex(p_g[g], q_g[g]);
  r.mismatch.resize(c.buses.size());
  r.mismatch_augmented.resize(c.buses.size());
  double best = -1.0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const Complex load(c.buses[i].p_load, c.buses[i].q_load);
    r.mismatch[i] = gen[i] - load - out[i];
    r.mismatch_augmented[i] = r.mismatch[i] - r.coupling_loss[i];
    r.max_abs = std::max(r.max_abs, std::abs(r.mismatch[i]));
    r.mean_abs += std::abs(r.mismatch[i]);
    r.max_abs_augmented = std::max(r.max_abs_augmented, std::abs(r.mismatch_augmented[i]));
    r.mean_abs_augmented += std::abs(r.mismatch_augmented[i]);
    if (std::abs(r.mismatch[i]) > best) {
      best = std::abs(r.mismatch[i]);
      r.worst_bus = i;
    }
  }
  if (!c.buses.empty()) {
    r.mean_abs /= static_cast<double>(c.buses.size());
    r.mean_abs_augmented /= static_cast<double>(c.buses.size());
  }

  auto add = [&](std::string name, double slack) { r.slacks.push_back({std::move(name), slack}); };
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gn = c.generators[g];
    if (!gn.in_service) continue;
    if (std::isfinite(gn.p_min)) add(fmt::format("gen {} (bus {}) P_min", g, gn.bus), p_g[g] - gn.p_min);
    if (std::isfinite(gn.p_max)) add(fmt::format("gen {} (bus {}) P_max", g, gn.bus), gn.p_max - p_g[g]);
    if (std::isfinite(gn.q_min)) add(fmt::format("gen {} (bus {}) Q_min", g, gn.bus), q_g[g] - gn.q_min);
    if (std::isfinite(gn.q_max)) add(fmt::format("gen {} (bus {}) Q_max", g, gn.bus), gn.q_max - q_g[g]);
  }
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const double m = std::abs(v[i]);
    add(fmt::format("bus {} V_min", c.buses[i].id), m - c.buses[i].v_min);
    add(fmt::format("bus {} V_max", c.buses[i].id), c.buses[i].v_max - m);
  }
  for (std::size_t b = 0; b < c.branches.size(); ++b) {
    const auto& br = c.branches[b];
    if (!br.in_service || !std::isfinite(br.p_flow_max)) continue;
    add(fmt::format("branch {}-{} flow (from)", br.from, br.to), br.p_flow_max - std::abs(flows[b].from.real()));
    if (opt.both_ends)
      add(fmt::format("branch {}-{} flow (to)", br.from, br.to), br.p_flow_max - std::abs(flows[b].to.real()));
  }
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) {
    const auto& f = c.flex_lines[l];
    add(fmt::format("flex {}-{} k_min", f.from, f.to), k[l] - f.k_min);
    add(fmt::format("flex {}-{} k_max", f.from, f.to), f.k_max - k[l]);
  }
  r.worst = {"none", std::numeric_limits<double>::infinity()};
  for (const auto& s : r.slacks)
    if (s.slack < r.worst.slack) r.worst = s;
  return r;
}

// ---------------------------------------------------------------------------
// Brute force
//
// The scan runs over generator set-points rather than raw angles: |V| at
// every generator bus, P of every non-slack generator and k of every
// flexible line. Angles and load-bus magnitudes then follow from a Newton
// power flow, and the slack unit picks up the balance. Set-points on their
// bounds are grid values, so optima with active generator or voltage limits
// are reachable exactly.

struct OracleGrid {
  double v_step = 0.01;  // p.u.
  double p_step = 0.05;  // p.u.
  double k_step = 0.05;
  double tol = 1e-3;        // power-flow residual accepted
  double limit_tol = 1e-6;  // operating limits
  double epsilon = 0.04;    // book the coupling loss of the augmented model
  double angle_max_deg = 90.0;  // reject solutions with wider angle spreads
  bool both_ends = false;
  int refine_rounds = 2;  // local rescans around the best points
  int refine_factor = 5;  // step reduction per round
  int refine_candidates = 8;
};

struct OracleResult {
  double cost = 0.0;  // $/h
  std::vector<Complex> v;
  std::vector<double> p_g, q_g, k;
  double delta_grid = 0.0;  // first-order estimate of the grid error, $/h
  std::size_t evaluated = 0;
  std::size_t feasible = 0;
  double landscape_min = 0.0, landscape_max = 0.0;
  /// Best feasible cost per value of the first flexible line's ratio on the
  /// coarse grid (empty without flexible lines).
  std::vector<std::pair<double, double>> cost_by_k;
};

namespace oracle_detail {

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct Layout {
  std::vector<std::size_t> gen_of_bus;  // generator index or kNone
  std::vector<std::size_t> gen_buses, load_buses, non_slack;
  std::size_t slack = 0;
};

inline Layout layout_of(const NetworkCase& c) {
  Layout L;
  L.gen_of_bus.assign(c.buses.size(), kNone);
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    if (!c.generators[g].in_service) continue;
    const std::size_t b = c.bus_index(c.generators[g].bus);
    if (L.gen_of_bus[b] != kNone) throw ValidationError("brute force supports one generator per bus");
    L.gen_of_bus[b] = g;
  }
  L.slack = c.slack_index();
  if (L.gen_of_bus[L.slack] == kNone) throw ValidationError("brute force needs a generator at the slack bus");
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    (L.gen_of_bus[i] != kNone ? L.gen_buses : L.load_buses).push_back(i);
    if (i != L.slack) L.non_slack.push_back(i);
  }
  return L;
}

/// Newton power flow: angles of the non-slack buses and magnitudes of the
/// load buses, given generator-bus magnitudes, non-slack injections `p_set`
/// (per bus, p.u.) and k. The coupling loss enters the balance. Returns the
/// final residual; `v` holds the solution.
inline double power_flow(const NetworkCase& c, const Layout& L, std::vector<Complex>& v,
                         const std::vector<double>& p_set, const std::vector<double>& k, double epsilon) {
  const std::size_t na = L.non_slack.size(), nl = L.load_buses.size();
  const auto n = static_cast<Eigen::Index>(na + nl);
  if (n == 0) return 0.0;
  Eigen::VectorXd x(n);
  for (std::size_t a = 0; a < na; ++a) x(static_cast<Eigen::Index>(a)) = std::arg(v[L.non_slack[a]]);
  for (std::size_t a = 0; a < nl; ++a) x(static_cast<Eigen::Index>(na + a)) = std::abs(v[L.load_buses[a]]);
  const auto put = [&](const Eigen::VectorXd& xx, std::vector<Complex>& vv) {
    for (std::size_t a = 0; a < na; ++a)
      vv[L.non_slack[a]] = std::polar(std::abs(vv[L.non_slack[a]]), xx(static_cast<Eigen::Index>(a)));
    for (std::size_t a = 0; a < nl; ++a) {
      const std::size_t i = L.load_buses[a];
      vv[i] = std::polar(xx(static_cast<Eigen::Index>(na + a)), std::arg(vv[i]));
    }
  };
  const auto residual = [&](const std::vector<Complex>& vv) {
    const auto out = withdrawals(c, vv, k);
    const auto loss = coupling_losses(c, vv, k, epsilon);
    Eigen::VectorXd r(n);
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = L.non_slack[a];
      r(static_cast<Eigen::Index>(a)) = p_set[i] - c.buses[i].p_load - out[i].real() - loss[i];
    }
    for (std::size_t a = 0; a < nl; ++a) {
      const std::size_t i = L.load_buses[a];
      r(static_cast<Eigen::Index>(na + a)) = -c.buses[i].q_load - out[i].imag();
    }
    return r;
  };
  put(x, v);
  Eigen::VectorXd r = residual(v);
  for (int it = 0; it < 25 && r.lpNorm<Eigen::Infinity>() > 1e-11; ++it) {
    Eigen::MatrixXd jac(n, n);
    for (Eigen::Index d = 0; d < n; ++d) {
      Eigen::VectorXd xp = x;
      xp(d) += 1e-7;
      std::vector<Complex> vp = v;
      put(xp, vp);
      jac.col(d) = (residual(vp) - r) / 1e-7;
    }
    const Eigen::VectorXd dx = jac.fullPivLu().solve(-r);
    if (!dx.allFinite()) break;
    x += dx;
    for (std::size_t a = 0; a < nl; ++a)
      if (!(x(static_cast<Eigen::Index>(na + a)) > 0.3)) return std::numeric_limits<double>::infinity();
    put(x, v);
    r = residual(v);
  }
  return r.lpNorm<Eigen::Infinity>();
}

struct Candidate {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> coords;
  std::vector<Complex> v;
  std::vector<double> p_g, q_g, k;
};

/// Coordinates: |V| of each generator bus, P of each non-slack generator
/// (p.u.), k of each flexible line.
struct Evaluator {
  const NetworkCase& c;
  const Layout& L;
  const OracleGrid& grid;
  std::vector<Complex> warm;

  std::optional<Candidate> operator()(const std::vector<double>& x) {
    Candidate cand;
    cand.coords = x;
    std::vector<Complex> v = warm;
    std::vector<double> p_set(c.buses.size(), 0.0);
    std::size_t pos = 0;
    for (std::size_t i : L.gen_buses) v[i] = std::polar(x[pos++], std::arg(v[i]));
    for (std::size_t i : L.gen_buses)
      if (i != L.slack) p_set[i] = x[pos++];
    std::vector<double> k(c.flex_lines.size());
    for (double& kk : k) kk = x[pos++];
    v[L.slack] = Complex(std::abs(v[L.slack]), 0.0);

    double res = power_flow(c, L, v, p_set, k, grid.epsilon);
    if (!(res <= grid.tol)) {
      // Retry from a flat start before giving up on the point.
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = Complex(L.gen_of_bus[i] != kNone ? std::abs(v[i]) : 1.0, 0.0);
      res = power_flow(c, L, v, p_set, k, grid.epsilon);
      if (!(res <= grid.tol)) return std::nullopt;
    }
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(std::arg(v[i])) > grid.angle_max_deg * std::numbers::pi / 180.0) return std::nullopt;
    warm = v;

    const auto out = withdrawals(c, v, k);
    const auto loss = coupling_losses(c, v, k, grid.epsilon);
    cand.p_g.assign(c.generators.size(), 0.0);
    cand.q_g.assign(c.generators.size(), 0.0);
    for (std::size_t i : L.gen_buses) {
      const Complex s = out[i] + loss[i] + Complex(c.buses[i].p_load, c.buses[i].q_load);
      cand.p_g[L.gen_of_bus[i]] = i == L.slack ? s.real() : p_set[i];
      cand.q_g[L.gen_of_bus[i]] = s.imag();
    }
    EvaluationOptions eo;
    eo.epsilon = grid.epsilon;
    eo.both_ends = grid.both_ends;
    const auto rep = evaluate_acopf_point(c, v, cand.p_g, cand.q_g, k, eo);
    if (!rep.limits_ok(grid.limit_tol) || rep.max_abs_augmented > grid.tol) return std::nullopt;
    cand.cost = 0.0;
    for (std::size_t g = 0; g < c.generators.size(); ++g)
      if (c.generators[g].in_service) cand.cost += c.generators[g].cost_mw(cand.p_g[g] * c.base_mva);
    cand.v = std::move(v);
    cand.k = std::move(k);
    return cand;
  }
};

inline std::vector<double> axis(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ValidationError("grid steps must be positive");
  if (hi < lo) throw ValidationError("grid axis with an empty range");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  if (hi - out.back() > 1e-9 * std::max(1.0, std::abs(hi))) out.push_back(hi);
  return out;
}

}  // namespace oracle_detail

/// Exhaustive scan over generator set-points and tuning ratios followed by
/// local rescans on finer grids around the best points. Every returned point
/// passes evaluate_acopf_point (augmented balance within `tol`, limits
/// within `limit_tol`), so its cost bounds the optimum from above; the
/// optimum over the box is within about `delta_grid` below it. Intended for
/// cases with at most 4 buses and 2 flexible lines.
inline OracleResult brute_force_opf(const NetworkCase& c, const OracleGrid& grid = {}) {
  if (c.buses.size() > 4 || c.flex_lines.size() > 2)
    throw ValidationError("brute force is limited to 4 buses and 2 flexible lines");
  using namespace oracle_detail;
  const Layout L = layout_of(c);

  std::vector<double> steps, lo, hi;
  for (std::size_t i : L.gen_buses) {
    lo.push_back(c.buses[i].v_min);
    hi.push_back(c.buses[i].v_max);
    steps.push_back(grid.v_step);
  }
  for (std::size_t i : L.gen_buses)
    if (i != L.slack) {
      const auto& g = c.generators[L.gen_of_bus[i]];
      if (!std::isfinite(g.p_min) || !std::isfinite(g.p_max))
        throw ValidationError("brute force needs finite active-power limits");
      lo.push_back(g.p_min);
      hi.push_back(g.p_max);
      steps.push_back(grid.p_step);
    }
  const std::size_t k_first = lo.size();
  for (const auto& f : c.flex_lines) {
    lo.push_back(f.k_min);
    hi.push_back(f.k_max);
    steps.push_back(grid.k_step);
  }
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < lo.size(); ++d) axes.push_back(axis(lo[d], hi[d], steps[d]));

  Evaluator eval{c, L, grid, std::vector<Complex>(c.buses.size(), Complex(1.0, 0.0))};
  OracleResult res;
  res.landscape_min = std::numeric_limits<double>::infinity();
  res.landscape_max = -std::numeric_limits<double>::infinity();
  std::vector<Candidate> top;  // best few, ordered by (cost, coordinates)
  const auto better = [](const Candidate& a, const Candidate& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.coords < b.coords);
  };
  const auto offer = [&](Candidate&& cand) {
    const auto at = std::lower_bound(top.begin(), top.end(), cand, better);
    if (at - top.begin() >= std::max(1, grid.refine_candidates)) return;
    for (const auto& t : top)
      if (t.coords == cand.coords) return;
    top.insert(at, std::move(cand));
    if (top.size() > static_cast<std::size_t>(std::max(1, grid.refine_candidates))) top.pop_back();
  };

  std::map<double, double> by_k;
  const auto scan = [&](const std::vector<std::vector<double>>& ax, bool coarse) {
    std::vector<std::size_t> idx(ax.size(), 0);
    std::vector<double> x(ax.size());
    for (;;) {
      for (std::size_t d = 0; d < ax.size(); ++d) x[d] = ax[d][idx[d]];
      ++res.evaluated;
      if (auto cand = eval(x)) {
        ++res.feasible;
        res.landscape_min = std::min(res.landscape_min, cand->cost);
        res.landscape_max = std::max(res.landscape_max, cand->cost);
        if (coarse && !c.flex_lines.empty()) {
          auto [it, fresh] = by_k.try_emplace(x[k_first], cand->cost);
          if (!fresh) it->second = std::min(it->second, cand->cost);
        }
        offer(std::move(*cand));
      }
      // Odometer, last axis fastest, so consecutive points warm-start Newton.
      std::size_t d = ax.size();
      for (;;) {
        if (d == 0) return;
        --d;
        if (++idx[d] < ax[d].size()) break;
        idx[d] = 0;
      }
    }
  };
  scan(axes, true);
  if (top.empty()) throw std::runtime_error("brute force found no feasible grid point");
  for (const auto& [kv, cost] : by_k) res.cost_by_k.emplace_back(kv, cost);

  std::vector<double> h = steps;
  for (int round = 0; round < grid.refine_rounds; ++round) {
    const auto seeds = top;
    for (double& s : h) s /= grid.refine_factor;
    for (const auto& seed : seeds) {
      std::vector<std::vector<double>> local;
      for (std::size_t d = 0; d < seed.coords.size(); ++d) {
        const double span = h[d] * grid.refine_factor;
        local.push_back(axis(std::max(lo[d], seed.coords[d] - span), std::min(hi[d], seed.coords[d] + span), h[d]));
      }
      scan(local, false);
    }
  }

  const Candidate& best = top.front();
  res.cost = best.cost;
  res.v = best.v;
  res.p_g = best.p_g;
  res.q_g = best.q_g;
  res.k = best.k;
  // Cost change over one final step along each axis.
  for (std::size_t d = 0; d < best.coords.size(); ++d) {
    double worst = 0.0;
    for (double sgn : {-1.0, 1.0}) {
      std::vector<double> xn = best.coords;
      xn[d] = std::clamp(xn[d] + sgn * h[d], lo[d], hi[d]);
      eval.warm = best.v;
      if (auto cand = eval(xn)) worst = std::max(worst, std::abs(cand->cost - best.cost));
    }
    res.delta_grid += worst;
  }
  return res;
}

}  // namespace flexopf
