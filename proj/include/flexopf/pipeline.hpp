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

// End-to-end workflows: relaxed and penalized solves of a flexible case,
// recovery of the operating point, and the flexible vs conventional
// comparison over flow limits.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexopf/backend.hpp"
#include "flexopf/circuit_transform.hpp"
#include "flexopf/flex_config.hpp"
#include "flexopf/formulation.hpp"
#include "flexopf/log.hpp"
#include "flexopf/oracle.hpp"
#include "flexopf/recovery.hpp"

namespace flexopf {

/// OPF solves stop at 1e-7; the 118-bus instance stalls a little short of
/// 1e-8 in the primal residual and the cost is settled long before.
inline SolverSettings opf_solver_settings() {
  SolverSettings s;
  s.tol_gap = s.tol_primal = s.tol_dual = 1e-7;
  return s;
}

struct PipelineOptions {
  double epsilon = 0.04;
  double rank_threshold = 1e-5;
  bool both_ends = false;
  bool project_rank1 = false;  // best-effort voltages from a higher-rank W
  std::string backend = "internal";
  SolverSettings solver = opf_solver_settings();

  static PipelineOptions from(const FlexConfig& cfg) {
    PipelineOptions o;
    o.epsilon = cfg.epsilon;
    o.rank_threshold = cfg.rank_threshold;
    o.both_ends = cfg.both_ends;
    return o;
  }
};

struct OPFResult {
  std::string label;
  double wq = 0.0;  // $/h per MVAr as applied
  SolverStatus status = SolverStatus::kNumericalFailure;
  int iterations = 0;
  double wall_seconds = 0.0;
  double rel_gap = 0.0, primal_residual = 0.0, dual_residual = 0.0;
  ObjectiveBreakdown objective;
  double lower_bound = 0.0;  // solver dual objective: cost + penalty of the relaxation, from below
  RankReport rank;
  bool recovered = false;
  bool projected = false;
  std::vector<Complex> v;  // original buses
  Dispatch dispatch;
  std::vector<TapRatio> k;
  std::optional<ResidualReport> residuals;
  std::vector<std::string> solver_log;

  [[nodiscard]] bool exact() const { return status == SolverStatus::kOptimal && rank.declared_rank == 1; }
  [[nodiscard]] std::vector<double> k_values() const {
    std::vector<double> out;
    for (const auto& t : k) out.push_back(t.k);
    return out;
  }
};

/// One solve with penalty `wq` ($/h per MVAr) plus rank analysis and, when
/// W is rank one (or projection is requested), the recovered point and its
/// residuals.
inline OPFResult solve_opf(const NetworkCase& c, double wq, const PipelineOptions& opt, std::string label) {
  const AugmentedNetwork aug = augment(c, opt.epsilon);
  FormulationOptions fo;
  fo.wq = wq;
  fo.both_ends = opt.both_ends;
  const Formulation f = assemble(aug, fo);
  logger().info("{}: {} rows, W {}x{}", label, f.program.rows.size(), f.w_dim(), f.w_dim());
  const SolverSolution sol = solve_via_backend(f.program, opt.backend, opt.solver);

  OPFResult r;
  r.label = std::move(label);
  r.wq = wq;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.wall_seconds = sol.wall_seconds;
  r.rel_gap = sol.rel_gap;
  r.primal_residual = sol.primal_residual;
  r.dual_residual = sol.dual_residual;
  r.solver_log = sol.log;
  r.objective = objective_value(f, sol.x);
  r.lower_bound = sol.dual_objective;
  r.dispatch = extract_dispatch(f, sol.x);
  const Eigen::MatrixXcd w = w_matrix(f, sol.x);
  r.rank = numeric_rank(w, opt.rank_threshold);
  r.k = extract_k(w, aug);
  logger().info("{}: {} cost {:.2f} rank {} (ratio {:.3e})", r.label, to_string(sol.status), r.objective.cost,
                r.rank.declared_rank, r.rank.ratio);
  if (r.rank.declared_rank == 1 || opt.project_rank1) {
    const auto full = recover_voltages(w, c.slack_index(), r.rank, opt.project_rank1);
    r.v.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(c.buses.size()));
    r.recovered = true;
    r.projected = r.rank.declared_rank != 1;
    EvaluationOptions eo;
    eo.epsilon = opt.epsilon;
    eo.both_ends = opt.both_ends;
    r.residuals = evaluate_acopf_point(c, r.v, r.dispatch.p, r.dispatch.q, r.k_values(), eo);
  }
  return r;
}

struct StudyResult {
  NetworkCase network;
  OPFResult relaxed, penalized;
  std::optional<double> gap;  // only when both solves converged

  [[nodiscard]] bool certified() const { return gap.has_value() && penalized.exact(); }
};

/// Relaxed (no penalty) and penalized solves of the configured case.
inline StudyResult run_study(const NetworkCase& base, const FlexConfig& cfg, const PipelineOptions& opt) {
  StudyResult s;
  s.network = prepare_case(base, cfg);
  s.relaxed = solve_opf(s.network, 0.0, opt, "relaxed");
  s.penalized = solve_opf(s.network, cfg.wq * cfg.wq_scale, opt, "penalized");
  if (s.relaxed.status == SolverStatus::kOptimal && s.penalized.status == SolverStatus::kOptimal &&
      s.relaxed.objective.cost > 0.0)
    s.gap = gap_bound(s.relaxed.objective.cost, s.penalized.objective.cost);
  return s;
}

struct CompareRow {
  double limit_mw = 0.0;
  OPFResult conventional, flexible;
  [[nodiscard]] double saved() const { return conventional.objective.cost - flexible.objective.cost; }
};

/// Penalized flexible and conventional solves at each flow limit (the
/// configured limit when `limits_mw` is empty).
inline std::vector<CompareRow> run_compare(const NetworkCase& base, const FlexConfig& cfg, const PipelineOptions& opt,
                                           std::vector<double> limits_mw = {}) {
  if (limits_mw.empty()) limits_mw = cfg.compare_limits_mw;
  if (limits_mw.empty()) {
    if (!cfg.pmax_flow_mw) throw ValidationError("compare needs a flow limit (pmax_flow_mw or compare_limits_mw)");
    limits_mw.push_back(*cfg.pmax_flow_mw);
  }
  const double wq = cfg.wq * cfg.wq_scale;
  std::vector<CompareRow> rows;
  for (double lim : limits_mw) {
    FlexConfig at = cfg;
    at.pmax_flow_mw = lim;
    CompareRow row;
    row.limit_mw = lim;
    row.flexible = solve_opf(prepare_case(base, at), wq, opt, fmt::format("flexible@{}", lim));
    row.conventional = solve_opf(prepare_conventional_case(base, at), wq, opt, fmt::format("conventional@{}", lim));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace flexopf
