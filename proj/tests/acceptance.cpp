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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <Eigen/Core>
#include <fmt/format.h>

#include "flexopf/circuit_transform.hpp"
#include "flexopf/oracle.hpp"
#include "flexopf/pipeline.hpp"
#include "flexopf/report.hpp"
#include "micro_instances.hpp"
#include "test_util.hpp"

using namespace flexopf;
using flexopf::testing::data_path;

namespace {

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::cout << fmt::format("{} criterion {}: {}", pass ? "PASS" : "FAIL", id, detail) << std::endl;
  if (!pass) ++failures;
}

bool within_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

// Rank-one results collected for the feasibility criterion.
struct Recovered {
  std::string name;
  const OPFResult* result;
};
std::vector<Recovered> recovered;

// Relaxed and penalized costs per bundled case.
std::vector<std::pair<std::string, const StudyResult*>> studies;

void circuit_equivalence() {
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> mag(0.85, 1.15), ang(-3.14159, 3.14159), kk(0.5, 3.0), bb(-20.0, -0.5);
  double worst = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const Complex vi = std::polar(mag(rng), ang(rng)), vj = std::polar(mag(rng), ang(rng));
    const double k = kk(rng), b = bb(rng);
    const auto a = flexible_line_flow(vi, vj, k, b);
    const auto t = transformer_pair_flow(vi, vj, k, b, 0.0);
    worst = std::max({worst, std::abs(a.s_ij - t.s_ij), std::abs(a.s_ji - t.s_ji)});
  }
  report("1", worst <= 1e-12, fmt::format("{} samples, eps = 0, max |dS| = {:.2e} (limit 1e-12)", n, worst));
}

void tap_consistency() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> mag(0.85, 1.15), ang(-3.14159, 3.14159), unit(0.0, 1.0);
  const double kmin = 0.8, kmax = 3.0;
  int nec_fail = 0, suf_fail = 0;
  double suf_worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const Complex vi = std::polar(mag(rng), ang(rng)), vj = std::polar(mag(rng), ang(rng));
    const double k = kmin + (kmax - kmin) * unit(rng);
    const Complex vij = std::sqrt(k) * vi, vji = std::sqrt(k) * vj;
    if (!check_tap_constraints(vi, vj, vij, vji, kmin, kmax, 1e-9).holds) ++nec_fail;
  }
  for (int s = 0; s < 1000; ++s) {
    // Sample from the clause set itself: range fixes |V_ij|, the phase clauses
    // align it with V_i, and the cross-product clause then determines V_ji.
    const Complex vi = std::polar(mag(rng), ang(rng)), vj = std::polar(mag(rng), ang(rng));
    const double wij = std::norm(vi) * (kmin + (kmax - kmin) * unit(rng));
    const Complex vij = std::polar(std::sqrt(wij), std::arg(vi));
    const Complex vji = std::conj(vij) * vj / std::conj(vi);
    if (!check_tap_constraints(vi, vj, vij, vji, kmin, kmax, 1e-9).holds) {
      ++suf_fail;
      continue;
    }
    const double k = std::norm(vij) / std::norm(vi);
    suf_worst = std::max({suf_worst, std::abs(std::sqrt(k) * vi - vij), std::abs(std::sqrt(k) * vj - vji)});
  }
  const bool pass = nec_fail == 0 && suf_fail == 0 && suf_worst <= 1e-9;
  report("2", pass,
         fmt::format("necessity {} / 1000 violations; sufficiency {} / 1000 off-set, max secondary error {:.2e} "
                     "(limit 1e-9)",
                     nec_fail, suf_fail, suf_worst));
}

std::map<std::string, StudyResult> tiny_results;

void tiny_sandwich() {
  for (const std::string name : {"case2_flex", "case3_flex"}) {
    const auto base = read_matpower_file(data_path(name + ".m"));
    const auto cfg = read_flex_config_file(data_path(name + ".cfg"));
    auto& s = tiny_results[name] = run_study(base, cfg, PipelineOptions::from(cfg));
    studies.emplace_back(name, &s);
    const auto o = brute_force_opf(s.network);
    // The relaxed value is known to within the duality gap; its dual objective bounds it from below.
    const double sdp = s.relaxed.objective.cost, bound = s.relaxed.lower_bound, pen = s.penalized.objective.cost;
    const bool pass = s.relaxed.status == SolverStatus::kOptimal && s.penalized.exact() && bound <= o.cost &&
                      o.cost <= pen + o.delta_grid && within_rel(pen, o.cost, 0.01);
    if (s.penalized.exact()) recovered.push_back({name + " penalized", &s.penalized});
    if (s.relaxed.exact()) recovered.push_back({name + " relaxed", &s.relaxed});
    report("3 (" + name + ")", pass,
           fmt::format("sdp {:.6f} (dual bound {:.6f}) <= oracle {:.6f} <= penalized {:.6f} + delta {:.3f}; "
                       "penalized rank {}, |pen - oracle| / oracle = {:.3e} (limit 1e-2); {} grid points",
                       sdp, bound, o.cost, pen, o.delta_grid, s.penalized.rank.declared_rank,
                       std::abs(pen - o.cost) / o.cost, o.evaluated));
  }
}

StudyResult study118;
std::vector<CompareRow> compare118;

bool cli_validates(const StudyResult& s, const FlexConfig& cfg) {
  const auto path = std::filesystem::temp_directory_path() / "flexopf_acceptance_penalized.result";
  ResultContext ctx;
  ctx.pmax_flow_mw = cfg.pmax_flow_mw;
  ctx.epsilon = cfg.epsilon;
  ctx.both_ends = cfg.both_ends;
  std::ofstream(path) << write_result(s.network, s.penalized, ctx, s.gap);
  const std::string cmd = fmt::format("{} validate --case {} --flex-config {} --result {} > /dev/null 2>&1",
                                      FLEXOPF_CLI, data_path("case118.m"), data_path("case118_flex.cfg"),
                                      path.string());
  return std::system(cmd.c_str()) == 0;
}

void case118() {
  const auto& base = flexopf::testing::case118();
  const auto& cfg = flexopf::testing::config118();
  const auto opt = PipelineOptions::from(cfg);
  study118 = run_study(base, cfg, opt);
  studies.emplace_back("case118", &study118);
  const auto& r = study118.relaxed;
  const auto& p = study118.penalized;
  if (p.exact()) recovered.push_back({"case118 penalized", &p});

  report("4a", r.status == SolverStatus::kOptimal && within_rel(r.objective.cost, 132269.0, 0.01) &&
                   r.rank.declared_rank == 2,
         fmt::format("relaxed cost {:.1f} vs 132269 (rel {:.2e}, limit 1e-2), declared rank {} (want 2)",
                     r.objective.cost, std::abs(r.objective.cost - 132269.0) / 132269.0, r.rank.declared_rank));

  const double gap = study118.gap.value_or(0.0);
  const bool b_ok = p.status == SolverStatus::kOptimal && within_rel(p.objective.cost, 134555.0, 0.01) &&
                    p.rank.declared_rank == 1 && std::abs(gap - 1.017) <= 0.01;
  report("4b", b_ok,
         fmt::format("penalized cost {:.1f} vs 134555 (rel {:.2e}, limit 1e-2), declared rank {} (want 1), "
                     "gap bound {:.4f} vs 1.017 (limit +-0.01)",
                     p.objective.cost, std::abs(p.objective.cost - 134555.0) / 134555.0, p.rank.declared_rank, gap));

  compare118 = run_compare(base, cfg, opt, {200.0, 190.0});
  const double conv_want[] = {138707.0, 143811.0}, saved_want[] = {4152.0, 7920.0}, flex_want[] = {134555.0, 135891.0};
  bool c_ok = true;
  std::string detail;
  for (std::size_t i = 0; i < compare118.size(); ++i) {
    const auto& row = compare118[i];
    const double conv = row.conventional.objective.cost, saved = row.saved();
    const bool ok = row.conventional.status == SolverStatus::kOptimal && row.flexible.status == SolverStatus::kOptimal &&
                    within_rel(conv, conv_want[i], 0.01) && within_rel(saved, saved_want[i], 0.10);
    c_ok = c_ok && ok;
    if (row.flexible.exact()) recovered.push_back({fmt::format("case118 flexible {:.0f} MW", row.limit_mw), &row.flexible});
    if (row.conventional.exact())
      recovered.push_back({fmt::format("case118 conventional {:.0f} MW", row.limit_mw), &row.conventional});
    detail += fmt::format("{}{:.0f} MW: conventional {:.1f} vs {:.0f} (rel {:.2e}), saved {:.1f} vs {:.0f} (rel {:.2e}), "
                          "flexible {:.1f} vs {:.0f}",
                          i ? "; " : "", row.limit_mw, conv, conv_want[i], std::abs(conv - conv_want[i]) / conv_want[i],
                          saved, saved_want[i], std::abs(saved - saved_want[i]) / saved_want[i],
                          row.flexible.objective.cost, flex_want[i]);
  }
  report("4c", c_ok && compare118.size() == 2, detail + " (limits: 1e-2 on cost, 1e-1 on saved)");

  const double k_want[] = {1.256, 2.000, 1.901, 1.575, 1.270};
  std::string ks;
  bool k_ok = p.k.size() == 5;
  for (std::size_t l = 0; l < p.k.size() && l < 5; ++l) {
    const bool ok = std::abs(p.k[l].k - k_want[l]) <= 0.05;
    k_ok = k_ok && ok;
    ks += fmt::format("{}{}-{} {:.4f} vs {:.3f}{}", l ? ", " : "", study118.network.flex_lines[l].from,
                      study118.network.flex_lines[l].to, p.k[l].k, k_want[l], ok ? "" : " (off)");
  }
  if (k_ok) {
    report("4d", true, ks + " (limit +-0.05)");
  } else {
    const bool valid = p.exact() && cli_validates(study118, cfg);
    report("4d", b_ok && valid,
           ks + fmt::format(" (limit +-0.05); alternative-optimum allowance: 4b {}, validate {}",
                            b_ok ? "holds" : "fails", valid ? "PASS" : "FAIL"));
  }
}

void feasibility() {
  bool all = !recovered.empty();
  std::string detail;
  for (const auto& [name, r] : recovered) {
    bool ok = r->residuals.has_value();
    if (ok) {
      const auto& res = *r->residuals;
      double loss = 0.0;
      for (double x : res.coupling_loss) loss = std::max(loss, x);
      ok = res.max_abs_augmented <= 1e-5 && res.limits_ok(1e-6);
      detail += fmt::format("{}{}: augmented {:.1e}, original {:.1e} (max coupling loss {:.1e}), tightest slack {:.1e}",
                            detail.empty() ? "" : "; ", name, res.max_abs_augmented, res.max_abs, loss,
                            res.worst.slack);
    }
    all = all && ok;
  }
  report("5", all, detail + " (limits: 1e-5 balance, 1e-6 on limits)");
}

void ordering() {
  bool all = true;
  std::string detail;
  for (const auto& [name, s] : studies) {
    const double r = s->relaxed.objective.cost, p = s->penalized.objective.cost;
    const bool ok = r <= p * (1.0 + 1e-9);
    all = all && ok;
    detail += fmt::format("{}{} {:.3f} <= {:.3f}", detail.empty() ? "" : "; ", name, r, p);
  }
  for (const auto& row : compare118) {
    // The conventional rows use the penalty too; their own relaxed bound is not part of the run.
    detail += fmt::format("; flexible {:.0f} MW {:.1f} <= conventional {:.1f}", row.limit_mw,
                          row.flexible.objective.cost, row.conventional.objective.cost);
  }
  report("6", all && studies.size() == 3, detail);
}

void solver_contract() {
  Eigen::setNbThreads(1);
  bool all = true;
  std::string detail;
  const std::pair<std::string, std::pair<ConicProgram, double>> cases[] = {
      {"quadratic", {flexopf::testing::quadratic_micro(), 0.0}},
      {"trace", {flexopf::testing::trace_micro(), 1.0}},
      {"trace x10", {flexopf::testing::trace_micro(10.0), 10.0}},
  };
  for (const auto& [name, c] : cases) {
    const auto a = solve(c.first), b = solve(c.first);
    const bool ok = a.status == SolverStatus::kOptimal && a.rel_gap <= 1e-8 &&
                    std::abs(a.primal_objective - c.second) <= 1e-7 * std::max(1.0, std::abs(c.second)) &&
                    a.log == b.log;
    all = all && ok;
    detail += fmt::format("{}{}: gap {:.1e}, objective {:.9f} vs {}, logs {}", detail.empty() ? "" : "; ", name,
                          a.rel_gap, a.primal_objective, c.second, a.log == b.log ? "identical" : "differ");
  }
  report("7", all, detail + " (limit 1e-8 gap)");
}

}  // namespace

int main() {
  circuit_equivalence();
  tap_consistency();
  tiny_sandwich();
  case118();
  feasibility();
  ordering();
  solver_contract();
  std::cout << fmt::format("{} criteria failed", failures) << std::endl;
  return failures == 0 ? 0 : 1;
}
