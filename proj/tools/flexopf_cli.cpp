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

// flexopf: solve / compare / validate front end.
//
// Exit codes: 0 success (penalized W rank one, or validation PASS),
// 2 inexact relaxation or validation FAIL (files still written), 1 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "flexopf/circuit_transform.hpp"
#include "flexopf/flex_config.hpp"
#include "flexopf/log.hpp"
#include "flexopf/matpower.hpp"
#include "flexopf/pipeline.hpp"
#include "flexopf/report.hpp"

namespace fs = std::filesystem;
using namespace flexopf;

namespace {

struct Manifest {
  std::string case_path;
  std::string config_path;
  std::string mode = "flexible";
  std::string compare_mode = "both";
  std::optional<double> epsilon, wq, pmax_flow, scale_pgmax;
  bool both_ends = false;
  bool dump_augmented = false;
  bool project_rank1 = false;
  bool verbose = false;
  std::string out_dir = "flexopf-out";
  std::string backend = "internal";
  std::vector<double> limits;
  std::string result_path;
};

void add_common(CLI::App* app, Manifest& m) {
  app->add_option("--case", m.case_path, "MATPOWER case file")->required();
  app->add_option("--flex-config", m.config_path, "flexible-line configuration")->required();
  app->add_option("--epsilon", m.epsilon, "coupling conductance factor");
  app->add_option("--wq", m.wq, "reactive penalty weight (scaled by wq_scale)");
  app->add_option("--pmax-flow", m.pmax_flow, "uniform active-flow limit, MW");
  app->add_option("--scale-pgmax", m.scale_pgmax, "factor on generator P_max");
  app->add_flag("--both-ends", m.both_ends, "enforce flow limits at both terminals");
  app->add_option("--out-dir", m.out_dir, "output directory");
  app->add_option("--backend", m.backend, "solver backend")->default_val("internal");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

struct Loaded {
  NetworkCase base;
  FlexConfig cfg;
};

Loaded load(const Manifest& m) {
  if (!fs::exists(m.case_path)) throw std::runtime_error(fmt::format("case file not found: {}", m.case_path));
  if (!fs::exists(m.config_path)) throw std::runtime_error(fmt::format("flex config not found: {}", m.config_path));
  Loaded l{read_matpower_file(m.case_path), read_flex_config_file(m.config_path)};
  if (m.epsilon) l.cfg.epsilon = *m.epsilon;
  if (m.wq) l.cfg.wq = *m.wq;
  if (m.pmax_flow) l.cfg.pmax_flow_mw = *m.pmax_flow;
  if (m.scale_pgmax) l.cfg.scale_pgmax = *m.scale_pgmax;
  if (m.both_ends) l.cfg.both_ends = true;
  if (!(l.cfg.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (l.cfg.wq < 0.0) throw ValidationError("wq must be nonnegative");
  return l;
}

PipelineOptions options(const Manifest& m, const FlexConfig& cfg) {
  PipelineOptions o = PipelineOptions::from(cfg);
  o.project_rank1 = m.project_rank1;
  o.backend = m.backend;
  return o;
}

std::string joined(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

int cmd_solve(const Manifest& m) {
  if (m.mode != "flexible" && m.mode != "conventional")
    throw ValidationError(fmt::format("solve: mode must be flexible or conventional, got '{}'", m.mode));
  auto [base, cfg] = load(m);
  const bool conventional = m.mode == "conventional";
  const PipelineOptions opt = options(m, cfg);
  fs::create_directories(m.out_dir);
  const fs::path dir(m.out_dir);

  StudyResult s;
  if (conventional) {
    // Same modifications as the flexible study, lines held fixed.
    s.network = prepare_conventional_case(base, cfg);
    s.relaxed = solve_opf(s.network, 0.0, opt, "relaxed");
    s.penalized = solve_opf(s.network, cfg.wq * cfg.wq_scale, opt, "penalized");
    if (s.relaxed.status == SolverStatus::kOptimal && s.penalized.status == SolverStatus::kOptimal)
      s.gap = gap_bound(s.relaxed.objective.cost, s.penalized.objective.cost);
  } else {
    s = run_study(base, cfg, opt);
  }
  if (m.dump_augmented) spit(dir / "augmented.txt", dump_augmented(augment(s.network, cfg.epsilon)));

  ResultContext ctx;
  ctx.variant = m.mode;
  ctx.pmax_flow_mw = cfg.pmax_flow_mw;
  ctx.epsilon = cfg.epsilon;
  ctx.both_ends = cfg.both_ends;
  spit(dir / "relaxed.result", write_result(s.network, s.relaxed, ctx));
  spit(dir / "penalized.result", write_result(s.network, s.penalized, ctx, s.gap));
  spit(dir / "relaxed.log", joined(s.relaxed.solver_log));
  spit(dir / "penalized.log", joined(s.penalized.solver_log));
  std::string report = study_summary(s);
  if (!s.network.flex_lines.empty()) {
    report += "\n" + tuning_table(s.network, s.penalized);
    spit(dir / "tuning.csv", tuning_table_dsv(s.network, s.penalized));
  }
  spit(dir / "report.txt", report);
  std::cout << report;

  const bool ok = s.penalized.exact() && s.relaxed.status == SolverStatus::kOptimal;
  spit(dir / "status", ok ? "exact\n" : "inexact\n");
  return ok ? 0 : 2;
}

int cmd_compare(const Manifest& m) {
  if (m.compare_mode != "both")
    throw ValidationError(fmt::format("compare needs mode both, got '{}'", m.compare_mode));
  auto [base, cfg] = load(m);
  const PipelineOptions opt = options(m, cfg);
  fs::create_directories(m.out_dir);
  const fs::path dir(m.out_dir);
  std::vector<double> limits = m.limits;
  if (limits.empty() && m.pmax_flow) limits.push_back(*m.pmax_flow);
  const auto rows = run_compare(base, cfg, opt, limits);
  bool ok = true;
  for (const auto& r : rows) {
    for (const OPFResult* res : {&r.flexible, &r.conventional}) {
      FlexConfig at = cfg;
      at.pmax_flow_mw = r.limit_mw;
      const bool flex = res == &r.flexible;
      const NetworkCase c = flex ? prepare_case(base, at) : prepare_conventional_case(base, at);
      ResultContext ctx{flex ? "flexible" : "conventional", r.limit_mw, cfg.epsilon, cfg.both_ends};
      spit(dir / fmt::format("{}_{}.result", ctx.variant, r.limit_mw), write_result(c, *res, ctx));
    }
    ok = ok && r.flexible.exact() && r.conventional.status == SolverStatus::kOptimal;
  }
  const std::string table = compare_table(rows);
  spit(dir / "compare.txt", table);
  spit(dir / "compare.csv", compare_table_dsv(rows));
  std::cout << table;
  spit(dir / "status", ok ? "exact\n" : "inexact\n");
  return ok ? 0 : 2;
}

int cmd_validate(const Manifest& m) {
  auto [base, cfg] = load(m);
  const std::string text = slurp(m.result_path);
  const ResultContext ctx = read_result_context(text);
  FlexConfig at = cfg;
  at.pmax_flow_mw = ctx.pmax_flow_mw;
  const NetworkCase c = ctx.variant == "conventional" ? prepare_conventional_case(base, at) : prepare_case(base, at);
  const StoredPoint p = read_result_point(text, c);
  EvaluationOptions eo;
  eo.epsilon = ctx.epsilon;
  eo.both_ends = ctx.both_ends;
  const ResidualReport r = evaluate_acopf_point(c, p.v, p.p, p.q, p.k, eo);
  const double balance_tol = 1e-5, limit_tol = 1e-6;
  const bool pass = r.max_abs_augmented <= balance_tol && r.limits_ok(limit_tol);
  std::cout << fmt::format("power balance, augmented network: max {:.3e} pu, mean {:.3e} pu (limit {:.0e})\n",
                           r.max_abs_augmented, r.mean_abs_augmented, balance_tol);
  std::cout << fmt::format("power balance, original network:  max {:.3e} pu, mean {:.3e} pu (worst at bus {})\n",
                           r.max_abs, r.mean_abs, c.buses[r.worst_bus].id);
  double loss = 0.0;
  for (double x : r.coupling_loss) loss += x;
  std::cout << fmt::format("coupling-conductance loss: {:.3e} pu in total\n", loss);
  std::cout << fmt::format("tightest limit: {} slack {:.3e} pu\n", r.worst.name, r.worst.slack);
  if (m.verbose)
    for (const auto& s : r.slacks) std::cout << fmt::format("  {:<36} {:+.6e}\n", s.name, s.slack);
  std::cout << (pass ? "PASS\n" : "FAIL\n");
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC OPF with flexible line impedances via a semidefinite relaxation"};
  app.require_subcommand(1);
  Manifest m;

  auto* solve = app.add_subcommand("solve", "relaxed and penalized solves of one case");
  add_common(solve, m);
  solve->add_option("--mode", m.mode, "flexible or conventional")->default_val("flexible");
  solve->add_flag("--dump-augmented", m.dump_augmented, "write the augmented network listing");
  solve->add_flag("--project-rank1", m.project_rank1, "recover a best-effort point from a higher-rank W");

  auto* compare = app.add_subcommand("compare", "flexible vs conventional cost at each flow limit");
  add_common(compare, m);
  compare->add_option("--mode", m.compare_mode, "must be both")->default_val("both");
  compare->add_option("--limits", m.limits, "flow limits in MW (default: from the configuration)")->delimiter(',');

  auto* validate = app.add_subcommand("validate", "re-evaluate a stored result against the AC equations");
  add_common(validate, m);
  validate->add_option("--result", m.result_path, "result file written by solve or compare")->required();
  validate->add_flag("--verbose", m.verbose, "list every constraint slack");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    if (*solve) return cmd_solve(m);
    if (*compare) return cmd_compare(m);
    return cmd_validate(m);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
