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

// Solver backends by name. "internal" is the built-in interior-point
// method; "cvxopt" runs tools/sdpa_cvxopt_backend.py on the SDPA export.

#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/ranges.h>

#include "flexopf/conic_program.hpp"
#include "flexopf/solver.hpp"

#ifndef FLEXOPF_CVXOPT_SCRIPT
#define FLEXOPF_CVXOPT_SCRIPT "tools/sdpa_cvxopt_backend.py"
#endif

namespace flexopf {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Objectives and residuals of an externally produced primal-dual pair,
/// measured on the unscaled program.
inline void score_external(const ConicProgram& p, SolverSolution& s) {
  const auto m = static_cast<Eigen::Index>(p.rows.size());
  double bnorm = 0.0, pres = 0.0, dobj = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = p.rows[static_cast<std::size_t>(i)];
    const double r = apply_entries(row.entries, s.x, p.blocks) - row.rhs;
    pres += r * r;
    bnorm += row.rhs * row.rhs;
    dobj += row.rhs * s.y(i);
  }
  s.primal_objective = objective_of(p, s.x);
  s.dual_objective = dobj + p.objective_offset;
  s.primal_residual = std::sqrt(pres) / (1.0 + std::sqrt(bnorm));
  s.z = zero_blocks(p);
  accumulate_entries(p.objective, 1.0, s.z, p.blocks);
  for (Eigen::Index i = 0; i < m; ++i) accumulate_entries(p.rows[static_cast<std::size_t>(i)].entries, -s.y(i), s.z, p.blocks);
  double worst = 0.0, cnorm = 0.0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const double lo = p.blocks[k].kind == BlockKind::kLinear
                          ? s.z[k].minCoeff()
                          : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.z[k], Eigen::EigenvaluesOnly).eigenvalues()(0);
    worst = std::max(worst, -lo);
  }
  for (const auto& e : p.objective) cnorm += e.value * e.value;
  s.dual_residual = worst / (1.0 + std::sqrt(cnorm));
  s.rel_gap = std::abs(s.primal_objective - s.dual_objective) /
              (1.0 + std::abs(s.primal_objective) + std::abs(s.dual_objective));
}

inline SolverSolution solve_cvxopt(const ConicProgram& p, const SolverSettings&) {
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  const char* script_env = std::getenv("FLEXOPF_CVXOPT_SCRIPT");
  const std::string script = script_env ? script_env : FLEXOPF_CVXOPT_SCRIPT;
  if (!fs::exists(script)) throw BackendError(fmt::format("cvxopt backend script not found: {}", script));
  const fs::path dir = fs::temp_directory_path() /
                       fmt::format("flexopf-cvxopt-{}", std::chrono::steady_clock::now().time_since_epoch().count());
  fs::create_directories(dir);
  const fs::path in = dir / "program.dat-s", out = dir / "solution.txt";
  {
    std::ofstream f(in);
    f << write_sdpa(p);
  }
  const std::string cmd = fmt::format("python3 \"{}\" \"{}\" \"{}\"", script, in.string(), out.string());
  const int rc = std::system(cmd.c_str());
  std::ifstream f(out);
  if (rc != 0 || !f) {
    fs::remove_all(dir);
    throw BackendError(fmt::format("cvxopt backend failed (exit {}); is python3 with cvxopt installed?", rc));
  }
  SolverSolution s;
  s.backend = "cvxopt";
  s.x = zero_blocks(p);
  s.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.rows.size()));
  std::string line, tag;
  while (std::getline(f, line)) {
    std::istringstream ls(line);
    ls >> tag;
    if (tag == "status") {
      std::string st;
      ls >> st;
      s.status = st == "optimal" ? SolverStatus::kOptimal : SolverStatus::kNumericalFailure;
    } else if (tag == "y") {
      long i;
      double v;
      ls >> i >> v;
      s.y(i - 1) = v;
    } else if (tag == "x") {
      long b, r, c;
      double v;
      ls >> b >> r >> c >> v;
      auto& blk = s.x[static_cast<std::size_t>(b - 1)];
      if (p.blocks[static_cast<std::size_t>(b - 1)].kind == BlockKind::kLinear) {
        blk(r - 1, 0) = v;
      } else {
        blk(r - 1, c - 1) = v;
        blk(c - 1, r - 1) = v;
      }
    }
  }
  f.close();
  fs::remove_all(dir);
  score_external(p, s);
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

using Backend = std::function<SolverSolution(const ConicProgram&, const SolverSettings&)>;

inline const std::map<std::string, Backend>& backends() {
  static const std::map<std::string, Backend> reg = {
      {"internal", [](const ConicProgram& p, const SolverSettings& s) { return solve(p, s); }},
      {"cvxopt", solve_cvxopt},
  };
  return reg;
}

}  // namespace detail

inline std::vector<std::string> registered_backends() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : detail::backends()) out.push_back(name);
  return out;
}

/// Solves with a named backend. Unknown names raise BackendError listing the
/// registered ones.
inline SolverSolution solve_via_backend(const ConicProgram& p, const std::string& id,
                                        const SolverSettings& settings = {}) {
  const auto& reg = detail::backends();
  const auto it = reg.find(id);
  if (it == reg.end())
    throw BackendError(fmt::format("unknown backend '{}'; registered: {}", id, fmt::join(registered_backends(), ", ")));
  return it->second(p, settings);
}

/// Relative objective disagreement between two solutions; callers flag
/// values above 1e-5.
inline double backend_disagreement(const SolverSolution& a, const SolverSolution& b) {
  return std::abs(a.primal_objective - b.primal_objective) /
         std::max({1.0, std::abs(a.primal_objective), std::abs(b.primal_objective)});
}

}  // namespace flexopf
