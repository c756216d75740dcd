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

// Exactness checks and recovery of a physical operating point from W.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "flexopf/circuit_transform.hpp"
#include "flexopf/network.hpp"

namespace flexopf {

struct RankReport {
  std::vector<double> eigenvalues;  // descending, at most five kept
  double ratio = 0.0;               // lambda_2 / lambda_1
  int declared_rank = 0;
  double threshold = 1e-5;
  double min_eigenvalue = 0.0;
};

class RankError : public std::runtime_error {
 public:
  RankError(const std::string& what, RankReport r) : std::runtime_error(what), report(std::move(r)) {}
  RankReport report;
};

/// Eigenvalues of the (symmetrized) Hermitian W and the rank they imply:
/// the count of eigenvalues above threshold * lambda_1.
inline RankReport numeric_rank(const Eigen::MatrixXcd& w, double threshold = 1e-5) {
  if (!(threshold > 0.0)) throw ValidationError("rank threshold must be positive");
  const Eigen::MatrixXcd h = 0.5 * (w + w.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition of W failed");
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const Eigen::Index n = ev.size();
  RankReport r;
  r.threshold = threshold;
  if (n == 0) throw ValidationError("W is empty");
  const double l1 = ev(n - 1);
  r.min_eigenvalue = ev(0);
  for (Eigen::Index i = n - 1; i >= std::max<Eigen::Index>(0, n - 5); --i) r.eigenvalues.push_back(ev(i));
  if (!(l1 > 0.0)) throw RankError(fmt::format("W is degenerate: largest eigenvalue {:.3e}", l1), r);
  r.ratio = n > 1 ? ev(n - 2) / l1 : 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ev(i) > threshold * l1) ++r.declared_rank;
  return r;
}

/// v = sqrt(lambda_1) u_1 with the global phase fixed so that entry `slack`
/// is real and positive. Returns every bus of W (secondaries included).
/// Refuses when the rank report does not declare rank one, unless `project`
/// is set (best-effort rank-one projection, not a certified point).
inline std::vector<Complex> recover_voltages(const Eigen::MatrixXcd& w, std::size_t slack, const RankReport& rank,
                                             bool project = false) {
  if (rank.declared_rank != 1 && !project)
    throw RankError(fmt::format("W has declared rank {} (lambda2/lambda1 = {:.3e}); no unique voltage profile",
                                rank.declared_rank, rank.ratio),
                    rank);
  if (slack >= static_cast<std::size_t>(w.rows())) throw ValidationError("slack index outside W");
  const Eigen::MatrixXcd h = 0.5 * (w + w.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const Eigen::Index n = h.rows();
  const double l1 = es.eigenvalues()(n - 1);
  Eigen::VectorXcd v = std::sqrt(std::max(l1, 0.0)) * es.eigenvectors().col(n - 1);
  const Complex ref = v(static_cast<Eigen::Index>(slack));
  if (std::abs(ref) > 0.0) v *= std::conj(ref) / std::abs(ref);
  std::vector<Complex> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

struct TapRatio {
  double k = 1.0;         // i-side value, clamped if it overshoots by <= 1e-6
  double k_from_j = 1.0;  // the j-side reading
  bool consistent = true; // sides agree within 1e-6 relative
  bool in_range = true;   // inside [k_min - 1e-6, k_max + 1e-6]
};

/// k = W_(ij,ij) / W_ii for each flexible line, cross-checked against the
/// j side.
inline std::vector<TapRatio> extract_k(const Eigen::MatrixXcd& w, const AugmentedNetwork& net, double tol = 1e-6) {
  std::vector<TapRatio> out;
  for (std::size_t l = 0; l < net.flex.size(); ++l) {
    const auto& s = net.flex[l];
    const auto& spec = net.base.flex_lines[l];
    const auto at = [&](std::size_t a) { return w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)).real(); };
    if (!(at(s.i) > 0.0) || !(at(s.j) > 0.0))
      throw ValidationError(fmt::format("flex line {}-{}: nonpositive W diagonal at an endpoint", spec.from, spec.to));
    TapRatio t;
    t.k = at(s.ij) / at(s.i);
    t.k_from_j = at(s.ji) / at(s.j);
    t.consistent = std::abs(t.k - t.k_from_j) <= tol * std::max(1.0, std::abs(t.k));
    if (t.k < spec.k_min - tol || t.k > spec.k_max + tol) t.in_range = false;
    else t.k = std::clamp(t.k, spec.k_min, spec.k_max);
    out.push_back(t);
  }
  return out;
}

/// cost_penalized / cost_sdp. Values below 1 beyond 1e-6 mean the two solves
/// are inconsistent with each other.
inline double gap_bound(double cost_sdp, double cost_penalized) {
  if (!(cost_sdp > 0.0)) throw ValidationError("gap bound needs a positive relaxed cost");
  const double r = cost_penalized / cost_sdp;
  if (r < 1.0 - 1e-6)
    throw std::runtime_error(fmt::format("penalized cost {} below relaxed cost {}: inconsistent solves", cost_penalized, cost_sdp));
  return std::max(r, 1.0);
}

}  // namespace flexopf
