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

// Primal-dual interior-point method for ConicProgram.
//
// Nesterov-Todd scaling with a Mehrotra predictor-corrector step. The Schur
// complement M_ij = <A_i, W A_j W> is formed densely and factored with a
// Cholesky decomposition, which is adequate for PSD blocks of a few hundred
// rows and about a thousand constraints. Near a low-rank optimum M gets very
// ill-conditioned; the factor is then only used as a preconditioner for CG
// on the implicit operator, and primal steps that would inflate the primal
// residual are shortened.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "flexopf/conic_program.hpp"
#include "flexopf/log.hpp"

namespace flexopf {

struct SolverSettings {
  int max_iterations = 200;
  double tol_gap = 1e-8;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double step_fraction = 0.99;
  double regularization = 1e-9;  // static, relative to the Schur diagonal
  double tol_infeasibility = 1e-8;
  bool normalize_rows = true;
  int threads = 1;

  void validate() const {
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(tol_gap > 0.0 && tol_primal > 0.0 && tol_dual > 0.0)) throw ValidationError("tolerances must be positive");
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) throw ValidationError("step fraction must lie in (0, 1)");
    if (threads < 1) throw ValidationError("threads must be >= 1");
  }
};

enum class SolverStatus { kOptimal, kPrimalInfeasible, kDualInfeasible, kIterationLimit, kNumericalFailure };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kOptimal: return "optimal";
    case SolverStatus::kPrimalInfeasible: return "primal_infeasible";
    case SolverStatus::kDualInfeasible: return "dual_infeasible";
    case SolverStatus::kIterationLimit: return "iteration_limit";
    case SolverStatus::kNumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct IterationRecord {
  int iteration = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double rel_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double step_primal = 0.0;
  double step_dual = 0.0;
  double sigma = 0.0;
};

struct SolverSolution {
  SolverStatus status = SolverStatus::kNumericalFailure;
  BlockMatrix x;          // primal variable
  Eigen::VectorXd y;      // equality multipliers
  BlockMatrix z;          // dual slack C - sum y_i A_i
  double primal_objective = 0.0;  // includes the program's offset
  double dual_objective = 0.0;
  double rel_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::vector<IterationRecord> history;
  std::vector<std::string> log;  // one line per iteration, no timestamps
  std::string backend = "internal";
};

/// One log line per iteration:
/// `iter <k> pobj <.> dobj <.> gap <.> pres <.> dres <.> ap <.> ad <.> sigma <.>`
inline std::string format_iteration(const IterationRecord& r) {
  return fmt::format("iter {:3d} pobj {:+.10e} dobj {:+.10e} gap {:.3e} pres {:.3e} dres {:.3e} ap {:.4f} ad {:.4f} sigma {:.3e}",
                     r.iteration, r.primal_objective, r.dual_objective, r.rel_gap, r.primal_residual,
                     r.dual_residual, r.step_primal, r.step_dual, r.sigma);
}

namespace detail {

struct SymTerm {
  std::size_t r, c;
  double a;  // value * (1 + [r != c])
};

struct RowTerms {
  std::size_t row;
  std::vector<SymTerm> terms;
};

/// Nesterov-Todd scaling of one block: X = G L G^T, Z = G^-T L G^-1 with
/// L = diag(lambda).
struct BlockScaling {
  Eigen::MatrixXd g, g_inv, w;  // w = G G^T
  Eigen::VectorXd lambda;
};

class InteriorPoint {
 public:
  InteriorPoint(const ConicProgram& p, const SolverSettings& s) : prog_(p), set_(s) {
    set_.validate();
    check_program(p);
    m_ = p.rows.size();
    nblocks_ = p.blocks.size();
    prepare();
  }

  SolverSolution run() {
    const auto t0 = std::chrono::steady_clock::now();
    SolverSolution sol;
    initial_point();
    int stall = 0;
    double best_merit = kInf;
    int best_it = 0;
    double progress_ref = kInf;
    BlockMatrix best_x, best_z;
    Eigen::VectorXd best_y;
    for (int it = 0;; ++it) {
      Residuals res = residuals();
      const double merit = std::max({res.pinf / set_.tol_primal, res.dinf / set_.tol_dual, res.rel_gap / set_.tol_gap});
      if (merit < 0.5 * progress_ref) {
        progress_ref = merit;
        best_it = it;
      }
      if (merit < best_merit) {
        best_merit = merit;
        best_x = x_;
        best_z = z_;
        best_y = y_;
      }
      IterationRecord rec;
      rec.iteration = it;
      rec.primal_objective = res.pobj * obj_scale_ * rhs_scale_ + prog_.objective_offset;
      rec.dual_objective = res.dobj * obj_scale_ * rhs_scale_ + prog_.objective_offset;
      rec.rel_gap = res.rel_gap;
      rec.primal_residual = res.pinf;
      rec.dual_residual = res.dinf;
      if (!sol.history.empty()) {
        rec.step_primal = last_ap_;
        rec.step_dual = last_ad_;
        rec.sigma = last_sigma_;
      }
      sol.history.push_back(rec);
      sol.log.push_back(format_iteration(rec));
      logger().debug("{}", sol.log.back());

      SolverStatus status;
      bool done = false;
      if (!std::isfinite(res.pobj) || !std::isfinite(res.dobj)) {
        status = SolverStatus::kNumericalFailure;
        done = true;
      } else if (res.pinf <= set_.tol_primal && res.dinf <= set_.tol_dual && res.rel_gap <= set_.tol_gap) {
        status = SolverStatus::kOptimal;
        done = true;
      } else if (res.dobj > 0 && res.dual_ray / res.dobj < set_.tol_infeasibility) {
        status = SolverStatus::kPrimalInfeasible;
        done = true;
      } else if (res.pobj < 0 && res.primal_ray / -res.pobj < set_.tol_infeasibility) {
        status = SolverStatus::kDualInfeasible;
        done = true;
      } else if (it >= set_.max_iterations) {
        status = SolverStatus::kIterationLimit;
        done = true;
      } else if (stall >= 8 || it - best_it >= 15) {
        // Either the steps collapsed or nothing improved for a while.
        status = SolverStatus::kNumericalFailure;
        done = true;
      }
      if (!done) {
        if (!step(res)) {
          status = SolverStatus::kNumericalFailure;
          done = true;
        } else {
          stall = (last_ap_ < 1e-8 && last_ad_ < 1e-8) ? stall + 1 : 0;
          continue;
        }
      }
      if (status == SolverStatus::kNumericalFailure || status == SolverStatus::kIterationLimit) {
        // Fall back to the best iterate seen; the last one may have drifted.
        if (merit > best_merit && !best_x.empty()) {
          x_ = best_x;
          z_ = best_z;
          y_ = best_y;
          res = residuals();
          rec.primal_objective = res.pobj * obj_scale_ * rhs_scale_ + prog_.objective_offset;
          rec.dual_objective = res.dobj * obj_scale_ * rhs_scale_ + prog_.objective_offset;
        }
      }
      sol.status = status;
      sol.iterations = it;
      sol.primal_objective = rec.primal_objective;
      sol.dual_objective = rec.dual_objective;
      sol.rel_gap = res.rel_gap;
      sol.primal_residual = res.pinf;
      sol.dual_residual = res.dinf;
      break;
    }
    unscale(sol);
    sol.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

 private:
  struct Residuals {
    Eigen::VectorXd rp;
    BlockMatrix rd;
    double pobj = 0, dobj = 0, gap = 0, rel_gap = 0, pinf = 0, dinf = 0;
    double dual_ray = 0, primal_ray = 0;
  };

  void prepare() {
    // Row normalization and objective scaling.
    row_scale_.assign(m_, 1.0);
    rows_.resize(m_);
    b_.resize(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& row = prog_.rows[i];
      double nrm2 = 0.0;
      for (const auto& e : row.entries) nrm2 += e.value * e.value * (e.row == e.col ? 1.0 : 2.0);
      const double s = (set_.normalize_rows && nrm2 > 0.0) ? 1.0 / std::sqrt(nrm2) : 1.0;
      row_scale_[i] = s;
      rows_[i] = row.entries;
      for (auto& e : rows_[i]) e.value *= s;
      b_(static_cast<Eigen::Index>(i)) = row.rhs * s;
    }
    c_ = zero_blocks(prog_);
    accumulate_entries(prog_.objective, 1.0, c_, prog_.blocks);
    double cn = 0.0;
    for (const auto& blk : c_) cn = std::max(cn, blk.cwiseAbs().maxCoeff());
    obj_scale_ = std::max(1.0, cn);
    for (auto& blk : c_) blk /= obj_scale_;
    const double bn = b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0;
    rhs_scale_ = std::max(1.0, bn);
    b_ /= rhs_scale_;

    // Per-block term lists for the Schur complement.
    psd_terms_.assign(nblocks_, {});
    lin_terms_.assign(nblocks_, {});
    for (std::size_t k = 0; k < nblocks_; ++k)
      if (prog_.blocks[k].kind == BlockKind::kLinear) lin_terms_[k].resize(prog_.blocks[k].dim);
    for (std::size_t i = 0; i < m_; ++i) {
      std::vector<std::vector<SymTerm>> per_block(nblocks_);
      for (const auto& e : rows_[i]) {
        if (prog_.blocks[e.block].kind == BlockKind::kLinear)
          lin_terms_[e.block][e.row].push_back({i, 0, e.value});
        else
          per_block[e.block].push_back({e.row, e.col, e.value * (e.row == e.col ? 1.0 : 2.0)});
      }
      for (std::size_t k = 0; k < nblocks_; ++k)
        if (!per_block[k].empty()) psd_terms_[k].push_back({i, std::move(per_block[k])});
    }
    nu_ = 0.0;
    for (const auto& b : prog_.blocks) nu_ += static_cast<double>(b.dim);
    b_norm_ = b_.norm();
    c_norm_ = block_norm(c_);
  }

  static double block_norm(const BlockMatrix& a) {
    double s = 0.0;
    for (const auto& blk : a) s += blk.squaredNorm();
    return std::sqrt(s);
  }

  double inner(const BlockMatrix& a, const BlockMatrix& b) const {
    double s = 0.0;
    for (std::size_t k = 0; k < nblocks_; ++k) s += a[k].cwiseProduct(b[k]).sum();
    return s;
  }

  Eigen::VectorXd apply_a(const BlockMatrix& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) out(static_cast<Eigen::Index>(i)) = apply_entries(rows_[i], x, prog_.blocks);
    return out;
  }

  BlockMatrix apply_at(const Eigen::VectorXd& y) const {
    BlockMatrix out = zero_blocks(prog_);
    for (std::size_t i = 0; i < m_; ++i) accumulate_entries(rows_[i], y(static_cast<Eigen::Index>(i)), out, prog_.blocks);
    return out;
  }

  void initial_point() {
    x_ = zero_blocks(prog_);
    z_ = zero_blocks(prog_);
    y_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < nblocks_; ++k) {
      const double n = static_cast<double>(prog_.blocks[k].dim);
      double xi = std::max(10.0, std::sqrt(n));
      double eta = std::max(10.0, std::sqrt(n));
      // Largest constraint norm within this block.
      std::vector<double> norm2(m_, 0.0);
      for (std::size_t i = 0; i < m_; ++i)
        for (const auto& e : rows_[i])
          if (e.block == k) norm2[i] += e.value * e.value * (e.row == e.col ? 1.0 : 2.0);
      for (std::size_t i = 0; i < m_; ++i) {
        if (norm2[i] == 0.0) continue;
        const double an = std::sqrt(norm2[i]);
        xi = std::max(xi, n * (1.0 + std::abs(b_(static_cast<Eigen::Index>(i)))) / (1.0 + an));
        eta = std::max(eta, an);
      }
      eta = std::max(eta, c_[k].norm());
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        x_[k].setConstant(xi);
        z_[k].setConstant(eta);
      } else {
        x_[k] = xi * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        z_[k] = eta * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      }
    }
  }

  Residuals residuals() const {
    Residuals r;
    const Eigen::VectorXd ax = apply_a(x_);
    r.rp = b_ - ax;
    const BlockMatrix aty = apply_at(y_);
    r.rd = zero_blocks(prog_);
    double rd2 = 0.0, atyz2 = 0.0;
    for (std::size_t k = 0; k < nblocks_; ++k) {
      r.rd[k] = c_[k] - z_[k] - aty[k];
      rd2 += r.rd[k].squaredNorm();
      atyz2 += (aty[k] + z_[k]).squaredNorm();
    }
    r.pobj = inner(c_, x_);
    r.dobj = b_.dot(y_);
    r.gap = inner(x_, z_);
    r.pinf = r.rp.norm() / (1.0 + b_norm_);
    r.dinf = std::sqrt(rd2) / (1.0 + c_norm_);
    r.rel_gap = std::max(std::abs(r.gap), std::abs(r.pobj - r.dobj)) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
    r.dual_ray = std::sqrt(atyz2);
    r.primal_ray = ax.norm();
    return r;
  }

  bool compute_scaling() {
    scale_.assign(nblocks_, {});
    for (std::size_t k = 0; k < nblocks_; ++k) {
      auto& s = scale_[k];
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        const Eigen::ArrayXd xv = x_[k].col(0).array(), zv = z_[k].col(0).array();
        if ((xv <= 0).any() || (zv <= 0).any()) return false;
        s.lambda = (xv * zv).sqrt().matrix();
        s.w = (xv / zv).sqrt().matrix();              // diagonal of W
        s.g = (xv / zv).sqrt().sqrt().matrix();       // diagonal of G
        s.g_inv = s.g.cwiseInverse();
        continue;
      }
      Eigen::LLT<Eigen::MatrixXd> lx(x_[k]), lz(z_[k]);
      if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
      const Eigen::MatrixXd l = lx.matrixL();
      const Eigen::MatrixXd r = lz.matrixL();
      const Eigen::MatrixXd rl = r.transpose() * l;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rl.transpose() * rl);
      if (es.info() != Eigen::Success) return false;
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      if ((ev.array() <= 0).any()) return false;
      s.lambda = ev.cwiseSqrt();
      const Eigen::VectorXd isq = s.lambda.cwiseSqrt().cwiseInverse();
      s.g = l * es.eigenvectors() * isq.asDiagonal();
      const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(
          Eigen::MatrixXd::Identity(l.rows(), l.cols()));
      s.g_inv = s.lambda.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose() * linv;
      s.w = s.g * s.g.transpose();
    }
    return true;
  }

  void assemble_schur(Eigen::MatrixXd& m) const {
    m.setZero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < nblocks_; ++k) {
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        const auto& w = scale_[k].w;
        for (std::size_t idx = 0; idx < lin_terms_[k].size(); ++idx) {
          const auto& terms = lin_terms_[k][idx];
          const double w2 = w(static_cast<Eigen::Index>(idx)) * w(static_cast<Eigen::Index>(idx));
          for (const auto& ti : terms)
            for (const auto& tj : terms)
              if (tj.r <= ti.r) m(static_cast<Eigen::Index>(ti.r), static_cast<Eigen::Index>(tj.r)) += w2 * ti.a * tj.a;
        }
        continue;
      }
      const auto& rows = psd_terms_[k];
      const Eigen::MatrixXd& w = scale_[k].w;
      auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t p = begin; p < rows.size(); p += stride) {
          const auto& ri = rows[p];
          for (std::size_t q = 0; q <= p; ++q) {
            const auto& rj = rows[q];
            double s = 0.0;
            for (const auto& e : ri.terms) {
              for (const auto& f : rj.terms) {
                s += e.a * f.a * (w(e.r, f.r) * w(e.c, f.c) + w(e.r, f.c) * w(e.c, f.r));
              }
            }
            // rows are sorted by constraint index, so ri.row >= rj.row
            m(static_cast<Eigen::Index>(ri.row), static_cast<Eigen::Index>(rj.row)) += 0.5 * s;
          }
        }
      };
      const std::size_t nt = static_cast<std::size_t>(set_.threads);
      if (nt <= 1 || rows.size() < 64) {
        work(0, 1);
      } else {
        // Each thread owns a fixed set of rows of M, so the result does
        // not depend on scheduling.
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(work, t, nt);
        for (auto& th : pool) th.join();
      }
    }
    m = m.selfadjointView<Eigen::Lower>();
  }

  // Factors D^-1/2 M D^-1/2 with D = diag(M); the Jacobi scaling removes
  // most of the spread that builds up near a low-rank optimum.
  bool factor_schur(const Eigen::MatrixXd& m) {
    schur_dinv_ = m.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd ms = schur_dinv_.asDiagonal() * m * schur_dinv_.asDiagonal();
    double reg = set_.regularization;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Eigen::MatrixXd mr = ms;
      mr.diagonal().array() += reg;
      chol_.compute(mr);
      if (chol_.info() == Eigen::Success) return true;
      reg *= 10.0;
    }
    return false;
  }

  Eigen::VectorXd schur_solve(const Eigen::VectorXd& rhs) const {
    return schur_dinv_.cwiseProduct(chol_.solve(schur_dinv_.cwiseProduct(rhs)));
  }

  // Preconditioned conjugate gradients on M dy = rhs, preconditioned by the
  // regularized factor. Converges in a few steps unless M is badly
  // conditioned, in which case it still beats plain refinement.
  Eigen::VectorXd refine_schur(const Eigen::VectorXd& rhs) const {
    // M is applied through A (W A^T(.) W) rather than the assembled matrix,
    // which keeps the direction consistent with how dX is formed.
    auto apply_m = [&](const Eigen::VectorXd& v) { return apply_a(w_apply(apply_at(v))); };
    Eigen::VectorXd x = schur_solve(rhs);
    Eigen::VectorXd r = rhs - apply_m(x);
    const double target = 1e-15 * (1.0 + rhs.norm());
    if (r.norm() <= target) return x;
    Eigen::VectorXd best = x;
    double best_norm = r.norm();
    Eigen::VectorXd zv = schur_solve(r);
    Eigen::VectorXd p = zv;
    double rz = r.dot(zv);
    for (int it = 0; it < 30; ++it) {
      const Eigen::VectorXd mp = apply_m(p);
      const double pmp = p.dot(mp);
      if (!(pmp > 0.0)) break;
      const double alpha = rz / pmp;
      x += alpha * p;
      r -= alpha * mp;
      const double rn = r.norm();
      if (rn < best_norm) {
        best_norm = rn;
        best = x;
      }
      if (rn <= target) break;
      zv = schur_solve(r);
      const double rz_new = r.dot(zv);
      p = zv + (rz_new / rz) * p;
      rz = rz_new;
    }
    return best;
  }

  struct Direction {
    BlockMatrix dx, dz;    // original space
    BlockMatrix dxs, dzs;  // scaled space
    Eigen::VectorXd dy;
  };

  // Applies W to a block-diagonal matrix: W R W.
  BlockMatrix w_apply(const BlockMatrix& r) const {
    BlockMatrix out(nblocks_);
    for (std::size_t k = 0; k < nblocks_; ++k) {
      if (prog_.blocks[k].kind == BlockKind::kLinear)
        out[k] = (scale_[k].w.array().square() * r[k].col(0).array()).matrix();
      else
        out[k] = scale_[k].w * r[k] * scale_[k].w;
    }
    return out;
  }

  Direction solve_direction(const BlockMatrix& d, const Residuals& res) const {
    Direction dir;
    BlockMatrix u(nblocks_);
    for (std::size_t k = 0; k < nblocks_; ++k) {
      if (prog_.blocks[k].kind == BlockKind::kLinear)
        u[k] = (scale_[k].g.array().square() * d[k].col(0).array()).matrix();
      else
        u[k] = scale_[k].g * d[k] * scale_[k].g.transpose();
    }
    const Eigen::VectorXd rhs = res.rp - apply_a(u) + apply_a(w_apply(res.rd));
    dir.dy = refine_schur(rhs);
    const BlockMatrix atdy = apply_at(dir.dy);
    dir.dz.resize(nblocks_);
    dir.dzs.resize(nblocks_);
    dir.dxs.resize(nblocks_);
    dir.dx.resize(nblocks_);
    for (std::size_t k = 0; k < nblocks_; ++k) {
      dir.dz[k] = res.rd[k] - atdy[k];
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        dir.dzs[k] = (scale_[k].g.array() * dir.dz[k].col(0).array() * scale_[k].g.array()).matrix();
        dir.dxs[k] = d[k] - dir.dzs[k];
        dir.dx[k] = (scale_[k].g.array() * dir.dxs[k].col(0).array() * scale_[k].g.array()).matrix();
      } else {
        dir.dzs[k] = scale_[k].g.transpose() * dir.dz[k] * scale_[k].g;
        dir.dzs[k] = 0.5 * (dir.dzs[k] + dir.dzs[k].transpose()).eval();
        dir.dxs[k] = d[k] - dir.dzs[k];
        dir.dx[k] = scale_[k].g * dir.dxs[k] * scale_[k].g.transpose();
        dir.dx[k] = 0.5 * (dir.dx[k] + dir.dx[k].transpose()).eval();
      }
    }
    return dir;
  }

  // Largest alpha with lambda + alpha * ds in the cone (unbounded -> inf).
  double max_step(const BlockMatrix& ds) const {
    double alpha = kInf;
    for (std::size_t k = 0; k < nblocks_; ++k) {
      const auto& lam = scale_[k].lambda;
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        for (Eigen::Index i = 0; i < lam.size(); ++i)
          if (ds[k](i, 0) < 0) alpha = std::min(alpha, -lam(i) / ds[k](i, 0));
        continue;
      }
      const Eigen::VectorXd is = lam.cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd s = is.asDiagonal() * ds[k] * is.asDiagonal();
      double emin;
      if (s.rows() == 1) {
        emin = s(0, 0);
      } else if (s.rows() == 2) {
        const double tr = 0.5 * (s(0, 0) + s(1, 1));
        const double df = 0.5 * (s(0, 0) - s(1, 1));
        emin = tr - std::sqrt(df * df + s(0, 1) * s(1, 0));
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
        emin = es.eigenvalues()(0);
      }
      if (emin < 0) alpha = std::min(alpha, -1.0 / emin);
    }
    return alpha;
  }

  bool step(const Residuals& res) {
    if (!compute_scaling()) return false;
    assemble_schur(schur_);
    if (!factor_schur(schur_)) return false;

    const double mu = res.gap / nu_;
    // Predictor: drive complementarity to zero.
    BlockMatrix d(nblocks_);
    for (std::size_t k = 0; k < nblocks_; ++k) {
      const auto& lam = scale_[k].lambda;
      if (prog_.blocks[k].kind == BlockKind::kLinear) d[k] = -lam;
      else d[k] = Eigen::MatrixXd((-lam).asDiagonal());
    }
    const Direction aff = solve_direction(d, res);
    const double ap_aff = std::min(1.0, max_step(aff.dxs));
    const double ad_aff = std::min(1.0, max_step(aff.dzs));
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nblocks_; ++k) {
      Eigen::MatrixXd xs = ap_aff * aff.dxs[k];
      Eigen::MatrixXd zs = ad_aff * aff.dzs[k];
      const auto& lam = scale_[k].lambda;
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        mu_aff += ((lam + xs).array() * (lam + zs).array()).sum();
      } else {
        xs.diagonal() += lam;
        zs.diagonal() += lam;
        mu_aff += xs.cwiseProduct(zs).sum();
      }
    }
    mu_aff /= nu_;
    double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector: R = sigma mu I - lambda o lambda - dXa o dZa.
    for (std::size_t k = 0; k < nblocks_; ++k) {
      const auto& lam = scale_[k].lambda;
      if (prog_.blocks[k].kind == BlockKind::kLinear) {
        const Eigen::ArrayXd r = sigma * mu - lam.array().square() - aff.dxs[k].col(0).array() * aff.dzs[k].col(0).array();
        d[k] = (r / lam.array()).matrix();
      } else {
        Eigen::MatrixXd r = -0.5 * (aff.dxs[k] * aff.dzs[k] + aff.dzs[k] * aff.dxs[k]);
        r.diagonal().array() += sigma * mu - lam.array().square();
        for (Eigen::Index i = 0; i < r.rows(); ++i)
          for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) *= 2.0 / (lam(i) + lam(j));
        d[k] = r;
      }
    }
    const Direction dir = solve_direction(d, res);
    double ap = std::min(1.0, set_.step_fraction * max_step(dir.dxs));
    const double ad = std::min(1.0, set_.step_fraction * max_step(dir.dzs));
    if (!std::isfinite(ap) || !std::isfinite(ad)) return false;
    // An inaccurate Schur solve shows up as growth of the primal residual;
    // shorten the primal step instead of accepting the drift.
    const Eigen::VectorXd adx = apply_a(dir.dx);
    const double limit = std::max(2.0 * res.pinf, 0.5 * set_.tol_primal) * (1.0 + b_norm_);
    while (ap > 1e-6 && (res.rp - ap * adx).norm() > limit) ap *= 0.5;
    for (std::size_t k = 0; k < nblocks_; ++k) {
      x_[k] += ap * dir.dx[k];
      z_[k] += ad * dir.dz[k];
    }
    y_ += ad * dir.dy;
    last_ap_ = ap;
    last_ad_ = ad;
    last_sigma_ = sigma;
    return true;
  }

  void unscale(SolverSolution& sol) const {
    sol.x = x_;
    sol.z = z_;
    for (auto& blk : sol.x) blk *= rhs_scale_;
    for (auto& blk : sol.z) blk *= obj_scale_;
    sol.y = y_ * obj_scale_;
    for (std::size_t i = 0; i < m_; ++i) sol.y(static_cast<Eigen::Index>(i)) *= row_scale_[i];
    // Objectives in the caller's units.
    sol.primal_objective = objective_of(prog_, sol.x);
    double dobj = prog_.objective_offset;
    for (std::size_t i = 0; i < m_; ++i) dobj += prog_.rows[i].rhs * sol.y(static_cast<Eigen::Index>(i));
    sol.dual_objective = dobj;
  }

  const ConicProgram& prog_;
  SolverSettings set_;
  std::size_t m_ = 0, nblocks_ = 0;
  std::vector<std::vector<Entry>> rows_;
  std::vector<double> row_scale_;
  Eigen::VectorXd b_;
  BlockMatrix c_;
  double obj_scale_ = 1.0, rhs_scale_ = 1.0, nu_ = 0.0, b_norm_ = 0.0, c_norm_ = 0.0;
  std::vector<std::vector<RowTerms>> psd_terms_;
  std::vector<std::vector<std::vector<SymTerm>>> lin_terms_;  // per block, per index: (row, 0, coef)

  BlockMatrix x_, z_;
  Eigen::VectorXd y_;
  std::vector<BlockScaling> scale_;
  Eigen::MatrixXd schur_;
  Eigen::VectorXd schur_dinv_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  double last_ap_ = 0.0, last_ad_ = 0.0, last_sigma_ = 0.0;
};

}  // namespace detail

/// Solves `program` with the built-in interior-point method. Deterministic
/// for identical inputs and settings.
inline SolverSolution solve(const ConicProgram& program, const SolverSettings& settings = {}) {
  detail::InteriorPoint ipm(program, settings);
  return ipm.run();
}

}  // namespace flexopf
