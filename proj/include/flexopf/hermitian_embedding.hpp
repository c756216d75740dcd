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

// Real symmetric embedding of Hermitian matrices.
//
// A Hermitian W = A + iB is PSD iff [[A, -B], [B, A]] is PSD. Programs carry a
// real symmetric 2m x 2m variable X and read W back through
//
//   Re W_ab = X_ab + X_(m+a)(m+b),   Im W_ab = X_(m+a)b - X_a(m+b),
//
// so the structured point X = embed(W) / 2 reproduces W exactly (the factor
// one half convention). Any PSD X, structured or not, collapses to a PSD W.

#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flexopf/conic_program.hpp"

namespace flexopf {

/// [[Re H, -Im H], [Im H, Re H]].
inline Eigen::MatrixXd embed_hermitian(const Eigen::MatrixXcd& h) {
  const Eigen::Index m = h.rows();
  Eigen::MatrixXd out(2 * m, 2 * m);
  out.topLeftCorner(m, m) = h.real();
  out.topRightCorner(m, m) = -h.imag();
  out.bottomLeftCorner(m, m) = h.imag();
  out.bottomRightCorner(m, m) = h.real();
  return out;
}

/// Hermitian matrix represented by a program variable X (see file comment).
inline Eigen::MatrixXcd collapse_embedding(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.rows() / 2;
  Eigen::MatrixXcd w(m, m);
  w.real() = x.topLeftCorner(m, m) + x.bottomRightCorner(m, m);
  w.imag() = x.bottomLeftCorner(m, m) - x.topRightCorner(m, m);
  // Symmetrize against round-off.
  return 0.5 * (w + w.adjoint());
}

/// Program variable that represents W exactly.
inline Eigen::MatrixXd lift_hermitian(const Eigen::MatrixXcd& w) { return 0.5 * embed_hermitian(w); }

/// Builds linear functionals of W as SDPA entries on the embedding block.
class HermitianFunctional {
 public:
  HermitianFunctional(std::size_t block, std::size_t m) : block_(block), m_(m) {}

  /// Adds coef * Re W_ab.
  void add_re(std::size_t a, std::size_t b, double coef) {
    if (coef == 0.0) return;
    if (a > b) std::swap(a, b);
    if (a == b) {
      push(a, a, coef);
      push(m_ + a, m_ + a, coef);
    } else {
      push(a, b, 0.5 * coef);
      push(m_ + a, m_ + b, 0.5 * coef);
    }
  }

  /// Adds coef * Im W_ab.
  void add_im(std::size_t a, std::size_t b, double coef) {
    if (coef == 0.0 || a == b) return;
    if (a > b) {
      std::swap(a, b);
      coef = -coef;
    }
    push(b, m_ + a, 0.5 * coef);   // X_(m+a)b stored as upper (b, m+a)
    push(a, m_ + b, -0.5 * coef);
  }

  /// Adds Re(coef * W_ab).
  void add_re_of(std::size_t a, std::size_t b, std::complex<double> coef) {
    add_re(a, b, coef.real());
    add_im(a, b, -coef.imag());
  }

  /// Adds Im(coef * W_ab).
  void add_im_of(std::size_t a, std::size_t b, std::complex<double> coef) {
    add_re(a, b, coef.imag());
    add_im(a, b, coef.real());
  }

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry> take() { return std::move(entries_); }

 private:
  void push(std::size_t r, std::size_t c, double v) {
    if (r > c) std::swap(r, c);
    for (auto& e : entries_)
      if (e.row == r && e.col == c) {
        e.value += v;
        return;
      }
    entries_.push_back({block_, r, c, v});
  }

  std::size_t block_;
  std::size_t m_;
  std::vector<Entry> entries_;
};

}  // namespace flexopf
