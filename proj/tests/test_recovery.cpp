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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "flexopf/circuit_transform.hpp"
#include "flexopf/recovery.hpp"
#include "test_util.hpp"

using namespace flexopf;
using flexopf::testing::data_path;

namespace {

Eigen::VectorXcd sample_voltages(Eigen::Index n, unsigned seed) {
  std::srand(seed);
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = 0.9 + 0.2 * std::rand() / RAND_MAX;
    const double ang = -0.5 + std::rand() / static_cast<double>(RAND_MAX);
    v(i) = std::polar(mag, ang);
  }
  return v;
}

AugmentedNetwork two_bus_aug() {
  const auto base = read_matpower_file(data_path("case2_flex.m"));
  const auto cfg = read_flex_config_file(data_path("case2_flex.cfg"));
  return augment(prepare_case(base, cfg), cfg.epsilon);
}

}  // namespace

TEST(Rank, OuterProductIsRankOne) {
  const auto v = sample_voltages(6, 3);
  const Eigen::MatrixXcd w = v * v.adjoint();
  const auto r = numeric_rank(w);
  EXPECT_EQ(r.declared_rank, 1);
  EXPECT_LE(r.ratio, 1e-12);
  EXPECT_NEAR(r.eigenvalues.front(), v.squaredNorm(), 1e-12);
}

TEST(Rank, TwoComponentsDetected) {
  const auto a = sample_voltages(6, 5), b = sample_voltages(6, 9);
  const Eigen::MatrixXcd w = a * a.adjoint() + 0.01 * b * b.adjoint();
  const auto r = numeric_rank(w);
  EXPECT_EQ(r.declared_rank, 2);
  EXPECT_GT(r.ratio, 1e-5);
}

TEST(Rank, ThresholdControlsDeclaration) {
  const auto a = sample_voltages(4, 1), b = sample_voltages(4, 2);
  const Eigen::MatrixXcd w = a * a.adjoint() + 1e-7 * b * b.adjoint();
  EXPECT_EQ(numeric_rank(w, 1e-5).declared_rank, 1);
  EXPECT_EQ(numeric_rank(w, 1e-10).declared_rank, 2);
  EXPECT_THROW(numeric_rank(w, 0.0), ValidationError);
}

TEST(Rank, DegenerateMatrixThrows) {
  const Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(3, 3);
  EXPECT_THROW(numeric_rank(z), RankError);
  const Eigen::MatrixXcd neg = -Eigen::MatrixXcd::Identity(3, 3);
  EXPECT_THROW(numeric_rank(neg), RankError);
}

TEST(Recover, ReproducesVoltagesUpToSlackPhase) {
  auto v = sample_voltages(5, 11);
  v(2) = std::polar(1.03, 0.0);  // slack reference
  const Eigen::MatrixXcd w = v * v.adjoint();
  const auto got = recover_voltages(w, 2, numeric_rank(w));
  for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(got[static_cast<std::size_t>(i)] - v(i)), 1e-12);
}

TEST(Recover, GlobalRotationIsRemoved) {
  auto v = sample_voltages(5, 13);
  v(0) = std::polar(1.0, 0.0);
  const Complex rot = std::polar(1.0, 17.0 * std::numbers::pi / 180.0);
  const Eigen::VectorXcd u = rot * v;
  const Eigen::MatrixXcd w = u * u.adjoint();
  EXPECT_LT((w - v * v.adjoint()).cwiseAbs().maxCoeff(), 1e-12);  // W cannot see the rotation
  const auto got = recover_voltages(w, 0, numeric_rank(w));
  EXPECT_NEAR(got[0].imag(), 0.0, 1e-14);
  EXPECT_GT(got[0].real(), 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(got[static_cast<std::size_t>(i)] - v(i)), 1e-12);
}

TEST(Recover, RefusesHigherRankUnlessProjecting) {
  const auto a = sample_voltages(4, 21), b = sample_voltages(4, 22);
  const Eigen::MatrixXcd w = a * a.adjoint() + 0.2 * b * b.adjoint();
  const auto r = numeric_rank(w);
  ASSERT_EQ(r.declared_rank, 2);
  EXPECT_THROW(recover_voltages(w, 0, r), RankError);
  const auto p = recover_voltages(w, 0, r, true);
  EXPECT_EQ(p.size(), 4u);
  // The projection is the leading eigenpair: its outer product has W's top eigenvalue.
  Eigen::VectorXcd pv(4);
  for (int i = 0; i < 4; ++i) pv(i) = p[static_cast<std::size_t>(i)];
  EXPECT_NEAR(pv.squaredNorm(), r.eigenvalues.front(), 1e-10);
  EXPECT_THROW(recover_voltages(w, 9, r, true), ValidationError);
}

TEST(ExtractK, ExactOnLiftedPoint) {
  const auto net = two_bus_aug();
  ASSERT_EQ(net.flex.size(), 1u);
  for (double k : {0.8, 1.0, 1.37, 2.2, 3.0}) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(net.size()));
    const auto& s = net.flex[0];
    const Complex vi = std::polar(1.04, 0.0), vj = std::polar(0.97, -0.2);
    v(static_cast<Eigen::Index>(s.i)) = vi;
    v(static_cast<Eigen::Index>(s.j)) = vj;
    v(static_cast<Eigen::Index>(s.ij)) = std::sqrt(k) * vi;
    v(static_cast<Eigen::Index>(s.ji)) = std::sqrt(k) * vj;
    const auto t = extract_k(v * v.adjoint(), net);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_NEAR(t[0].k, k, 1e-12);
    EXPECT_NEAR(t[0].k_from_j, k, 1e-12);
    EXPECT_TRUE(t[0].consistent);
    EXPECT_TRUE(t[0].in_range);
  }
}

TEST(ExtractK, FlagsInconsistentAndOutOfRange) {
  const auto net = two_bus_aug();
  const auto& s = net.flex[0];
  Eigen::VectorXcd v = Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(net.size()), Complex(1.0, 0.0));
  v(static_cast<Eigen::Index>(s.ij)) = std::sqrt(1.5);
  v(static_cast<Eigen::Index>(s.ji)) = std::sqrt(1.6);
  auto t = extract_k(v * v.adjoint(), net);
  EXPECT_FALSE(t[0].consistent);
  EXPECT_TRUE(t[0].in_range);
  v(static_cast<Eigen::Index>(s.ij)) = v(static_cast<Eigen::Index>(s.ji)) = std::sqrt(3.5);
  t = extract_k(v * v.adjoint(), net);
  EXPECT_FALSE(t[0].in_range);
  // A hair past the bound is clamped onto it.
  v(static_cast<Eigen::Index>(s.ij)) = v(static_cast<Eigen::Index>(s.ji)) = std::sqrt(3.0 + 5e-7);
  t = extract_k(v * v.adjoint(), net);
  EXPECT_TRUE(t[0].in_range);
  EXPECT_EQ(t[0].k, 3.0);
}

TEST(GapBound, Values) {
  EXPECT_DOUBLE_EQ(gap_bound(100.0, 100.0), 1.0);
  EXPECT_NEAR(gap_bound(132269.0, 134555.0), 1.017, 5e-4);
  EXPECT_DOUBLE_EQ(gap_bound(100.0, 100.0 - 1e-5), 1.0);
  EXPECT_THROW(gap_bound(100.0, 99.0), std::runtime_error);
  EXPECT_THROW(gap_bound(0.0, 1.0), ValidationError);
}
