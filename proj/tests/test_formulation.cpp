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

#include <random>

#include <gtest/gtest.h>

#include "flexopf/formulation.hpp"
#include "flexopf/oracle.hpp"
#include "flexopf/solver.hpp"
#include "flexopf/pipeline.hpp"
#include "test_util.hpp"

using namespace flexopf;
using flexopf::testing::data_path;

namespace {

Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, int m, bool psd) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  if (psd) return a * a.adjoint();
  Eigen::MatrixXcd h = a + a.adjoint();
  return h;
}

}  // namespace

TEST(Embedding, IdentityEmbedsDiagonally) {
  EXPECT_TRUE(embed_hermitian(Eigen::MatrixXcd::Identity(2, 2)).isApprox(Eigen::MatrixXd::Identity(4, 4)));
}

TEST(Embedding, RankOneDoublesMultiplicity) {
  Eigen::MatrixXcd h(2, 2);
  h << 1.0, Complex(0, 1), Complex(0, -1), 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(embed_hermitian(h));
  const Eigen::Vector4d expect(0, 0, 2, 2);
  EXPECT_LT((es.eigenvalues() - expect).norm(), 1e-12);
}

TEST(Embedding, DefinitenessIsPreserved) {
  std::mt19937_64 rng(17);
  for (int s = 0; s < 50; ++s) {
    const auto p = random_hermitian(rng, 5, true);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(embed_hermitian(p)).eigenvalues().minCoeff(), -1e-10);
    const auto q = random_hermitian(rng, 5, false);
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(q).eigenvalues().minCoeff();
    const double elo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(embed_hermitian(q)).eigenvalues().minCoeff();
    EXPECT_NEAR(lo, elo, 1e-10);
  }
}

TEST(Embedding, FunctionalsReadTheLiftedMatrix) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  const int m = 4;
  const auto w = random_hermitian(rng, m, true);
  const BlockMatrix x{lift_hermitian(w)};
  const std::vector<BlockSpec> blocks{{BlockKind::kPsd, 2 * m, "W"}};
  EXPECT_TRUE(collapse_embedding(x[0]).isApprox(w, 1e-12));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const Complex coef(nd(rng), nd(rng));
      HermitianFunctional re(0, m), im(0, m);
      re.add_re_of(a, b, coef);
      im.add_im_of(a, b, coef);
      EXPECT_NEAR(apply_entries(re.entries(), x, blocks), (coef * w(a, b)).real(), 1e-12);
      EXPECT_NEAR(apply_entries(im.entries(), x, blocks), (coef * w(a, b)).imag(), 1e-12);
    }
}

TEST(Assemble, TwoBusCensusMatchesHandCount) {
  const auto c = parse_matpower_case(flexopf::testing::kTwoBus);
  const auto f = assemble(augment(c, 0.04), FormulationOptions{});
  EXPECT_EQ(f.program.blocks[f.w_block].dim, 4u);
  // P and Q boxes, two epigraph rows, 2x2 balance, 2x2 voltage limits.
  const std::map<std::string, std::size_t> expect{
      {"gen_p_upper", 1},     {"gen_q_upper", 1},     {"cost_epigraph_unit", 1}, {"cost_epigraph_link", 1},
      {"power_balance_p", 2}, {"power_balance_q", 2}, {"voltage_lower", 2},      {"voltage_upper", 2}};
  EXPECT_EQ(f.census, expect);
  EXPECT_EQ(f.program.rows.size(), 12u);
}

TEST(Assemble, FlexFamiliesPerLine) {
  auto c = read_matpower_file(data_path("case2_flex.m"));
  c.flex_lines = bind_flex_lines(c, parse_flex_config("flex 1 2\n").lines);
  const auto f = assemble(augment(c, 0.04), FormulationOptions{});
  EXPECT_EQ(f.program.blocks[f.w_block].dim, 8u);
  EXPECT_EQ(f.census.at("tap_range_lower"), 2u);
  EXPECT_EQ(f.census.at("tap_range_upper"), 2u);
  EXPECT_EQ(f.census.at("tap_imag_zero"), 2u);
  EXPECT_EQ(f.census.at("tap_real_nonneg"), 2u);
  EXPECT_EQ(f.census.at("tap_cross_re"), 1u);
  EXPECT_EQ(f.census.at("tap_cross_im"), 1u);
  std::size_t total = 0;
  for (const auto& [fam, n] : f.census) total += n;
  EXPECT_EQ(total, f.program.rows.size());
}

TEST(Assemble, Case118BlockSizes) {
  const auto& cfg = flexopf::testing::config118();
  const auto flex = prepare_case(flexopf::testing::case118(), cfg);
  const auto conv = prepare_conventional_case(flexopf::testing::case118(), cfg);
  const auto ff = assemble(augment(flex, 0.04), FormulationOptions{});
  EXPECT_EQ(ff.program.blocks[ff.w_block].dim, 256u);
  FormulationOptions co;
  co.conventional_mode = true;
  const auto fc = assemble(augment(conv, 0.04), co);
  EXPECT_EQ(fc.program.blocks[fc.w_block].dim, 236u);
}

TEST(Assemble, RejectsNegativePenalty) {
  FormulationOptions o;
  o.wq = -1.0;
  EXPECT_THROW(assemble(augment(parse_matpower_case(flexopf::testing::kTwoBus), 0.04), o), ValidationError);
}

TEST(Objective, DirectPolynomialValues) {
  auto c = parse_matpower_case(flexopf::testing::kTwoBus);
  Dispatch d{{0.0}, {0.0}};
  EXPECT_DOUBLE_EQ(objective_value(c, d, 0.0).total(), 0.0);
  d.p[0] = 1.0;  // 100 MW
  EXPECT_DOUBLE_EQ(objective_value(c, d, 0.0).cost, 4100.0);
  d.q[0] = 0.3;
  const auto o = objective_value(c, d, 0.2);
  EXPECT_DOUBLE_EQ(o.penalty, 0.2 * 30.0);
  EXPECT_DOUBLE_EQ(o.total(), 4106.0);
}

TEST(Assemble, LiftedFeasiblePointSatisfiesEveryRow) {
  // A feasible AC point of the 3-bus case from an independent power flow.
  auto base = read_matpower_file(data_path("case3_flex.m"));
  const auto c = prepare_case(base, read_flex_config_file(data_path("case3_flex.cfg")));
  const auto L = oracle_detail::layout_of(c);
  std::vector<Complex> v{Complex(1.02, 0), Complex(1.01, 0), Complex(1.0, 0)};
  std::vector<double> p_set(3, 0.0);
  p_set[1] = 0.7;
  const std::vector<double> k{1.4};
  ASSERT_LT(oracle_detail::power_flow(c, L, v, p_set, k, 0.04), 1e-10);
  const auto out = oracle_detail::withdrawals(c, v, k);
  const auto loss = oracle_detail::coupling_losses(c, v, k, 0.04);
  Dispatch d{{0, 0}, {0, 0}};
  for (std::size_t i : L.gen_buses) {
    const Complex s = out[i] + loss[i] + Complex(c.buses[i].p_load, c.buses[i].q_load);
    d.p[L.gen_of_bus[i]] = s.real();
    d.q[L.gen_of_bus[i]] = s.imag();
  }
  EvaluationOptions eo;
  eo.epsilon = 0.04;
  ASSERT_TRUE(evaluate_acopf_point(c, v, d.p, d.q, k, eo).limits_ok(1e-9));

  FormulationOptions fo;
  fo.wq = 0.3;
  const auto f = assemble(augment(c, 0.04), fo);
  const auto x = lift_point(f, v, k, d);
  for (const auto& row : f.program.rows)
    EXPECT_NEAR(apply_entries(row.entries, x, f.program.blocks), row.rhs, 1e-8) << row.label;
  for (std::size_t b = 0; b < f.program.blocks.size(); ++b) {
    if (f.program.blocks[b].kind == BlockKind::kLinear)
      EXPECT_GE(x[b].minCoeff(), -1e-8);
    else
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x[b]).eigenvalues().minCoeff(), -1e-8);
  }
  // The program objective at the lifted point is cost plus penalty.
  const auto o = objective_value(c, d, fo.wq);
  EXPECT_NEAR(objective_of(f.program, x), o.total(), 1e-8 * o.total());
}

TEST(Assemble, PinnedRatioMatchesConventionalMode) {
  auto base = read_matpower_file(data_path("case2_flex.m"));
  auto flex = base;
  flex.flex_lines = bind_flex_lines(flex, parse_flex_config("flex 1 2 kmin=1 kmax=1\n").lines);
  const auto s = opf_solver_settings();
  const auto a = solve(assemble(augment(flex, 0.04), FormulationOptions{}).program, s);
  FormulationOptions co;
  co.conventional_mode = true;
  const auto b = solve(assemble(augment(base, 0.04), co).program, s);
  ASSERT_EQ(a.status, SolverStatus::kOptimal);
  ASSERT_EQ(b.status, SolverStatus::kOptimal);
  EXPECT_NEAR(a.primal_objective, b.primal_objective, 1e-6 * std::abs(b.primal_objective));
}
