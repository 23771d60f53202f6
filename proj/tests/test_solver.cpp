#include <gtest/gtest.h>

#include <cmath>

#include "relaysec/subproblem.hpp"

using namespace relaysec;

namespace {

LinearExpr scalar_term(int block, double coeff, double constant = 0.0) {
  LinearExpr e;
  e.add(block, RVec::Constant(1, coeff));
  e.add_constant(constant);
  return e;
}

SystemConfig desk_config(double eps) {
  SystemConfig cfg;
  cfg.r_b = db_to_linear(3.0);
  cfg.r_e = 1.0;
  cfg.eps = eps;
  return cfg;
}

// Problem-variable values for a rank-one (q, W): Z coordinates plus the
// epigraph scalars at their tight values.
Assignment z_assignment(const ConicProblem& p, const LiftedPair& lp, const ChannelSet& ch) {
  std::map<std::string, RVec> v{{"Z", hermitian_to_coords(lp.z_big)}};
  for (const Block& b : p.blocks()) {
    if (b.name == "t1") v["t1"] = RVec::Constant(1, numerator_leak(lp.q_big, lp.z_big, ch).norm());
    if (b.name == "t2") v["t2"] = RVec::Constant(1, denominator_leak(lp.z_big, ch).norm());
  }
  return p.make_assignment(v);
}

}  // namespace

TEST(Coordinates, HermitianRoundTripAndTracePairing) {
  Rng rng(71);
  const CMat a = complex_normal(rng, 3, 3);
  const CMat h = a + a.adjoint();
  const CMat c0 = complex_normal(rng, 3, 3);
  const CMat c = c0 + c0.adjoint();
  const RVec x = hermitian_to_coords(h);
  EXPECT_EQ(x.size(), coordinate_count(BlockKind::kHermitian, 3));
  EXPECT_LT((hermitian_from_coords(x, 3) - h).norm(), 1e-13);
  EXPECT_NEAR(hermitian_trace_coeffs(c).dot(x), (c * h).trace().real(), 1e-12);
  const UnembedResult u = unembed_hermitian(real_embed(h));
  EXPECT_LT((u.value - h).norm(), 1e-13);
  EXPECT_LT(u.structure_defect, 1e-13);
}

TEST(ConicProblem, RejectsMalformedInput) {
  ConicProblem p;
  const int x = p.add_scalar("x");
  EXPECT_THROW(p.add_scalar("x"), std::invalid_argument);
  LinearExpr bad;
  bad.add(x, RVec::Ones(2));
  EXPECT_THROW(p.add_inequality(bad), DimensionError);
  EXPECT_THROW(p.add_vector("v", 0), DimensionError);
  LinearExpr ghost;
  ghost.add(5, RVec::Ones(1));
  EXPECT_THROW(p.set_objective(ghost), std::invalid_argument);
}

TEST(Solver, SecondOrderConeValue) {
  // min t s.t. |(1, 1)| <= t  ->  sqrt(2).
  ConicProblem p;
  const int t = p.add_scalar("t");
  p.set_objective(scalar_term(t, 1.0));
  SocConstraint soc;
  soc.bound = scalar_term(t, 1.0);
  soc.vector_part = {LinearExpr{{}, 1.0}, LinearExpr{{}, 1.0}};
  p.add_soc(soc);
  const SolveOutcome r = solve(p);
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.objective, std::sqrt(2.0), 1e-7);
}

TEST(Solver, LinearProgram) {
  // min x + y s.t. x >= 1, y >= 2, x + y >= 4  ->  4.
  ConicProblem p;
  const int x = p.add_scalar("x");
  const int y = p.add_scalar("y");
  LinearExpr obj = scalar_term(x, 1.0);
  obj.add(y, RVec::Ones(1));
  p.set_objective(obj);
  p.add_inequality(scalar_term(x, 1.0, -1.0));
  p.add_inequality(scalar_term(y, 1.0, -2.0));
  LinearExpr sum = scalar_term(x, 1.0, -4.0);
  sum.add(y, RVec::Ones(1));
  p.add_inequality(sum);
  const SolveOutcome r = solve(p);
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.objective, 4.0, 1e-7);
  EXPECT_LT(p.max_violation(r.assignment), 1e-7);
}

TEST(Solver, HermitianMinimumEigenvalue) {
  // min Tr(C X) s.t. Tr X = 1, X PSD  ->  lambda_min(C).
  Rng rng(73);
  for (int t = 0; t < 5; ++t) {
    const CMat a = complex_normal(rng, 3, 3);
    const CMat c = a + a.adjoint();
    ConicProblem p;
    const int x = p.add_hermitian("X", 3, true);
    LinearExpr obj;
    obj.add(x, hermitian_trace_coeffs(c));
    p.set_objective(obj);
    LinearExpr tr;
    tr.add(x, hermitian_trace_coeffs(CMat::Identity(3, 3)));
    tr.add_constant(-1.0);
    p.add_equality(tr);
    const SolveOutcome r = solve(p);
    ASSERT_EQ(r.status, SolveStatus::kOptimal);
    const double lmin = hermitian_eig(c).values(2);
    EXPECT_NEAR(r.objective, lmin, 1e-6);
    const CMat xv = recover_hermitian(r, "X", 3);
    EXPECT_NEAR(xv.trace().real(), 1.0, 1e-7);
  }
}

TEST(Solver, MinTraceWithFixedCorner) {
  // min Tr X s.t. X_11 = 1, X PSD (2 x 2 symmetric)  ->  1.
  ConicProblem p;
  const int x = p.add_symmetric("X", 2, true);
  LinearExpr obj;
  obj.add(x, symmetric_trace_coeffs(RMat::Identity(2, 2)));
  p.set_objective(obj);
  RMat e11 = RMat::Zero(2, 2);
  e11(0, 0) = 1.0;
  LinearExpr corner;
  corner.add(x, symmetric_trace_coeffs(e11));
  corner.add_constant(-1.0);
  p.add_equality(corner);
  const SolveOutcome r = solve(p);
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-7);
}

TEST(Solver, DetectsInfeasibility) {
  // x >= 1 and x <= 0.
  ConicProblem p;
  const int x = p.add_scalar("x");
  p.set_objective(scalar_term(x, 1.0));
  p.add_inequality(scalar_term(x, 1.0, -1.0));
  p.add_inequality(scalar_term(x, -1.0));
  EXPECT_EQ(solve(p).status, SolveStatus::kInfeasible);
}

TEST(Solver, DetectsUnboundedness) {
  // min x s.t. x <= 0.
  ConicProblem p;
  const int x = p.add_scalar("x");
  p.set_objective(scalar_term(x, 1.0));
  p.add_inequality(scalar_term(x, -1.0));
  EXPECT_EQ(solve(p).status, SolveStatus::kUnbounded);
}

TEST(ZSubproblem, ObjectiveAndRowsAtRankOnePoint) {
  Rng rng(79);
  int checked = 0;
  for (double eps : {0.0, 0.05}) {
    const SystemConfig cfg = desk_config(eps);
    for (int t = 0; t < 5; ++t) {
      const ChannelSet ch = sample_channels(cfg, rng);
      const BeamformingPair pair{complex_normal(rng, 3, 1), complex_normal(rng, 3, 3)};
      const LiftedPair lp = lift(pair);
      const ZSubproblem zs = build_z_subproblem(lp.q_big, ch, cfg);
      if (zs.face_reduced) continue;
      ++checked;
      const Assignment a = z_assignment(zs.problem, lp, ch);
      EXPECT_NEAR(zs.problem.evaluate_objective(a), total_power(pair, ch, cfg), 1e-9);
      const SurrogateMargins mg = surrogate_margins(lp, ch, cfg);
      const auto& rows = zs.problem.inequalities();
      ASSERT_EQ(rows.size(), 2u);
      EXPECT_NEAR(zs.problem.evaluate(rows[0], a), mg.bob, 1e-9 * (1.0 + std::abs(mg.bob)));
      EXPECT_NEAR(zs.problem.evaluate(rows[1], a), mg.eve, 1e-9 * (1.0 + std::abs(mg.eve)));
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(ZSubproblem, SolutionMeetsRowsAndIsCheapest) {
  Rng rng(83);
  const SystemConfig cfg = desk_config(0.01);
  int solved = 0;
  for (int t = 0; t < 6; ++t) {
    const ChannelSet ch = sample_channels(cfg, rng);
    const CMat q = CMat::Identity(3, 3) * (10.0 / 3.0);
    const ZSubproblem zs = build_z_subproblem(q, ch, cfg);
    const SolveOutcome r = solve(zs.problem);
    if (r.status == SolveStatus::kInfeasible) continue;
    ASSERT_EQ(r.status, SolveStatus::kOptimal);
    ++solved;
    const CMat z = zs.recover(r);
    const LiftedPair lp{q, z};
    const SurrogateMargins mg = surrogate_margins(lp, ch, cfg);
    EXPECT_GE(mg.bob, -1e-7);
    EXPECT_GE(mg.eve, -1e-7);
    EXPECT_NEAR(total_power(lp, ch, cfg), r.objective, 1e-7 * r.objective);
  }
  EXPECT_GT(solved, 0);
}

TEST(ZSubproblem, FaceReductionWhenRowForcesNullLeak) {
  // Strong source power and a tiny r_e: the eavesdropper row can only hold
  // with g_e_hat W = 0.
  SystemConfig cfg = desk_config(0.01);
  cfg.r_e = 0.01;
  const ChannelSet ch = sample_channels(cfg, 5);
  const CMat q = CMat::Identity(3, 3) * 10.0;
  ASSERT_LT(eve_face_margin(q, ch, cfg), 0.0);
  const ZSubproblem zs = build_z_subproblem(q, ch, cfg);
  ASSERT_TRUE(zs.face_reduced);
  EXPECT_EQ(zs.basis.cols(), 6);
  EXPECT_LT((ch.g_e_hat * null_basis(ch.g_e_hat)).norm(), 1e-13);

  // Off the face every rank-one point breaks the row.
  Rng rng(89);
  for (int t = 0; t < 50; ++t) {
    const BeamformingPair pair{CVec::Zero(3), complex_normal(rng, 3, 3)};
    const LiftedPair lp{q, lift(pair).z_big};
    EXPECT_LT(surrogate_margins(lp, ch, cfg).eve, 0.0);
  }

  const SolveOutcome r = solve(zs.problem);
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  const CMat z = zs.recover(r);
  EXPECT_LT(block_trace(z, gram(ch.g_e_hat)).trace().real(), 1e-9 * z.trace().real());
  const SurrogateMargins mg = surrogate_margins({q, z}, ch, cfg);
  EXPECT_GE(mg.bob, -1e-7);
  EXPECT_GE(mg.eve, -1e-7);
  EXPECT_NEAR(total_power(LiftedPair{q, z}, ch, cfg), r.objective, 1e-7 * r.objective);

  // Q-half with such a Z drops the eavesdropper row.
  const ConicProblem qp = build_q_subproblem(z, ch, cfg);
  EXPECT_EQ(qp.inequalities().size(), 1u);
  EXPECT_TRUE(qp.socs().empty());
}

TEST(ZSubproblem, NoFaceReductionWithSigmaEReading) {
  SystemConfig cfg = desk_config(0.01);
  cfg.r_e = 0.01;
  const ChannelSet ch = sample_channels(cfg, 5);
  RelaxationOptions o;
  o.eve_constraint_includes_sigma_e = true;
  EXPECT_FALSE(build_z_subproblem(CMat::Identity(3, 3) * 10.0, ch, cfg, o).face_reduced);
}

TEST(QSubproblem, ObjectiveAndRowsAtRankOnePoint) {
  Rng rng(97);
  for (double eps : {0.0, 0.05}) {
    const SystemConfig cfg = desk_config(eps);
    for (int t = 0; t < 5; ++t) {
      const ChannelSet ch = sample_channels(cfg, rng);
      const BeamformingPair pair{complex_normal(rng, 3, 1), complex_normal(rng, 3, 3)};
      const LiftedPair lp = lift(pair);
      const ConicProblem p = build_q_subproblem(lp.z_big, ch, cfg);
      const Assignment a = p.make_assignment({{"Q", hermitian_to_coords(lp.q_big)}});
      EXPECT_NEAR(p.evaluate_objective(a), total_power(pair, ch, cfg), 1e-9);
      const SurrogateMargins mg = surrogate_margins(lp, ch, cfg);
      EXPECT_NEAR(p.evaluate(p.inequalities()[0], a), mg.bob, 1e-9 * (1.0 + std::abs(mg.bob)));
      double eve = 0.0;
      if (eps > 0.0) {
        ASSERT_EQ(p.socs().size(), 1u);
        const SocConstraint& c = p.socs()[0];
        double sq = 0.0;
        for (const auto& e : c.vector_part) sq += std::pow(p.evaluate(e, a), 2);
        eve = p.evaluate(c.bound, a) - std::sqrt(sq);
      } else {
        ASSERT_EQ(p.inequalities().size(), 2u);
        eve = p.evaluate(p.inequalities()[1], a);
      }
      EXPECT_NEAR(eve, mg.eve, 1e-9 * (1.0 + std::abs(mg.eve)));
    }
  }
}

TEST(Solve, OutcomeRecoveryRequiresOptimal) {
  SolveOutcome bad;
  bad.status = SolveStatus::kInfeasible;
  EXPECT_THROW(recover_hermitian(bad, "Q", 2), std::invalid_argument);
  EXPECT_STREQ(to_string(SolveStatus::kNumericalFailure), "numerical-failure");
}
