#include <gtest/gtest.h>

#include <array>
#include <random>

#include "oracles.hpp"
#include "relaysec/linalg.hpp"
#include "relaysec/random.hpp"

using namespace relaysec;

namespace {

CMat random_hermitian(Rng& rng, Eigen::Index n) {
  const CMat a = complex_normal(rng, n, n);
  return a + a.adjoint();
}

}  // namespace

TEST(Vec, RoundTripAndColumnOrder) {
  CMat a(2, 3);
  a << cplx(1, 0), cplx(3, 0), cplx(5, 0), cplx(2, 0), cplx(4, 0), cplx(6, 1);
  const CVec v = vec(a);
  ASSERT_EQ(v.size(), 6);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(v(k), cplx(k + 1, 0));
  EXPECT_EQ(v(5), cplx(6, 1));
  EXPECT_EQ(unvec(v, 2, 3), a);
  EXPECT_THROW(unvec(v, 4, 2), DimensionError);
}

TEST(Kron, MatchesLoopOracle) {
  Rng rng(3);
  for (auto [r1, c1, r2, c2] : {std::array{1, 1, 2, 2}, std::array{2, 3, 3, 1},
                                std::array{3, 3, 2, 2}, std::array{1, 4, 4, 1}}) {
    const CMat a = complex_normal(rng, r1, c1);
    const CMat b = complex_normal(rng, r2, c2);
    EXPECT_EQ(kron(a, b), oracle::kron(a, b));
  }
}

TEST(Kron, MixedProductProperty) {
  Rng rng(5);
  const CMat a = complex_normal(rng, 2, 3), c = complex_normal(rng, 3, 2);
  const CMat b = complex_normal(rng, 3, 2), d = complex_normal(rng, 2, 3);
  EXPECT_LT((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-12);
}

TEST(Tf, MatchesEntryMatchingOracle) {
  for (auto [p, q] : {std::pair{1, 1}, {2, 1}, {1, 3}, {2, 2}, {3, 2}, {3, 3}}) {
    const RMat expected = oracle::tf_by_matching(p, q);
    EXPECT_EQ(build_tf(p, q).to_dense(), expected) << "p=" << p << " q=" << q;
  }
}

TEST(Tf, DefiningRelationOnRandomMatrices) {
  Rng rng(11);
  for (auto [p, q] : {std::pair{1, 1}, {2, 1}, {2, 2}, {3, 3}, {4, 2}}) {
    const PermutationMatrix tf = build_tf(p, q);
    for (int t = 0; t < 20; ++t) {
      const CMat f = complex_normal(rng, p, q);
      const CVec fv = vec(f);
      EXPECT_EQ(tf.apply(vec(fv * fv.adjoint())), vec(kron(f.conjugate(), f)));
    }
  }
}

TEST(Tf, IsPermutation) {
  const RMat t = build_tf(3, 2).to_dense();
  EXPECT_TRUE((t.rowwise().sum().array() == 1.0).all());
  EXPECT_TRUE((t.colwise().sum().array() == 1.0).all());
  EXPECT_THROW(build_tf(0, 2), DimensionError);
  EXPECT_THROW(PermutationMatrix({0, 0}), std::invalid_argument);
}

TEST(KronPartial, TracePairing) {
  Rng rng(13);
  for (int t = 0; t < 10; ++t) {
    const CMat y = complex_normal(rng, 3, 3);
    const CMat x = complex_normal(rng, 2, 2);
    const CMat z = complex_normal(rng, 6, 6);
    const cplx direct = (z * oracle::kron(y, x)).trace();
    EXPECT_LT(std::abs(direct - (kron_partial(z, y) * x).trace()), 1e-11);
    EXPECT_LT(std::abs(direct - trace_kron(z, y, x)), 1e-11);
    const cplx via_blocks = (y * block_trace(z, x)).trace();
    EXPECT_LT(std::abs(direct - via_blocks), 1e-11);
  }
  EXPECT_THROW(kron_partial(CMat::Zero(5, 5), CMat::Zero(2, 2)), DimensionError);
}

TEST(BallExtreme, ClosedFormAndDegenerateInput) {
  CVec y(2);
  y << cplx(3, 0), cplx(0, 4);
  const BallExtreme mx = ball_lin_extreme(y, 0.5, Sense::kMax);
  EXPECT_NEAR(mx.value, 2.5, 1e-15);
  EXPECT_NEAR((mx.argument.adjoint() * y)(0, 0).real(), 2.5, 1e-15);
  const BallExtreme mn = ball_lin_extreme(y, 0.5, Sense::kMin);
  EXPECT_NEAR(mn.value, -2.5, 1e-15);
  EXPECT_NEAR(mn.argument.norm(), 0.5, 1e-15);
  const BallExtreme zero = ball_lin_extreme(CVec::Zero(3), 1.0, Sense::kMax);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_THROW(ball_lin_extreme(y, -1.0, Sense::kMax), std::invalid_argument);
}

TEST(BallExtreme, DominatesSamples) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const CVec y = complex_normal(rng, 3, 1);
    const double delta = 0.1 + u(rng);
    const BallExtreme mx = ball_lin_extreme(y, delta, Sense::kMax);
    for (int k = 0; k < 500; ++k) {
      CVec x = complex_normal(rng, 3, 1);
      x *= delta * u(rng) / x.norm();
      EXPECT_LE((x.adjoint() * y)(0, 0).real(), mx.value + 1e-14);
    }
  }
}

TEST(Hermitian, SymmetrizeRejectsAsymmetry) {
  CMat a(2, 2);
  a << cplx(1, 0), cplx(2, 1), cplx(2, 1), cplx(1, 0);
  EXPECT_THROW(symmetrize(a), NotHermitianError);
  a(1, 0) = cplx(2, -1);
  EXPECT_NO_THROW(symmetrize(a));
}

TEST(Hermitian, EigenDescendingAndReconstructs) {
  Rng rng(19);
  const CMat a = random_hermitian(rng, 4);
  const HermitianEig e = hermitian_eig(a);
  for (Eigen::Index k = 1; k < 4; ++k) EXPECT_GE(e.values(k - 1), e.values(k));
  const CMat back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
  EXPECT_LT((back - a).norm(), 1e-12);
}

TEST(Hermitian, PsdFactor) {
  Rng rng(23);
  const CMat b = complex_normal(rng, 4, 2);
  const CMat a = b * b.adjoint();  // rank 2
  const CMat s = psd_factor(a);
  EXPECT_LT((s * s.adjoint() - a).norm(), 1e-12);
  EXPECT_THROW(psd_factor(-a - CMat::Identity(4, 4)), NumericalError);
}

TEST(Hermitian, RealEmbeddingPreservesQuadraticForms) {
  Rng rng(29);
  const CMat a = random_hermitian(rng, 3);
  const CVec u = complex_normal(rng, 3, 1);
  const RMat r = real_embed(a);
  const RVec ru = real_embed_vec(u);
  EXPECT_NEAR((u.adjoint() * a * u)(0, 0).real(), ru.dot(r * ru), 1e-12);
  Eigen::SelfAdjointEigenSolver<RMat> er(r);
  const HermitianEig ea = hermitian_eig(a);
  for (Eigen::Index k = 0; k < 3; ++k) {
    EXPECT_NEAR(er.eigenvalues()(2 * k), ea.values(2 - k), 1e-12);
    EXPECT_NEAR(er.eigenvalues()(2 * k + 1), ea.values(2 - k), 1e-12);
  }
}

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  Rng a(7), b(7);
  EXPECT_EQ(complex_normal(a, 3, 2), complex_normal(b, 3, 2));
}

TEST(Random, ComplexNormalVariance) {
  Rng rng(31);
  const CMat x = complex_normal(rng, 20000, 1, 2.0);
  const double mean_sq = x.squaredNorm() / 20000.0;
  EXPECT_NEAR(mean_sq, 2.0, 0.06);
}
