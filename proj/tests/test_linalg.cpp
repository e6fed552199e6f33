#include <cmath>

#include <gtest/gtest.h>

#include "hetslope/linalg.hpp"
#include "hetslope/rng.hpp"

using namespace hetslope;

namespace {

// Reference thresholding through Eigen's own SVD, independent of LAPACK.
Matrix reference_threshold(const Matrix& a, double lambda) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector d = (svd.singularValues().array() - lambda).max(0.0);
  return svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(r, c, rng);
}

}  // namespace

TEST(ThinSvd, IdentityAndDiagonal) {
  EXPECT_TRUE(linalg::thin_svd(Matrix::Identity(3, 3)).singular_values.isApprox(Vector::Ones(3)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  const auto s = linalg::thin_svd(d).singular_values;
  EXPECT_NEAR(s(0), 3.0, 1e-14);
  EXPECT_NEAR(s(1), 1.0, 1e-14);
}

TEST(ThinSvd, ReconstructionAndOrthonormality) {
  for (auto [r, c] : {std::pair<Index, Index>{20, 30}, {30, 20}, {7, 7}}) {
    const Matrix a = random_matrix(r, c, 11 + r);
    const auto svd = linalg::thin_svd(a);
    const Matrix back = svd.u * svd.singular_values.asDiagonal() * svd.v.transpose();
    EXPECT_LE((back - a).norm(), 1e-8 * (1.0 + a.norm()));
    const Index m = std::min(r, c);
    EXPECT_LE((svd.u.transpose() * svd.u - Matrix::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((svd.v.transpose() * svd.v - Matrix::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-8);
    for (Index i = 1; i < m; ++i) EXPECT_GE(svd.singular_values(i - 1), svd.singular_values(i));
    for (Index j = 0; j < m; ++j) {
      Index arg = 0;
      svd.u.col(j).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(svd.u(arg, j), 0.0);
    }
  }
}

TEST(ThinSvd, RejectsNonFinite) {
  Matrix a = Matrix::Ones(3, 3);
  a(1, 1) = std::nan("");
  try {
    linalg::thin_svd(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(SoftThreshold, ZeroThresholdIsIdentity) {
  const Matrix a = random_matrix(8, 5, 3);
  EXPECT_LE((linalg::soft_threshold_sv(a, 0.0) - a).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SoftThreshold, RankOneShrinkage) {
  Vector u = random_matrix(6, 1, 4).col(0).normalized();
  Vector v = random_matrix(9, 1, 5).col(0).normalized();
  const Matrix a = 5.0 * u * v.transpose();
  EXPECT_LE((linalg::soft_threshold_sv(a, 1.0) - 4.0 * u * v.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SoftThreshold, DiagonalCase) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1;
  EXPECT_LE((linalg::soft_threshold_sv(d, 2.0) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SoftThreshold, NegativeThresholdRejected) {
  EXPECT_THROW(linalg::soft_threshold_sv(Matrix::Ones(2, 2), -1.0), Error);
}

TEST(SoftThreshold, MatchesReferenceAcrossPaths) {
  // Thresholds from negligible (full SVD path) to large (partial eigen path).
  for (int k = 0; k < 20; ++k) {
    const Index r = 5 + 3 * k, c = 40 - k;
    const Matrix a = random_matrix(r, c, 100 + k);
    const double top = linalg::thin_svd(a).singular_values(0);
    for (double frac : {1e-7, 1e-3, 0.2, 0.6, 0.95, 1.5}) {
      const double lambda = frac * top;
      const ThresholdResult out = linalg::soft_threshold(a, lambda);
      const Matrix ref = reference_threshold(a, lambda);
      EXPECT_LE((out.value - ref).norm(), 1e-9 * (1.0 + a.norm())) << r << "x" << c << " frac " << frac;
      const Vector sv = linalg::thin_svd(a).singular_values;
      EXPECT_NEAR(out.nuclear_norm, (sv.array() - lambda).max(0.0).sum(), 1e-8 * (1.0 + sv.sum()));
      EXPECT_EQ(out.rank, (sv.array() > lambda).count());
    }
  }
}

TEST(SoftThreshold, OutputSingularValuesAreShifted) {
  const Matrix a = random_matrix(15, 12, 9);
  const Vector sv = linalg::thin_svd(a).singular_values;
  const double lambda = 0.4 * sv(0);
  const Vector out = linalg::thin_svd(linalg::soft_threshold_sv(a, lambda)).singular_values;
  for (Index i = 0; i < sv.size(); ++i) EXPECT_NEAR(out(i), std::max(sv(i) - lambda, 0.0), 1e-8);
}

TEST(SoftThreshold, SemigroupProperty) {
  Rng rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 25; ++k) {
    const Matrix a = random_matrix(10 + k, 25 - k / 2, 500 + k);
    const double top = linalg::thin_svd(a).singular_values(0);
    const double l1 = unif(rng) * top, l2 = unif(rng) * top;
    const Matrix two_step = linalg::soft_threshold_sv(linalg::soft_threshold_sv(a, l1), l2);
    EXPECT_LE((two_step - linalg::soft_threshold_sv(a, l1 + l2)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SoftThreshold, RankNeverIncreases) {
  const Matrix low = random_matrix(20, 3, 1) * random_matrix(3, 25, 2);
  for (double lambda : {0.0, 0.1, 1.0, 5.0}) {
    const ThresholdResult out = linalg::soft_threshold(low, lambda);
    EXPECT_LE(out.rank, 3);
  }
}

TEST(Norms, DiagonalAndZero) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  const MatrixNorms n = linalg::norms(d);
  EXPECT_NEAR(n.nuclear, 4.0, 1e-12);
  EXPECT_NEAR(n.op, 3.0, 1e-12);
  EXPECT_NEAR(n.frobenius, std::sqrt(10.0), 1e-12);
  const MatrixNorms z = linalg::norms(Matrix::Zero(4, 3));
  EXPECT_EQ(z.nuclear, 0.0);
  EXPECT_EQ(z.op, 0.0);
  EXPECT_EQ(z.frobenius, 0.0);
}

TEST(Norms, OrderingAndOperatorNorm) {
  for (int k = 0; k < 10; ++k) {
    const Matrix a = random_matrix(10, 10, 900 + k);
    const MatrixNorms n = linalg::norms(a);
    EXPECT_GE(n.nuclear, n.frobenius);
    EXPECT_GE(n.frobenius, n.op);
    Eigen::JacobiSVD<Matrix> ref(a);
    EXPECT_NEAR(n.op, ref.singularValues()(0), 1e-10);
    EXPECT_NEAR(linalg::operator_norm(a), n.op, 1e-9);
  }
  const Matrix wide = random_matrix(4, 30, 5);
  EXPECT_NEAR(linalg::operator_norm(wide), linalg::norms(wide).op, 1e-9);
}

TEST(TopEigenvectors, DiagonalExample) {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 4;
  s(1, 1) = 1;
  const Matrix g = linalg::scaled_top_eigenvectors(s, 1, std::sqrt(2.0));
  EXPECT_NEAR(g(0, 0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(g(1, 0), 0.0, 1e-12);
}

TEST(TopEigenvectors, RepeatedEigenvaluesGiveOrthonormalBasis) {
  const Matrix g = linalg::scaled_top_eigenvectors(Matrix::Identity(4, 4), 2, 1.0);
  EXPECT_LE((g.transpose() * g - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  for (Index j = 0; j < 2; ++j) {
    Index arg = 0;
    g.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(g(arg, j), 0.0);
  }
}

TEST(TopEigenvectors, SpansColumnSpaceOfLowRankMatrix) {
  const Matrix theta = random_matrix(30, 2, 8) * random_matrix(2, 40, 9);
  const double scale = std::sqrt(30.0);
  const Matrix g = linalg::scaled_top_eigenvectors(theta * theta.transpose(), 2, scale);
  EXPECT_LE((g.transpose() * g - scale * scale * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
  Eigen::BDCSVD<Matrix> svd(theta, Eigen::ComputeThinU);
  const Matrix u = svd.matrixU().leftCols(2);
  const Matrix proj_resid = g / scale - u * (u.transpose() * g / scale);
  EXPECT_LE(proj_resid.norm(), 1e-6);
}

TEST(TopEigenvectors, RejectsBadInput) {
  EXPECT_THROW(linalg::scaled_top_eigenvectors(Matrix::Identity(3, 3), 4, 1.0), Error);
  EXPECT_THROW(linalg::scaled_top_eigenvectors(Matrix::Identity(3, 3), 0, 1.0), Error);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1.0;
  EXPECT_THROW(linalg::scaled_top_eigenvectors(asym, 1, 1.0), Error);
}

TEST(LeastSquares, SolvesAndGuardsRank) {
  const Matrix a = random_matrix(50, 3, 12);
  const Vector beta = Vector::LinSpaced(3, 1.0, 3.0);
  EXPECT_LE((linalg::least_squares(a, a * beta) - beta).norm(), 1e-10);
  Matrix singular = a;
  singular.col(2) = singular.col(0);
  try {
    linalg::least_squares(singular, a * beta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularDesign);
  }
}
