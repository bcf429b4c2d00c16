#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "wsfn/errors.hpp"
#include "wsfn/spectral.hpp"

using namespace wsfn;

namespace {

LinearOperator from_matrix(const Matrix& a) {
  return [a](const Vector& v) -> Vector { return a * v; };
}

Matrix random_symmetric(Index n, unsigned seed) {
  std::srand(seed);
  const Matrix r = Matrix::Random(n, n);
  return (r + r.transpose()) / 2;
}

}  // namespace

TEST(Spectral, DiagonalTinyRegularization) {
  const Matrix a = Eigen::Vector2d(3.0, 4.0).asDiagonal();
  const Vector v = Eigen::Vector2d(1.0, 1.0);
  const Vector out = lanczos_apply_inv_sqrt(from_matrix(a), v, 1e-30, 2);
  EXPECT_NEAR(out(0), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(out(1), 0.25, 1e-12);
}

TEST(Spectral, ZeroOperatorScalesByBeta) {
  const Vector v = Vector::LinSpaced(5, 1, 5);
  const Vector out = lanczos_apply_inv_sqrt([](const Vector& x) -> Vector { return Vector::Zero(x.size()); }, v, 4.0, 3);
  EXPECT_TRUE(out.isApprox(v / 2.0, 1e-14));
}

TEST(Spectral, IdentityWithBetaThree) {
  const Vector v = Vector::LinSpaced(4, -1, 2);
  const Vector out = lanczos_apply_inv_sqrt([](const Vector& x) -> Vector { return x; }, v, 3.0, 4);
  EXPECT_TRUE(out.isApprox(v / 2.0, 1e-14));
}

TEST(Spectral, IndefiniteDiagonal) {
  const Matrix a = Eigen::Vector2d(-3.0, 3.0).asDiagonal();
  const Vector v = Eigen::Vector2d(1.0, -2.0);
  const Vector out = lanczos_apply_inv_sqrt(from_matrix(a), v, 16.0, 2);
  EXPECT_TRUE(out.isApprox(v / 5.0, 1e-13));
  EXPECT_TRUE(dense_inv_sqrt(a, v, 16.0).isApprox(v / 5.0, 1e-14));
}

TEST(Spectral, FullDepthMatchesDenseOracle) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Matrix a = random_symmetric(8, seed);
    const Vector v = Vector::LinSpaced(8, -1, 1).array() + 0.1;
    const Vector oracle = dense_inv_sqrt(a, v, 1e-2);
    const Vector out = lanczos_apply_inv_sqrt(from_matrix(a), v, 1e-2, 8);
    EXPECT_LT((out - oracle).norm() / oracle.norm(), 1e-8) << "seed " << seed;
  }
}

TEST(Spectral, BasisIsOrthonormalAndTridiagonalReproducesOperator) {
  const Matrix a = random_symmetric(30, 11);
  const Vector v = Vector::Ones(30);
  const LanczosState s = lanczos(from_matrix(a), v, 12);
  ASSERT_EQ(s.depth(), 12);
  const Matrix q = s.basis;
  EXPECT_LT((q.transpose() * q - Matrix::Identity(12, 12)).norm(), 1e-12);
  Matrix t = Matrix::Zero(12, 12);
  t.diagonal() = s.alphas;
  t.diagonal(1) = s.betas;
  t.diagonal(-1) = s.betas;
  EXPECT_LT((q.transpose() * a * q - t).norm(), 1e-10);
}

TEST(Spectral, InvariantSubspaceBreaksDownEarly) {
  Matrix a = Matrix::Zero(6, 6);
  a.diagonal() << 1, 2, 3, 4, 5, 6;
  Vector v = Vector::Zero(6);
  v(0) = 1;
  v(1) = 1;
  const LanczosState s = lanczos(from_matrix(a), v, 6);
  EXPECT_TRUE(s.broke_down);
  EXPECT_EQ(s.depth(), 2);
  const Vector out = lanczos_apply_inv_sqrt(from_matrix(a), v, 1.0, 6);
  EXPECT_TRUE(out.isApprox(dense_inv_sqrt(a, v, 1.0), 1e-13));
}

TEST(Spectral, RitzValueOfEigenvectorStart) {
  const Matrix a = random_symmetric(10, 3);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector u = es.eigenvectors().col(0);
  EXPECT_NEAR(lanczos_min_eigenvalue(from_matrix(a), u, 5), es.eigenvalues()(0), 1e-12);
  const Vector out = lanczos_apply_inv_sqrt(from_matrix(a), u, 0.5, 5);
  const double lambda = es.eigenvalues()(0);
  EXPECT_TRUE(out.isApprox(u / std::sqrt(lambda * lambda + 0.5), 1e-12));
}

TEST(Spectral, ErrorCases) {
  const LinearOperator id = [](const Vector& x) -> Vector { return x; };
  EXPECT_THROW(lanczos_apply_inv_sqrt(id, Vector::Zero(3), 1.0, 2), NumericError);
  EXPECT_THROW(lanczos_apply_inv_sqrt(id, Vector::Ones(3), 0.0, 2), ConfigError);
  EXPECT_THROW(lanczos(id, Vector::Ones(3), 0), ConfigError);
  EXPECT_THROW(dense_inv_sqrt(Matrix::Identity(3, 3), Vector::Ones(3), 1.0, 2), UnsupportedError);
  EXPECT_THROW(dense_inv_sqrt(Matrix::Identity(3, 3), Vector::Ones(2), 1.0), ShapeError);
}
