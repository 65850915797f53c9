#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "support/testing.hpp"
#include "symcert/eigen.hpp"
#include "symcert/error.hpp"

using namespace symcert;

TEST(SymEigen, Diagonal) {
  const SymEigen e = sym_eigen(Eigen::Vector3d(3, 1, 2).asDiagonal().toDenseMatrix());
  EXPECT_DOUBLE_EQ(e.values(0), 1.0);
  EXPECT_DOUBLE_EQ(e.values(1), 2.0);
  EXPECT_DOUBLE_EQ(e.values(2), 3.0);
}

TEST(SymEigen, Swap) {
  Matrix s(2, 2);
  s << 0, 1, 1, 0;
  const SymEigen e = sym_eigen(s);
  EXPECT_NEAR(e.values(0), -1.0, 1e-15);
  EXPECT_NEAR(e.values(1), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(0, 1)), std::sqrt(0.5), 1e-15);
}

TEST(SymEigen, MatchesReferenceSolver) {
  std::mt19937_64 rng(11);
  for (int n : {1, 2, 5, 20, 37}) {
    const Matrix s = symcert::testing::random_symmetric(rng, n);
    const SymEigen e = sym_eigen(s);
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(s);
    EXPECT_LE((e.values - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10 * (1 + s.norm())) << n;
    EXPECT_LE((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - s).cwiseAbs().maxCoeff(), 1e-9) << n;
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(SymEigen, WarmStartFromBasis) {
  std::mt19937_64 rng(12);
  const Matrix s = symcert::testing::random_symmetric(rng, 15);
  const SymEigen cold = sym_eigen(s);
  const Matrix nearby = s + 1e-6 * symcert::testing::random_symmetric(rng, 15);
  const SymEigen warm = sym_eigen(nearby, &cold.vectors);
  const SymEigen ref = sym_eigen(nearby);
  EXPECT_LE((warm.values - ref.values).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(warm.sweeps, ref.sweeps);
}

TEST(SymEigen, RejectsBadInput) {
  EXPECT_THROW(sym_eigen(Matrix::Zero(2, 3)), Error);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 1) = std::nan("");
  EXPECT_THROW(sym_eigen(nan), Error);
}

TEST(ProjectPsd, Examples) {
  EXPECT_TRUE(project_psd(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  const Matrix p = project_psd(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-15);
}

TEST(ProjectPsd, Optimality) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    const Matrix s = symcert::testing::random_symmetric(rng, 12);
    const Matrix p = project_psd(s);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(p).eigenvalues().minCoeff(), -1e-10);
    EXPECT_NEAR(((s - p).transpose() * p).trace(), 0.0, 1e-9);
    // s - p is negative semidefinite.
    EXPECT_LE(Eigen::SelfAdjointEigenSolver<Matrix>(s - p).eigenvalues().maxCoeff(), 1e-10);
  }
}
