#include <gtest/gtest.h>

#include <random>

#include "support/testing.hpp"
#include "symcert/error.hpp"
#include "symcert/relax.hpp"
#include "symcert/sdpsolve.hpp"

using namespace symcert;

namespace {

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tol_primal = cfg.tol_dual = cfg.tol_gap = 1e-8;
  return cfg;
}

}  // namespace

TEST(SolveSdp, MinSquareLifted) {
  // min X11 over [[1, x], [x, X11]] PSD.
  SdpProblem sdp;
  sdp.dim = 2;
  sdp.sense = ObjectiveSense::Min;
  sdp.objective.add(1, 1, 1.0);
  SdpConstraint corner;
  corner.matrix.add(0, 0, 1.0);
  corner.sense = RowSense::Eq;
  corner.rhs = 1.0;
  sdp.constraints.push_back(corner);
  const SdpSolution s = solve_sdp(sdp, tight());
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.bound(), 0.0, 1e-7);
  EXPECT_NEAR(s.primal_obj, 0.0, 1e-7);
}

TEST(SolveSdp, MaxcutK2) {
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  const SdpSolution s = solve_sdp(diagonal_constrained_sdp(l), tight());
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.bound(), 4.0, 1e-5);
  EXPECT_NEAR(s.x(0, 1), -1.0, 1e-4);
}

TEST(SolveSdp, AppendixDiagonalExample) {
  const SdpSolution s = solve_sdp(diagonal_constrained_sdp(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()), tight());
  EXPECT_NEAR(s.bound(), 0.0, 1e-5);
}

TEST(SolveSdp, ScalarVariables) {
  // max u + w subject to u <= 2, w free, w + u = 3, X00 <= 5, u >= 0.
  SdpProblem sdp;
  sdp.dim = 1;
  sdp.num_nonneg = 1;
  sdp.num_free = 1;
  sdp.sense = ObjectiveSense::Max;
  sdp.objective_scalars = {{0, 1.0}, {1, 1.0}};
  SdpConstraint a;
  a.scalars = {{0, 1.0}};
  a.rhs = 2.0;
  SdpConstraint b;
  b.scalars = {{0, 1.0}, {1, 1.0}};
  b.sense = RowSense::Eq;
  b.rhs = 3.0;
  SdpConstraint c;
  c.matrix.add(0, 0, 1.0);
  c.rhs = 5.0;
  sdp.constraints = {a, b, c};
  const SdpSolution s = solve_sdp(sdp, tight());
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.bound(), 3.0, 1e-6);
  EXPECT_NEAR(s.scalars(0) + s.scalars(1), 3.0, 1e-6);
}

TEST(SolveSdp, DualityOnRandomProblems) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 5; ++t) {
    const Matrix m = symcert::testing::random_symmetric(rng, 6);
    const SdpSolution s = solve_sdp(diagonal_constrained_sdp(m), tight());
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    EXPECT_NEAR(s.primal_obj, s.dual_obj, 1e-6 * (1 + std::abs(s.dual_obj)));
    EXPECT_GE(s.bound(), Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().maxCoeff() - 1e-6);
  }
}

TEST(SolveSdp, IterationCapReported) {
  std::mt19937_64 rng(22);
  SolverConfig cfg;
  cfg.max_iter = 3;
  const SdpSolution s = solve_sdp(diagonal_constrained_sdp(symcert::testing::random_symmetric(rng, 8)), cfg);
  EXPECT_EQ(s.status, SolveStatus::MaxIter);
  EXPECT_EQ(s.iterations, 3);
}

TEST(SolveSdp, Deterministic) {
  std::mt19937_64 rng(23);
  const SdpProblem sdp = diagonal_constrained_sdp(symcert::testing::random_symmetric(rng, 7));
  const SdpSolution a = solve_sdp(sdp), b = solve_sdp(sdp);
  EXPECT_EQ(a.dual_obj, b.dual_obj);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  cfg.tol_primal = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.relaxation = 2.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.max_iter = 0;
  EXPECT_THROW(solve_sdp(diagonal_constrained_sdp(Matrix::Identity(2, 2)), cfg), Error);
}
