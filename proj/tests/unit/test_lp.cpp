#include <gtest/gtest.h>

#include <random>

#include "symcert/error.hpp"
#include "symcert/lp.hpp"

using namespace symcert;

TEST(SolveLp, Textbook) {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18.
  Vector c(2);
  c << 3, 5;
  Matrix a(3, 2);
  a << 1, 0, 0, 2, 3, 2;
  Vector b(3);
  b << 4, 12, 18;
  const LpResult r = solve_lp(c, a, b);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, 36.0, 1e-12);
  EXPECT_NEAR(r.x(0), 2.0, 1e-12);
  EXPECT_NEAR(r.x(1), 6.0, 1e-12);
}

TEST(SolveLp, NegativeRightHandSide) {
  // max -x, x >= 2 written as -x <= -2.
  const LpResult r = solve_lp(Vector::Constant(1, -1.0), Matrix::Constant(1, 1, -1.0), Vector::Constant(1, -2.0));
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, -2.0, 1e-12);
}

TEST(SolveLp, Infeasible) {
  Matrix a(2, 1);
  a << 1, -1;
  Vector b(2);
  b << 1, -2;
  EXPECT_EQ(solve_lp(Vector::Ones(1), a, b).status, LpStatus::Infeasible);
}

TEST(SolveLp, Unbounded) {
  EXPECT_EQ(solve_lp(Vector::Ones(2), Matrix(Eigen::RowVector2d(1, -1)), Vector::Ones(1)).status, LpStatus::Unbounded);
}

TEST(SolveLp, DegenerateDoesNotCycle) {
  // Beale's cycling example.
  Vector c(4);
  c << 0.75, -150, 0.02, -6;
  Matrix a(3, 4);
  a << 0.25, -60, -0.04, 9, 0.5, -90, -0.02, 3, 0, 0, 1, 0;
  Vector b(3);
  b << 0, 0, 1;
  const LpResult r = solve_lp(c, a, b);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.value, 0.05, 1e-12);
}

TEST(SolveLp, RandomAgainstVertexEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 30; ++t) {
    Matrix a(4, 2);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
    const Vector b = Vector::Constant(4, 1.0) + 0.5 * Vector::Random(4).cwiseAbs();
    Vector c(2);
    c << u(rng), u(rng);
    // Box the region so the LP stays bounded.
    Matrix full(6, 2);
    full << a, Matrix::Identity(2, 2);
    Vector rhs(6);
    rhs << b, 3, 3;
    const LpResult r = solve_lp(c, full, rhs);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    // Every vertex is the intersection of two of the 8 lines (rows plus x >= 0).
    Matrix lines(8, 2);
    lines << full, -Matrix::Identity(2, 2);
    Vector offs(8);
    offs << rhs, 0, 0;
    double best = -1e9;
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) {
        Eigen::Matrix2d m;
        m << lines.row(i), lines.row(j);
        if (std::abs(m.determinant()) < 1e-12) continue;
        const Eigen::Vector2d v = m.inverse() * Eigen::Vector2d(offs(i), offs(j));
        if (((lines * v - offs).array() <= 1e-9).all()) best = std::max(best, c.dot(v));
      }
    EXPECT_NEAR(r.value, best, 1e-9);
  }
}

TEST(SolveLp, ShapeErrors) { EXPECT_THROW(solve_lp(Vector::Ones(3), Matrix::Ones(2, 2), Vector::Ones(2)), Error); }
