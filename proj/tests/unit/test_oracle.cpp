#include <gtest/gtest.h>

#include <random>

#include "support/testing.hpp"
#include "symcert/error.hpp"
#include "symcert/oracle.hpp"

using namespace symcert;
using symcert::testing::fixture;
using symcert::testing::gaussian;

namespace {

Network linear(const Vector& w, double c) {
  return Network(static_cast<int>(w.size()), {AffineBlock{w.transpose(), Vector::Constant(1, c)}});
}

}  // namespace

TEST(Pgd, LinearL2) {
  Vector w(3);
  w << 1, -2, 2;
  const Network net = linear(w, 0.5);
  const Vector a = Vector::Ones(3);
  const AttackResult r = pgd_attack(net, {Norm::two(), 0.3, a}, scalar_margin(net));
  EXPECT_NEAR(r.best_margin, w.dot(a) + 0.3 * w.norm() + 0.5, 1e-6);
  EXPECT_LE((r.best_input - (a + 0.3 * w / w.norm())).norm(), 1e-3);
}

TEST(Pgd, LinearLinfAndL1) {
  Vector w(2);
  w << 1, -3;
  const Network net = linear(w, 0.0);
  const Vector a = Vector::Zero(2);
  EXPECT_NEAR(pgd_attack(net, {Norm::inf(), 0.2, a}, scalar_margin(net)).best_margin, 0.8, 1e-9);
  EXPECT_NEAR(pgd_attack(net, {Norm::one(), 0.2, a}, scalar_margin(net)).best_margin, 0.6, 1e-6);
}

TEST(Pgd, ZeroGradient) {
  const Network net = linear(Vector::Zero(2), 0.7);
  const Vector a(Eigen::Vector2d(0.1, 0.2));
  const AttackResult r = pgd_attack(net, {Norm::two(), 0.5, a}, scalar_margin(net));
  EXPECT_DOUBLE_EQ(r.best_margin, 0.7);
  EXPECT_EQ(r.best_input, a);
}

TEST(Pgd, RationalNormFallsBackToSampling) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  const PerturbationSpec spec{Norm::rational(3, 1), 0.2, Vector::Zero(2)};
  EXPECT_THROW(pgd_attack(net, spec, scalar_margin(net)), Error);
  const AttackResult r = attack(net, spec, scalar_margin(net));
  EXPECT_LE(Norm::rational(3, 1).of(r.best_input), 0.2 + 1e-12);
  EXPECT_GE(r.best_margin, margin_value(net, scalar_margin(net), Vector::Zero(2)));
}

TEST(Pgd, StaysInBallAndIsSeeded) {
  std::mt19937_64 rng(1);
  const Network net = symcert::testing::random_two_layer(rng, 4, 8, 1);
  const Vector a = gaussian(rng, 4);
  for (const Norm norm : {Norm::one(), Norm::two(), Norm::inf()}) {
    const PerturbationSpec spec{norm, 0.25, a};
    PgdConfig cfg;
    cfg.seed = 42;
    const AttackResult r1 = pgd_attack(net, spec, scalar_margin(net), cfg);
    const AttackResult r2 = pgd_attack(net, spec, scalar_margin(net), cfg);
    EXPECT_LE(norm.of(r1.best_input - a), 0.25 + 1e-12);
    EXPECT_EQ(r1.best_margin, r2.best_margin);
    EXPECT_NEAR(margin_value(net, scalar_margin(net), r1.best_input), r1.best_margin, 1e-12);
  }
}

TEST(ProjectToBall, L1) {
  const PerturbationSpec spec{Norm::one(), 1.0, Vector::Zero(3)};
  const Vector p = project_to_ball(Vector(Eigen::Vector3d(2, -1, 0.1)), spec);
  EXPECT_NEAR(p.lpNorm<1>(), 1.0, 1e-12);
  EXPECT_NEAR(p(0), 1.0, 1e-12);
  EXPECT_NEAR(p(1), 0.0, 1e-12);
  const Vector inside(Eigen::Vector3d(0.2, 0.1, 0.0));
  EXPECT_EQ(project_to_ball(inside, spec), inside);
}

TEST(MarginGradient, MatchesFiniteDifferences) {
  const Network net = load_network_file(fixture("deep_2_5_5_3.json"));
  const Margin m = margin_network(net, 0, 1);
  const Vector x(Eigen::Vector2d(0.31, -0.47));
  const Vector g = margin_gradient(net, m, x);
  for (int i = 0; i < 2; ++i) {
    Vector e = Vector::Zero(2);
    e(i) = 1e-6;
    EXPECT_NEAR(g(i), (margin_value(net, m, x + e) - margin_value(net, m, x - e)) / 2e-6, 1e-6);
  }
}

TEST(ExactLocal, PgdNeverExceedsExact) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const Vector a = gaussian(rng, 2);
    const ExactResult ex = exact_local_linf(net, a, 0.1, scalar_margin(net));
    const AttackResult at = pgd_attack(net, {Norm::inf(), 0.1, a}, scalar_margin(net));
    EXPECT_LE(at.best_margin, ex.optimum + 1e-8);
    EXPECT_EQ(ex.patterns_enumerated, 16);
    EXPECT_LE((ex.arg - a).cwiseAbs().maxCoeff(), 0.1 + 1e-9);
  }
}

TEST(ExactLocal, PointBall) {
  const Network net = load_network_file(fixture("small_2_8_1.json"));
  const Vector a(Eigen::Vector2d(0.4, 0.9));
  EXPECT_NEAR(exact_local_linf(net, a, 0.0, scalar_margin(net)).optimum, margin_value(net, scalar_margin(net), a),
              1e-9);
}

TEST(ExactLocal, OneDimensionalGrid) {
  std::mt19937_64 rng(3);
  const Network net = symcert::testing::random_two_layer(rng, 1, 6, 1);
  const Vector a = Vector::Constant(1, 0.2);
  const double eps = 0.5;
  double grid = -1e9;
  for (int k = 0; k <= 100000; ++k)
    grid = std::max(grid, margin_value(net, scalar_margin(net), Vector::Constant(1, a(0) - eps + 2 * eps * k / 1e5)));
  EXPECT_NEAR(exact_local_linf(net, a, eps, scalar_margin(net)).optimum, grid, 1e-6);
}

TEST(ExactLocal, Monotone) {
  const Network net = load_network_file(fixture("small_2_8_1.json"));
  const Vector a(Eigen::Vector2d(-0.3, 0.2));
  EXPECT_LE(exact_local_linf(net, a, 0.1, scalar_margin(net)).optimum,
            exact_local_linf(net, a, 0.2, scalar_margin(net)).optimum + 1e-12);
}

TEST(ExactLocal, TooWide) {
  std::mt19937_64 rng(4);
  const Network net = symcert::testing::random_two_layer(rng, 2, 21, 1);
  try {
    exact_local_linf(net, Vector::Zero(2), 0.1, scalar_margin(net));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooManyNeurons);
  }
}

TEST(ExactFgl, ScalarAndZero) {
  EXPECT_DOUBLE_EQ(exact_fgl_two_layer(RowVector::Ones(1), Matrix::Constant(1, 1, -2.5), Norm::two()).optimum, 2.5);
  EXPECT_DOUBLE_EQ(exact_fgl_two_layer(RowVector::Ones(3), Matrix::Zero(3, 4), Norm::inf()).optimum, 0.0);
}

TEST(ExactFgl, TwoNeuronsByHand) {
  std::mt19937_64 rng(5);
  const Matrix w = gaussian(rng, 2, 3);
  const RowVector v = gaussian(rng, 2).transpose();
  for (const Norm norm : {Norm::one(), Norm::two(), Norm::inf()}) {
    double best = 0.0;
    for (int s0 = 0; s0 < 2; ++s0)
      for (int s1 = 0; s1 < 2; ++s1) {
        const Vector g = (v(0) * s0 * w.row(0) + v(1) * s1 * w.row(1)).transpose();
        best = std::max(best, norm.dual_of(g));
      }
    EXPECT_NEAR(exact_fgl_two_layer(v, w, norm).optimum, best, 1e-12) << norm.to_string();
  }
}

TEST(ExactFgl, BoundsSampledDifferenceQuotients) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  const double l = exact_fgl_two_layer(net, scalar_margin(net), Norm::two()).optimum;
  std::mt19937_64 rng(6);
  for (int t = 0; t < 1000; ++t) {
    const Vector a = gaussian(rng, 2), b = gaussian(rng, 2);
    const double q = std::abs(margin_value(net, scalar_margin(net), a) - margin_value(net, scalar_margin(net), b)) /
                     (a - b).norm();
    EXPECT_LE(q, l + 1e-12);
  }
}
