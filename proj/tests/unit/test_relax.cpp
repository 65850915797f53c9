#include <gtest/gtest.h>

#include <random>

#include "support/testing.hpp"
#include "symcert/encode.hpp"
#include "symcert/error.hpp"
#include "symcert/relax.hpp"
#include "symcert/sdpsolve.hpp"

using namespace symcert;
using symcert::testing::fixture;
using symcert::testing::gaussian;

namespace {

QuadraticProgram min_square(bool with_bound) {
  QuadraticProgram qp;
  qp.sense = ObjectiveSense::Min;
  qp.symbols.add_group("x", 1);
  qp.objective = QuadForm::product(LinExpr::var(0), LinExpr::var(0));
  if (with_bound) qp.constraints.push_back(leq0(QuadForm(LinExpr::constant_term(1.0) - LinExpr::var(0)), "x>=1"));
  return qp;
}

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tol_primal = cfg.tol_dual = cfg.tol_gap = 1e-8;
  return cfg;
}

double sdp_objective(const SdpProblem& sdp, const Matrix& x) { return sdp.objective.dot(x); }

}  // namespace

TEST(Presolve, NoEqualitiesUnchanged) {
  const QuadraticProgram qp = min_square(true);
  const PresolveResult r = presolve_eliminate_affine(qp);
  EXPECT_EQ(r.eliminated, 0);
  EXPECT_EQ(dump_qp(r.qp), dump_qp(qp));
}

TEST(Presolve, TwoLayerDropsPreActivations) {
  std::mt19937_64 rng(1);
  const Network net = symcert::testing::random_two_layer(rng, 3, 5, 1);
  const QuadraticProgram qp = build_local_robustness_qp(net, {Norm::inf(), 0.1, gaussian(rng, 3)}, scalar_margin(net));
  EXPECT_EQ(qp.dim(), 3 + 2 * 5);
  const PresolveResult r = presolve_eliminate_affine(qp);
  EXPECT_EQ(r.qp.dim(), 3 + 5);
  EXPECT_EQ(r.eliminated, 5);
}

TEST(Presolve, PreservesObjectiveAtFeasiblePoints) {
  const Network net = load_network_file(fixture("deep_2_5_5_3.json"));
  std::mt19937_64 rng(2);
  const Vector c = gaussian(rng, 2);
  const PerturbationSpec spec{Norm::inf(), 0.2, c};
  const Margin m = margin_network(net, 1, 0);
  const QuadraticProgram qp = build_local_robustness_qp(net, spec, m);
  const PresolveResult r = presolve(qp);
  for (int t = 0; t < 50; ++t) {
    const Vector x = c + (Vector::Random(2) * 0.2);
    const Vector full = local_robustness_trace(net, spec, m, {}, x);
    const Vector red = r.restrict(full);
    EXPECT_NEAR(r.qp.objective_value(red), qp.objective_value(full), 1e-10);
    EXPECT_LE(r.qp.max_violation(red), 1e-10);
    EXPECT_LE((r.expand(red) - full).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Presolve, PinsPointBall) {
  const Network net = load_network_file(fixture("small_2_8_1.json"));
  for (const Norm norm : {Norm::inf(), Norm::two(), Norm::one()}) {
    const Vector c = Vector(Eigen::Vector2d(0.2, -0.7));
    const QuadraticProgram qp = build_local_robustness_qp(net, {norm, 0.0, c}, scalar_margin(net));
    const PresolveResult r = presolve(qp);
    EXPECT_EQ(r.qp.dim(), 0) << norm.to_string();
    EXPECT_NEAR(r.qp.objective.constant(), margin_value(net, scalar_margin(net), c), 1e-9);
  }
}

TEST(Lift, FeasiblePointsStayFeasible) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  const PerturbationSpec spec{Norm::two(), 0.5, Vector(Eigen::Vector2d(0.1, 0.1))};
  const QuadraticProgram qp = build_local_robustness_qp(net, spec, scalar_margin(net));
  const SdpProblem sdp = shor_primal(qp);
  const Vector x = local_robustness_trace(net, spec, scalar_margin(net), {}, Vector(Eigen::Vector2d(0.3, -0.1)));
  const Matrix lifted = lift(x);
  EXPECT_NEAR(sdp_objective(sdp, lifted), qp.objective_value(x), 1e-12);
  for (const auto& row : sdp.constraints) {
    const double lhs = row.matrix.dot(lifted);
    if (row.sense == RowSense::Eq) EXPECT_NEAR(lhs, row.rhs, 1e-12) << row.label;
    else EXPECT_LE(lhs, row.rhs + 1e-12) << row.label;
  }
}

TEST(Shor, MaxcutSingleEdge) {
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  // Brute force over {-1, 1}^2.
  double best = -1e9;
  for (int a : {-1, 1})
    for (int b : {-1, 1}) best = std::max(best, Eigen::Vector2d(a, b).dot(l * Eigen::Vector2d(a, b)));
  EXPECT_EQ(best, 4.0);
  // X = [[1, t], [t, 1]]: <L, X> = 2 - 2t, largest at t = -1.
  double family = -1e9;
  for (int k = -1000; k <= 1000; ++k) family = std::max(family, 2.0 - 2.0 * (k / 1000.0));
  const SdpSolution s = solve_sdp(diagonal_constrained_sdp(l), tight());
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.bound(), family, 1e-5);
}

TEST(Shor, MinSquareDual) {
  const SdpSolution d = solve_sdp(shor_dual(min_square(true)), tight());
  EXPECT_NEAR(d.bound(), 1.0, 1e-6);
  const SdpSolution u = solve_sdp(shor_dual(min_square(false)), tight());
  EXPECT_NEAR(u.bound(), 0.0, 1e-6);
  const SdpSolution p = solve_sdp(shor_primal(min_square(true)), tight());
  EXPECT_NEAR(p.bound(), 1.0, 1e-6);
}

TEST(Shor, PointBallIsTight) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  const Vector c = Vector(Eigen::Vector2d(-0.5, 0.25));
  const QuadraticProgram qp = build_local_robustness_qp(net, {Norm::inf(), 0.0, c}, scalar_margin(net));
  const SdpSolution s = solve_sdp(shor_primal(presolve(qp).qp), tight());
  EXPECT_NEAR(s.bound(), margin_value(net, scalar_margin(net), c), 1e-6);
}

TEST(Sdpa, RoundTrip) {
  const Network net = load_network_file(fixture("two_layer_2_4_1.json"));
  const QuadraticProgram qp =
      presolve(build_local_robustness_qp(net, {Norm::inf(), 0.1, Vector::Zero(2)}, scalar_margin(net))).qp;
  for (const SdpProblem& sdp : {shor_primal(qp), shor_dual(qp)}) {
    const std::string text = export_sdpa(sdp);
    const SdpProblem back = parse_sdpa(text);
    EXPECT_EQ(export_sdpa(back), text);
    ASSERT_EQ(back.constraints.size(), sdp.constraints.size());
    EXPECT_EQ(back.dim, sdp.dim);
    EXPECT_EQ(back.num_nonneg, sdp.num_nonneg);
    EXPECT_EQ(back.num_free, sdp.num_free);
    for (std::size_t k = 0; k < sdp.constraints.size(); ++k) {
      const auto& a = sdp.constraints[k].matrix.entries();
      const auto& b = back.constraints[k].matrix.entries();
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t e = 0; e < a.size(); ++e) {
        EXPECT_EQ(a[e].i, b[e].i);
        EXPECT_EQ(a[e].j, b[e].j);
        EXPECT_EQ(a[e].value, b[e].value);
      }
      EXPECT_EQ(sdp.constraints[k].rhs, back.constraints[k].rhs);
    }
  }
}

TEST(Sdpa, MaxcutLayout) {
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  const SdpProblem sdp = diagonal_constrained_sdp(l);
  EXPECT_EQ(sdp.dim, 2);
  EXPECT_EQ(sdp.constraints.size(), 2u);
  EXPECT_EQ(parse_sdpa(export_sdpa(sdp)).constraints.size(), 2u);
  const SdpProblem lifted = shor_primal([&] {
    QuadraticProgram qp;
    qp.symbols.add_group("x", 2);
    for (int i = 0; i < 2; ++i) {
      QuadForm f = QuadForm::product(LinExpr::var(i), LinExpr::var(i));
      f.add_constant(-1.0);
      qp.constraints.push_back(eq0(f, "x^2=1"));
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) qp.objective.add_monomial(i, j, l(i, j));
    return qp;
  }());
  EXPECT_EQ(lifted.constraints.size(), 3u);  // normalization + two diagonal rows
  EXPECT_EQ(lifted.dim, 3);
}

TEST(Sdpa, ParseErrors) {
  EXPECT_THROW(parse_sdpa("garbage"), Error);
  EXPECT_THROW(parse_sdpa(""), Error);
}
