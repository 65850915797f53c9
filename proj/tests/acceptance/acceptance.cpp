// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/testing.hpp"
#include "symcert/encode.hpp"
#include "symcert/error.hpp"
#include "symcert/oracle.hpp"
#include "symcert/relax.hpp"
#include "symcert/sdpsolve.hpp"
#include "symcert/spectral.hpp"
#include "symcert/verify.hpp"

using namespace symcert;
using symcert::testing::fixture;
using symcert::testing::gaussian;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
};

SolverConfig solver(double tol) {
  SolverConfig cfg;
  cfg.tol_primal = cfg.tol_dual = cfg.tol_gap = tol;
  return cfg;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// --- 1: encodings accept traces and reject perturbed non-traces -------------

Check encoding_exactness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> mag(1e-3, 1.0);
  std::bernoulli_distribution sign;
  const std::vector<Network> nets = {load_network_file(fixture("small_2_8_1.json")),
                                     load_network_file(fixture("deep_2_5_5_3.json")),
                                     load_network_file(fixture("theta_2_4_2.json"))};
  double worst_trace = 0.0, weakest_reject = 1e300;
  int samples = 0;
  for (const Network& net : nets) {
    const Margin m = net.output_dim() == 1 ? scalar_margin(net) : margin_network(net, 0, 1);
    const PerturbationSpec spec{Norm::inf(), 1.0, Vector::Zero(net.input_dim())};
    const QuadraticProgram qp = build_local_robustness_qp(net, spec, m);
    // Activation outputs and auxiliaries: every group except the input and the pre-activations.
    std::vector<int> targets;
    for (const auto& g : qp.symbols.groups())
      if (g.name[0] == 'z' || g.name[0] == 'u' || g.name.find("aux") != std::string::npos)
        for (int i = 0; i < g.range.size; ++i) targets.push_back(g.range[i]);
    std::uniform_int_distribution<std::size_t> pick(0, targets.size() - 1);
    for (int t = 0; t < 3334; ++t, ++samples) {
      const Vector x = spec.center->array() + Vector::Random(net.input_dim()).array() * 2.0;
      const Vector trace = local_robustness_trace(net, {Norm::inf(), 2.0, spec.center}, m, {}, x);
      // The ball radius is irrelevant to the activation rows; only score those.
      double v = 0.0;
      for (const auto& c : qp.constraints)
        if (c.label.rfind("ball", 0) != 0) v = std::max(v, c.violation(trace));
      worst_trace = std::max(worst_trace, v);
      Vector bad = trace;
      bad(pick(rng)) += (sign(rng) ? 1.0 : -1.0) * mag(rng);
      double r = 0.0;
      for (const auto& c : qp.constraints)
        if (c.label.rfind("ball", 0) != 0) r = std::max(r, c.violation(bad));
      weakest_reject = std::min(weakest_reject, r);
    }
  }
  Check out;
  out.ok = worst_trace <= 1e-12 && weakest_reject >= 1e-8;
  out.detail = fmt("%.0f samples (ReLU and ReLU_theta): trace violation %.2e <= 1e-12, weakest rejection %.2e >= 1e-8",
                   static_cast<double>(samples), worst_trace, weakest_reject);
  return out;
}

// --- 2: pgd <= exact <= sdp --------------------------------------------------

Check sandwich() {
  std::mt19937_64 rng(202);
  int bad = 0;
  double slack = 1e300;
  for (int t = 0; t < 50; ++t) {
    const Network net = symcert::testing::random_two_layer(rng, 2, 8, 1);
    const Vector x = gaussian(rng, 2);
    const PerturbationSpec spec{Norm::inf(), 0.1, x};
    const Margin m = scalar_margin(net);
    const double sdp = solve_relaxation(build_local_robustness_qp(net, spec, m), Relaxation::Primal, solver(1e-8)).value;
    const ExactResult ex = exact_local_linf(net, x, 0.1, m);
    const AttackResult at = pgd_attack(net, spec, m);
    if (ex.patterns_enumerated != 256) ++bad;
    if (!(at.best_margin <= ex.optimum && ex.optimum <= sdp + 1e-5)) ++bad;
    slack = std::min(slack, sdp + 1e-5 - ex.optimum);
  }
  return {bad == 0, fmt("50 nets 2-8-1, l_inf eps=0.1: %.0f violations, min(sdp + 1e-5 - exact) = %.2e", bad, slack)};
}

// --- 3: FGL approximation ratio ------------------------------------------------

Check fgl_ratio() {
  std::mt19937_64 rng(303);
  Check out;
  std::ostringstream detail;
  for (const Norm norm : {Norm::two(), Norm::inf()}) {
    const double cap = norm.kind == Norm::Kind::Two ? 1.2534 : 1.783;
    double lo = 1e300, hi = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Network net = symcert::testing::random_two_layer(rng, 6, 10, 1);
      const Margin m = scalar_margin(net);
      const double sdp = solve_relaxation(build_fgl_qp(net, norm, m), Relaxation::Primal, solver(1e-8)).value;
      const double ratio = sdp / exact_fgl_two_layer(net, m, norm).optimum;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    out.ok = out.ok && lo >= 1 - 1e-6 && hi <= cap;
    detail << "l_" << norm.to_string() << " ratio in [" << fmt("%.8f", lo) << ", " << fmt("%.6f", hi) << "] vs [1-1e-6, "
           << cap << "]" << (norm.kind == Norm::Kind::Two ? "; " : "");
  }
  out.detail = "100 nets 6-10-1: " + detail.str();
  return out;
}

// --- 4: eigenvalue bound equals the diagonal-constrained SDP ---------------------

Check eigen_equivalence() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix m = symcert::testing::random_symmetric(rng, 10);
    const double e = eigen_fgl_bound(m).value;
    const double s = solve_sdp(diagonal_constrained_sdp(m), solver(1e-8)).bound();
    worst = std::max(worst, std::abs(e - s) / (1 + std::abs(s)));
  }
  const Matrix d = Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix();
  const double zero = eigen_fgl_bound(d).value, pt = ptdiag_bound(d).value;
  return {worst <= 1e-3 && std::abs(zero) <= 1e-6 && pt > 0.1,
          fmt("20 random 10x10: max |eig - sdp|/(1+|sdp|) = %.2e <= 1e-3; diag(1,-1): %.2e (|.| <= 1e-6), ptdiag %.4f > 0.1",
              worst, zero, pt)};
}

// --- 5: point ball is tight -------------------------------------------------------

Check point_ball() {
  const char* models[] = {"small_2_8_1", "two_layer_2_4_1", "mlp_3_6_10", "deep_2_5_5_3",
                          "theta_2_4_2", "metric_3_6_4",    "identity_1"};
  double worst = 0.0, gap = 0.0;
  int programs = 0;
  for (const char* name : models) {
    const Network net = load_network_file(fixture(std::string(name) + ".json"));
    const auto inputs = load_inputs_file(fixture(std::string(name) + "_inputs.json"));
    CertifyOptions opts;
    opts.eps = 0.0;
    opts.run_attack = false;
    for (const Norm norm : {Norm::inf(), Norm::two(), Norm::one()}) {
      opts.norm = norm;
      for (const auto& o : certify_inputs(net, name, inputs, opts).outcomes) {
        const double concrete = margin_value(net, competitor_margin(net, o.predicted, o.competitor), inputs[o.input].x);
        worst = std::max(worst, std::abs(o.sdp_value - concrete));
        gap = std::max(gap, o.rank1_gap);
        ++programs;
      }
    }
  }
  return {worst <= 1e-5 && gap <= 1e-5,
          fmt("%.0f programs over every feed-forward fixture: max |sdp - margin| = %.2e, max rank1_gap = %.2e (both <= 1e-5)",
              programs, worst, gap)};
}

// --- 6: primal and dual lifts agree ---------------------------------------------

QuadraticProgram random_qp(std::mt19937_64& rng, int n, ObjectiveSense sense) {
  QuadraticProgram qp;
  qp.sense = sense;
  qp.symbols.add_group("x", n);
  auto form = [&](const Matrix& a, const Vector& b, double c) {
    QuadForm f;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) f.add_monomial(i, j, i == j ? a(i, i) : 2 * a(i, j));
    for (int i = 0; i < n; ++i) f.add_linear(i, 2 * b(i));
    f.add_constant(c);
    return f;
  };
  qp.objective = form(symcert::testing::random_symmetric(rng, n), gaussian(rng, n), 0.0);
  // A ball keeps the program bounded; x = 0 is strictly feasible for every row.
  qp.constraints.push_back(leq0(form(Matrix::Identity(n, n), Vector::Zero(n), -4.0), "ball"));
  for (int k = 0; k < 4; ++k)
    qp.constraints.push_back(leq0(form(symcert::testing::random_symmetric(rng, n), gaussian(rng, n), -1.0),
                                  "q" + std::to_string(k)));
  return qp;
}

Check primal_dual() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> dim(2, 10);
  double worst = 0.0;
  int nonopt = 0;
  for (int t = 0; t < 20; ++t) {
    const QuadraticProgram qp = random_qp(rng, dim(rng), t % 2 ? ObjectiveSense::Min : ObjectiveSense::Max);
    const SdpSolution p = solve_sdp(shor_primal(qp), solver(1e-8));
    const SdpSolution d = solve_sdp(shor_dual(qp), solver(1e-8));
    nonopt += (p.status != SolveStatus::Optimal) + (d.status != SolveStatus::Optimal);
    worst = std::max(worst, std::abs(p.bound() - d.bound()) / (1 + std::abs(p.bound())));
  }
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  const double cut = solve_sdp(diagonal_constrained_sdp(l), solver(1e-8)).bound();
  return {worst <= 1e-5 && std::abs(cut - 4.0) <= 1e-5,
          fmt("20 QPs (n <= 10, 5 rows): max |primal - dual|/(1+|v|) = %.2e <= 1e-5; MAXCUT K2 = %.7f (4 +- 1e-5); "
              "non-optimal solves %.0f",
              worst, cut, nonopt)};
}

// --- 7: DEQ bound dominates difference quotients ---------------------------------

Check deq() {
  std::mt19937_64 rng(707);
  double slack = 1e300;
  for (int t = 0; t < 10; ++t) {
    const Network net = symcert::testing::random_deq(rng, 3, 5, 0.3 + 0.06 * t);
    const double bound =
        solve_relaxation(build_deq_fgl_qp(net, Norm::two(), scalar_margin(net)), Relaxation::Primal, solver(1e-6))
            .value;
    double best = 0.0;
    for (int s = 0; s < 1000; ++s) {
      const Vector a = gaussian(rng, 3);
      const Vector b = s % 2 ? Vector(gaussian(rng, 3)) : Vector(a + gaussian(rng, 3, 1e-3));
      best = std::max(best, std::abs(forward_prefix(net, a, net.blocks().size())(0) - forward_prefix(net, b, net.blocks().size())(0)) / (a - b).norm());
    }
    slack = std::min(slack, bound - (best - 1e-6));
  }
  return {slack >= 0.0, fmt("10 contractive DEQs (||W|| 0.30..0.84), 1000 quotients each: min(sdp - (max q - 1e-6)) = %.3e",
                            slack)};
}

// --- 8: metric task is the feed-forward margin program ---------------------------

Check metric() {
  const Network net = load_network_file(fixture("metric_3_6_4.json"));
  const auto inputs = load_inputs_file(fixture("metric_3_6_4_inputs.json"));
  double worst = 0.0;
  bool identical = true;
  int programs = 0;
  for (const auto& in : inputs) {
    const int k = predict(net, in.x);
    for (int j = 0; j < num_classes(net); ++j) {
      if (j == k) continue;
      const PerturbationSpec spec{Norm::inf(), 0.1, in.x};
      const QuadraticProgram a = build_metric_qp(net, spec, k, j);
      const QuadraticProgram b = build_local_robustness_qp(net, spec, metric_margin(*net.metric_head(), k, j));
      identical = identical && dump_qp(a) == dump_qp(b);
      const double va = solve_relaxation(a, Relaxation::Primal, {}).value;
      const double vb = solve_relaxation(b, Relaxation::Primal, {}).value;
      worst = std::max(worst, std::abs(va - vb));
      ++programs;
    }
  }
  return {identical && worst <= 1e-8,
          fmt("%.0f anchor pairs: programs identical = %.0f, max |metric - feed-forward| = %.2e <= 1e-8", programs,
              identical, worst)};
}

// --- 9: report ordering ---------------------------------------------------------

Check report() {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "symcert_acceptance_report";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const char* models[] = {"small_2_8_1", "two_layer_2_4_1", "mlp_3_6_10", "metric_3_6_4", "identity_1"};
  for (const char* name : models) {
    const Network net = load_network_file(fixture(std::string(name) + ".json"));
    const auto inputs = load_inputs_file(fixture(std::string(name) + "_inputs.json"));
    for (const Norm norm : {Norm::inf(), Norm::two()})
      for (const double eps : {0.0, 0.05, 0.3}) {
        CertifyOptions opts;
        opts.norm = norm;
        opts.eps = eps;
        std::ofstream out(dir / (std::string(name) + "_" + norm.to_string() + "_" + std::to_string(eps) + ".jsonl"));
        write_outcomes(certify_inputs(net, name, inputs, opts).outcomes, out);
      }
  }
  const Report r = run_report(dir);
  int bad = 0, certified = 0, pgd = 0;
  for (const auto& row : r.rows) {
    bad += row.certified > row.pgd || row.pgd > row.accuracy || row.accuracy > row.inputs;
    certified += row.certified;
    pgd += row.pgd;
  }
  std::filesystem::remove_all(dir);
  return {bad == 0 && !r.rows.empty(),
          fmt("%.0f rows: rows with Certified > PGD = %.0f; totals Certified %.0f", r.rows.size(), bad, certified) +
              " <= PGD " + std::to_string(pgd)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "encoding exactness", 5, encoding_exactness},
      {2, "pgd <= exact <= sdp", 600, sandwich},
      {3, "FGL approximation ratio", 900, fgl_ratio},
      {4, "eigenvalue bound equals SDP", 120, eigen_equivalence},
      {5, "point-ball tightness", 60, point_ball},
      {6, "primal/dual agreement", 120, primal_dual},
      {7, "DEQ bound above quotients", 300, deq},
      {8, "metric equals feed-forward", 60, metric},
      {9, "report ordering", 1e300, report},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = r.ok && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s; %.1f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, r.detail.c_str(), secs,
                in_time ? "" : " (over the time limit)");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
