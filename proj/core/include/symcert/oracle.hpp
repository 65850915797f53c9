#pragma once

#include <cstdint>

#include "symcert/model.hpp"

namespace symcert {

struct AttackResult {
  Vector best_input;
  double best_margin = 0.0;
  int iterations_used = 0;
  int restarts_used = 0;
};

struct PgdConfig {
  int steps = 200;
  /// 0 selects 2.5 * eps / steps.
  double step_size = 0.0;
  int restarts = 10;
  std::uint64_t seed = 0;
};

/// Projected gradient ascent on the margin over the perturbation ball.
/// Restart 0 starts at the center, the rest at uniform random points.
/// Supports l1, l2 and l_inf; rational norms throw UnsupportedNorm.
AttackResult pgd_attack(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                        const PgdConfig& cfg = {});

/// Best margin over random points of the ball (any norm), center included.
AttackResult sample_attack(const Network& net, const PerturbationSpec& spec, const Margin& margin, int samples,
                           std::uint64_t seed);

/// pgd_attack, or sample_attack with steps * restarts samples for norms PGD
/// does not handle.
AttackResult attack(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                    const PgdConfig& cfg = {});

/// Gradient of the margin with respect to the input (ReLU kinks give 0).
Vector margin_gradient(const Network& net, const Margin& margin, const Vector& x);

/// Euclidean projection onto the ball of `spec` (l1, l2, l_inf).
Vector project_to_ball(const Vector& x, const PerturbationSpec& spec);

struct ExactResult {
  double optimum = 0.0;
  Vector arg;
  long long patterns_enumerated = 0;
  long long patterns_feasible = 0;
};

/// Exact max of the margin over an l_inf box for a network whose margin
/// reads the output of its first ReLU layer: one LP per activation pattern.
/// Hidden width is limited to 20.
ExactResult exact_local_linf(const Network& net, const Vector& center, double eps, const Margin& margin);

/// max over slope patterns s in {alpha, beta}^n of || v diag(s) W ||_q, the
/// dual norm of the input norm. Hidden width is limited to 24.
ExactResult exact_fgl_two_layer(const RowVector& v, const Matrix& w, const Norm& norm, double alpha = 0.0,
                                double beta = 1.0);
/// Same, reading W, the activation slopes and v from a two-layer network.
ExactResult exact_fgl_two_layer(const Network& net, const Margin& margin, const Norm& norm);

}  // namespace symcert
