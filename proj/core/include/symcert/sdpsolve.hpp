#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "symcert/sdp.hpp"

namespace symcert {

struct SolverConfig {
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  double tol_gap = 1e-6;
  int max_iter = 50000;
  /// Initial penalty. Rescaled adaptively every `adapt_interval` iterations
  /// within [rho_min, rho_max] when `adaptive_rho` is set.
  double rho = 1.0;
  bool adaptive_rho = true;
  int adapt_interval = 100;
  double rho_min = 1e-4;
  double rho_max = 1e4;
  /// Step length of the multiplier update (1 is plain ADMM).
  double relaxation = 1.5;
  std::uint64_t seed = 0;
  /// Progress lines on stderr every `adapt_interval` * 10 iterations.
  bool verbose = false;

  void validate() const;
};

enum class SolveStatus { Optimal, MaxIter, NumericalTrouble };

std::string to_string(SolveStatus status);

struct SdpSolution {
  Eigen::MatrixXd x;        ///< PSD block
  Eigen::VectorXd scalars;  ///< nonnegative then free scalar variables
  /// One multiplier per constraint row; >= 0 on inequality rows.
  Eigen::VectorXd duals;
  /// Dual slack C - A^*(y) on the PSD block (MIN convention).
  Eigen::MatrixXd dual_slack;
  /// Objective values in the problem's own sense.
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;  ///< relative
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;

  /// The dual-side value: an upper bound for MAX problems, a lower bound for
  /// MIN problems, up to the reported residuals.
  double bound() const { return dual_obj; }
};

/// Operator-splitting solver: alternates an exact projection onto the affine
/// constraint set (cached Cholesky of A A^*) with a projection onto
/// PSD x nonnegative x free.
SdpSolution solve_sdp(const SdpProblem& sdp, const SolverConfig& cfg = {});

}  // namespace symcert
