#pragma once

#include "symcert/model.hpp"

namespace symcert {

struct SpectralConfig {
  int iterations = 5000;
  /// Step at iteration 1; 0 selects ||M||_F / n. Steps decay like 1/sqrt(k).
  double initial_step = 0.0;
  /// Iterations without improvement before the step scale is halved.
  int patience = 200;
};

struct SpectralResult {
  double value = 0.0;
  /// Minimizing h (sum zero) for eigen_fgl_bound, c >= 0 for ptdiag_bound.
  Vector weights;
  int iterations = 0;
};

/// min over sum(h) = 0 of n * lambda_max(M + diag(h)), which equals
/// max { <M, X> : X PSD, X_ii = 1 }. The value at the best iterate, so it is
/// an upper bound on that optimum.
SpectralResult eigen_fgl_bound(const Matrix& m, const SpectralConfig& cfg = {});

/// min over c >= 0 of sum(c) + n * max(lambda_max(M - diag(c)), 0).
SpectralResult ptdiag_bound(const Matrix& m, const SpectralConfig& cfg = {});

/// Reads a whitespace or comma separated square matrix, one row per line.
Matrix load_matrix(std::string_view text);
Matrix load_matrix_file(const std::filesystem::path& path);

}  // namespace symcert
