#pragma once

#include "symcert/model.hpp"

namespace symcert {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vector x;
  int pivots = 0;
};

/// max c.x subject to A x <= b, x >= 0. Dense two-phase tableau simplex with
/// Bland's rule, so it cannot cycle. Throws LpNumericalTrouble if the pivot
/// budget runs out or the tableau becomes non-finite.
LpResult solve_lp(const Vector& c, const Matrix& a, const Vector& b);

}  // namespace symcert
