#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "symcert/model.hpp"
#include "symcert/qp.hpp"
#include "symcert/sdp.hpp"

namespace symcert {

struct PresolveResult {
  QuadraticProgram qp;
  /// Every original variable as an affine expression in the reduced ones.
  std::vector<LinExpr> recover;
  int eliminated = 0;
  /// Equalities left in place because substitution made them self-referential.
  int skipped_cyclic = 0;

  /// Original assignment from a reduced one.
  Vector expand(const Vector& reduced) const;
  /// Reduced assignment from an original one (drops eliminated variables).
  Vector restrict(const Vector& original) const;

  std::vector<int> kept;  // original index of each reduced variable
};

/// Substitutes out every variable defined by a linear equality with a unit
/// coefficient.
PresolveResult presolve_eliminate_affine(const QuadraticProgram& qp);

/// Substitutes constants for variables whose constraints admit a single
/// value: degenerate intervals from one-variable constraints, convex
/// constraints with zero minimum (a radius-0 ball) and linear rows that are
/// already tight at those bounds. Repeats until nothing changes, so a point
/// input propagates through the layers. Pins are exact up to `tol`.
PresolveResult presolve_fix_pinned(const QuadraticProgram& qp, double tol = 1e-9);

/// presolve_eliminate_affine followed by presolve_fix_pinned.
PresolveResult presolve(const QuadraticProgram& qp);

/// Lifts x to X = [1; x][1; x]^T: each (A, b, c) becomes [[c, b^T], [b, A]]
/// and X(0,0) = 1 is constraint 0.
SdpProblem shor_primal(const QuadraticProgram& qp);

/// Lagrangian form over multipliers: PSD slack S = [[c(l) - zeta, b(l)^T],
/// [b(l), A(l)]], l >= 0 on inequality rows, free on equalities, zeta free.
/// The optimum is reported in the program's own sense, so for MAX programs it
/// upper-bounds the optimum just like shor_primal.
SdpProblem shor_dual(const QuadraticProgram& qp);

/// The lifted point of x, for checking relaxation soundness.
Matrix lift(const Vector& x);

/// max/min <M, X> subject to X PSD and X_ii = 1.
SdpProblem diagonal_constrained_sdp(const Matrix& m, ObjectiveSense sense = ObjectiveSense::Max);

/// Sparse SDPA text. Inequality rows get slack entries in a diagonal block;
/// free scalars are split into nonnegative pairs. A leading comment line
/// records the layout so parse_sdpa can restore the problem exactly.
std::string export_sdpa(const SdpProblem& sdp);
void export_sdpa(const SdpProblem& sdp, std::ostream& out);
SdpProblem parse_sdpa(std::string_view text);

}  // namespace symcert
