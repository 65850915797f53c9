#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "symcert/qp.hpp"

namespace symcert {

/// Upper-triangle triplets of a symmetric matrix. Off-diagonal entries count
/// twice in the Frobenius inner product.
class SparseSym {
 public:
  struct Entry {
    int i;
    int j;
    double value;
  };

  /// Accumulates into entry (min(i,j), max(i,j)).
  void add(int i, int j, double value);
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  double dot(const Eigen::MatrixXd& x) const;
  /// Adds scale * this into the dense symmetric matrix `out`.
  void axpy_into(double scale, Eigen::MatrixXd& out) const;
  Eigen::MatrixXd dense(int dim) const;
  double squared_norm() const;
  int max_index() const;

 private:
  std::vector<Entry> entries_;
};

using ScalarTerms = std::vector<std::pair<int, double>>;

enum class RowSense { Leq, Eq };

/// <A, X> + sum_k g_k u_k  (<= or =)  rhs
struct SdpConstraint {
  SparseSym matrix;
  ScalarTerms scalars;
  RowSense sense = RowSense::Leq;
  double rhs = 0.0;
  std::string label;
};

/// Conic program over one PSD block X (dim x dim), `num_nonneg` scalar
/// variables constrained to be >= 0 and `num_free` unrestricted scalars
/// (indexed after the nonnegative ones).
struct SdpProblem {
  int dim = 0;
  int num_nonneg = 0;
  int num_free = 0;
  ObjectiveSense sense = ObjectiveSense::Min;
  SparseSym objective;
  ScalarTerms objective_scalars;
  std::vector<SdpConstraint> constraints;
  /// True for Shor primal lifts, whose constraint 0 is X(0,0) = 1.
  bool corner_normalized = false;

  int num_scalars() const { return num_nonneg + num_free; }
  void validate() const;
};

}  // namespace symcert
