#pragma once

#include <Eigen/Dense>

namespace symcert {

struct SymEigen {
  Eigen::VectorXd values;   ///< ascending
  Eigen::MatrixXd vectors;  ///< orthonormal columns, vectors.col(i) pairs with values(i)
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (symmetrized on
/// entry). `basis`, when given, is an orthonormal matrix that approximately
/// diagonalizes `s`; starting from it cuts the number of sweeps.
SymEigen sym_eigen(const Eigen::MatrixXd& s, const Eigen::MatrixXd* basis = nullptr);

/// Frobenius-nearest positive semidefinite matrix.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& s);
/// Same, reusing an eigendecomposition of s.
Eigen::MatrixXd project_psd(const SymEigen& eig);

}  // namespace symcert
