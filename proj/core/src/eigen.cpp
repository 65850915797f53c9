#include "symcert/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "symcert/error.hpp"

namespace symcert {

namespace {

constexpr int kMaxSweeps = 64;

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double s = 0.0;
  const auto n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

}  // namespace

SymEigen sym_eigen(const Eigen::MatrixXd& s, const Eigen::MatrixXd* basis) {
  if (s.rows() != s.cols()) throw Error(ErrorKind::DimensionMismatch, "sym_eigen needs a square matrix");
  const Eigen::Index n = s.rows();
  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  if (!a.allFinite()) throw Error(ErrorKind::InvalidArgument, "sym_eigen input is not finite");
  Eigen::MatrixXd v;
  if (basis) {
    if (basis->rows() != n || basis->cols() != n) throw Error(ErrorKind::DimensionMismatch, "basis shape");
    v = *basis;
    a = v.transpose() * a * v;
    a = 0.5 * (a + a.transpose());
  } else {
    v = Eigen::MatrixXd::Identity(n, n);
  }

  const double scale = a.norm();
  const double target = 1e-14 * scale;
  SymEigen out;
  int sweep = 0;
  for (; sweep <= kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= target || scale == 0.0) break;
    if (sweep == kMaxSweeps) throw Error(ErrorKind::NoConvergence, "Jacobi did not converge in 64 sweeps");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p), aqq = a(q, q);
        // Skip elements already negligible next to both diagonal entries.
        if (sweep > 3 && std::abs(apq) < 1e-18 * std::abs(app) && std::abs(apq) < 1e-18 * std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  out.sweeps = sweep;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

Eigen::MatrixXd project_psd(const SymEigen& eig) {
  const Eigen::Index n = eig.values.size();
  Eigen::Index first = 0;
  while (first < n && eig.values(first) <= 0.0) ++first;
  const Eigen::Index k = n - first;
  if (k == 0) return Eigen::MatrixXd::Zero(n, n);
  const auto u = eig.vectors.rightCols(k);
  Eigen::MatrixXd out = u * eig.values.tail(k).asDiagonal() * u.transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& s) { return project_psd(sym_eigen(s)); }

}  // namespace symcert
