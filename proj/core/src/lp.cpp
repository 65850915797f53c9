#include "symcert/lp.hpp"

#include <cmath>
#include <vector>

#include "symcert/error.hpp"

namespace symcert {

namespace {

constexpr double kEps = 1e-10;

class Tableau {
 public:
  // Columns: structural [0, n), slacks [n, n + m), artificials after that,
  // right-hand side last.
  Tableau(const Matrix& a, const Vector& b) : m_(static_cast<int>(a.rows())), n_(static_cast<int>(a.cols())) {
    std::vector<int> need;
    for (int i = 0; i < m_; ++i)
      if (b(i) < 0.0) need.push_back(i);
    art_ = static_cast<int>(need.size());
    t_ = Matrix::Zero(m_ + 1, n_ + m_ + art_ + 1);
    basis_.assign(m_, -1);
    int k = 0;
    for (int i = 0; i < m_; ++i) {
      const double sign = b(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign * a.row(i);
      t_(i, n_ + i) = sign;
      t_(i, rhs()) = sign * b(i);
      if (b(i) < 0.0) {
        t_(i, n_ + m_ + k) = 1.0;
        basis_[i] = n_ + m_ + k++;
      } else {
        basis_[i] = n_ + i;
      }
    }
    scale_ = 1.0 + a.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
  }

  int artificials() const { return art_; }
  int rhs() const { return static_cast<int>(t_.cols()) - 1; }
  int pivots() const { return pivots_; }

  // Objective row holds reduced costs of "maximize obj . x"; entering
  // columns have positive reduced cost.
  void set_objective(const Vector& obj) {
    t_.row(m_).setZero();
    t_.row(m_).head(obj.size()) = obj;
    for (int i = 0; i < m_; ++i) {
      const double cb = basis_[i] < obj.size() ? obj(basis_[i]) : 0.0;
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  // Returns false if unbounded.
  bool optimize(int allowed_cols) {
    const int budget = 50 * (m_ + allowed_cols + 10) + 1000;
    for (;;) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j)
        if (t_(m_, j) > kEps * scale_) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double p = t_(i, enter);
        if (p <= kEps) continue;
        const double ratio = t_(i, rhs()) / p;
        if (leave < 0 || ratio < best - kEps || (std::abs(ratio - best) <= kEps && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      if (pivots_ > budget) throw Error(ErrorKind::LpNumericalTrouble, "simplex pivot budget exhausted");
    }
  }

  void pivot(int row, int col) {
    ++pivots_;
    t_.row(row) /= t_(row, col);
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    basis_[row] = col;
    if (!t_.row(m_).allFinite()) throw Error(ErrorKind::LpNumericalTrouble, "non-finite simplex tableau");
  }

  // Pivots zero-level artificials out of the basis where possible.
  void expel_artificials() {
    const int first_art = n_ + m_;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < first_art) continue;
      for (int j = 0; j < first_art; ++j)
        if (std::abs(t_(i, j)) > kEps * scale_) {
          pivot(i, j);
          break;
        }
    }
  }

  double objective_value() const { return -t_(m_, rhs()); }

  Vector solution() const {
    Vector x = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) x(basis_[i]) = t_(i, rhs());
    return x;
  }

  int structural_and_slack() const { return n_ + m_; }

 private:
  int m_, n_, art_ = 0;
  Matrix t_;
  std::vector<int> basis_;
  int pivots_ = 0;
  double scale_ = 1.0;
};

}  // namespace

LpResult solve_lp(const Vector& c, const Matrix& a, const Vector& b) {
  if (a.cols() != c.size() || a.rows() != b.size())
    throw Error(ErrorKind::DimensionMismatch, "LP dimensions disagree");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite())
    throw Error(ErrorKind::LpNumericalTrouble, "LP data is not finite");

  Tableau tab(a, b);
  const int n = static_cast<int>(a.cols());
  const int m = static_cast<int>(a.rows());
  LpResult result;
  if (tab.artificials() > 0) {
    Vector phase1 = Vector::Zero(n + m + tab.artificials());
    phase1.tail(tab.artificials()).setConstant(-1.0);
    tab.set_objective(phase1);
    tab.optimize(n + m + tab.artificials());
    const double infeas = -tab.objective_value();
    if (infeas > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) {
      result.status = LpStatus::Infeasible;
      result.pivots = tab.pivots();
      return result;
    }
    tab.expel_artificials();
  }
  tab.set_objective(c);
  if (!tab.optimize(tab.structural_and_slack())) {
    result.status = LpStatus::Unbounded;
    result.pivots = tab.pivots();
    return result;
  }
  result.status = LpStatus::Optimal;
  result.x = tab.solution();
  result.value = c.dot(result.x);
  result.pivots = tab.pivots();
  return result;
}

}  // namespace symcert
