#include "symcert/sdpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/Sparse>

#include "symcert/eigen.hpp"
#include "symcert/error.hpp"

namespace symcert {

void SolverConfig::validate() const {
  if (!(tol_primal > 0.0 && tol_dual > 0.0 && tol_gap > 0.0))
    throw Error(ErrorKind::InvalidArgument, "solver tolerances must be positive");
  if (max_iter <= 0) throw Error(ErrorKind::InvalidArgument, "max_iter must be positive");
  if (!(rho > 0.0) || !(rho_min > 0.0) || !(rho_max >= rho_min))
    throw Error(ErrorKind::InvalidArgument, "invalid penalty bounds");
  if (!(relaxation > 0.0 && relaxation < 1.618))
    throw Error(ErrorKind::InvalidArgument, "relaxation must lie in (0, 1.618)");
  if (adapt_interval <= 0) throw Error(ErrorKind::InvalidArgument, "adapt_interval must be positive");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
const double kSqrt2 = std::sqrt(2.0);
constexpr double kAdaptThreshold = 5.0;
constexpr double kMaxRhoStep = 5.0;
constexpr double kAdaptGrowth = 1.2;

// Half-vectorization with off-diagonals scaled by sqrt(2) so that inner
// products match the Frobenius product of the symmetric matrices.
class SvecIndex {
 public:
  explicit SvecIndex(int n) : n_(n) {}
  int size() const { return n_ * (n_ + 1) / 2; }
  int operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    return j * (j + 1) / 2 + i;
  }
  Eigen::MatrixXd to_matrix(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    Eigen::MatrixXd m(n_, n_);
    for (int j = 0; j < n_; ++j) {
      m(j, j) = v((*this)(j, j));
      for (int i = 0; i < j; ++i) m(i, j) = m(j, i) = v((*this)(i, j)) / kSqrt2;
    }
    return m;
  }
  void from_matrix(const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> v) const {
    for (int j = 0; j < n_; ++j) {
      v((*this)(j, j)) = m(j, j);
      for (int i = 0; i < j; ++i) v((*this)(i, j)) = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }

 private:
  int n_;
};

// Stacked variable (svec X, nonneg scalars, slacks, free scalars).
struct Layout {
  int nsvec = 0, nonneg = 0, slack = 0, free = 0;
  int cone_begin() const { return nsvec; }
  int free_begin() const { return nsvec + nonneg + slack; }
  int size() const { return free_begin() + free; }
  int scalar_column(int k) const { return k < nonneg ? nsvec + k : free_begin() + (k - nonneg); }
};

class AffineSolver {
 public:
  explicit AffineSolver(const Eigen::MatrixXd& gram) {
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !(llt_.matrixLLT().diagonal().array() > 1e-10).all()) {
      cod_.emplace(gram);
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return cod_ ? Eigen::VectorXd(cod_->solve(r)) : Eigen::VectorXd(llt_.solve(r)); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod_;
};

}  // namespace

SdpSolution solve_sdp(const SdpProblem& sdp, const SolverConfig& cfg) {
  cfg.validate();
  sdp.validate();
  if (sdp.constraints.empty()) throw Error(ErrorKind::InvalidArgument, "SDP has no constraints");

  const int n = sdp.dim;
  const int m = static_cast<int>(sdp.constraints.size());
  const SvecIndex sv(n);
  Layout lay;
  lay.nsvec = sv.size();
  lay.nonneg = sdp.num_nonneg;
  lay.free = sdp.num_free;
  std::vector<int> slack_of(m, -1);
  for (int r = 0; r < m; ++r)
    if (sdp.constraints[r].sense == RowSense::Leq) slack_of[r] = lay.slack++;
  const int ncols = lay.size();

  // Constraint matrix, rhs and cost in stacked coordinates.
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    const auto& c = sdp.constraints[r];
    for (const auto& e : c.matrix.entries())
      trips.emplace_back(r, sv(e.i, e.j), e.i == e.j ? e.value : kSqrt2 * e.value);
    for (const auto& [k, v] : c.scalars) trips.emplace_back(r, lay.scalar_column(k), v);
    if (slack_of[r] >= 0) trips.emplace_back(r, lay.nsvec + lay.nonneg + slack_of[r], 1.0);
    b(r) = c.rhs;
  }
  SpMat a(m, ncols);
  a.setFromTriplets(trips.begin(), trips.end());

  // MAX problems are solved as MIN of the negated objective.
  const double sense = sdp.sense == ObjectiveSense::Max ? -1.0 : 1.0;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(ncols);
  for (const auto& e : sdp.objective.entries())
    cost(sv(e.i, e.j)) += sense * (e.i == e.j ? e.value : kSqrt2 * e.value);
  for (const auto& [k, v] : sdp.objective_scalars) cost(lay.scalar_column(k)) += sense * v;

  const double b_norm = b.norm(), c_norm = cost.norm();

  // Row equilibration and cost normalisation.
  Eigen::VectorXd row_scale(m);
  for (int r = 0; r < m; ++r) {
    const double nr = a.row(r).norm();
    row_scale(r) = nr > 0.0 ? 1.0 / nr : 1.0;
  }
  const SpMat as = row_scale.asDiagonal() * a;
  const SpMat ast = as.transpose();
  const Eigen::VectorXd bs = row_scale.cwiseProduct(b);
  const double kappa = c_norm > 0.0 ? c_norm : 1.0;
  const Eigen::VectorXd cs = cost / kappa;

  const Eigen::MatrixXd gram = Eigen::MatrixXd(as * ast);
  const AffineSolver affine(gram);

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(ncols);  // primal iterate
  Eigen::VectorXd xi_hat = xi;                        // unrelaxed primal, always in the cone
  Eigen::VectorXd zs = Eigen::VectorXd::Zero(ncols);  // dual slack
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd a_xi = Eigen::VectorXd::Zero(m);
  double mu = cfg.rho;
  const double gamma = cfg.relaxation;

  std::optional<Eigen::MatrixXd> basis;
  SdpSolution sol;
  sol.status = SolveStatus::MaxIter;

  struct Snapshot {
    Eigen::VectorXd xi_hat, y, z;
    double merit = std::numeric_limits<double>::infinity();
    double rp = 0, rd = 0, gap = 0, pobj = 0, dobj = 0;
    int iter = 0;
  } best;

  double acc_rp = 0.0, acc_rd = 0.0;
  int next_adapt = cfg.adapt_interval, last_adapt = 0;
  int iter = 0;
  bool converged = false;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    // Affine step: dual multipliers.
    const Eigen::VectorXd rhs = mu * (bs - a_xi) + as * (cs - zs);
    y = affine.solve(rhs);
    const Eigen::VectorXd aty = ast * y;

    // Cone step.
    Eigen::VectorXd v = cs - aty - mu * xi;
    Eigen::VectorXd z_new(ncols);
    if (n > 0) {
      const Eigen::MatrixXd vm = sv.to_matrix(v.head(lay.nsvec));
      if (!vm.allFinite()) {
        sol.status = SolveStatus::NumericalTrouble;
        break;
      }
      if (iter % 50 == 1) basis.reset();
      SymEigen eig = sym_eigen(vm, basis ? &*basis : nullptr);
      basis = eig.vectors;
      sv.from_matrix(project_psd(eig), z_new.head(lay.nsvec));
    }
    for (int k = lay.cone_begin(); k < lay.free_begin(); ++k) z_new(k) = std::max(v(k), 0.0);
    for (int k = lay.free_begin(); k < ncols; ++k) z_new(k) = 0.0;
    zs = std::move(z_new);

    xi_hat = (zs - v) / mu;
    const Eigen::VectorXd a_hat = as * xi_hat;
    xi = (1.0 - gamma) * xi + gamma * xi_hat;
    a_xi = (1.0 - gamma) * a_xi + gamma * a_hat;

    // Residuals in the original scaling.
    const double rp = (a_hat - bs).cwiseQuotient(row_scale).norm();
    const double rd = kappa * (cs - aty - zs).norm();
    const double pobj = kappa * cs.dot(xi_hat);
    const double dobj = kappa * bs.dot(y);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (!std::isfinite(rp) || !std::isfinite(rd) || !std::isfinite(gap)) {
      sol.status = SolveStatus::NumericalTrouble;
      break;
    }
    const double np = rp / (cfg.tol_primal * (1.0 + b_norm));
    const double nd = rd / (cfg.tol_dual * (1.0 + c_norm));
    const double ng = gap / cfg.tol_gap;
    const double merit = std::max({np, nd, ng});
    if (merit < best.merit) {
      best.xi_hat = xi_hat;
      best.y = y;
      best.z = zs;
      best.merit = merit;
      best.rp = rp;
      best.rd = rd;
      best.gap = gap;
      best.pobj = pobj;
      best.dobj = dobj;
      best.iter = iter;
    }
    if (merit <= 1.0) {
      converged = true;
      break;
    }

    if (cfg.verbose && iter % (10 * cfg.adapt_interval) == 0)
      std::fprintf(stderr, "iter %6d  mu %.2e  rp %.2e  rd %.2e  gap %.2e  obj %.9g\n", iter, mu, rp, rd, gap, sense * dobj);
    acc_rp += np;
    acc_rd += nd;
    if (cfg.adaptive_rho && iter >= next_adapt) {
      const double ratio = acc_rp / std::max(acc_rd, 1e-300);
      const bool change = ratio > kAdaptThreshold || ratio < 1.0 / kAdaptThreshold;
      int gap_len = next_adapt - last_adapt;
      gap_len = static_cast<int>(std::ceil(gap_len * kAdaptGrowth));
      last_adapt = iter;
      next_adapt = iter + gap_len;
      // Small mu weights dual feasibility, large mu primal feasibility.
      if (change) {
        const double factor = std::clamp(std::sqrt(ratio), 1.0 / kMaxRhoStep, kMaxRhoStep);
        mu = std::clamp(mu * factor, cfg.rho_min, cfg.rho_max);
      }
      acc_rp = acc_rd = 0.0;
    }
  }

  if (best.xi_hat.size() == 0) {
    sol.status = SolveStatus::NumericalTrouble;
    sol.x = Eigen::MatrixXd::Zero(n, n);
    sol.scalars = Eigen::VectorXd::Zero(sdp.num_scalars());
    sol.duals = Eigen::VectorXd::Zero(m);
    sol.dual_slack = Eigen::MatrixXd::Zero(n, n);
    sol.iterations = std::min(iter, cfg.max_iter);
    return sol;
  }
  if (converged) sol.status = SolveStatus::Optimal;

  sol.iterations = converged ? iter : std::min(iter, cfg.max_iter);
  sol.x = sv.to_matrix(best.xi_hat.head(lay.nsvec));
  sol.scalars.resize(sdp.num_scalars());
  for (int k = 0; k < sdp.num_scalars(); ++k) sol.scalars(k) = best.xi_hat(lay.scalar_column(k));
  sol.duals.resize(m);
  for (int r = 0; r < m; ++r) {
    const double yr = kappa * row_scale(r) * best.y(r);
    sol.duals(r) = slack_of[r] >= 0 ? -yr : yr;
  }
  sol.dual_slack = kappa * sv.to_matrix(best.z.head(lay.nsvec));
  sol.primal_obj = sense * best.pobj;
  sol.dual_obj = sense * best.dobj;
  sol.primal_residual = best.rp;
  sol.dual_residual = best.rd;
  sol.gap = best.gap;
  return sol;
}

}  // namespace symcert
