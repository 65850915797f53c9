#include "symcert/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "symcert/eigen.hpp"
#include "symcert/error.hpp"

namespace symcert {

namespace {

struct Evaluation {
  double value;
  Vector subgradient;
};

void check_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "spectral bounds need a square matrix");
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteWeight, "matrix has non-finite entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::InvalidArgument, "matrix is not symmetric");
}

// Projected subgradient descent with 1/sqrt(k) steps. The step scale halves when
// the best value stalls for `patience` iterations, which keeps the iterates
// from orbiting a sharp minimum at a fixed distance.
SpectralResult descend(const std::function<Evaluation(const Vector&)>& eval,
                       const std::function<void(Vector&)>& project, Vector w, double step0,
                       const SpectralConfig& cfg) {
  if (cfg.iterations <= 0) throw Error(ErrorKind::InvalidArgument, "iterations must be positive");
  SpectralResult best;
  best.value = std::numeric_limits<double>::infinity();
  double scale = 1.0;
  int stall = 0;
  int k = 1;
  for (; k <= cfg.iterations; ++k) {
    Evaluation e = eval(w);
    if (e.value < best.value) {
      best.value = e.value;
      best.weights = w;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      scale *= 0.5;
      stall = 0;
      w = best.weights;
      continue;
    }
    const double gnorm = e.subgradient.norm();
    if (gnorm == 0.0) break;
    w -= (scale * step0 / std::sqrt(static_cast<double>(k))) * e.subgradient;
    project(w);
  }
  best.iterations = std::min(k, cfg.iterations);
  return best;
}

double default_step(const Matrix& m, const SpectralConfig& cfg) {
  if (cfg.initial_step > 0.0) return cfg.initial_step;
  const double s = m.norm() / static_cast<double>(m.rows());
  return s > 0.0 ? s : 1.0;
}

// Newton continuation on the smoothed objective t log sum exp(lambda_i / t)
// over sum(h) = 0, with t shrinking towards zero. The smoothing overestimates
// lambda_max by at most t log n; every candidate is scored by its exact
// lambda_max, so the result stays an upper bound on the minimum.
void polish(const Matrix& sym, SpectralResult& best) {
  const Eigen::Index n = sym.rows();
  if (n < 2) return;
  const double dn = static_cast<double>(n);
  const Matrix center = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / dn);
  const double scale = std::max(sym.norm(), 1e-300);
  Vector h = best.weights;

  struct Smoothed {
    double value, top;
    Vector grad;
    Matrix hess;
  };
  auto eval = [&](const Vector& hv, double t, bool want_hessian) {
    Matrix shifted = sym;
    shifted.diagonal() += hv;
    const SymEigen eig = sym_eigen(shifted);
    const Vector& lam = eig.values;
    const double top = lam(n - 1);
    Vector w = ((lam.array() - top) / t).exp();
    const double z = w.sum();
    w /= z;
    Smoothed out{top + t * std::log(z), top, Vector::Zero(n), Matrix()};
    const Matrix v2 = eig.vectors.cwiseAbs2();  // column i holds v_i o v_i
    out.grad = v2 * w;
    if (want_hessian) {
      out.hess = (v2 * w.asDiagonal() * v2.transpose() - out.grad * out.grad.transpose()) / t;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double gap = lam(j) - lam(i);
          const double g = gap > 1e-12 * scale ? (w(j) - w(i)) / gap : 0.5 * (w(i) + w(j)) / t;
          if (g == 0.0) continue;
          const Vector a = eig.vectors.col(i).cwiseProduct(eig.vectors.col(j));
          out.hess.noalias() += (2.0 * g) * a * a.transpose();
        }
    }
    return out;
  };

  for (double t = 1e-2 * scale; t > 1e-13 * scale; t *= 0.1) {
    for (int it = 0; it < 30; ++it) {
      const Smoothed cur = eval(h, t, true);
      if (dn * cur.top < best.value) {
        best.value = dn * cur.top;
        best.weights = h;
      }
      const Vector g = center * cur.grad;
      if (g.norm() <= 1e-14 * (1.0 + std::abs(cur.top))) break;
      Matrix hp = center * cur.hess * center;
      hp += Matrix::Constant(n, n, 1.0 / dn) + Matrix::Identity(n, n) * (1e-14 / t);
      Vector step = -(center * hp.ldlt().solve(g));
      if (!step.allFinite()) return;
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        const Vector trial = h + alpha * step;
        const Smoothed next = eval(trial, t, false);
        if (next.value <= cur.value + 1e-4 * alpha * g.dot(step)) {
          h = trial;
          moved = true;
          if (dn * next.top < best.value) {
            best.value = dn * next.top;
            best.weights = h;
          }
          break;
        }
      }
      if (!moved) break;
    }
  }
  best.weights.array() -= best.weights.mean();
}

}  // namespace

SpectralResult eigen_fgl_bound(const Matrix& m, const SpectralConfig& cfg) {
  check_symmetric(m);
  const Eigen::Index n = m.rows();
  if (n == 0) return {0.0, Vector(), 0};
  const Matrix sym = 0.5 * (m + m.transpose());
  const double dn = static_cast<double>(n);
  auto eval = [&](const Vector& h) {
    Matrix shifted = sym;
    shifted.diagonal() += h;
    const SymEigen eig = sym_eigen(shifted);
    const Vector u = eig.vectors.col(n - 1);
    Vector g = u.cwiseAbs2();
    g.array() -= g.mean();
    return Evaluation{dn * eig.values(n - 1), g};
  };
  auto project = [](Vector& h) { h.array() -= h.mean(); };
  SpectralResult best = descend(eval, project, Vector::Zero(n), default_step(sym, cfg), cfg);
  polish(sym, best);
  return best;
}

SpectralResult ptdiag_bound(const Matrix& m, const SpectralConfig& cfg) {
  check_symmetric(m);
  const Eigen::Index n = m.rows();
  if (n == 0) return {0.0, Vector(), 0};
  const Matrix sym = 0.5 * (m + m.transpose());
  const double dn = static_cast<double>(n);
  auto eval = [&](const Vector& c) {
    Matrix shifted = sym;
    shifted.diagonal() -= c;
    const SymEigen eig = sym_eigen(shifted);
    const double top = eig.values(n - 1);
    Vector g = Vector::Ones(n);
    if (top > 0.0) g -= dn * eig.vectors.col(n - 1).cwiseAbs2();
    return Evaluation{c.sum() + dn * std::max(top, 0.0), g};
  };
  auto project = [](Vector& c) { c = c.cwiseMax(0.0); };
  return descend(eval, project, Vector::Zero(n), default_step(sym, cfg), cfg);
}

Matrix load_matrix(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t\r")] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "bad matrix entry '" + tok + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n)
      throw Error(ErrorKind::DimensionMismatch, "matrix row " + std::to_string(i) + " has wrong length");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_matrix(ss.str());
}

}  // namespace symcert
