#include "symcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "symcert/error.hpp"
#include "symcert/lp.hpp"

namespace symcert {

namespace {

Vector center_of(const PerturbationSpec& spec, int dim) {
  return spec.center ? *spec.center : Vector::Zero(dim);
}

// Euclidean projection onto {||y||_1 <= r} (sort-based).
Vector project_l1(const Vector& y, double r) {
  if (y.lpNorm<1>() <= r) return y;
  std::vector<double> u(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) u[i] = std::abs(y(i));
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - r) / static_cast<double>(k + 1);
    if (u[k] > t) theta = t;
  }
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out(i) = std::copysign(std::max(std::abs(y(i)) - theta, 0.0), y(i));
  return out;
}

// Radial rescaling onto the l_p sphere; exact only for p = 2.
Vector shrink_to_lp(const Vector& d, const Norm& norm, double eps) {
  const double r = norm.of(d);
  return r > eps ? Vector(d * (eps / r)) : d;
}

Vector random_in_ball(const PerturbationSpec& spec, int dim, std::mt19937_64& rng) {
  const Vector a = center_of(spec, dim);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  Vector d(dim);
  switch (spec.norm.kind) {
    case Norm::Kind::Inf:
      for (int i = 0; i < dim; ++i) d(i) = spec.eps * (2.0 * unif(rng) - 1.0);
      break;
    case Norm::Kind::One: {
      // Normalized exponentials with one slack coordinate are uniform on the
      // simplex; random signs spread them over the cross-polytope.
      double total = 0.0;
      for (int i = 0; i < dim; ++i) {
        d(i) = -std::log(1.0 - unif(rng));
        total += d(i);
      }
      total += -std::log(1.0 - unif(rng));
      for (int i = 0; i < dim; ++i) d(i) *= (unif(rng) < 0.5 ? -1.0 : 1.0) * spec.eps / total;
      break;
    }
    case Norm::Kind::Two:
    case Norm::Kind::Rational: {
      for (int i = 0; i < dim; ++i) d(i) = gauss(rng);
      const double r = spec.norm.of(d);
      const double radius = spec.eps * std::pow(unif(rng), 1.0 / dim);
      if (r > 0.0) d *= radius / r;
      break;
    }
  }
  return a + d;
}

double tolerance_of(double eps) { return 1e-9 * (1.0 + eps); }

}  // namespace

Vector project_to_ball(const Vector& x, const PerturbationSpec& spec) {
  const Vector a = center_of(spec, static_cast<int>(x.size()));
  const Vector d = x - a;
  switch (spec.norm.kind) {
    case Norm::Kind::Inf: return a + d.cwiseMax(-spec.eps).cwiseMin(spec.eps);
    case Norm::Kind::Two: return a + shrink_to_lp(d, spec.norm, spec.eps);
    case Norm::Kind::One: return a + project_l1(d, spec.eps);
    case Norm::Kind::Rational: break;
  }
  throw Error(ErrorKind::UnsupportedNorm, "no projection onto the l_" + spec.norm.to_string() + " ball");
}

Vector margin_gradient(const Network& net, const Margin& margin, const Vector& x) {
  const std::size_t depth = representation_depth(net, margin);
  std::vector<Vector> inputs;
  Vector cur = x;
  for (std::size_t k = 0; k < depth; ++k) {
    inputs.push_back(cur);
    const Block& block = net.blocks()[k];
    if (const auto* aff = std::get_if<AffineBlock>(&block)) {
      cur = aff->weight * cur + aff->bias;
    } else if (const auto* act = std::get_if<ActivationBlock>(&block)) {
      cur = cur.unaryExpr([&](double y) { return act->activation.apply(y); });
    } else {
      throw Error(ErrorKind::InvalidArgument, "gradient of an equilibrium model is not supported");
    }
  }
  Vector g = margin.v.transpose();
  for (std::size_t k = depth; k-- > 0;) {
    const Block& block = net.blocks()[k];
    if (const auto* aff = std::get_if<AffineBlock>(&block)) {
      g = aff->weight.transpose() * g;
    } else {
      const auto& act = std::get<ActivationBlock>(block);
      g = g.cwiseProduct(inputs[k].unaryExpr([&](double y) { return act.activation.derivative(y); }));
    }
  }
  return g;
}

AttackResult pgd_attack(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                        const PgdConfig& cfg) {
  const int dim = net.input_dim();
  spec.validate(dim);
  if (spec.norm.kind == Norm::Kind::Rational)
    throw Error(ErrorKind::UnsupportedNorm, "PGD supports l1, l2 and l_inf only");
  if (cfg.steps < 0 || cfg.restarts < 1) throw Error(ErrorKind::InvalidArgument, "invalid PGD configuration");

  const Vector a = center_of(spec, dim);
  const double step = cfg.step_size > 0.0 ? cfg.step_size : (cfg.steps > 0 ? 2.5 * spec.eps / cfg.steps : 0.0);
  std::mt19937_64 rng(cfg.seed);

  AttackResult best;
  best.best_input = a;
  best.best_margin = margin_value(net, margin, a);
  for (int r = 0; r < cfg.restarts; ++r) {
    ++best.restarts_used;
    Vector x = r == 0 ? a : random_in_ball(spec, dim, rng);
    x = project_to_ball(x, spec);
    for (int s = 0; s <= cfg.steps; ++s) {
      const double value = margin_value(net, margin, x);
      if (value > best.best_margin) {
        best.best_margin = value;
        best.best_input = x;
      }
      if (s == cfg.steps || step == 0.0) break;
      ++best.iterations_used;
      const Vector g = margin_gradient(net, margin, x);
      Vector dir = Vector::Zero(dim);
      switch (spec.norm.kind) {
        case Norm::Kind::Inf: dir = g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }); break;
        case Norm::Kind::Two:
          if (g.norm() > 0.0) dir = g / g.norm();
          break;
        case Norm::Kind::One: {
          Eigen::Index k = 0;
          if (g.cwiseAbs().maxCoeff(&k) > 0.0) dir(k) = g(k) > 0.0 ? 1.0 : -1.0;
          break;
        }
        case Norm::Kind::Rational: break;
      }
      if (dir.isZero()) break;
      x = project_to_ball(x + step * dir, spec);
    }
  }
  if (spec.norm.of(best.best_input - a) > spec.eps + tolerance_of(spec.eps))
    throw Error(ErrorKind::InvalidArgument, "attack left the perturbation ball");
  return best;
}

AttackResult sample_attack(const Network& net, const PerturbationSpec& spec, const Margin& margin, int samples,
                           std::uint64_t seed) {
  const int dim = net.input_dim();
  spec.validate(dim);
  const Vector a = center_of(spec, dim);
  std::mt19937_64 rng(seed);
  AttackResult best;
  best.best_input = a;
  best.best_margin = margin_value(net, margin, a);
  for (int s = 0; s < samples; ++s) {
    ++best.iterations_used;
    const Vector x = random_in_ball(spec, dim, rng);
    const double value = margin_value(net, margin, x);
    if (value > best.best_margin) {
      best.best_margin = value;
      best.best_input = x;
    }
  }
  best.restarts_used = 1;
  return best;
}

AttackResult attack(const Network& net, const PerturbationSpec& spec, const Margin& margin, const PgdConfig& cfg) {
  if (spec.norm.kind == Norm::Kind::Rational)
    return sample_attack(net, spec, margin, std::max(1, cfg.steps * cfg.restarts), cfg.seed);
  return pgd_attack(net, spec, margin, cfg);
}

ExactResult exact_local_linf(const Network& net, const Vector& center, double eps, const Margin& margin) {
  const auto& blocks = net.blocks();
  if (representation_depth(net, margin) != 2 || blocks.size() < 2 || !std::holds_alternative<AffineBlock>(blocks[0]) ||
      !std::holds_alternative<ActivationBlock>(blocks[1]))
    throw Error(ErrorKind::InvalidArgument, "exact oracle needs a margin on the output of one affine+ReLU layer");
  const auto& act = std::get<ActivationBlock>(blocks[1]).activation;
  if (act.kind != Activation::Kind::ReLU) throw Error(ErrorKind::UnsupportedActivation, "exact oracle needs ReLU");
  const auto& layer = std::get<AffineBlock>(blocks[0]);
  const Matrix& w = layer.weight;
  const Vector& b = layer.bias;
  const int n = static_cast<int>(w.rows());
  const int d = static_cast<int>(w.cols());
  if (n > 20) throw Error(ErrorKind::TooManyNeurons, "hidden width " + std::to_string(n) + " exceeds 20");
  if (center.size() != d) throw Error(ErrorKind::DimensionMismatch, "center dimension");
  if (!(eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be nonnegative");

  // x = lo + u with 0 <= u <= 2 eps.
  const Vector lo = center.array() - eps;
  const Vector pre_lo = w * lo + b;
  Matrix a_lp(n + d, d);
  Vector b_lp(n + d);
  a_lp.bottomRows(d).setIdentity();
  b_lp.tail(d).setConstant(2.0 * eps);

  ExactResult best;
  best.optimum = -std::numeric_limits<double>::infinity();
  const long long count = 1LL << n;
  for (long long s = 0; s < count; ++s) {
    ++best.patterns_enumerated;
    Vector obj = Vector::Zero(d);
    double offset = margin.c;
    for (int i = 0; i < n; ++i) {
      const bool on = (s >> i) & 1LL;
      if (on) {
        // -(W_i u + pre_lo_i) <= 0
        a_lp.row(i) = -w.row(i);
        b_lp(i) = pre_lo(i);
        obj += margin.v(i) * w.row(i).transpose();
        offset += margin.v(i) * pre_lo(i);
      } else {
        a_lp.row(i) = w.row(i);
        b_lp(i) = -pre_lo(i);
      }
    }
    const LpResult lp = solve_lp(obj, a_lp, b_lp);
    if (lp.status != LpStatus::Optimal) continue;
    ++best.patterns_feasible;
    const double value = lp.value + offset;
    if (value > best.optimum) {
      best.optimum = value;
      best.arg = lo + lp.x;
    }
  }
  if (best.patterns_feasible == 0) throw Error(ErrorKind::LpNumericalTrouble, "no activation pattern was feasible");
  // Report the value of the network itself at the maximizer.
  const Vector hi = center.array() + eps;
  best.arg = best.arg.cwiseMax(lo).cwiseMin(hi);
  best.optimum = margin_value(net, margin, best.arg);
  // LP vertices land a few ulps off the box faces; try the faces themselves.
  Vector snapped = best.arg;
  for (int j = 0; j < d; ++j) {
    const double tol = 1e-12 * (1.0 + std::abs(center(j)) + eps);
    if (std::abs(snapped(j) - lo(j)) <= tol) snapped(j) = lo(j);
    else if (std::abs(snapped(j) - hi(j)) <= tol) snapped(j) = hi(j);
  }
  const double snapped_value = margin_value(net, margin, snapped);
  if (snapped_value > best.optimum) {
    best.optimum = snapped_value;
    best.arg = snapped;
  }
  return best;
}

ExactResult exact_fgl_two_layer(const RowVector& v, const Matrix& w, const Norm& norm, double alpha, double beta) {
  const int n = static_cast<int>(w.rows());
  if (v.size() != n) throw Error(ErrorKind::DimensionMismatch, "v and W disagree");
  if (n > 24) throw Error(ErrorKind::TooManyNeurons, "hidden width " + std::to_string(n) + " exceeds 24");
  ExactResult best;
  best.optimum = -1.0;
  // Gray-code walk: one slope flips per pattern.
  RowVector g = alpha * (v * w);
  std::vector<bool> high(n, false);
  const long long count = 1LL << n;
  for (long long k = 0; k < count; ++k) {
    if (k > 0) {
      const int i = __builtin_ctzll(static_cast<unsigned long long>(k));
      const double delta = high[i] ? alpha - beta : beta - alpha;
      high[i] = !high[i];
      g += delta * v(i) * w.row(i);
    }
    ++best.patterns_enumerated;
    const double value = norm.dual_of(g.transpose());
    if (value > best.optimum) {
      best.optimum = value;
      best.arg.resize(n);
      for (int i = 0; i < n; ++i) best.arg(i) = high[i] ? beta : alpha;
    }
  }
  best.patterns_feasible = best.patterns_enumerated;
  return best;
}

ExactResult exact_fgl_two_layer(const Network& net, const Margin& margin, const Norm& norm) {
  const auto& blocks = net.blocks();
  if (representation_depth(net, margin) != 2 || blocks.size() < 2 || !std::holds_alternative<AffineBlock>(blocks[0]) ||
      !std::holds_alternative<ActivationBlock>(blocks[1]))
    throw Error(ErrorKind::InvalidArgument, "exact FGL needs a margin on the output of one affine+activation layer");
  const auto& act = std::get<ActivationBlock>(blocks[1]).activation;
  return exact_fgl_two_layer(margin.v, std::get<AffineBlock>(blocks[0]).weight, norm, act.lower_slope(),
                             act.upper_slope());
}

}  // namespace symcert
