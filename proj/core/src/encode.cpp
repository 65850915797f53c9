#include "symcert/encode.hpp"

#include <cmath>
#include <map>
#include <string>

#include "symcert/error.hpp"

namespace symcert {

// ---------------------------------------------------------------------------
// Trace

void Trace::set(int index, double value) {
  if (index < 0) throw Error(ErrorKind::IndexOutOfRange, "negative trace index");
  if (static_cast<std::size_t>(index) >= values_.size()) values_.resize(index + 1);
  values_[index] = value;
}

double Trace::get(int index) const {
  if (!has(index)) throw Error(ErrorKind::IndexOutOfRange, "trace has no value for variable " + std::to_string(index));
  return *values_[index];
}

bool Trace::has(int index) const {
  return index >= 0 && static_cast<std::size_t>(index) < values_.size() && values_[index].has_value();
}

Vector Trace::to_vector(int dim) const {
  Vector out(dim);
  for (int i = 0; i < dim; ++i) out(i) = get(i);
  return out;
}

namespace {

using V = LinExpr;

V var(int i) { return LinExpr::var(i); }
V cst(double c) { return LinExpr::constant_term(c); }

// a <= b  as  a - b <= 0
QuadConstraint le(const V& a, const V& b, std::string label) { return leq0(QuadForm(a - b), std::move(label)); }

// a * b <= 0
QuadConstraint prod_le0(const V& a, const V& b, std::string label) {
  return leq0(QuadForm::product(a, b), std::move(label));
}

QuadConstraint slope_constraint(const V& dy, const V& dz, double alpha, double beta, std::string label) {
  if (!(alpha <= beta)) throw Error(ErrorKind::InvalidSlopeBounds, "slope bounds require alpha <= beta");
  return prod_le0(dz - alpha * dy, dz - beta * dy, std::move(label));
}

std::string layer_name(const char* base, int layer) {
  return layer == 1 ? std::string(base) : std::string(base) + std::to_string(layer);
}

double center_at(const PerturbationSpec& spec, int i) { return spec.center ? (*spec.center)(i) : 0.0; }

void check_ball(const SymbolTable& tab, IndexRange x, const PerturbationSpec& spec) {
  if (x.size > 0) {
    tab.check_index(x.begin);
    tab.check_index(x.end() - 1);
  }
  if (!(spec.eps >= 0.0) || !std::isfinite(spec.eps)) throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  if (spec.center && spec.center->size() != x.size)
    throw Error(ErrorKind::DimensionMismatch, "ball center dimension differs from the variable group");
}

}  // namespace

// ---------------------------------------------------------------------------
// Activation encoders

std::vector<QuadConstraint> encode_relu_exact(const SymbolTable& tab, int y, int z) {
  tab.check_index(y);
  tab.check_index(z);
  const std::string n = tab.name_of(z);
  return {
      le(var(y), var(z), "relu.lower(" + n + ")"),
      le(cst(0.0), var(z), "relu.nonneg(" + n + ")"),
      prod_le0(var(z) - var(y), var(z), "relu.comp(" + n + ")"),
  };
}

std::vector<QuadConstraint> encode_relu_branch(const SymbolTable& tab, int y, int z, int s) {
  tab.check_index(y);
  tab.check_index(z);
  tab.check_index(s);
  const std::string n = tab.name_of(z);
  // (s - 1/2) y >= 0  <=>  -(s - 1/2) y <= 0
  QuadForm sign = QuadForm::product(var(s) - cst(0.5), var(y));
  sign *= -1.0;
  QuadForm link(var(z));
  QuadForm sy = QuadForm::product(var(s), var(y));
  sy *= -1.0;
  link += sy;
  return {
      eq0(QuadForm::product(var(s), var(s) - cst(1.0)), "branch.bit(" + n + ")"),
      leq0(std::move(sign), "branch.sign(" + n + ")"),
      eq0(std::move(link), "branch.link(" + n + ")"),
  };
}

QuadConstraint encode_slope_restricted(const SymbolTable& tab, int dy, int dz, double alpha, double beta) {
  tab.check_index(dy);
  tab.check_index(dz);
  return slope_constraint(var(dy), var(dz), alpha, beta, "slope(" + tab.name_of(dz) + ")");
}

std::vector<QuadConstraint> encode_relu_theta(SymbolTable& tab, int x, int z, double theta, Trace* trace) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw Error(ErrorKind::InvalidTheta, "theta must be positive");
  tab.check_index(x);
  tab.check_index(z);
  const std::string n = tab.name_of(z);
  const int u = tab.add_group("theta_aux(" + n + ")", 1).begin;
  if (trace && trace->has(x)) trace->set(u, std::max(theta - trace->get(x), 0.0));
  const V inner = cst(theta) - var(x);  // argument of the inner ReLU
  const V outer = cst(theta) - var(u);  // argument of the outer ReLU
  return {
      le(inner, var(u), "theta.inner.lower(" + n + ")"),
      le(cst(0.0), var(u), "theta.inner.nonneg(" + n + ")"),
      prod_le0(var(u) - inner, var(u), "theta.inner.comp(" + n + ")"),
      le(outer, var(z), "theta.outer.lower(" + n + ")"),
      le(cst(0.0), var(z), "theta.outer.nonneg(" + n + ")"),
      prod_le0(var(z) - outer, var(z), "theta.outer.comp(" + n + ")"),
  };
}

std::vector<QuadConstraint> encode_affine(const SymbolTable& tab, IndexRange x, IndexRange y, const Matrix& w,
                                          const Vector& b) {
  if (w.rows() != y.size || w.cols() != x.size || b.size() != y.size)
    throw Error(ErrorKind::DimensionMismatch, "affine encoding shapes disagree");
  if (x.size > 0) tab.check_index(x.end() - 1);
  if (y.size > 0) tab.check_index(y.end() - 1);
  std::vector<QuadConstraint> out;
  out.reserve(y.size);
  for (int i = 0; i < y.size; ++i) {
    V e = var(y[i]) - cst(b(i));
    for (int j = 0; j < x.size; ++j)
      if (w(i, j) != 0.0) e -= LinExpr::var(x[j], w(i, j));
    out.push_back(eq0(QuadForm(e), "affine(" + tab.name_of(y[i]) + ")", y[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation balls

std::vector<QuadConstraint> encode_ball(SymbolTable& tab, IndexRange x, const PerturbationSpec& spec, Trace* trace) {
  check_ball(tab, x, spec);
  const double eps = spec.eps;
  std::vector<QuadConstraint> out;
  switch (spec.norm.kind) {
    case Norm::Kind::Two: {
      QuadForm f;
      for (int i = 0; i < x.size; ++i) {
        const V d = var(x[i]) - cst(center_at(spec, i));
        f += QuadForm::product(d, d);
      }
      f.add_constant(-eps * eps);
      out.push_back(leq0(std::move(f), "ball.l2"));
      break;
    }
    case Norm::Kind::Inf: {
      for (int i = 0; i < x.size; ++i) {
        const V d = var(x[i]) - cst(center_at(spec, i));
        QuadForm f = QuadForm::product(d, d);
        f.add_constant(-eps * eps);
        out.push_back(leq0(std::move(f), "ball.linf(" + tab.name_of(x[i]) + ")"));
      }
      break;
    }
    case Norm::Kind::One: {
      const IndexRange aux = tab.add_group("l1_aux", x.size);
      V sum;
      for (int i = 0; i < x.size; ++i) {
        const V d = var(x[i]) - cst(center_at(spec, i));
        const std::string n = tab.name_of(aux[i]);
        out.push_back(le(cst(0.0), var(aux[i]), "l1.nonneg(" + n + ")"));
        out.push_back(le(d, var(aux[i]), "l1.upper(" + n + ")"));
        out.push_back(le(cst(0.0) - d, var(aux[i]), "l1.lower(" + n + ")"));
        sum += var(aux[i]);
        if (trace && trace->has(x[i])) trace->set(aux[i], std::abs(trace->get(x[i]) - center_at(spec, i)));
      }
      out.push_back(le(sum, cst(eps), "l1.budget"));
      break;
    }
    case Norm::Kind::Rational:
      throw Error(ErrorKind::UnsupportedNorm, "rational p is handled by encode_ball_rational_p");
  }
  return out;
}

namespace {

// Emits the chain of squarings and products computing t^e with one fresh
// symbol per step. Returns the index holding t^e.
class PowerChain {
 public:
  PowerChain(SymbolTable& tab, std::string prefix, int base, Trace* trace, std::vector<QuadConstraint>& out)
      : tab_(tab), prefix_(std::move(prefix)), base_(base), trace_(trace), out_(out) {
    cache_[1] = base;
  }

  int materialize(int e) {
    if (auto it = cache_.find(e); it != cache_.end()) return it->second;
    const auto [left, right] = split(e);
    const int a = materialize(left), b = materialize(right);
    const int w = tab_.add_group(prefix_ + "^" + std::to_string(e), 1).begin;
    QuadForm f(var(w));
    QuadForm ab = QuadForm::product(var(a), var(b));
    ab *= -1.0;
    f += ab;
    out_.push_back(eq0(std::move(f), "power(" + tab_.name_of(w) + ")"));
    if (trace_ && trace_->has(a) && trace_->has(b)) trace_->set(w, trace_->get(a) * trace_->get(b));
    cache_[e] = w;
    return w;
  }

  /// t^e as a quadratic form, materializing everything but the last product.
  QuadForm top(int e) {
    if (e == 1) return QuadForm(var(base_));
    const auto [left, right] = split(e);
    const int a = materialize(left), b = materialize(right);
    return QuadForm::product(var(a), var(b));
  }

 private:
  // Binary decomposition: even exponents square, odd ones peel off the base.
  static std::pair<int, int> split(int e) { return e % 2 == 0 ? std::pair{e / 2, e / 2} : std::pair{1, e - 1}; }

  SymbolTable& tab_;
  std::string prefix_;
  int base_;
  Trace* trace_;
  std::vector<QuadConstraint>& out_;
  std::map<int, int> cache_;
};

}  // namespace

std::vector<QuadConstraint> encode_ball_rational_p(SymbolTable& tab, IndexRange x, const PerturbationSpec& spec,
                                                   Trace* trace) {
  check_ball(tab, x, spec);
  const Norm& norm = spec.norm;
  if (norm.kind != Norm::Kind::Rational || norm.num < 1 || norm.den < 1 || norm.num < norm.den)
    throw Error(ErrorKind::InvalidExponent, "rational ball needs p = num/den >= 1");
  const int num = norm.num, den = norm.den;
  const double p = static_cast<double>(num) / den;
  const double eps = spec.eps;
  // |x_i| <= eps^{1/q} y_i^{1/p}  <=>  t_i^num <= eps^{num - den} y_i^den with t_i >= |x_i|.
  const double scale = std::pow(eps, num - den);

  std::vector<QuadConstraint> out;
  const IndexRange t = tab.add_group("lp_abs", x.size);
  const IndexRange y = tab.add_group("lp_aux", x.size);
  V sum;
  for (int i = 0; i < x.size; ++i) {
    const V d = var(x[i]) - cst(center_at(spec, i));
    const std::string n = tab.name_of(x[i]);
    out.push_back(le(d, var(t[i]), "lp.abs.upper(" + n + ")"));
    out.push_back(le(cst(0.0) - d, var(t[i]), "lp.abs.lower(" + n + ")"));
    out.push_back(le(cst(0.0), var(y[i]), "lp.nonneg(" + n + ")"));
    sum += var(y[i]);
    if (trace && trace->has(x[i])) {
      const double ti = std::abs(trace->get(x[i]) - center_at(spec, i));
      trace->set(t[i], ti);
      trace->set(y[i], eps > 0.0 ? std::pow(ti, p) * std::pow(eps, 1.0 - p) : 0.0);
    }

    PowerChain lhs(tab, "lp_pow(" + n + ")", t[i], trace, out);
    QuadForm f = lhs.top(num);
    if (den == 1) {
      f += QuadForm(LinExpr::var(y[i], -scale));
    } else {
      PowerChain rhs(tab, "lp_rpow(" + n + ")", y[i], trace, out);
      f += QuadForm(LinExpr::var(rhs.materialize(den), -scale));
    }
    out.push_back(leq0(std::move(f), "lp.power(" + n + ")"));
  }
  out.push_back(le(sum, cst(eps), "lp.budget"));
  return out;
}

namespace {

std::vector<QuadConstraint> encode_any_ball(SymbolTable& tab, IndexRange x, const PerturbationSpec& spec,
                                            Trace* trace) {
  if (spec.norm.kind == Norm::Kind::Rational) return encode_ball_rational_p(tab, x, spec, trace);
  return encode_ball(tab, x, spec, trace);
}

void append(std::vector<QuadConstraint>& dst, std::vector<QuadConstraint> src) {
  for (auto& c : src) dst.push_back(std::move(c));
}

struct Built {
  QuadraticProgram qp;
  std::optional<Trace> trace;
};

void set_range(Trace* trace, IndexRange r, const Vector& values) {
  if (!trace) return;
  for (int i = 0; i < r.size; ++i) trace->set(r[i], values(i));
}

Built build_local(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                  const EncodeOptions& options, const Vector* point) {
  spec.validate(net.input_dim());
  if (!spec.center) throw Error(ErrorKind::InvalidArgument, "local analysis needs a center");
  const std::size_t depth = representation_depth(net, margin);

  Built built;
  if (point) built.trace.emplace();
  Trace* trace = point ? &*built.trace : nullptr;
  auto& qp = built.qp;
  auto& tab = qp.symbols;
  qp.sense = ObjectiveSense::Max;

  IndexRange cur = tab.add_group("x", net.input_dim());
  Vector cur_value = point ? *point : Vector();
  Vector center_value = *spec.center;  // concrete execution at the center
  if (point) set_range(trace, cur, cur_value);

  int layer = 0;
  for (std::size_t bi = 0; bi < depth; ++bi) {
    const Block& block = net.blocks()[bi];
    if (const auto* a = std::get_if<AffineBlock>(&block)) {
      ++layer;
      const IndexRange y = tab.add_group(layer_name("y", layer), static_cast<int>(a->weight.rows()));
      append(qp.constraints, encode_affine(tab, cur, y, a->weight, a->bias));
      center_value = a->weight * center_value + a->bias;
      if (point) {
        cur_value = a->weight * cur_value + a->bias;
        set_range(trace, y, cur_value);
      }
      cur = y;
    } else if (const auto* act = std::get_if<ActivationBlock>(&block)) {
      const Activation& f = act->activation;
      if (f.kind == Activation::Kind::SlopeRestricted)
        throw Error(ErrorKind::UnsupportedActivation, "local analysis needs a concrete activation");
      const IndexRange z = tab.add_group(layer_name("z", layer), cur.size);
      Vector z_value(cur.size);
      if (point)
        for (int i = 0; i < cur.size; ++i) z_value(i) = f.apply(cur_value(i));
      if (point) set_range(trace, z, z_value);

      if (options.encoding == ReluEncoding::Slope) {
        for (int i = 0; i < cur.size; ++i) {
          const double y0 = center_value(i), z0 = f.apply(y0);
          const V dy = var(cur[i]) - cst(y0), dz = var(z[i]) - cst(z0);
          qp.constraints.push_back(
              slope_constraint(dy, dz, f.lower_slope(), f.upper_slope(), "slope(" + tab.name_of(z[i]) + ")"));
        }
      } else if (f.kind == Activation::Kind::ReLUTheta) {
        for (int i = 0; i < cur.size; ++i) append(qp.constraints, encode_relu_theta(tab, cur[i], z[i], f.theta, trace));
      } else if (options.encoding == ReluEncoding::Branch) {
        const IndexRange s = tab.add_group(layer_name("s", layer), cur.size);
        for (int i = 0; i < cur.size; ++i) {
          append(qp.constraints, encode_relu_branch(tab, cur[i], z[i], s[i]));
          if (point) trace->set(s[i], cur_value(i) > 0.0 ? 1.0 : 0.0);
        }
      } else {
        for (int i = 0; i < cur.size; ++i) append(qp.constraints, encode_relu_exact(tab, cur[i], z[i]));
      }
      for (auto& v : center_value) v = f.apply(v);
      cur_value = z_value;
      cur = z;
    } else {
      throw Error(ErrorKind::InvalidArgument, "local analysis of equilibrium blocks is not supported");
    }
  }

  append(qp.constraints, encode_any_ball(tab, tab.find("x").value(), spec, trace));

  V objective = cst(margin.c);
  for (int i = 0; i < cur.size; ++i) objective += LinExpr::var(cur[i], margin.v(i));
  qp.objective = QuadForm(objective);
  qp.validate();
  return built;
}

Built build_fgl(const Network& net, const Norm& norm, const Margin& margin, bool equilibrium_task,
                const Vector* base, const Vector* delta) {
  const std::size_t depth = representation_depth(net, margin);
  Built built;
  const bool tracing = base && delta;
  if (tracing) built.trace.emplace();
  Trace* trace = tracing ? &*built.trace : nullptr;
  auto& qp = built.qp;
  auto& tab = qp.symbols;
  qp.sense = ObjectiveSense::Max;

  bool saw_equilibrium = false;
  IndexRange cur = tab.add_group("dx", net.input_dim());
  Vector v1, v2;
  double scale = 1.0;
  if (tracing) {
    const double len = norm.of(*delta);
    if (!(len > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be nonzero");
    scale = 1.0 / len;
    v1 = *base;
    v2 = *base + *delta;
    set_range(trace, cur, (v2 - v1) * scale);
  }

  int layer = 0;
  for (std::size_t bi = 0; bi < depth; ++bi) {
    const Block& block = net.blocks()[bi];
    if (const auto* a = std::get_if<AffineBlock>(&block)) {
      ++layer;
      const IndexRange y = tab.add_group(layer_name("dy", layer), static_cast<int>(a->weight.rows()));
      append(qp.constraints, encode_affine(tab, cur, y, a->weight, Vector::Zero(a->weight.rows())));
      if (tracing) {
        v1 = a->weight * v1 + a->bias;
        v2 = a->weight * v2 + a->bias;
        set_range(trace, y, (v2 - v1) * scale);
      }
      cur = y;
    } else if (const auto* act = std::get_if<ActivationBlock>(&block)) {
      const Activation& f = act->activation;
      const IndexRange z = tab.add_group(layer_name("dz", layer), cur.size);
      for (int i = 0; i < cur.size; ++i)
        qp.constraints.push_back(encode_slope_restricted(tab, cur[i], z[i], f.lower_slope(), f.upper_slope()));
      if (tracing) {
        for (auto& v : v1) v = f.apply(v);
        for (auto& v : v2) v = f.apply(v);
        set_range(trace, z, (v2 - v1) * scale);
      }
      cur = z;
    } else {
      const auto& eq = std::get<EquilibriumBlock>(block);
      if (!equilibrium_task)
        throw Error(ErrorKind::InvalidArgument, "equilibrium blocks need build_deq_fgl_qp");
      if (!eq.contractive())
        throw Error(ErrorKind::SpectralConditionViolated,
                    "equilibrium feedback has spectral norm " + std::to_string(eq.feedback_norm) + " >= 1");
      saw_equilibrium = true;
      ++layer;
      const int n = static_cast<int>(eq.feedback.rows());
      const IndexRange y = tab.add_group(layer_name("dy", layer), n);
      const IndexRange z = tab.add_group(layer_name("dz", layer), n);
      for (int i = 0; i < n; ++i) {
        V e = var(y[i]);
        for (int j = 0; j < cur.size; ++j)
          if (eq.input(i, j) != 0.0) e -= LinExpr::var(cur[j], eq.input(i, j));
        for (int j = 0; j < n; ++j)
          if (eq.feedback(i, j) != 0.0) e -= LinExpr::var(z[j], eq.feedback(i, j));
        qp.constraints.push_back(eq0(QuadForm(e), "deq(" + tab.name_of(y[i]) + ")", y[i]));
      }
      for (int i = 0; i < n; ++i)
        qp.constraints.push_back(encode_slope_restricted(tab, y[i], z[i], eq.activation.lower_slope(),
                                                         eq.activation.upper_slope()));
      if (tracing) {
        const Vector dx = (v2 - v1) * scale;
        Network single(static_cast<int>(v1.size()), {eq});
        v1 = deq_forward(single, v1);
        v2 = deq_forward(single, v2);
        const Vector dz = (v2 - v1) * scale;
        set_range(trace, z, dz);
        set_range(trace, y, eq.input * dx + eq.feedback * dz);
      }
      cur = z;
    }
  }
  if (equilibrium_task && !saw_equilibrium)
    throw Error(ErrorKind::InvalidArgument, "network has no equilibrium block");

  PerturbationSpec unit{norm, 1.0, std::nullopt};
  append(qp.constraints, encode_any_ball(tab, tab.find("dx").value(), unit, trace));

  V objective;
  for (int i = 0; i < cur.size; ++i) objective += LinExpr::var(cur[i], margin.v(i));
  qp.objective = QuadForm(objective);
  qp.validate();
  return built;
}

}  // namespace

QuadraticProgram build_local_robustness_qp(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                                           const EncodeOptions& options) {
  return build_local(net, spec, margin, options, nullptr).qp;
}

Vector local_robustness_trace(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                              const EncodeOptions& options, const Vector& x) {
  if (x.size() != net.input_dim()) throw Error(ErrorKind::DimensionMismatch, "trace input dimension");
  Built b = build_local(net, spec, margin, options, &x);
  return b.trace->to_vector(b.qp.dim());
}

QuadraticProgram build_fgl_qp(const Network& net, const Norm& norm, const Margin& margin) {
  return build_fgl(net, norm, margin, false, nullptr, nullptr).qp;
}

QuadraticProgram build_metric_qp(const Network& net, const PerturbationSpec& spec, int closest, int other,
                                 const EncodeOptions& options) {
  if (!net.metric_head()) throw Error(ErrorKind::InvalidArgument, "network has no metric head");
  return build_local_robustness_qp(net, spec, metric_margin(*net.metric_head(), closest, other), options);
}

QuadraticProgram build_deq_fgl_qp(const Network& net, const Norm& norm, const Margin& margin) {
  return build_fgl(net, norm, margin, true, nullptr, nullptr).qp;
}

Vector fgl_trace(const Network& net, const Norm& norm, const Margin& margin, const Vector& base,
                 const Vector& delta) {
  if (base.size() != net.input_dim() || delta.size() != net.input_dim())
    throw Error(ErrorKind::DimensionMismatch, "trace input dimension");
  Built b = build_fgl(net, norm, margin, net.has_equilibrium(), &base, &delta);
  return b.trace->to_vector(b.qp.dim());
}

}  // namespace symcert
