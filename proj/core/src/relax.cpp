#include "symcert/relax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "symcert/error.hpp"

namespace symcert {

// ---------------------------------------------------------------------------
// SparseSym / SdpProblem

void SparseSym::add(int i, int j, double value) {
  if (i > j) std::swap(i, j);
  for (auto& e : entries_) {
    if (e.i == i && e.j == j) {
      e.value += value;
      return;
    }
  }
  if (value != 0.0) entries_.push_back({i, j, value});
}

double SparseSym::dot(const Eigen::MatrixXd& x) const {
  double s = 0.0;
  for (const auto& e : entries_) s += (e.i == e.j ? 1.0 : 2.0) * e.value * x(e.i, e.j);
  return s;
}

void SparseSym::axpy_into(double scale, Eigen::MatrixXd& out) const {
  for (const auto& e : entries_) {
    out(e.i, e.j) += scale * e.value;
    if (e.i != e.j) out(e.j, e.i) += scale * e.value;
  }
}

Eigen::MatrixXd SparseSym::dense(int dim) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  axpy_into(1.0, m);
  return m;
}

double SparseSym::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += (e.i == e.j ? 1.0 : 2.0) * e.value * e.value;
  return s;
}

int SparseSym::max_index() const {
  int m = -1;
  for (const auto& e : entries_) m = std::max(m, e.j);
  return m;
}

void SdpProblem::validate() const {
  if (dim < 0 || num_nonneg < 0 || num_free < 0) throw Error(ErrorKind::InvalidArgument, "negative SDP sizes");
  auto check = [&](const SparseSym& a, const ScalarTerms& s) {
    if (a.max_index() >= dim) throw Error(ErrorKind::IndexOutOfRange, "matrix entry outside the PSD block");
    for (const auto& [k, v] : s)
      if (k < 0 || k >= num_scalars()) throw Error(ErrorKind::IndexOutOfRange, "scalar index out of range");
  };
  check(objective, objective_scalars);
  for (const auto& c : constraints) check(c.matrix, c.scalars);
}

// ---------------------------------------------------------------------------
// Presolve

namespace {

LinExpr substitute(const LinExpr& e, int index, const LinExpr& value) {
  auto it = e.terms.find(index);
  if (it == e.terms.end()) return e;
  const double a = it->second;
  LinExpr out = e;
  out.terms.erase(index);
  LinExpr scaled = value;
  scaled *= a;
  out += scaled;
  std::erase_if(out.terms, [](const auto& kv) { return kv.second == 0.0; });
  return out;
}

bool is_unit(double a) { return std::abs(std::abs(a) - 1.0) <= 1e-12; }

// Linear coefficient of x_i in f (twice the stored half-coefficient).
double coefficient(const QuadForm& f, int i) { return 2.0 * f.linear_entry(i); }

bool trivially_true(const QuadConstraint& c, double tol) {
  if (!c.f.upper().empty() || !c.f.linear().empty()) return false;
  return c.sense == ConstraintSense::Eq0 ? std::abs(c.f.constant()) <= tol : c.f.constant() <= tol;
}

void finish_presolve(const QuadraticProgram& qp, const QuadForm& objective, std::vector<QuadConstraint>& cons,
                     const std::vector<bool>& removed, const std::vector<std::optional<LinExpr>>& defs, double tol,
                     PresolveResult& result) {
  const int n = qp.dim();
  std::vector<int> new_index(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i)
    if (!defs[i]) {
      new_index[i] = next++;
      result.kept.push_back(i);
    }

  QuadraticProgram& out = result.qp;
  out.sense = qp.sense;
  for (const auto& g : qp.symbols.groups()) {
    int count = 0;
    for (int i = g.range.begin; i < g.range.end(); ++i) count += defs[i] ? 0 : 1;
    if (count > 0) out.symbols.add_group(g.name, count);
  }
  out.objective = objective.remap(new_index);
  for (std::size_t ci = 0; ci < cons.size(); ++ci) {
    if (removed[ci]) continue;
    QuadConstraint c = cons[ci];
    c.f = c.f.remap(new_index);
    if (c.defines) c.defines = new_index[*c.defines] >= 0 ? std::optional<int>(new_index[*c.defines]) : std::nullopt;
    if (trivially_true(c, tol)) continue;
    out.constraints.push_back(std::move(c));
  }

  result.recover.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!defs[i]) {
      result.recover[i] = LinExpr::var(new_index[i]);
    } else {
      LinExpr e = LinExpr::constant_term(defs[i]->constant);
      for (const auto& [k, a] : defs[i]->terms) e.terms[new_index[k]] += a;
      result.recover[i] = std::move(e);
    }
  }
}

}  // namespace

Vector PresolveResult::expand(const Vector& reduced) const {
  Vector out(static_cast<Eigen::Index>(recover.size()));
  for (std::size_t i = 0; i < recover.size(); ++i) out(static_cast<Eigen::Index>(i)) = recover[i].eval(reduced);
  return out;
}

Vector PresolveResult::restrict(const Vector& original) const {
  Vector out(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) out(static_cast<Eigen::Index>(i)) = original(kept[i]);
  return out;
}

PresolveResult presolve_eliminate_affine(const QuadraticProgram& qp) {
  const int n = qp.dim();
  QuadForm objective = qp.objective;
  std::vector<QuadConstraint> cons = qp.constraints;
  std::vector<bool> removed(cons.size(), false);
  std::vector<std::optional<LinExpr>> defs(n);

  PresolveResult result;
  for (std::size_t ci = 0; ci < cons.size(); ++ci) {
    const QuadConstraint& c = cons[ci];
    if (c.sense != ConstraintSense::Eq0 || !c.f.is_affine() || c.f.linear().empty()) continue;

    int pivot = -1;
    if (c.defines) {
      pivot = *c.defines;
    } else {
      for (const auto& [i, b] : c.f.linear())
        if (is_unit(2.0 * b)) pivot = std::max(pivot, i);
    }
    if (pivot < 0) continue;
    const double a = coefficient(c.f, pivot);
    if (!is_unit(a)) {
      // The defined symbol cancelled or scaled after earlier substitutions.
      if (c.defines) ++result.skipped_cyclic;
      continue;
    }

    // a x_p + rest = 0  =>  x_p = -rest / a
    LinExpr value = LinExpr::constant_term(-c.f.constant() / a);
    for (const auto& [i, b] : c.f.linear())
      if (i != pivot) value.terms[i] = -2.0 * b / a;

    removed[ci] = true;
    defs[pivot] = value;
    ++result.eliminated;
    objective = objective.substitute(pivot, value);
    for (std::size_t cj = 0; cj < cons.size(); ++cj)
      if (!removed[cj]) cons[cj].f = cons[cj].f.substitute(pivot, value);
    for (auto& d : defs)
      if (d) *d = substitute(*d, pivot, value);
  }

  finish_presolve(qp, objective, cons, removed, defs, 0.0, result);
  return result;
}

namespace {

// Feasible interval of x_i from a constraint that mentions x_i alone.
void tighten_univariate(const QuadConstraint& c, int i, double tol, double& lo, double& hi) {
  const double a = c.f.matrix_entry(i, i), b = c.f.linear_entry(i), k = c.f.constant();
  if (c.sense == ConstraintSense::Eq0) {
    if (a == 0.0 && b != 0.0) {
      const double r = -k / (2.0 * b);
      lo = std::max(lo, r);
      hi = std::min(hi, r);
    }
    return;
  }
  if (a == 0.0) {
    if (b > 0.0) hi = std::min(hi, -k / (2.0 * b));
    if (b < 0.0) lo = std::max(lo, -k / (2.0 * b));
    return;
  }
  if (a < 0.0) return;
  double disc = b * b - a * k;
  if (disc < 0.0) {
    if (disc < -tol * (b * b + std::abs(a * k))) return;
    disc = 0.0;
  }
  const double r = std::sqrt(disc);
  lo = std::max(lo, (-b - r) / a);
  hi = std::min(hi, (-b + r) / a);
}

std::vector<int> support(const QuadForm& f) {
  std::vector<int> vars;
  for (const auto& [k, a] : f.upper()) {
    vars.push_back(k.first);
    vars.push_back(k.second);
  }
  for (const auto& [i, b] : f.linear()) vars.push_back(i);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

// A convex constraint whose minimum value is zero admits one point only.
std::optional<Vector> point_of(const QuadForm& f, const std::vector<int>& vars, double tol) {
  const int m = static_cast<int>(vars.size());
  Matrix a(m, m);
  Vector b(m);
  for (int r = 0; r < m; ++r) {
    b(r) = f.linear_entry(vars[r]);
    for (int c = 0; c < m; ++c) a(r, c) = f.matrix_entry(vars[r], vars[c]);
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector x = -llt.solve(b);
  const double fmin = f.constant() + b.dot(x);
  if (!std::isfinite(fmin) || fmin < -tol * (1.0 + std::abs(f.constant()))) return std::nullopt;
  return x;
}

}  // namespace

PresolveResult presolve_fix_pinned(const QuadraticProgram& qp, double tol) {
  const int n = qp.dim();
  QuadForm objective = qp.objective;
  std::vector<QuadConstraint> cons = qp.constraints;
  std::vector<bool> removed(cons.size(), false);
  std::vector<std::optional<LinExpr>> defs(n);
  PresolveResult result;
  const double inf = std::numeric_limits<double>::infinity();

  for (;;) {
    std::vector<double> lo(n, -inf), hi(n, inf);
    std::vector<std::optional<double>> pin(n);
    std::vector<std::vector<int>> supports(cons.size());
    for (std::size_t ci = 0; ci < cons.size(); ++ci) {
      if (removed[ci]) continue;
      supports[ci] = support(cons[ci].f);
      if (supports[ci].size() == 1) tighten_univariate(cons[ci], supports[ci][0], tol, lo[supports[ci][0]], hi[supports[ci][0]]);
    }
    for (std::size_t ci = 0; ci < cons.size(); ++ci) {
      const auto& vars = supports[ci];
      if (removed[ci] || vars.size() < 2 || cons[ci].sense != ConstraintSense::Leq0) continue;
      const QuadForm& f = cons[ci].f;
      if (!f.is_affine()) {
        if (auto x = point_of(f, vars, tol))
          for (std::size_t r = 0; r < vars.size(); ++r) pin[vars[r]] = (*x)(static_cast<Eigen::Index>(r));
        continue;
      }
      // Linear row already tight at the bounds: every term sits at its bound.
      double least = f.constant();
      for (int i : vars) least += 2.0 * f.linear_entry(i) * (f.linear_entry(i) > 0.0 ? lo[i] : hi[i]);
      if (std::isfinite(least) && least >= -tol * (1.0 + std::abs(f.constant())))
        for (int i : vars) pin[i] = f.linear_entry(i) > 0.0 ? lo[i] : hi[i];
    }
    for (int i = 0; i < n; ++i) {
      if (pin[i] || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) continue;
      if (hi[i] - lo[i] <= tol * (1.0 + std::abs(lo[i]) + std::abs(hi[i]))) pin[i] = 0.5 * (lo[i] + hi[i]);
    }

    bool changed = false;
    for (int i = 0; i < n; ++i) {
      if (!pin[i] || defs[i]) continue;
      const LinExpr value = LinExpr::constant_term(*pin[i]);
      defs[i] = value;
      changed = true;
      ++result.eliminated;
      objective = objective.substitute(i, value);
      for (std::size_t ci = 0; ci < cons.size(); ++ci)
        if (!removed[ci]) cons[ci].f = cons[ci].f.substitute(i, value);
    }
    if (!changed) break;
  }

  finish_presolve(qp, objective, cons, removed, defs, tol, result);
  return result;
}

PresolveResult presolve(const QuadraticProgram& qp) {
  PresolveResult first = presolve_eliminate_affine(qp);
  PresolveResult second = presolve_fix_pinned(first.qp);
  PresolveResult out;
  out.qp = std::move(second.qp);
  out.eliminated = first.eliminated + second.eliminated;
  out.skipped_cyclic = first.skipped_cyclic;
  out.recover.reserve(first.recover.size());
  for (const LinExpr& e : first.recover) {
    LinExpr r = LinExpr::constant_term(e.constant);
    for (const auto& [k, a] : e.terms) {
      LinExpr inner = second.recover[k];
      inner *= a;
      r += inner;
    }
    std::erase_if(r.terms, [](const auto& kv) { return kv.second == 0.0; });
    out.recover.push_back(std::move(r));
  }
  for (int k : second.kept) out.kept.push_back(first.kept[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Shor relaxation

namespace {

// [[c, b^T], [b, A]] in the (1 + N) lifted coordinates.
SparseSym bordered(const QuadForm& f) {
  SparseSym m;
  if (f.constant() != 0.0) m.add(0, 0, f.constant());
  for (const auto& [i, b] : f.linear()) m.add(0, 1 + i, b);
  for (const auto& [k, a] : f.upper()) m.add(1 + k.first, 1 + k.second, a);
  return m;
}

}  // namespace

SdpProblem shor_primal(const QuadraticProgram& qp) {
  SdpProblem sdp;
  sdp.dim = 1 + qp.dim();
  sdp.sense = qp.sense;
  sdp.corner_normalized = true;
  sdp.objective = bordered(qp.objective);

  SdpConstraint corner;
  corner.matrix.add(0, 0, 1.0);
  corner.sense = RowSense::Eq;
  corner.rhs = 1.0;
  corner.label = "corner";
  sdp.constraints.push_back(std::move(corner));

  for (const auto& c : qp.constraints) {
    SdpConstraint row;
    row.matrix = bordered(c.f);
    row.sense = c.sense == ConstraintSense::Eq0 ? RowSense::Eq : RowSense::Leq;
    row.rhs = 0.0;
    row.label = c.label;
    sdp.constraints.push_back(std::move(row));
  }
  return sdp;
}

SdpProblem shor_dual(const QuadraticProgram& qp) {
  const int dim = 1 + qp.dim();
  const double flip = qp.sense == ObjectiveSense::Max ? -1.0 : 1.0;

  std::vector<int> ineq, eq;
  for (std::size_t i = 0; i < qp.constraints.size(); ++i)
    (qp.constraints[i].sense == ConstraintSense::Leq0 ? ineq : eq).push_back(static_cast<int>(i));

  SdpProblem sdp;
  sdp.dim = dim;
  sdp.num_nonneg = static_cast<int>(ineq.size());
  sdp.num_free = static_cast<int>(eq.size()) + 1;
  const int zeta = sdp.num_nonneg + static_cast<int>(eq.size());

  // Multiplier index of each program constraint.
  std::vector<int> multiplier(qp.constraints.size());
  for (std::size_t k = 0; k < ineq.size(); ++k) multiplier[ineq[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < eq.size(); ++k) multiplier[eq[k]] = sdp.num_nonneg + static_cast<int>(k);

  // Entry (i, j) of every bordered matrix.
  std::map<std::pair<int, int>, ScalarTerms> coupling;
  std::map<std::pair<int, int>, double> rhs;
  const SparseSym g0 = bordered(qp.objective);
  for (const auto& e : g0.entries()) rhs[{e.i, e.j}] += flip * e.value;
  for (std::size_t k = 0; k < qp.constraints.size(); ++k) {
    const SparseSym fk = bordered(qp.constraints[k].f);
    for (const auto& e : fk.entries()) coupling[{e.i, e.j}].emplace_back(multiplier[k], -e.value);
  }

  // S_ij - sum_k l_k (A_k)_ij + zeta [i = j = 0] = (G_0)_ij for every i <= j.
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      SdpConstraint row;
      row.matrix.add(i, j, i == j ? 1.0 : 0.5);
      if (auto it = coupling.find({i, j}); it != coupling.end()) row.scalars = it->second;
      if (i == 0 && j == 0) row.scalars.emplace_back(zeta, 1.0);
      row.sense = RowSense::Eq;
      if (auto it = rhs.find({i, j}); it != rhs.end()) row.rhs = it->second;
      row.label = "lmi(" + std::to_string(i) + "," + std::to_string(j) + ")";
      sdp.constraints.push_back(std::move(row));
    }
  }

  // MIN program: maximize zeta. MAX program: the bound on max f is -zeta.
  sdp.sense = qp.sense == ObjectiveSense::Min ? ObjectiveSense::Max : ObjectiveSense::Min;
  sdp.objective_scalars.emplace_back(zeta, qp.sense == ObjectiveSense::Min ? 1.0 : -1.0);
  return sdp;
}

Matrix lift(const Vector& x) {
  Vector v(x.size() + 1);
  v(0) = 1.0;
  v.tail(x.size()) = x;
  return v * v.transpose();
}

SdpProblem diagonal_constrained_sdp(const Matrix& m, ObjectiveSense sense) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix must be square");
  const int n = static_cast<int>(m.rows());
  SdpProblem sdp;
  sdp.dim = n;
  sdp.sense = sense;
  sdp.corner_normalized = true;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = i == j ? m(i, i) : 0.5 * (m(i, j) + m(j, i));
      if (v != 0.0) sdp.objective.add(i, j, v);
    }
  for (int i = 0; i < n; ++i) {
    SdpConstraint row;
    row.matrix.add(i, i, 1.0);
    row.sense = RowSense::Eq;
    row.rhs = 1.0;
    row.label = "diag(" + std::to_string(i) + ")";
    sdp.constraints.push_back(std::move(row));
  }
  return sdp;
}

// ---------------------------------------------------------------------------
// SDPA

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Layout {
  int dim = 0, nonneg = 0, leq = 0, free = 0;
  int diag_size() const { return nonneg + leq + 2 * free; }
};

}  // namespace

void export_sdpa(const SdpProblem& sdp, std::ostream& out) {
  sdp.validate();
  Layout lay{sdp.dim, sdp.num_nonneg, 0, sdp.num_free};
  std::vector<int> slack(sdp.constraints.size(), -1);
  for (std::size_t i = 0; i < sdp.constraints.size(); ++i)
    if (sdp.constraints[i].sense == RowSense::Leq) slack[i] = lay.nonneg + lay.leq++;

  const bool has_psd = lay.dim > 0, has_diag = lay.diag_size() > 0;
  const int psd_block = 1, diag_block = has_psd ? 2 : 1;

  out << "* symcert-layout dim " << lay.dim << " nonneg " << lay.nonneg << " leq " << lay.leq << " free "
      << lay.free << " sense " << (sdp.sense == ObjectiveSense::Max ? "max" : "min") << " corner "
      << (sdp.corner_normalized ? 1 : 0) << "\n";
  out << sdp.constraints.size() << "\n";
  out << (has_psd ? 1 : 0) + (has_diag ? 1 : 0) << "\n";
  if (has_psd) out << lay.dim << (has_diag ? " " : "");
  if (has_diag) out << -lay.diag_size();
  out << "\n";
  for (std::size_t i = 0; i < sdp.constraints.size(); ++i) out << (i ? " " : "") << fmt17(sdp.constraints[i].rhs);
  out << "\n";

  // Scalar variable k sits at diagonal position k (nonneg) or is split into
  // positions (base + k, base + free + k) for free variables.
  auto write_scalars = [&](std::size_t matno, const ScalarTerms& terms, double sign) {
    for (const auto& [k, v] : terms) {
      if (k < lay.nonneg) {
        out << matno << " " << diag_block << " " << k + 1 << " " << k + 1 << " " << fmt17(sign * v) << "\n";
      } else {
        const int f = k - lay.nonneg;
        const int plus = lay.nonneg + lay.leq + f, minus = plus + lay.free;
        out << matno << " " << diag_block << " " << plus + 1 << " " << plus + 1 << " " << fmt17(sign * v) << "\n";
        out << matno << " " << diag_block << " " << minus + 1 << " " << minus + 1 << " " << fmt17(-sign * v)
            << "\n";
      }
    }
  };

  // SDPA maximizes <F0, X>.
  const double osign = sdp.sense == ObjectiveSense::Max ? 1.0 : -1.0;
  for (const auto& e : sdp.objective.entries())
    out << 0 << " " << psd_block << " " << e.i + 1 << " " << e.j + 1 << " " << fmt17(osign * e.value) << "\n";
  write_scalars(0, sdp.objective_scalars, osign);
  for (std::size_t r = 0; r < sdp.constraints.size(); ++r) {
    const auto& c = sdp.constraints[r];
    for (const auto& e : c.matrix.entries())
      out << r + 1 << " " << psd_block << " " << e.i + 1 << " " << e.j + 1 << " " << fmt17(e.value) << "\n";
    write_scalars(r + 1, c.scalars, 1.0);
    if (slack[r] >= 0) out << r + 1 << " " << diag_block << " " << slack[r] + 1 << " " << slack[r] + 1 << " 1\n";
  }
}

std::string export_sdpa(const SdpProblem& sdp) {
  std::ostringstream os;
  export_sdpa(sdp, os);
  return os.str();
}

SdpProblem parse_sdpa(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Layout lay;
  bool have_layout = false;
  SdpProblem sdp;
  sdp.sense = ObjectiveSense::Max;

  // Comments and the optional layout record.
  std::vector<std::string> body;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && (line[0] == '*' || line[0] == '"')) {
      std::istringstream ls(line.substr(1));
      std::string tag;
      ls >> tag;
      if (tag == "symcert-layout") {
        std::string key, sense;
        int corner = 0;
        ls >> key >> lay.dim >> key >> lay.nonneg >> key >> lay.leq >> key >> lay.free >> key >> sense >> key >>
            corner;
        if (!ls) throw Error(ErrorKind::ParseError, "malformed layout comment");
        sdp.sense = sense == "max" ? ObjectiveSense::Max : ObjectiveSense::Min;
        sdp.corner_normalized = corner != 0;
        have_layout = true;
      }
      continue;
    }
    body.push_back(line);
  }
  std::string joined;
  for (const auto& b : body) joined += b + "\n";
  // Header punctuation allowed by the format.
  for (char& ch : joined)
    if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
  std::istringstream data(joined);

  long m = 0, nblocks = 0;
  if (!(data >> m >> nblocks) || m < 0 || nblocks < 0) throw Error(ErrorKind::ParseError, "bad SDPA header");
  std::vector<long> blocks(nblocks);
  for (auto& b : blocks)
    if (!(data >> b)) throw Error(ErrorKind::ParseError, "bad block structure");
  std::vector<double> rhs(m);
  for (auto& r : rhs) {
    std::string tok;
    if (!(data >> tok)) throw Error(ErrorKind::ParseError, "missing rhs");
    r = std::strtod(tok.c_str(), nullptr);
  }

  int psd_block = -1, diag_block = -1, diag_size = 0;
  for (long b = 0; b < nblocks; ++b) {
    if (blocks[b] > 0 && psd_block < 0) {
      psd_block = static_cast<int>(b + 1);
      if (!have_layout) lay.dim = static_cast<int>(blocks[b]);
    } else if (blocks[b] < 0 && diag_block < 0) {
      diag_block = static_cast<int>(b + 1);
      diag_size = static_cast<int>(-blocks[b]);
    } else {
      throw Error(ErrorKind::ParseError, "only one PSD block and one diagonal block are supported");
    }
  }
  if (!have_layout) lay.nonneg = diag_size;
  if (lay.diag_size() != diag_size) throw Error(ErrorKind::ParseError, "layout disagrees with block structure");

  sdp.dim = lay.dim;
  sdp.num_nonneg = lay.nonneg;
  sdp.num_free = lay.free;
  sdp.constraints.resize(m);
  for (long r = 0; r < m; ++r) {
    sdp.constraints[r].rhs = rhs[r];
    sdp.constraints[r].sense = RowSense::Eq;
  }

  std::vector<bool> objective_minus(lay.free, false);
  long matno = 0, blk = 0, i = 0, j = 0;
  std::string tok;
  while (data >> matno >> blk >> i >> j >> tok) {
    const double v = std::strtod(tok.c_str(), nullptr);
    if (matno < 0 || matno > m) throw Error(ErrorKind::ParseError, "matrix number out of range");
    const double sign = (matno == 0 && sdp.sense == ObjectiveSense::Min) ? -1.0 : 1.0;
    SparseSym& mat = matno == 0 ? sdp.objective : sdp.constraints[matno - 1].matrix;
    ScalarTerms& sc = matno == 0 ? sdp.objective_scalars : sdp.constraints[matno - 1].scalars;
    if (blk == psd_block) {
      mat.add(static_cast<int>(i - 1), static_cast<int>(j - 1), sign * v);
    } else if (blk == diag_block) {
      if (i != j) throw Error(ErrorKind::ParseError, "off-diagonal entry in a diagonal block");
      const int pos = static_cast<int>(i - 1);
      if (pos < lay.nonneg) {
        sc.emplace_back(pos, sign * v);
      } else if (pos < lay.nonneg + lay.leq) {
        if (matno == 0) throw Error(ErrorKind::ParseError, "objective touches a slack");
        sdp.constraints[matno - 1].sense = RowSense::Leq;
      } else if (pos < lay.nonneg + lay.leq + lay.free) {
        sc.emplace_back(lay.nonneg + pos - lay.nonneg - lay.leq, sign * v);
      }
      // The minus half of a free split mirrors the plus half.
    } else {
      throw Error(ErrorKind::ParseError, "unknown block number");
    }
  }
  if (!data.eof()) throw Error(ErrorKind::ParseError, "trailing garbage in SDPA body");
  sdp.validate();
  return sdp;
}

}  // namespace symcert
