#include "symcert/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "symcert/error.hpp"

namespace symcert {

// ---------------------------------------------------------------------------
// SymbolTable

IndexRange SymbolTable::add_group(const std::string& name, int size) {
  if (size < 0) throw Error(ErrorKind::InvalidArgument, "negative group size");
  if (find(name)) throw Error(ErrorKind::InvalidArgument, "duplicate symbol group '" + name + "'");
  IndexRange r{total_dim_, size};
  groups_.push_back({name, r});
  total_dim_ += size;
  return r;
}

std::optional<IndexRange> SymbolTable::find(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return g.range;
  return std::nullopt;
}

std::string SymbolTable::name_of(int index) const {
  for (const auto& g : groups_)
    if (index >= g.range.begin && index < g.range.end())
      return g.name + "[" + std::to_string(index - g.range.begin) + "]";
  return "?[" + std::to_string(index) + "]";
}

void SymbolTable::check_index(int index) const {
  if (index < 0 || index >= total_dim_)
    throw Error(ErrorKind::IndexOutOfRange,
                "variable " + std::to_string(index) + " outside [0, " + std::to_string(total_dim_) + ")");
}

// ---------------------------------------------------------------------------
// LinExpr

LinExpr LinExpr::var(int index, double coef) {
  LinExpr e;
  e.terms[index] = coef;
  return e;
}

LinExpr LinExpr::constant_term(double value) {
  LinExpr e;
  e.constant = value;
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  for (const auto& [i, a] : other.terms) terms[i] += a;
  constant += other.constant;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  for (const auto& [i, a] : other.terms) terms[i] -= a;
  constant -= other.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& [i, a] : terms) a *= s;
  constant *= s;
  return *this;
}

double LinExpr::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double v = constant;
  for (const auto& [i, a] : terms) v += a * x(i);
  return v;
}

double LinExpr::coefficient(int index) const {
  auto it = terms.find(index);
  return it == terms.end() ? 0.0 : it->second;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

// ---------------------------------------------------------------------------
// QuadForm

QuadForm::QuadForm(const LinExpr& affine) {
  for (const auto& [i, a] : affine.terms) add_linear(i, a);
  constant_ = affine.constant;
}

QuadForm QuadForm::product(const LinExpr& a, const LinExpr& b) {
  QuadForm q;
  for (const auto& [i, ai] : a.terms)
    for (const auto& [j, bj] : b.terms) q.add_monomial(i, j, ai * bj);
  for (const auto& [i, ai] : a.terms) q.add_linear(i, ai * b.constant);
  for (const auto& [j, bj] : b.terms) q.add_linear(j, bj * a.constant);
  q.constant_ = a.constant * b.constant;
  return q;
}

void QuadForm::add_monomial(int i, int j, double coef) {
  if (coef == 0.0) return;
  if (i == j) {
    upper_[{i, i}] += coef;
  } else {
    upper_[{std::min(i, j), std::max(i, j)}] += 0.5 * coef;
  }
}

void QuadForm::add_linear(int i, double coef) {
  if (coef == 0.0) return;
  linear_[i] += 0.5 * coef;
}

QuadForm& QuadForm::operator+=(const QuadForm& other) {
  for (const auto& [k, v] : other.upper_) upper_[k] += v;
  for (const auto& [k, v] : other.linear_) linear_[k] += v;
  constant_ += other.constant_;
  return *this;
}

QuadForm& QuadForm::operator*=(double s) {
  for (auto& [k, v] : upper_) v *= s;
  for (auto& [k, v] : linear_) v *= s;
  constant_ *= s;
  return *this;
}

double QuadForm::matrix_entry(int i, int j) const {
  auto it = upper_.find({std::min(i, j), std::max(i, j)});
  return it == upper_.end() ? 0.0 : it->second;
}

double QuadForm::linear_entry(int i) const {
  auto it = linear_.find(i);
  return it == linear_.end() ? 0.0 : it->second;
}

int QuadForm::max_index() const {
  int m = -1;
  for (const auto& [k, v] : upper_) m = std::max(m, k.second);
  for (const auto& [k, v] : linear_) m = std::max(m, k);
  return m;
}

double QuadForm::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double v = constant_;
  for (const auto& [k, a] : upper_) {
    const auto [i, j] = k;
    v += (i == j ? 1.0 : 2.0) * a * x(i) * x(j);
  }
  for (const auto& [i, b] : linear_) v += 2.0 * b * x(i);
  return v;
}

QuadForm QuadForm::substitute(int index, const LinExpr& value) const {
  QuadForm out;
  out.constant_ = constant_;
  for (const auto& [k, a] : upper_) {
    const auto [i, j] = k;
    if (i == index && j == index) {
      QuadForm sq = product(value, value);
      sq *= a;
      out += sq;
    } else if (i == index || j == index) {
      const int other = i == index ? j : i;
      QuadForm cross = product(LinExpr::var(other), value);
      cross *= 2.0 * a;
      out += cross;
    } else {
      out.upper_[k] += a;
    }
  }
  for (const auto& [i, b] : linear_) {
    if (i == index) {
      QuadForm lin(value);
      lin *= 2.0 * b;
      out += lin;
    } else {
      out.linear_[i] += b;
    }
  }
  out.prune();
  return out;
}

QuadForm QuadForm::remap(const std::vector<int>& new_index) const {
  QuadForm out;
  out.constant_ = constant_;
  for (const auto& [k, a] : upper_) {
    const int i = new_index.at(k.first), j = new_index.at(k.second);
    if (i < 0 || j < 0) {
      if (a != 0.0) throw Error(ErrorKind::IndexOutOfRange, "remap drops a referenced variable");
      continue;
    }
    out.upper_[{std::min(i, j), std::max(i, j)}] += a;
  }
  for (const auto& [k, b] : linear_) {
    const int i = new_index.at(k);
    if (i < 0) {
      if (b != 0.0) throw Error(ErrorKind::IndexOutOfRange, "remap drops a referenced variable");
      continue;
    }
    out.linear_[i] += b;
  }
  return out;
}

void QuadForm::prune(double tol) {
  std::erase_if(upper_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
  std::erase_if(linear_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
}

// ---------------------------------------------------------------------------
// Constraints and programs

double QuadConstraint::violation(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double v = f.eval(x);
  return sense == ConstraintSense::Eq0 ? std::abs(v) : std::max(v, 0.0);
}

QuadConstraint leq0(QuadForm f, std::string label) {
  return {std::move(f), ConstraintSense::Leq0, std::move(label), std::nullopt};
}

QuadConstraint eq0(QuadForm f, std::string label, std::optional<int> defines) {
  return {std::move(f), ConstraintSense::Eq0, std::move(label), defines};
}

double QuadraticProgram::max_violation(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double worst = 0.0;
  for (const auto& c : constraints) worst = std::max(worst, c.violation(x));
  return worst;
}

bool QuadraticProgram::feasible(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
  return max_violation(x) <= tol;
}

void QuadraticProgram::validate() const {
  const int n = dim();
  if (objective.max_index() >= n) throw Error(ErrorKind::IndexOutOfRange, "objective references unknown symbol");
  for (const auto& c : constraints)
    if (c.f.max_index() >= n)
      throw Error(ErrorKind::IndexOutOfRange, "constraint '" + c.label + "' references unknown symbol");
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump_form(std::ostringstream& os, const QuadForm& f, const SymbolTable& tab) {
  if (f.constant() != 0.0) os << "  c " << fmt17(f.constant()) << "\n";
  for (const auto& [i, b] : f.linear()) os << "  b " << tab.name_of(i) << " " << fmt17(b) << "\n";
  for (const auto& [k, a] : f.upper())
    os << "  A " << tab.name_of(k.first) << " " << tab.name_of(k.second) << " " << fmt17(a) << "\n";
}

}  // namespace

std::string dump_qp(const QuadraticProgram& qp) {
  std::ostringstream os;
  os << "qp " << (qp.sense == ObjectiveSense::Max ? "max" : "min") << " dim " << qp.dim() << " constraints "
     << qp.constraints.size() << "\n";
  for (const auto& g : qp.symbols.groups())
    os << "group " << g.name << " " << g.range.begin << " " << g.range.size << "\n";
  os << "objective\n";
  dump_form(os, qp.objective, qp.symbols);
  for (std::size_t i = 0; i < qp.constraints.size(); ++i) {
    const auto& c = qp.constraints[i];
    os << "constraint " << i << " " << (c.sense == ConstraintSense::Leq0 ? "leq0" : "eq0") << " "
       << (c.label.empty() ? "-" : c.label) << "\n";
    dump_form(os, c.f, qp.symbols);
  }
  return os.str();
}

}  // namespace symcert
