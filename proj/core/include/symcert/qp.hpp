#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace symcert {

/// Contiguous block of variable indices [begin, begin + size).
struct IndexRange {
  int begin = 0;
  int size = 0;

  int end() const { return begin + size; }
  int operator[](int i) const { return begin + i; }
};

/// Named, disjoint variable groups covering [0, total_dim).
class SymbolTable {
 public:
  struct Group {
    std::string name;
    IndexRange range;
  };

  IndexRange add_group(const std::string& name, int size);
  int total_dim() const { return total_dim_; }
  const std::vector<Group>& groups() const { return groups_; }
  std::optional<IndexRange> find(const std::string& name) const;
  /// Human-readable symbol such as "z[3]".
  std::string name_of(int index) const;
  void check_index(int index) const;

 private:
  std::vector<Group> groups_;
  int total_dim_ = 0;
};

/// Affine expression sum_i a_i x_i + constant.
struct LinExpr {
  std::map<int, double> terms;
  double constant = 0.0;

  static LinExpr var(int index, double coef = 1.0);
  static LinExpr constant_term(double value);

  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double s);
  double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double coefficient(int index) const;
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr a);

/// Quadratic function x^T A x + 2 b^T x + c with symmetric A kept as its upper
/// triangle. Entries are stored in the matrix convention: an off-diagonal
/// A(i,j) contributes 2 A(i,j) x_i x_j.
class QuadForm {
 public:
  QuadForm() = default;
  explicit QuadForm(const LinExpr& affine);

  /// Product of two affine expressions.
  static QuadForm product(const LinExpr& a, const LinExpr& b);

  /// Adds coef * x_i * x_j.
  void add_monomial(int i, int j, double coef);
  void add_linear(int i, double coef);
  void add_constant(double c) { constant_ += c; }

  QuadForm& operator+=(const QuadForm& other);
  QuadForm& operator*=(double s);

  double matrix_entry(int i, int j) const;
  double linear_entry(int i) const;
  double constant() const { return constant_; }
  const std::map<std::pair<int, int>, double>& upper() const { return upper_; }
  const std::map<int, double>& linear() const { return linear_; }

  bool is_affine() const { return upper_.empty(); }
  int max_index() const;
  double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Replaces x_index by an affine expression in the other variables.
  QuadForm substitute(int index, const LinExpr& value) const;
  /// Renumbers variables; indices mapped to -1 must have zero coefficients.
  QuadForm remap(const std::vector<int>& new_index) const;
  void prune(double tol = 0.0);

 private:
  std::map<std::pair<int, int>, double> upper_;
  std::map<int, double> linear_;  // b_i, the half-coefficient of x_i
  double constant_ = 0.0;
};

enum class ConstraintSense { Leq0, Eq0 };
enum class ObjectiveSense { Max, Min };

struct QuadConstraint {
  QuadForm f;
  ConstraintSense sense = ConstraintSense::Leq0;
  std::string label;
  /// Variable this linear equality defines, used by presolve.
  std::optional<int> defines;

  /// Signed violation: max(f, 0) for Leq0, |f| for Eq0.
  double violation(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

QuadConstraint leq0(QuadForm f, std::string label);
QuadConstraint eq0(QuadForm f, std::string label, std::optional<int> defines = std::nullopt);

struct QuadraticProgram {
  ObjectiveSense sense = ObjectiveSense::Max;
  QuadForm objective;
  std::vector<QuadConstraint> constraints;
  SymbolTable symbols;

  int dim() const { return symbols.total_dim(); }
  double objective_value(const Eigen::Ref<const Eigen::VectorXd>& x) const { return objective.eval(x); }
  double max_violation(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool feasible(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const;
  /// Checks that every referenced index lies inside the symbol table.
  void validate() const;
};

/// Line-oriented text dump of a program, used by the `encode` command.
std::string dump_qp(const QuadraticProgram& qp);

}  // namespace symcert
