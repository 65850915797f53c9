#pragma once

#include <optional>
#include <vector>

#include "symcert/model.hpp"
#include "symcert/qp.hpp"

namespace symcert {

/// Concrete values for program variables. Encoders that introduce auxiliary
/// symbols fill their values in when a trace is supplied, so a network
/// execution can be lifted to a full program assignment.
class Trace {
 public:
  void set(int index, double value);
  double get(int index) const;
  bool has(int index) const;
  /// Dense vector of length `dim`; throws if any entry is missing.
  Vector to_vector(int dim) const;

 private:
  std::vector<std::optional<double>> values_;
};

enum class ReluEncoding {
  Exact,   ///< y <= z, z >= 0, (z - y) z <= 0
  Branch,  ///< s(s - 1) = 0, (s - 1/2) y >= 0, z = s y
  Slope,   ///< stateless secant-slope bound
};

// Per-activation encoders -----------------------------------------------------

std::vector<QuadConstraint> encode_relu_exact(const SymbolTable& tab, int y, int z);
std::vector<QuadConstraint> encode_relu_branch(const SymbolTable& tab, int y, int z, int s);
QuadConstraint encode_slope_restricted(const SymbolTable& tab, int dy, int dz, double alpha, double beta);
/// Adds one auxiliary symbol u = ReLU(theta - x) and emits the six
/// inequalities tying z = ReLU(theta - u) to x.
std::vector<QuadConstraint> encode_relu_theta(SymbolTable& tab, int x, int z, double theta,
                                              Trace* trace = nullptr);

/// y_i - w_i x - b_i = 0 for every row.
std::vector<QuadConstraint> encode_affine(const SymbolTable& tab, IndexRange x, IndexRange y, const Matrix& w,
                                          const Vector& b);

/// l2, l_inf and l1 balls. The l1 ball introduces one auxiliary per
/// coordinate.
std::vector<QuadConstraint> encode_ball(SymbolTable& tab, IndexRange x, const PerturbationSpec& spec,
                                        Trace* trace = nullptr);
/// Rational l_p ball, p = num/den >= 1, reduced to quadratics.
std::vector<QuadConstraint> encode_ball_rational_p(SymbolTable& tab, IndexRange x, const PerturbationSpec& spec,
                                                   Trace* trace = nullptr);

// Task programs ----------------------------------------------------------------

struct EncodeOptions {
  ReluEncoding encoding = ReluEncoding::Exact;
};

/// max v.z + c over the perturbation ball around spec.center.
QuadraticProgram build_local_robustness_qp(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                                           const EncodeOptions& options = {});
/// Assignment of every program variable for the concrete execution at x.
Vector local_robustness_trace(const Network& net, const PerturbationSpec& spec, const Margin& margin,
                              const EncodeOptions& options, const Vector& x);

/// Formal global Lipschitz program: max v.dz with stateless activations and
/// ||dx||_p <= 1.
QuadraticProgram build_fgl_qp(const Network& net, const Norm& norm, const Margin& margin);

QuadraticProgram build_metric_qp(const Network& net, const PerturbationSpec& spec, int closest, int other,
                                 const EncodeOptions& options = {});

/// FGL program of an equilibrium model: dy = U dx + W dz.
QuadraticProgram build_deq_fgl_qp(const Network& net, const Norm& norm, const Margin& margin);

/// Assignment of the FGL (or DEQ FGL) program from two concrete executions at
/// `base` and `base + delta`, scaled by 1 / ||delta||_p.
Vector fgl_trace(const Network& net, const Norm& norm, const Margin& margin, const Vector& base,
                 const Vector& delta);

}  // namespace symcert
