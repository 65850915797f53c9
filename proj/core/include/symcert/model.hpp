#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace symcert {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// An l_p norm with p in {1, 2, inf} or a rational p = num/den >= 1.
struct Norm {
  enum class Kind { One, Two, Inf, Rational };

  Kind kind = Kind::Two;
  int num = 2;
  int den = 1;

  static Norm one() { return {Kind::One, 1, 1}; }
  static Norm two() { return {Kind::Two, 2, 1}; }
  static Norm inf() { return {Kind::Inf, 0, 0}; }
  static Norm rational(int num, int den);

  /// Accepts "1", "2", "inf" and "p/q".
  static Norm parse(std::string_view text);

  double p() const;
  /// Hoelder conjugate q with 1/p + 1/q = 1.
  double dual_exponent() const;
  double of(const Eigen::Ref<const Vector>& x) const;
  double dual_of(const Eigen::Ref<const Vector>& x) const;
  std::string to_string() const;

  friend bool operator==(const Norm&, const Norm&) = default;
};

struct PerturbationSpec {
  Norm norm;
  double eps = 0.0;
  /// Present for local analysis; absent means the ball is centred at zero.
  std::optional<Vector> center;

  void validate(int input_dim) const;
};

struct Activation {
  enum class Kind { ReLU, ReLUTheta, SlopeRestricted };

  Kind kind = Kind::ReLU;
  double theta = 1.0;
  double alpha = 0.0;
  double beta = 1.0;

  static Activation relu() { return {}; }
  static Activation relu_theta(double theta);
  static Activation slope(double alpha, double beta);

  /// Throws UnsupportedActivation for SlopeRestricted, which only constrains
  /// secants and has no concrete graph.
  double apply(double y) const;
  /// Derivative with the kinks resolved to 0.
  double derivative(double y) const;
  /// Secant slope interval [alpha, beta].
  double lower_slope() const;
  double upper_slope() const;
  std::string to_string() const;
};

struct AffineBlock {
  Matrix weight;
  Vector bias;
};

struct ActivationBlock {
  Activation activation;
  int width = 0;
};

/// z = act(feedback z + input x + bias), a deep-equilibrium layer.
struct EquilibriumBlock {
  Matrix feedback;
  Matrix input;
  Vector bias;
  Activation activation;
  /// Power-iteration estimate of ||feedback||_2, filled in at construction.
  double feedback_norm = 0.0;

  bool contractive() const { return feedback_norm < 1.0; }
};

using Block = std::variant<AffineBlock, ActivationBlock, EquilibriumBlock>;

int block_output_dim(const Block& block);

struct MetricHead {
  std::vector<Vector> anchors;
};

/// Immutable layered model. Construction validates dimensions, finiteness and
/// anchor normalisation; it does not reject non-contractive equilibrium
/// blocks, whose evaluation refuses instead.
class Network {
 public:
  Network(int input_dim, std::vector<Block> blocks,
          std::optional<MetricHead> metric_head = std::nullopt);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::optional<MetricHead>& metric_head() const { return metric_head_; }
  bool has_equilibrium() const;
  /// Width of the value produced after the first `depth` blocks.
  int width_after(std::size_t depth) const;

 private:
  int input_dim_;
  int output_dim_;
  std::vector<Block> blocks_;
  std::optional<MetricHead> metric_head_;
};

Network load_network(std::string_view text);
Network load_network_file(const std::filesystem::path& path);
std::string save_network(const Network& net);

/// Spectral norm by power iteration on A^T A.
double spectral_norm(const Matrix& a, int iterations = 200,
                     double tolerance = 1e-10);

Vector forward(const Network& net, const Vector& x);
/// Output of the first `depth` blocks. Equilibrium blocks are solved to
/// their fixed point with the default tolerance.
Vector forward_prefix(const Network& net, const Vector& x, std::size_t depth);

/// Fixed point of the first equilibrium block, iterated from z = 0.
Vector deq_forward(const Network& net, const Vector& x, double tol = 1e-10,
                   int max_iter = 10000);

/// Scalar objective v . z + c where z is the output of the first `depth`
/// blocks (all blocks when depth is empty).
struct Margin {
  RowVector v;
  double c = 0.0;
  std::optional<std::size_t> depth;
};

std::size_t representation_depth(const Network& net, const Margin& margin);

Margin margin_network(const Network& net, int predicted, int competitor);
/// Margin of a network whose final affine block has a single row.
Margin scalar_margin(const Network& net);
Margin metric_margin(const MetricHead& head, int closest, int other);

double margin_value(const Network& net, const Margin& margin, const Vector& x);

}  // namespace symcert
