#include "symcert/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "symcert/error.hpp"

namespace symcert {

using json = nlohmann::json;

namespace {

constexpr double kAnchorTolerance = 1e-9;
constexpr double kAnchorRenormalize = 1e-6;

double lp_norm(const Eigen::Ref<const Vector>& x, double p) {
  if (std::isinf(p)) return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (p == 1.0) return x.cwiseAbs().sum();
  if (p == 2.0) return x.norm();
  double scale = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double xi : x) sum += std::pow(std::abs(xi) / scale, p);
  return scale * std::pow(sum, 1.0 / p);
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw Error(ErrorKind::NonFiniteWeight, std::string(what) + " contains a non-finite entry");
}

void require_finite(const Vector& m, const char* what) {
  if (!m.allFinite())
    throw Error(ErrorKind::NonFiniteWeight, std::string(what) + " contains a non-finite entry");
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SpectralConditionViolated: return "SpectralConditionViolated";
    case ErrorKind::InvalidClassIndex: return "InvalidClassIndex";
    case ErrorKind::InvalidAnchorIndex: return "InvalidAnchorIndex";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::InvalidSlopeBounds: return "InvalidSlopeBounds";
    case ErrorKind::InvalidTheta: return "InvalidTheta";
    case ErrorKind::UnsupportedNorm: return "UnsupportedNorm";
    case ErrorKind::UnsupportedActivation: return "UnsupportedActivation";
    case ErrorKind::InvalidExponent: return "InvalidExponent";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::TooManyNeurons: return "TooManyNeurons";
    case ErrorKind::LpNumericalTrouble: return "LpNumericalTrouble";
    case ErrorKind::EmptyDirectory: return "EmptyDirectory";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Norm

Norm Norm::rational(int num, int den) {
  if (num <= 0 || den <= 0 || num < den)
    throw Error(ErrorKind::InvalidExponent,
                "p = " + std::to_string(num) + "/" + std::to_string(den) + " must be a rational >= 1");
  int g = std::gcd(num, den);
  return {Kind::Rational, num / g, den / g};
}

Norm Norm::parse(std::string_view text) {
  if (text == "1") return one();
  if (text == "2") return two();
  if (text == "inf" || text == "Inf" || text == "INF") return inf();
  auto slash = text.find('/');
  std::string s(text);
  try {
    std::size_t used = 0;
    if (slash == std::string_view::npos) {
      int num = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing");
      return rational(num, 1);
    }
    std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    int num = std::stoi(a, &used);
    if (used != a.size()) throw std::invalid_argument("trailing");
    int den = std::stoi(b, &used);
    if (used != b.size()) throw std::invalid_argument("trailing");
    return rational(num, den);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::ParseError, "cannot parse norm '" + s + "'");
  }
}

double Norm::p() const {
  switch (kind) {
    case Kind::One: return 1.0;
    case Kind::Two: return 2.0;
    case Kind::Inf: return std::numeric_limits<double>::infinity();
    case Kind::Rational: return static_cast<double>(num) / den;
  }
  return 2.0;
}

double Norm::dual_exponent() const {
  double pp = p();
  if (std::isinf(pp)) return 1.0;
  if (pp == 1.0) return std::numeric_limits<double>::infinity();
  return pp / (pp - 1.0);
}

double Norm::of(const Eigen::Ref<const Vector>& x) const { return lp_norm(x, p()); }

double Norm::dual_of(const Eigen::Ref<const Vector>& x) const {
  return lp_norm(x, dual_exponent());
}

std::string Norm::to_string() const {
  switch (kind) {
    case Kind::One: return "1";
    case Kind::Two: return "2";
    case Kind::Inf: return "inf";
    case Kind::Rational:
      return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }
  return "?";
}

void PerturbationSpec::validate(int input_dim) const {
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw Error(ErrorKind::InvalidArgument, "eps must be finite and >= 0");
  if (norm.kind == Norm::Kind::Rational && norm.num < norm.den)
    throw Error(ErrorKind::InvalidExponent, "p must be >= 1");
  if (center && center->size() != input_dim)
    throw Error(ErrorKind::DimensionMismatch,
                "center has dimension " + std::to_string(center->size()) + ", expected " +
                    std::to_string(input_dim));
}

// ---------------------------------------------------------------------------
// Activation

Activation Activation::relu_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw Error(ErrorKind::InvalidTheta, "theta must be positive");
  Activation a;
  a.kind = Kind::ReLUTheta;
  a.theta = theta;
  return a;
}

Activation Activation::slope(double alpha, double beta) {
  if (!(alpha <= beta) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw Error(ErrorKind::InvalidSlopeBounds, "slope bounds require alpha <= beta");
  Activation a;
  a.kind = Kind::SlopeRestricted;
  a.alpha = alpha;
  a.beta = beta;
  return a;
}

double Activation::apply(double y) const {
  switch (kind) {
    case Kind::ReLU: return y > 0.0 ? y : 0.0;
    case Kind::ReLUTheta: return std::min(std::max(y, 0.0), theta);
    case Kind::SlopeRestricted: break;
  }
  throw Error(ErrorKind::UnsupportedActivation,
              "slope-restricted activations have no concrete evaluation");
}

double Activation::derivative(double y) const {
  switch (kind) {
    case Kind::ReLU: return y > 0.0 ? 1.0 : 0.0;
    case Kind::ReLUTheta: return (y > 0.0 && y < theta) ? 1.0 : 0.0;
    case Kind::SlopeRestricted: break;
  }
  throw Error(ErrorKind::UnsupportedActivation,
              "slope-restricted activations have no concrete derivative");
}

double Activation::lower_slope() const {
  return kind == Kind::SlopeRestricted ? alpha : 0.0;
}

double Activation::upper_slope() const {
  return kind == Kind::SlopeRestricted ? beta : 1.0;
}

std::string Activation::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::ReLU: os << "relu"; break;
    case Kind::ReLUTheta: os << "relu_theta(" << theta << ")"; break;
    case Kind::SlopeRestricted: os << "slope(" << alpha << "," << beta << ")"; break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Network

int block_output_dim(const Block& block) {
  return std::visit(
      [](const auto& b) -> int {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, AffineBlock>) {
          return static_cast<int>(b.weight.rows());
        } else if constexpr (std::is_same_v<T, ActivationBlock>) {
          return b.width;
        } else {
          return static_cast<int>(b.feedback.rows());
        }
      },
      block);
}

Network::Network(int input_dim, std::vector<Block> blocks, std::optional<MetricHead> metric_head)
    : input_dim_(input_dim), blocks_(std::move(blocks)), metric_head_(std::move(metric_head)) {
  if (input_dim_ <= 0) throw Error(ErrorKind::DimensionMismatch, "input_dim must be positive");
  int width = input_dim_;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string where = "block " + std::to_string(i);
    if (auto* a = std::get_if<AffineBlock>(&blocks_[i])) {
      if (a->weight.cols() != width)
        throw Error(ErrorKind::DimensionMismatch,
                    where + ": affine expects width " + std::to_string(a->weight.cols()) +
                        " but receives " + std::to_string(width));
      if (a->bias.size() != a->weight.rows())
        throw Error(ErrorKind::DimensionMismatch, where + ": bias length differs from rows");
      if (a->weight.rows() == 0) throw Error(ErrorKind::DimensionMismatch, where + ": empty affine");
      require_finite(a->weight, "affine weight");
      require_finite(a->bias, "affine bias");
      width = static_cast<int>(a->weight.rows());
    } else if (auto* act = std::get_if<ActivationBlock>(&blocks_[i])) {
      if (act->width == 0) act->width = width;
      if (act->width != width)
        throw Error(ErrorKind::DimensionMismatch, where + ": activation width mismatch");
    } else {
      auto& eq = std::get<EquilibriumBlock>(blocks_[i]);
      const auto n = eq.feedback.rows();
      if (n == 0 || eq.feedback.cols() != n)
        throw Error(ErrorKind::DimensionMismatch, where + ": feedback matrix must be square");
      if (eq.input.rows() != n || eq.input.cols() != width)
        throw Error(ErrorKind::DimensionMismatch, where + ": input matrix shape mismatch");
      if (eq.bias.size() != n) throw Error(ErrorKind::DimensionMismatch, where + ": bias length");
      require_finite(eq.feedback, "equilibrium feedback");
      require_finite(eq.input, "equilibrium input");
      require_finite(eq.bias, "equilibrium bias");
      eq.feedback_norm = spectral_norm(eq.feedback);
      width = static_cast<int>(n);
    }
  }
  output_dim_ = width;

  if (metric_head_) {
    for (auto& anchor : metric_head_->anchors) {
      if (anchor.size() != output_dim_)
        throw Error(ErrorKind::DimensionMismatch, "anchor dimension differs from output_dim");
      require_finite(anchor, "anchor");
      const double norm = anchor.norm();
      if (std::abs(norm - 1.0) <= kAnchorTolerance) continue;
      if (std::abs(norm - 1.0) <= kAnchorRenormalize) {
        anchor /= norm;
        continue;
      }
      throw Error(ErrorKind::InvalidArgument, "anchor is not a unit vector");
    }
  }
}

bool Network::has_equilibrium() const {
  for (const auto& b : blocks_)
    if (std::holds_alternative<EquilibriumBlock>(b)) return true;
  return false;
}

int Network::width_after(std::size_t depth) const {
  if (depth > blocks_.size()) throw Error(ErrorKind::IndexOutOfRange, "depth beyond network");
  return depth == 0 ? input_dim_ : block_output_dim(blocks_[depth - 1]);
}

// ---------------------------------------------------------------------------
// Model file

namespace {

Matrix parse_matrix(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, std::string(what) + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw Error(ErrorKind::ParseError, std::string(what) + " entry is not a number");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

Vector parse_vector(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, std::string(what) + " entry is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Activation parse_activation(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "relu") return Activation::relu();
    throw Error(ErrorKind::ParseError, "unknown activation '" + j.get<std::string>() + "'");
  }
  if (j.is_object() && j.contains("relu_theta")) return Activation::relu_theta(j["relu_theta"].get<double>());
  if (j.is_object() && j.contains("slope")) {
    const auto& s = j["slope"];
    if (!s.is_array() || s.size() != 2) throw Error(ErrorKind::ParseError, "slope needs [alpha, beta]");
    return Activation::slope(s[0].get<double>(), s[1].get<double>());
  }
  throw Error(ErrorKind::ParseError, "malformed activation kind");
}

json activation_json(const Activation& a) {
  switch (a.kind) {
    case Activation::Kind::ReLU: return "relu";
    case Activation::Kind::ReLUTheta: return json{{"relu_theta", a.theta}};
    case Activation::Kind::SlopeRestricted: return json{{"slope", {a.alpha, a.beta}}};
  }
  return "relu";
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

Network load_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("input_dim") || !doc.contains("blocks"))
      throw Error(ErrorKind::ParseError, "model needs 'input_dim' and 'blocks'");
    const int input_dim = doc["input_dim"].get<int>();
    std::vector<Block> blocks;
    for (const auto& rec : doc["blocks"]) {
      if (rec.contains("affine")) {
        const auto& a = rec["affine"];
        blocks.emplace_back(AffineBlock{parse_matrix(a.at("W"), "W"), parse_vector(a.at("b"), "b")});
      } else if (rec.contains("activation")) {
        blocks.emplace_back(ActivationBlock{parse_activation(rec["activation"].at("kind")), 0});
      } else if (rec.contains("equilibrium")) {
        const auto& e = rec["equilibrium"];
        EquilibriumBlock eq;
        eq.feedback = parse_matrix(e.at("W"), "W");
        eq.input = parse_matrix(e.at("U"), "U");
        eq.bias = parse_vector(e.at("b"), "b");
        eq.activation = e.contains("kind") ? parse_activation(e["kind"]) : Activation::relu();
        blocks.emplace_back(std::move(eq));
      } else {
        throw Error(ErrorKind::ParseError, "unknown block record");
      }
    }
    std::optional<MetricHead> head;
    if (doc.contains("metric_head")) {
      MetricHead h;
      for (const auto& a : doc["metric_head"].at("anchors")) h.anchors.push_back(parse_vector(a, "anchor"));
      head = std::move(h);
    }
    return Network(input_dim, std::move(blocks), std::move(head));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

Network load_network_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_network(buf.str());
}

std::string save_network(const Network& net) {
  json doc;
  doc["input_dim"] = net.input_dim();
  json blocks = json::array();
  for (const auto& b : net.blocks()) {
    if (const auto* a = std::get_if<AffineBlock>(&b)) {
      blocks.push_back({{"affine", {{"W", matrix_json(a->weight)}, {"b", vector_json(a->bias)}}}});
    } else if (const auto* act = std::get_if<ActivationBlock>(&b)) {
      blocks.push_back({{"activation", {{"kind", activation_json(act->activation)}}}});
    } else {
      const auto& eq = std::get<EquilibriumBlock>(b);
      blocks.push_back({{"equilibrium",
                         {{"W", matrix_json(eq.feedback)},
                          {"U", matrix_json(eq.input)},
                          {"b", vector_json(eq.bias)},
                          {"kind", activation_json(eq.activation)}}}});
    }
  }
  doc["blocks"] = std::move(blocks);
  if (net.metric_head()) {
    json anchors = json::array();
    for (const auto& a : net.metric_head()->anchors) anchors.push_back(vector_json(a));
    doc["metric_head"] = {{"anchors", anchors}};
  }
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

double spectral_norm(const Matrix& a, int iterations, double tolerance) {
  if (a.size() == 0) return 0.0;
  Vector x = Vector::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector y = a.transpose() * (a * x);
    const double ny = y.norm();
    if (ny == 0.0) {
      // Started in the null space; restart from a deterministic alternative.
      if (it == 0) {
        x = Vector::LinSpaced(a.cols(), 1.0, 2.0).normalized();
        continue;
      }
      return 0.0;
    }
    const double next = std::sqrt(ny);
    x = y / ny;
    if (std::abs(next - sigma) <= tolerance * std::max(1.0, next)) return next;
    sigma = next;
  }
  return sigma;
}

namespace {

Vector solve_equilibrium(const EquilibriumBlock& eq, const Vector& x, double tol, int max_iter) {
  if (!eq.contractive())
    throw Error(ErrorKind::SpectralConditionViolated,
                "equilibrium feedback has spectral norm " + std::to_string(eq.feedback_norm) + " >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  const Vector drive = eq.input * x + eq.bias;
  Vector z = Vector::Zero(eq.feedback.rows());
  for (int it = 0; it <= max_iter; ++it) {
    Vector next = eq.feedback * z + drive;
    for (auto& v : next) v = eq.activation.apply(v);
    if ((next - z).norm() <= tol) return z;
    z = std::move(next);
  }
  throw Error(ErrorKind::NoConvergence, "fixed-point iteration exceeded max_iter");
}

Vector apply_block(const Block& block, const Vector& x, bool allow_equilibrium) {
  if (const auto* a = std::get_if<AffineBlock>(&block)) return a->weight * x + a->bias;
  if (const auto* act = std::get_if<ActivationBlock>(&block)) {
    Vector out = x;
    for (auto& v : out) v = act->activation.apply(v);
    return out;
  }
  if (!allow_equilibrium)
    throw Error(ErrorKind::InvalidArgument, "forward() does not evaluate equilibrium blocks; use deq_forward");
  return solve_equilibrium(std::get<EquilibriumBlock>(block), x, 1e-10, 10000);
}

void check_input(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim())
    throw Error(ErrorKind::DimensionMismatch,
                "input has dimension " + std::to_string(x.size()) + ", expected " +
                    std::to_string(net.input_dim()));
}

}  // namespace

Vector forward(const Network& net, const Vector& x) {
  check_input(net, x);
  Vector cur = x;
  for (const auto& b : net.blocks()) cur = apply_block(b, cur, false);
  return cur;
}

Vector forward_prefix(const Network& net, const Vector& x, std::size_t depth) {
  check_input(net, x);
  if (depth > net.blocks().size()) throw Error(ErrorKind::IndexOutOfRange, "depth beyond network");
  Vector cur = x;
  for (std::size_t i = 0; i < depth; ++i) cur = apply_block(net.blocks()[i], cur, true);
  return cur;
}

Vector deq_forward(const Network& net, const Vector& x, double tol, int max_iter) {
  check_input(net, x);
  Vector cur = x;
  for (const auto& b : net.blocks()) {
    if (const auto* eq = std::get_if<EquilibriumBlock>(&b)) return solve_equilibrium(*eq, cur, tol, max_iter);
    cur = apply_block(b, cur, false);
  }
  throw Error(ErrorKind::InvalidArgument, "network has no equilibrium block");
}

// ---------------------------------------------------------------------------
// Margins

std::size_t representation_depth(const Network& net, const Margin& margin) {
  const std::size_t depth = margin.depth.value_or(net.blocks().size());
  if (depth > net.blocks().size()) throw Error(ErrorKind::IndexOutOfRange, "margin depth beyond network");
  if (margin.v.size() != net.width_after(depth))
    throw Error(ErrorKind::DimensionMismatch, "margin vector does not match the representation width");
  return depth;
}

Margin margin_network(const Network& net, int predicted, int competitor) {
  if (net.blocks().empty() || !std::holds_alternative<AffineBlock>(net.blocks().back()))
    throw Error(ErrorKind::InvalidArgument, "final block must be affine");
  const auto& last = std::get<AffineBlock>(net.blocks().back());
  const int l = static_cast<int>(last.weight.rows());
  if (l < 2 || predicted < 0 || competitor < 0 || predicted >= l || competitor >= l || predicted == competitor)
    throw Error(ErrorKind::InvalidClassIndex,
                "classes " + std::to_string(predicted) + "," + std::to_string(competitor) +
                    " invalid for " + std::to_string(l) + " outputs");
  Margin m;
  m.v = last.weight.row(competitor) - last.weight.row(predicted);
  m.c = last.bias(competitor) - last.bias(predicted);
  m.depth = net.blocks().size() - 1;
  return m;
}

Margin scalar_margin(const Network& net) {
  if (net.blocks().empty() || !std::holds_alternative<AffineBlock>(net.blocks().back()))
    throw Error(ErrorKind::InvalidArgument, "final block must be affine");
  const auto& last = std::get<AffineBlock>(net.blocks().back());
  if (last.weight.rows() != 1)
    throw Error(ErrorKind::DimensionMismatch, "scalar margin needs a single-output final layer");
  Margin m;
  m.v = last.weight.row(0);
  m.c = last.bias(0);
  m.depth = net.blocks().size() - 1;
  return m;
}

Margin metric_margin(const MetricHead& head, int closest, int other) {
  const int k = static_cast<int>(head.anchors.size());
  if (closest < 0 || other < 0 || closest >= k || other >= k || closest == other)
    throw Error(ErrorKind::InvalidAnchorIndex,
                "anchors " + std::to_string(closest) + "," + std::to_string(other) + " invalid for " +
                    std::to_string(k) + " anchors");
  Margin m;
  m.v = (head.anchors[other] - head.anchors[closest]).transpose();
  m.c = 0.0;
  return m;
}

double margin_value(const Network& net, const Margin& margin, const Vector& x) {
  const std::size_t depth = representation_depth(net, margin);
  return margin.v.dot(forward_prefix(net, x, depth)) + margin.c;
}

}  // namespace symcert
