#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "symcert/encode.hpp"
#include "symcert/model.hpp"
#include "symcert/oracle.hpp"
#include "symcert/sdpsolve.hpp"

namespace symcert {

enum class Task { LocalRobustness, Fgl, Metric, DeqFgl };
enum class Verdict { Certified, Falsified, Unknown };
enum class Relaxation { Primal, Dual };

std::string to_string(Task task);
std::string to_string(Verdict verdict);
Task parse_task(std::string_view text);
Verdict parse_verdict(std::string_view text);
ReluEncoding parse_encoding(std::string_view text);
Relaxation parse_relaxation(std::string_view text);

/// Margins below this are needed to certify; the band absorbs solver
/// tolerance.
inline constexpr double kCertifyThreshold = -1e-6;

/// One solved margin program (one competitor class of one input).
struct VerificationOutcome {
  std::string model;
  Task task = Task::LocalRobustness;
  Norm norm;
  double eps = 0.0;
  int input = 0;
  std::optional<int> label;
  int predicted = 0;
  int competitor = 0;
  double sdp_value = 0.0;
  std::optional<double> lower_bound;
  Verdict verdict = Verdict::Unknown;
  /// lambda_2 / lambda_1 of the solved lifted matrix.
  double rank1_gap = 0.0;
  double wall_time = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;

  bool correct() const { return !label || *label == predicted; }
};

/// Certified iff every competitor is certified, Falsified iff any lower bound
/// is positive. Throws InvalidArgument if both hold (a soundness failure).
Verdict combine_verdicts(const std::vector<VerificationOutcome>& per_class);
Verdict verdict_of(double sdp_value, std::optional<double> lower_bound);

struct InputRecord {
  Vector x;
  std::optional<int> label;
};

/// JSON: an array of {"x": [...], "label": k} objects (label optional), the
/// same under an "inputs" key, or a single bare array of numbers.
std::vector<InputRecord> load_inputs(std::string_view text);
std::vector<InputRecord> load_inputs_file(const std::filesystem::path& path);

struct CertifyOptions {
  Norm norm = Norm::inf();
  double eps = 0.0;
  ReluEncoding encoding = ReluEncoding::Exact;
  Relaxation relaxation = Relaxation::Primal;
  SolverConfig solver;
  PgdConfig pgd;
  bool run_attack = true;
  int jobs = 1;
  /// When set, every SDP is also written in SDPA format. With more than one
  /// program the file names get an "_i<input>_c<class>" suffix.
  std::optional<std::filesystem::path> emit_sdpa;
};

/// Class predicted by the network: argmax output, the sign of a scalar
/// output (1 if positive), or the anchor with the largest inner product.
int predict(const Network& net, const Vector& x);
int num_classes(const Network& net);

/// Margin whose positive values mean `competitor` beats `predicted`.
Margin competitor_margin(const Network& net, int predicted, int competitor);

/// The margin program of one competitor, as solved by certify.
QuadraticProgram certification_qp(const Network& net, const Vector& x, int predicted, int competitor,
                                  const CertifyOptions& opts);

struct SdpRun {
  double value = 0.0;
  double rank1_gap = 0.0;
  double wall_time = 0.0;
  SdpSolution solution;
};

/// Presolves, relaxes and solves a program. Throws NoConvergence when the
/// solver reports NumericalTrouble.
SdpRun solve_relaxation(const QuadraticProgram& qp, Relaxation relaxation, const SolverConfig& cfg,
                        const std::optional<std::filesystem::path>& sdpa_path = std::nullopt);

double rank1_gap(const Matrix& x);

struct CertifyRun {
  std::vector<VerificationOutcome> outcomes;  ///< ordered by (input, competitor)
  std::vector<Verdict> verdicts;              ///< one per input
};

CertifyRun certify_inputs(const Network& net, const std::string& model_name, const std::vector<InputRecord>& inputs,
                          const CertifyOptions& opts);
CertifyRun run_certify(const std::filesystem::path& model_path, const std::filesystem::path& input_path,
                       const CertifyOptions& opts);

enum class FglMode { Sdp, Eigen, Oracle };
FglMode parse_fgl_mode(std::string_view text);

struct FglRecord {
  std::string model;
  Task task = Task::Fgl;
  Norm norm;
  FglMode mode = FglMode::Sdp;
  double value = 0.0;
  double wall_time = 0.0;
  std::optional<SolveStatus> status;
};

/// Margin of the default FGL target: the scalar output, or output j minus
/// output k for multi-output models.
Margin fgl_margin(const Network& net, int j = 0, int k = 1);

/// FGL bound of a model. Eigen mode needs a matrix (the spectral bound of
/// max <M, X>, X PSD, X_ii = 1); oracle mode needs a two-layer model.
FglRecord run_fgl(const Network& net, const std::string& model_name, const Norm& norm, FglMode mode,
                  const Margin& margin, const SolverConfig& cfg, const std::optional<Matrix>& m = std::nullopt);

std::string outcome_to_json(const VerificationOutcome& o);
VerificationOutcome outcome_from_json(std::string_view line);
void write_outcomes(const std::vector<VerificationOutcome>& outcomes, std::ostream& out);
std::string fgl_to_json(const FglRecord& r);

struct ReportRow {
  std::string model;
  std::string norm;
  double eps = 0.0;
  int inputs = 0;
  int accuracy = 0;   ///< correctly classified
  int strength = 0;   ///< alias column: inputs attempted at this strength
  int pgd = 0;        ///< correct and not falsified
  int certified = 0;  ///< correct and certified
};

struct Report {
  std::vector<ReportRow> rows;
  std::string csv() const;
  std::string table() const;
};

/// Aggregates outcome records by (model, norm, eps). Reads every *.jsonl
/// file in the directory; EmptyDirectory if there are no records.
Report run_report(const std::filesystem::path& outcome_dir);
Report aggregate(const std::vector<VerificationOutcome>& outcomes);

}  // namespace symcert
