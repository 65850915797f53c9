#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "symcert/encode.hpp"
#include "symcert/error.hpp"
#include "symcert/oracle.hpp"
#include "symcert/relax.hpp"
#include "symcert/spectral.hpp"
#include "symcert/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace symcert;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitSolver = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::EmptyDirectory:
    case ErrorKind::IoError:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NonFiniteWeight:
      return kExitParse;
    case ErrorKind::NoConvergence:
    case ErrorKind::LpNumericalTrouble:
      return kExitSolver;
    default:
      return kExitUsage;
  }
}

struct SolverFlags {
  double tol = 1e-6;
  int max_iter = 50000;
  std::uint64_t seed = 0;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->add_option("--tol", tol, "Solver tolerance (primal, dual and gap)")->envname("SYMCERT_TOL");
    app->add_option("--max-iter", max_iter, "Solver iteration cap")->envname("SYMCERT_MAX_ITER");
    app->add_option("--seed", seed, "Seed for attacks and sampling")->envname("SYMCERT_SEED");
    app->add_flag("--verbose", verbose, "Solver progress on stderr");
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.tol_primal = cfg.tol_dual = cfg.tol_gap = tol;
    cfg.max_iter = max_iter;
    cfg.seed = seed;
    cfg.verbose = verbose;
    return cfg;
  }
};

struct ProblemFlags {
  std::string model;
  std::string input;
  double eps = 0.0;
  std::string norm = "inf";
  std::string encoding = "exact";

  void attach(CLI::App* app, bool need_input) {
    app->add_option("--model", model, "Model file (JSON)")->required()->envname("SYMCERT_MODEL");
    auto* in = app->add_option("--input", input, "Input file (JSON)")->envname("SYMCERT_INPUT");
    if (need_input) in->required();
    app->add_option("--eps", eps, "Perturbation radius")->envname("SYMCERT_EPS");
    app->add_option("--norm", norm, "Perturbation norm: 1, 2, inf or p/q")->envname("SYMCERT_NORM");
    app->add_option("--encoding", encoding, "ReLU encoding: exact, branch or slope")
        ->check(CLI::IsMember({"exact", "branch", "slope"}))
        ->envname("SYMCERT_ENCODING");
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error(ErrorKind::IoError, "cannot write " + path);
  return file;
}

std::pair<int, int> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--pair expects j,k");
  try {
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "--pair expects two integers");
  }
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semidefinite certification of neural networks"};
  app.require_subcommand(1);

  // certify ------------------------------------------------------------------
  auto* certify = app.add_subcommand("certify", "Certify local robustness of every input");
  ProblemFlags cp;
  SolverFlags cs;
  std::string relaxation = "primal", emit_sdpa, out_path;
  int jobs = 1;
  cp.attach(certify, true);
  cs.attach(certify);
  certify->add_option("--relaxation", relaxation, "Shor relaxation form: primal or dual")
      ->check(CLI::IsMember({"primal", "dual"}))
      ->envname("SYMCERT_RELAXATION");
  certify->add_option("--emit-sdpa", emit_sdpa, "Also write each SDP in SDPA format")->envname("SYMCERT_EMIT_SDPA");
  certify->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->envname("SYMCERT_JOBS");
  certify->add_option("--out", out_path, "Outcome records (JSON lines); default stdout")->envname("SYMCERT_OUT");

  // fgl ------------------------------------------------------------------------
  auto* fgl = app.add_subcommand("fgl", "Formal global Lipschitz bound");
  std::string fgl_model, fgl_norm = "2", fgl_mode = "sdp", fgl_matrix, fgl_pair = "0,1";
  SolverFlags fs_;
  fgl->add_option("--model", fgl_model, "Model file (JSON)")->envname("SYMCERT_MODEL");
  fgl->add_option("--norm", fgl_norm, "Input norm: 1, 2, inf or p/q")->envname("SYMCERT_NORM");
  fgl->add_option("--mode", fgl_mode, "sdp, eigen or oracle")
      ->check(CLI::IsMember({"sdp", "eigen", "oracle"}))
      ->envname("SYMCERT_MODE");
  fgl->add_option("--matrix", fgl_matrix, "Matrix file for eigen mode");
  fgl->add_option("--pair", fgl_pair, "Output pair j,k for multi-output models");
  fs_.attach(fgl);

  // report ---------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Aggregate outcome records into a table");
  std::string report_dir, report_csv;
  report->add_option("dir", report_dir, "Directory of *.jsonl outcome files")->required();
  report->add_option("--csv", report_csv, "Write the comma-separated table here");

  // encode ---------------------------------------------------------------------
  auto* encode = app.add_subcommand("encode", "Print the margin QP (and optionally its SDP)");
  ProblemFlags ep;
  int enc_index = 0, enc_competitor = -1;
  bool enc_presolve = false, enc_fgl = false;
  std::string enc_relaxation = "primal", enc_sdpa;
  ep.attach(encode, false);
  encode->add_option("--index", enc_index, "Which input record");
  encode->add_option("--competitor", enc_competitor, "Competitor class (default: first other class)");
  encode->add_flag("--presolve", enc_presolve, "Eliminate defined and pinned variables first");
  encode->add_flag("--fgl", enc_fgl, "Encode the FGL program instead of local robustness");
  encode->add_option("--relaxation", enc_relaxation)->check(CLI::IsMember({"primal", "dual"}));
  encode->add_option("--emit-sdpa", enc_sdpa, "Write the relaxation in SDPA format")->envname("SYMCERT_EMIT_SDPA");

  // spectral -------------------------------------------------------------------
  auto* spectral = app.add_subcommand("spectral", "Eigenvalue bound and the diagonal-shift comparison bound");
  std::string sp_matrix;
  SpectralConfig sp_cfg;
  spectral->add_option("matrix", sp_matrix, "Symmetric matrix file (rows of numbers)")->required();
  spectral->add_option("--iters", sp_cfg.iterations, "Subgradient iterations");

  // oracle ---------------------------------------------------------------------
  auto* oracle = app.add_subcommand("oracle", "Exact optimum by activation-pattern enumeration");
  ProblemFlags op;
  bool or_fgl = false;
  std::string or_pair = "0,1";
  op.attach(oracle, false);
  oracle->add_flag("--fgl", or_fgl, "Exact two-layer FGL instead of the local l_inf optimum");
  oracle->add_option("--pair", or_pair, "Output pair j,k for --fgl on multi-output models");

  // attack ---------------------------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "PGD attack on every competitor class");
  ProblemFlags ap;
  PgdConfig pgd;
  ap.attach(attack_cmd, true);
  attack_cmd->add_option("--steps", pgd.steps)->envname("SYMCERT_STEPS");
  attack_cmd->add_option("--restarts", pgd.restarts)->envname("SYMCERT_RESTARTS");
  attack_cmd->add_option("--seed", pgd.seed)->envname("SYMCERT_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*certify) {
      CertifyOptions opts;
      opts.norm = Norm::parse(cp.norm);
      opts.eps = cp.eps;
      opts.encoding = parse_encoding(cp.encoding);
      opts.relaxation = parse_relaxation(relaxation);
      opts.solver = cs.config();
      opts.pgd.seed = cs.seed;
      opts.jobs = jobs;
      if (!emit_sdpa.empty()) opts.emit_sdpa = fs::path(emit_sdpa);
      const CertifyRun run = run_certify(cp.model, cp.input, opts);
      std::ofstream file;
      std::ostream& out = open_output(out_path, file);
      write_outcomes(run.outcomes, out);
      for (std::size_t i = 0; i < run.verdicts.size(); ++i) {
        int predicted = 0;
        for (const auto& o : run.outcomes)
          if (o.input == static_cast<int>(i)) predicted = o.predicted;
        std::cerr << "input " << i << ": predicted " << predicted << "  " << to_string(run.verdicts[i]) << '\n';
      }
      for (const auto& o : run.outcomes)
        if (o.status != SolveStatus::Optimal) {
          std::cerr << "solver stopped with " << to_string(o.status) << " on input " << o.input << " class "
                    << o.competitor << '\n';
          return kExitSolver;
        }
    } else if (*fgl) {
      if (fgl_mode != "eigen" && fgl_model.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
      const FglMode mode = parse_fgl_mode(fgl_mode);
      std::optional<Matrix> m;
      if (mode == FglMode::Eigen) {
        if (fgl_matrix.empty()) throw Error(ErrorKind::InvalidArgument, "eigen mode needs --matrix");
        m = load_matrix_file(fgl_matrix);
      }
      FglRecord rec;
      if (mode == FglMode::Eigen && fgl_model.empty()) {
        rec.model = fs::path(fgl_matrix).stem().string();
        rec.norm = Norm::parse(fgl_norm);
        rec.mode = mode;
        rec.value = eigen_fgl_bound(*m).value;
      } else {
        const Network net = load_network_file(fgl_model);
        const auto [j, k] = parse_pair(fgl_pair);
        rec = run_fgl(net, fs::path(fgl_model).stem().string(), Norm::parse(fgl_norm), mode, fgl_margin(net, j, k),
                      fs_.config(), m);
      }
      std::cout << fgl_to_json(rec) << '\n';
      if (rec.status && *rec.status != SolveStatus::Optimal) return kExitSolver;
    } else if (*report) {
      const Report r = run_report(report_dir);
      if (!report_csv.empty()) {
        std::ofstream f(report_csv);
        if (!f) throw Error(ErrorKind::IoError, "cannot write " + report_csv);
        f << r.csv();
      }
      std::cout << r.csv() << '\n' << r.table();
    } else if (*encode) {
      const Network net = load_network_file(ep.model);
      const Norm norm = Norm::parse(ep.norm);
      QuadraticProgram qp;
      if (enc_fgl) {
        const Margin margin = fgl_margin(net);
        qp = net.has_equilibrium() ? build_deq_fgl_qp(net, norm, margin) : build_fgl_qp(net, norm, margin);
      } else {
        if (ep.input.empty()) throw Error(ErrorKind::InvalidArgument, "--input is required");
        const auto inputs = load_inputs_file(ep.input);
        if (enc_index < 0 || enc_index >= static_cast<int>(inputs.size()))
          throw Error(ErrorKind::IndexOutOfRange, "--index out of range");
        const Vector& x = inputs[enc_index].x;
        const int predicted = predict(net, x);
        int competitor = enc_competitor;
        if (competitor < 0) competitor = predicted == 0 ? 1 : 0;
        CertifyOptions opts;
        opts.norm = norm;
        opts.eps = ep.eps;
        opts.encoding = parse_encoding(ep.encoding);
        qp = certification_qp(net, x, predicted, competitor, opts);
      }
      if (enc_presolve) qp = presolve(qp).qp;
      std::cout << dump_qp(qp);
      if (!enc_sdpa.empty()) {
        std::ofstream f(enc_sdpa);
        if (!f) throw Error(ErrorKind::IoError, "cannot write " + enc_sdpa);
        export_sdpa(parse_relaxation(enc_relaxation) == Relaxation::Primal ? shor_primal(qp) : shor_dual(qp), f);
      }
    } else if (*spectral) {
      const Matrix m = load_matrix_file(sp_matrix);
      const SpectralResult e = eigen_fgl_bound(m, sp_cfg);
      const SpectralResult p = ptdiag_bound(m, sp_cfg);
      json j;
      j["eigen_bound"] = e.value;
      j["h"] = vector_json(e.weights);
      j["ptdiag_bound"] = p.value;
      j["c"] = vector_json(p.weights);
      std::cout << j.dump() << '\n';
    } else if (*oracle) {
      const Network net = load_network_file(op.model);
      json j;
      j["model"] = fs::path(op.model).stem().string();
      if (or_fgl) {
        const auto [a, b] = parse_pair(or_pair);
        const Norm norm = Norm::parse(op.norm);
        const ExactResult r = exact_fgl_two_layer(net, fgl_margin(net, a, b), norm);
        j["task"] = "fgl";
        j["norm"] = norm.to_string();
        j["optimum"] = r.optimum;
        j["slopes"] = vector_json(r.arg);
        j["patterns"] = r.patterns_enumerated;
        std::cout << j.dump() << '\n';
      } else {
        if (op.input.empty()) throw Error(ErrorKind::InvalidArgument, "--input is required");
        if (Norm::parse(op.norm).kind != Norm::Kind::Inf)
          throw Error(ErrorKind::UnsupportedNorm, "the exact local oracle handles l_inf only");
        const auto inputs = load_inputs_file(op.input);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const int predicted = predict(net, inputs[i].x);
          for (int k = 0; k < num_classes(net); ++k) {
            if (k == predicted) continue;
            const ExactResult r =
                exact_local_linf(net, inputs[i].x, op.eps, competitor_margin(net, predicted, k));
            j["task"] = "local-robustness";
            j["norm"] = "inf";
            j["eps"] = op.eps;
            j["input"] = i;
            j["predicted"] = predicted;
            j["competitor"] = k;
            j["optimum"] = r.optimum;
            j["arg"] = vector_json(r.arg);
            j["patterns"] = r.patterns_enumerated;
            j["feasible_patterns"] = r.patterns_feasible;
            std::cout << j.dump() << '\n';
          }
        }
      }
    } else if (*attack_cmd) {
      const Network net = load_network_file(ap.model);
      const auto inputs = load_inputs_file(ap.input);
      const Norm norm = Norm::parse(ap.norm);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const int predicted = predict(net, inputs[i].x);
        for (int k = 0; k < num_classes(net); ++k) {
          if (k == predicted) continue;
          const AttackResult r =
              attack(net, PerturbationSpec{norm, ap.eps, inputs[i].x}, competitor_margin(net, predicted, k), pgd);
          json j;
          j["model"] = fs::path(ap.model).stem().string();
          j["norm"] = norm.to_string();
          j["eps"] = ap.eps;
          j["input"] = i;
          j["predicted"] = predicted;
          j["competitor"] = k;
          j["best_margin"] = r.best_margin;
          j["best_input"] = vector_json(r.best_input);
          j["iterations"] = r.iterations_used;
          j["restarts"] = r.restarts_used;
          std::cout << j.dump() << '\n';
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
