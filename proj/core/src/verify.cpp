#include "symcert/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "symcert/eigen.hpp"
#include "symcert/error.hpp"
#include "symcert/relax.hpp"
#include "symcert/spectral.hpp"

namespace symcert {

using json = nlohmann::json;

std::string to_string(Task task) {
  switch (task) {
    case Task::LocalRobustness: return "local-robustness";
    case Task::Fgl: return "fgl";
    case Task::Metric: return "metric";
    case Task::DeqFgl: return "deq-fgl";
  }
  return "?";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Certified: return "Certified";
    case Verdict::Falsified: return "Falsified";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  for (Task t : {Task::LocalRobustness, Task::Fgl, Task::Metric, Task::DeqFgl})
    if (to_string(t) == text) return t;
  throw Error(ErrorKind::ParseError, "unknown task '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view text) {
  for (Verdict v : {Verdict::Certified, Verdict::Falsified, Verdict::Unknown})
    if (to_string(v) == text) return v;
  throw Error(ErrorKind::ParseError, "unknown verdict '" + std::string(text) + "'");
}

ReluEncoding parse_encoding(std::string_view text) {
  if (text == "exact") return ReluEncoding::Exact;
  if (text == "branch") return ReluEncoding::Branch;
  if (text == "slope") return ReluEncoding::Slope;
  throw Error(ErrorKind::InvalidArgument, "unknown encoding '" + std::string(text) + "'");
}

Relaxation parse_relaxation(std::string_view text) {
  if (text == "primal") return Relaxation::Primal;
  if (text == "dual") return Relaxation::Dual;
  throw Error(ErrorKind::InvalidArgument, "unknown relaxation '" + std::string(text) + "'");
}

FglMode parse_fgl_mode(std::string_view text) {
  if (text == "sdp") return FglMode::Sdp;
  if (text == "eigen") return FglMode::Eigen;
  if (text == "oracle") return FglMode::Oracle;
  throw Error(ErrorKind::InvalidArgument, "unknown FGL mode '" + std::string(text) + "'");
}

namespace {

std::string to_string(FglMode mode) {
  switch (mode) {
    case FglMode::Sdp: return "sdp";
    case FglMode::Eigen: return "eigen";
    case FglMode::Oracle: return "oracle";
  }
  return "?";
}

SolveStatus parse_status(std::string_view text) {
  for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::MaxIter, SolveStatus::NumericalTrouble})
    if (symcert::to_string(s) == text) return s;
  throw Error(ErrorKind::ParseError, "unknown solver status '" + std::string(text) + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector to_vector(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::ParseError, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(ErrorKind::ParseError, "expected a number");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

std::filesystem::path sdpa_name(const std::filesystem::path& base, int input, int competitor, bool single) {
  if (single) return base;
  std::filesystem::path out = base;
  out.replace_filename(base.stem().string() + "_i" + std::to_string(input) + "_c" + std::to_string(competitor) +
                       base.extension().string());
  return out;
}

}  // namespace

Verdict verdict_of(double sdp_value, std::optional<double> lower_bound) {
  const bool certified = sdp_value < kCertifyThreshold;
  const bool falsified = lower_bound && *lower_bound > 0.0;
  if (certified && falsified)
    throw Error(ErrorKind::InvalidArgument, "soundness violation: SDP bound " + std::to_string(sdp_value) +
                                                " below a witnessed margin " + std::to_string(*lower_bound));
  if (certified) return Verdict::Certified;
  if (falsified) return Verdict::Falsified;
  return Verdict::Unknown;
}

Verdict combine_verdicts(const std::vector<VerificationOutcome>& per_class) {
  bool all_certified = !per_class.empty();
  bool any_falsified = false;
  for (const auto& o : per_class) {
    all_certified = all_certified && o.verdict == Verdict::Certified;
    any_falsified = any_falsified || o.verdict == Verdict::Falsified;
  }
  if (all_certified && any_falsified) throw Error(ErrorKind::InvalidArgument, "soundness violation across classes");
  if (all_certified) return Verdict::Certified;
  if (any_falsified) return Verdict::Falsified;
  return Verdict::Unknown;
}

std::vector<InputRecord> load_inputs(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("input file: ") + e.what());
  }
  if (doc.is_object()) {
    if (!doc.contains("inputs")) throw Error(ErrorKind::ParseError, "input object needs an \"inputs\" array");
    doc = doc["inputs"];
  }
  if (!doc.is_array()) throw Error(ErrorKind::ParseError, "inputs must be an array");
  std::vector<InputRecord> out;
  if (!doc.empty() && doc[0].is_number()) {
    out.push_back({to_vector(doc), std::nullopt});
    return out;
  }
  for (const auto& rec : doc) {
    InputRecord r;
    if (rec.is_array()) {
      r.x = to_vector(rec);
    } else if (rec.is_object() && rec.contains("x")) {
      r.x = to_vector(rec["x"]);
      if (rec.contains("label") && !rec["label"].is_null()) {
        if (!rec["label"].is_number_integer()) throw Error(ErrorKind::ParseError, "label must be an integer");
        r.label = rec["label"].get<int>();
      }
    } else {
      throw Error(ErrorKind::ParseError, "input records need an \"x\" array");
    }
    if (!r.x.allFinite()) throw Error(ErrorKind::ParseError, "input has non-finite entries");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<InputRecord> load_inputs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_inputs(ss.str());
}

int num_classes(const Network& net) {
  if (net.metric_head()) return static_cast<int>(net.metric_head()->anchors.size());
  return net.output_dim() == 1 ? 2 : net.output_dim();
}

int predict(const Network& net, const Vector& x) {
  const Vector out = forward(net, x);
  if (net.metric_head()) {
    int best = 0;
    double score = -std::numeric_limits<double>::infinity();
    const auto& anchors = net.metric_head()->anchors;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double s = anchors[k].dot(out);
      if (s > score) {
        score = s;
        best = static_cast<int>(k);
      }
    }
    return best;
  }
  if (out.size() == 1) return out(0) > 0.0 ? 1 : 0;
  Eigen::Index arg = 0;
  out.maxCoeff(&arg);
  return static_cast<int>(arg);
}

Margin competitor_margin(const Network& net, int predicted, int competitor) {
  if (net.metric_head()) return metric_margin(*net.metric_head(), predicted, competitor);
  if (net.output_dim() == 1) {
    if (predicted < 0 || predicted > 1 || competitor < 0 || competitor > 1 || predicted == competitor)
      throw Error(ErrorKind::InvalidClassIndex, "a scalar-output model has classes 0 and 1");
    Margin m = scalar_margin(net);
    // Class 1 means a positive output, so the attack drives the output down.
    if (predicted == 1) {
      m.v = -m.v;
      m.c = -m.c;
    }
    return m;
  }
  return margin_network(net, predicted, competitor);
}

QuadraticProgram certification_qp(const Network& net, const Vector& x, int predicted, int competitor,
                                  const CertifyOptions& opts) {
  const PerturbationSpec spec{opts.norm, opts.eps, x};
  const EncodeOptions enc{opts.encoding};
  if (net.metric_head()) return build_metric_qp(net, spec, predicted, competitor, enc);
  return build_local_robustness_qp(net, spec, competitor_margin(net, predicted, competitor), enc);
}

double rank1_gap(const Matrix& x) {
  if (x.rows() == 0) return 0.0;
  const SymEigen eig = sym_eigen(x);
  const Eigen::Index n = eig.values.size();
  const double l1 = eig.values(n - 1);
  if (l1 <= 0.0) return 0.0;
  return n < 2 ? 0.0 : std::max(eig.values(n - 2), 0.0) / l1;
}

SdpRun solve_relaxation(const QuadraticProgram& qp, Relaxation relaxation, const SolverConfig& cfg,
                        const std::optional<std::filesystem::path>& sdpa_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const PresolveResult pre = presolve(qp);
  const SdpProblem sdp = relaxation == Relaxation::Primal ? shor_primal(pre.qp) : shor_dual(pre.qp);
  if (sdpa_path) {
    std::ofstream out(*sdpa_path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + sdpa_path->string());
    export_sdpa(sdp, out);
  }
  SdpRun run;
  run.solution = solve_sdp(sdp, cfg);
  if (run.solution.status == SolveStatus::NumericalTrouble)
    throw Error(ErrorKind::NoConvergence, "SDP solver hit non-finite iterates");
  run.value = run.solution.bound();
  // The dual form's lifted matrix is the slack of its LMI rows.
  run.rank1_gap = rank1_gap(relaxation == Relaxation::Primal ? run.solution.x : run.solution.dual_slack);
  run.wall_time = seconds_since(t0);
  return run;
}

CertifyRun certify_inputs(const Network& net, const std::string& model_name, const std::vector<InputRecord>& inputs,
                          const CertifyOptions& opts) {
  if (net.has_equilibrium()) throw Error(ErrorKind::InvalidArgument, "certify needs a feed-forward model");
  if (!(opts.eps >= 0.0) || !std::isfinite(opts.eps)) throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  const int classes = num_classes(net);

  struct Job {
    int input;
    int predicted;
    int competitor;
  };
  std::vector<Job> jobs;
  std::vector<int> predicted(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& rec = inputs[i];
    PerturbationSpec{opts.norm, opts.eps, rec.x}.validate(net.input_dim());
    if (rec.label && (*rec.label < 0 || *rec.label >= classes))
      throw Error(ErrorKind::InvalidClassIndex, "label " + std::to_string(*rec.label) + " out of range");
    predicted[i] = predict(net, rec.x);
    for (int k = 0; k < classes; ++k)
      if (k != predicted[i]) jobs.push_back({static_cast<int>(i), predicted[i], k});
  }

  CertifyRun run;
  run.outcomes.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        const InputRecord& rec = inputs[job.input];
        VerificationOutcome& o = run.outcomes[j];
        o.model = model_name;
        o.task = net.metric_head() ? Task::Metric : Task::LocalRobustness;
        o.norm = opts.norm;
        o.eps = opts.eps;
        o.input = job.input;
        o.label = rec.label;
        o.predicted = job.predicted;
        o.competitor = job.competitor;

        std::optional<std::filesystem::path> sdpa;
        if (opts.emit_sdpa) sdpa = sdpa_name(*opts.emit_sdpa, job.input, job.competitor, jobs.size() == 1);
        const QuadraticProgram qp = certification_qp(net, rec.x, job.predicted, job.competitor, opts);
        const SdpRun sdp = solve_relaxation(qp, opts.relaxation, opts.solver, sdpa);
        o.sdp_value = sdp.value;
        o.rank1_gap = sdp.rank1_gap;
        o.wall_time = sdp.wall_time;
        o.status = sdp.solution.status;
        o.iterations = sdp.solution.iterations;
        if (opts.run_attack) {
          PgdConfig pgd = opts.pgd;
          // Seeds depend on the job only, so results do not depend on --jobs.
          pgd.seed = opts.pgd.seed + 7919ULL * static_cast<std::uint64_t>(job.input) +
                     static_cast<std::uint64_t>(job.competitor);
          const Margin margin = competitor_margin(net, job.predicted, job.competitor);
          o.lower_bound = attack(net, PerturbationSpec{opts.norm, opts.eps, rec.x}, margin, pgd).best_margin;
        }
        o.verdict = verdict_of(o.sdp_value, o.lower_bound);
        // An unconverged bound is not a certificate.
        if (o.status != SolveStatus::Optimal && o.verdict == Verdict::Certified) o.verdict = Verdict::Unknown;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opts.jobs, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<VerificationOutcome> mine;
    for (const auto& o : run.outcomes)
      if (o.input == static_cast<int>(i)) mine.push_back(o);
    run.verdicts.push_back(combine_verdicts(mine));
  }
  return run;
}

CertifyRun run_certify(const std::filesystem::path& model_path, const std::filesystem::path& input_path,
                       const CertifyOptions& opts) {
  const Network net = load_network_file(model_path);
  const auto inputs = load_inputs_file(input_path);
  return certify_inputs(net, model_path.stem().string(), inputs, opts);
}

Margin fgl_margin(const Network& net, int j, int k) {
  if (net.metric_head()) return metric_margin(*net.metric_head(), j, k);
  if (net.output_dim() == 1) return scalar_margin(net);
  return margin_network(net, j, k);
}

FglRecord run_fgl(const Network& net, const std::string& model_name, const Norm& norm, FglMode mode,
                  const Margin& margin, const SolverConfig& cfg, const std::optional<Matrix>& m) {
  const auto t0 = std::chrono::steady_clock::now();
  FglRecord r;
  r.model = model_name;
  r.task = net.has_equilibrium() ? Task::DeqFgl : Task::Fgl;
  r.norm = norm;
  r.mode = mode;
  switch (mode) {
    case FglMode::Sdp: {
      const QuadraticProgram qp = net.has_equilibrium() ? build_deq_fgl_qp(net, norm, margin)
                                                         : build_fgl_qp(net, norm, margin);
      const SdpRun run = solve_relaxation(qp, Relaxation::Primal, cfg);
      r.value = run.value;
      r.status = run.solution.status;
      break;
    }
    case FglMode::Eigen:
      if (!m) throw Error(ErrorKind::InvalidArgument, "eigen mode needs a matrix file");
      r.value = eigen_fgl_bound(*m).value;
      break;
    case FglMode::Oracle:
      r.value = exact_fgl_two_layer(net, margin, norm).optimum;
      break;
  }
  r.wall_time = seconds_since(t0);
  return r;
}

std::string outcome_to_json(const VerificationOutcome& o) {
  json j;
  j["model"] = o.model;
  j["task"] = to_string(o.task);
  j["norm"] = o.norm.to_string();
  j["eps"] = o.eps;
  j["input"] = o.input;
  j["label"] = o.label ? json(*o.label) : json(nullptr);
  j["predicted"] = o.predicted;
  j["competitor"] = o.competitor;
  j["sdp_value"] = o.sdp_value;
  j["lower_bound"] = o.lower_bound ? json(*o.lower_bound) : json(nullptr);
  j["verdict"] = to_string(o.verdict);
  j["rank1_gap"] = o.rank1_gap;
  j["wall_time"] = o.wall_time;
  j["status"] = symcert::to_string(o.status);
  j["iterations"] = o.iterations;
  return j.dump();
}

VerificationOutcome outcome_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    VerificationOutcome o;
    o.model = j.at("model").get<std::string>();
    o.task = parse_task(j.at("task").get<std::string>());
    o.norm = Norm::parse(j.at("norm").get<std::string>());
    o.eps = j.at("eps").get<double>();
    o.input = j.at("input").get<int>();
    if (!j.at("label").is_null()) o.label = j.at("label").get<int>();
    o.predicted = j.at("predicted").get<int>();
    o.competitor = j.at("competitor").get<int>();
    o.sdp_value = j.at("sdp_value").get<double>();
    if (!j.at("lower_bound").is_null()) o.lower_bound = j.at("lower_bound").get<double>();
    o.verdict = parse_verdict(j.at("verdict").get<std::string>());
    o.rank1_gap = j.value("rank1_gap", 0.0);
    o.wall_time = j.value("wall_time", 0.0);
    o.status = parse_status(j.value("status", std::string("Optimal")));
    o.iterations = j.value("iterations", 0);
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("outcome record: ") + e.what());
  }
}

void write_outcomes(const std::vector<VerificationOutcome>& outcomes, std::ostream& out) {
  for (const auto& o : outcomes) out << outcome_to_json(o) << '\n';
}

std::string fgl_to_json(const FglRecord& r) {
  json j;
  j["model"] = r.model;
  j["task"] = to_string(r.task);
  j["norm"] = r.norm.to_string();
  j["mode"] = to_string(r.mode);
  j["value"] = r.value;
  j["wall_time"] = r.wall_time;
  j["status"] = r.status ? json(symcert::to_string(*r.status)) : json(nullptr);
  return j.dump();
}

Report aggregate(const std::vector<VerificationOutcome>& outcomes) {
  struct Key {
    std::string model, norm;
    double eps;
    bool operator<(const Key& o) const { return std::tie(model, norm, eps) < std::tie(o.model, o.norm, o.eps); }
  };
  std::map<Key, std::map<int, std::vector<const VerificationOutcome*>>> groups;
  for (const auto& o : outcomes) groups[{o.model, o.norm.to_string(), o.eps}][o.input].push_back(&o);

  Report report;
  for (const auto& [key, inputs] : groups) {
    ReportRow row;
    row.model = key.model;
    row.norm = key.norm;
    row.eps = key.eps;
    for (const auto& [input, recs] : inputs) {
      ++row.inputs;
      if (!recs.front()->correct()) continue;
      ++row.accuracy;
      bool falsified = false, certified = true;
      for (const auto* r : recs) {
        falsified = falsified || r->verdict == Verdict::Falsified;
        certified = certified && r->verdict == Verdict::Certified;
      }
      if (!falsified) ++row.pgd;
      if (certified) ++row.certified;
    }
    row.strength = row.inputs;
    report.rows.push_back(row);
  }
  return report;
}

Report run_report(const std::filesystem::path& outcome_dir) {
  if (!std::filesystem::is_directory(outcome_dir))
    throw Error(ErrorKind::IoError, outcome_dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(outcome_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<VerificationOutcome> outcomes;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line))
      if (line.find_first_not_of(" \t\r") != std::string::npos) outcomes.push_back(outcome_from_json(line));
  }
  if (outcomes.empty()) throw Error(ErrorKind::EmptyDirectory, "no outcome records in " + outcome_dir.string());
  return aggregate(outcomes);
}

namespace {

std::string format_eps(double eps) {
  std::ostringstream os;
  os << eps;
  return os.str();
}

}  // namespace

std::string Report::csv() const {
  std::ostringstream os;
  os << "model,norm,eps,inputs,Accuracy,Strength,PGD,Certified\n";
  for (const auto& r : rows)
    os << r.model << ',' << r.norm << ',' << format_eps(r.eps) << ',' << r.inputs << ',' << r.accuracy << ','
       << format_eps(r.eps) << ',' << r.pgd << ',' << r.certified << '\n';
  return os.str();
}

std::string Report::table() const {
  const std::vector<std::string> head{"Model", "Norm", "Inputs", "Accuracy", "Strength", "PGD", "Certified"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& r : rows)
    cells.push_back({r.model, r.norm, std::to_string(r.inputs), std::to_string(r.accuracy), format_eps(r.eps),
                     std::to_string(r.pgd), std::to_string(r.certified)});
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c)
      os << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << (c == 0 ? std::left : std::right)
         << cells[r][c];
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace symcert
