#include "spdhg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spdhg/version.hpp"

namespace spdhg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertifyGamma = 0.99;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Scalar steps tau = sigma_i = gamma/||A||: the deterministic full-dual rule,
// also the weighting used to certify and re-verify references.
StepSizes scalar_steps(const SaddleProblem& prob, double gamma) {
  const double nrm = prob.op->operator_norm();
  if (!(nrm > 0.0))
    throw std::invalid_argument("operator norm must be positive");
  StepSizes st;
  st.tau = gamma / nrm;
  st.sigma.assign(static_cast<size_t>(prob.num_blocks()), gamma / nrm);
  st.gamma = gamma;
  return st;
}

double reference_objective(const SaddleProblem& prob,
                           const std::vector<double>& x) {
  // Constrained problems report g only: the indicator is never exactly zero
  // at a solved-to-tolerance point.
  return prob.is_linear_constraint() ? prob.g.value(x)
                                     : objective_value(prob, x);
}

// ---------- metric registry ----------

const std::vector<std::string> kBaseMetrics = {
    "objective_residual", "feasibility", "kkt_residual", "dist_to_ref",
    "bregman", "smoothed_gap", "gap_at_ref", "lyapunov_V"};

bool split_av(const std::string& name, std::string& base) {
  const std::string suffix = "_av";
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    base = name.substr(0, name.size() - suffix.size());
    return true;
  }
  base = name;
  return false;
}

bool metric_needs_dual(const std::string& base) {
  return base == "kkt_residual" || base == "bregman" ||
         base == "smoothed_gap" || base == "gap_at_ref" ||
         base == "lyapunov_V";
}

bool metric_needs_steps(const std::string& base) {
  return base == "kkt_residual" || base == "lyapunov_V";
}

bool metric_needs_sampler(const std::string& base) {
  return base == "lyapunov_V";
}

struct MetricContext {
  const SaddleProblem* prob = nullptr;
  const StepSizes* steps = nullptr;
  const SamplerSpec* sampler = nullptr;  // probabilities only
  std::vector<double> x0, y0;            // smoothed-gap anchors
};

double eval_point_metric(const MetricContext& c, const std::string& base,
                         std::span<const double> x, std::span<const double> y) {
  const SaddleProblem& p = *c.prob;
  if (base == "objective_residual") return objective_residual(p, x);
  if (base == "feasibility") return feasibility(p, x);
  if (base == "dist_to_ref") return dist_to_reference(p, x);
  if (base == "kkt_residual") return kkt_residual(p, *c.steps, x, y);
  if (base == "bregman") {
    const ReferenceSolution& r = *p.reference;
    return bregman_dg(p, x, r.x_star, r.y_star) +
           bregman_dfstar(p, y, r.x_star, r.y_star);
  }
  if (base == "smoothed_gap")
    return smoothed_gap(p, x, y, c.x0, c.y0, 1.0, 1.0);
  if (base == "gap_at_ref") {
    const ReferenceSolution& r = *p.reference;
    return gap_at(p, x, y, r.x_star, r.y_star);
  }
  if (base == "lyapunov_V") {
    const ReferenceSolution& r = *p.reference;
    std::vector<double> dx(x.begin(), x.end());
    for (size_t j = 0; j < dx.size(); ++j) dx[j] -= r.x_star[j];
    std::vector<double> dy(y.begin(), y.end());
    for (size_t j = 0; j < dy.size(); ++j) dy[j] -= r.y_star[j];
    return lyapunov_v(*p.op, *c.steps, *c.sampler, dx, dy);
  }
  throw std::invalid_argument("unknown metric '" + base + "'");
}

MetricFn make_state_metric_fn(std::shared_ptr<const MetricContext> ctx,
                              std::vector<std::string> names) {
  return [ctx, names = std::move(names)](const SolverState& s) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(names.size());
    bool have_snap = false;
    ErgodicSnapshot snap;
    for (const std::string& name : names) {
      std::string base;
      if (split_av(name, base)) {
        if (!have_snap) {
          snap = s.ergodic.snapshot(s.y);
          have_snap = true;
        }
        // Before the first step the running average is the current point.
        const auto& xa = snap.iter == 0 ? s.x : snap.x_av;
        const auto& ya = snap.iter == 0 ? s.y : snap.y_av;
        out.emplace_back(name, eval_point_metric(*ctx, base, xa, ya));
      } else {
        out.emplace_back(name, eval_point_metric(*ctx, base, s.x, s.y));
      }
    }
    return out;
  };
}

PrimalMetricFn make_primal_metric_fn(std::shared_ptr<const MetricContext> ctx,
                                     std::vector<std::string> names) {
  return [ctx, names = std::move(names)](const std::vector<double>& x) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(names.size());
    for (const std::string& name : names)
      out.emplace_back(name, eval_point_metric(*ctx, name, x, {}));
    return out;
  };
}

// ---------- config plumbing ----------

const std::vector<std::string> kMethods = {"spdhg", "spdhg_mu",  "pdhg",
                                           "fb_vc_cd", "svrg", "sdca"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

void reject_unknown_keys(const ConfigFile& f, const std::string& section,
                         const std::vector<std::string>& known) {
  for (const std::string& k : f.keys(section))
    if (!contains(known, k))
      throw std::invalid_argument("unknown key '" + k + "' in [" + section + "]");
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t out = 0;
  size_t pos = 0;
  out = std::stoull(s, &pos, 10);
  if (pos != s.size())
    throw std::invalid_argument("bad seed '" + s + "'");
  return out;
}

}  // namespace

const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v = kBaseMetrics;
    for (const std::string& b : kBaseMetrics)
      if (b != "kkt_residual" && b != "lyapunov_V") v.push_back(b + "_av");
    return v;
  }();
  return all;
}

bool is_known_metric(const std::string& name) {
  return contains(known_metrics(), name);
}

namespace {

// Checks shared with parse_problem_config, which skips run-level validation.
void validate_problem_part(const ExperimentConfig& cfg) {
  if (cfg.file.empty()) {
    GeneratorSpec gen = cfg.gen;
    // lambda_rel resolves against the assembled data; validate with the same
    // placeholder assemble_problem uses.
    if (cfg.lambda_rel >= 0.0 && gen.lambda <= 0.0) gen.lambda = 1.0;
    gen.validate();
  } else {
    if (cfg.file_opts.p_override < 0)
      throw std::invalid_argument("p_override must be >= 0");
  }
  if (cfg.lambda_rel >= 0.0 && cfg.gen.kind == ProblemKind::BasisPursuit)
    throw std::invalid_argument("lambda_rel does not apply to basis_pursuit");

  if (cfg.reference.mode != "pdhg_oracle" && cfg.reference.mode != "planted" &&
      cfg.reference.mode != "file")
    throw std::invalid_argument("unknown reference mode '" + cfg.reference.mode +
                                "'");
  if (cfg.reference.mode == "file" && cfg.reference.path.empty())
    throw std::invalid_argument("reference mode file needs a path");
  if (!(cfg.reference.tol > 0.0) || cfg.reference.max_iters < 1)
    throw std::invalid_argument("reference needs tol > 0 and max_iters >= 1");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (solvers.empty())
    throw std::invalid_argument("config needs at least one [solver <label>]");
  if (seeds.empty()) throw std::invalid_argument("config needs at least one seed");
  if (metrics.empty()) throw std::invalid_argument("config needs metrics");
  for (const std::string& m : metrics)
    if (!is_known_metric(m))
      throw std::invalid_argument("unknown metric '" + m + "'");
  if (!stop_metric.empty() && !contains(metrics, stop_metric))
    throw std::invalid_argument("stop_metric must be one of the logged metrics");
  if (max_epochs < 0 || log_every_epochs < 0.0)
    throw std::invalid_argument("epoch counts must be nonnegative");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must be set");
  if (!plot_metric.empty() && !contains(metrics, plot_metric))
    throw std::invalid_argument("plot_metric must be one of the logged metrics");

  std::vector<std::string> labels;
  for (const SolverEntry& e : solvers) {
    if (!contains(kMethods, e.method))
      throw std::invalid_argument("unknown method '" + e.method + "'");
    if (!(e.gamma > 0.0 && e.gamma < 1.0))
      throw std::invalid_argument("gamma must lie in (0, 1)");
    if (e.sampling != "uniform" && e.sampling != "norm_weighted")
      throw std::invalid_argument("unknown sampling '" + e.sampling + "'");
    if (e.method == "spdhg_mu" && e.sampling != "uniform")
      throw std::invalid_argument("spdhg_mu requires uniform sampling");
    if (e.eta < 0.0 || e.inner < 0)
      throw std::invalid_argument("svrg overrides must be nonnegative");
    if (contains(labels, e.label))
      throw std::invalid_argument("duplicate solver label '" + e.label + "'");
    labels.push_back(e.label);
  }

  validate_problem_part(*this);
}

namespace {

ExperimentConfig parse_config_impl(const std::string& text,
                                   const std::string& origin, bool full) {
  const ConfigFile f = ConfigFile::parse(text, origin);
  ExperimentConfig cfg;
  cfg.config_text = text;

  for (const std::string& s : f.sections()) {
    if (s == "problem" || s == "reference" || s == "run") continue;
    if (s.rfind("solver ", 0) == 0) continue;
    throw std::invalid_argument("unknown section [" + s + "]");
  }

  reject_unknown_keys(f, "problem",
                      {"kind", "n", "p", "rho", "sparsity", "lambda",
                       "lambda_rel", "margin", "group_size", "seed", "file",
                       "p_override", "normalize"});
  cfg.gen.kind = problem_kind_from_name(f.get("problem", "kind"));
  cfg.gen.n = static_cast<int>(f.get_long("problem", "n", 0));
  cfg.gen.p = static_cast<int>(f.get_long("problem", "p", 0));
  cfg.gen.rho = f.get_double("problem", "rho", 0.0);
  cfg.gen.sparsity = static_cast<int>(f.get_long("problem", "sparsity", 0));
  cfg.gen.lambda = f.get_double("problem", "lambda", 0.0);
  cfg.gen.margin = f.get_double("problem", "margin", 2.0);
  cfg.gen.group_size = static_cast<int>(f.get_long("problem", "group_size", 1));
  cfg.gen.seed = f.get_u64("problem", "seed", 0);
  cfg.file = f.get_or("problem", "file", "");
  cfg.file_opts.p_override =
      static_cast<int>(f.get_long("problem", "p_override", 0));
  cfg.file_opts.normalize = f.get_bool("problem", "normalize", false);
  cfg.lambda_rel = f.get_double("problem", "lambda_rel", -1.0);

  reject_unknown_keys(f, "reference", {"mode", "tol", "max_iters", "path"});
  cfg.reference.mode = f.get_or("reference", "mode", "pdhg_oracle");
  cfg.reference.tol = f.get_double("reference", "tol", 1e-12);
  cfg.reference.max_iters = f.get_long("reference", "max_iters", 1000000);
  cfg.reference.path = f.get_or("reference", "path", "");

  reject_unknown_keys(f, "run",
                      {"seeds", "num_seeds", "seed_base", "max_epochs",
                       "log_every_epochs", "metrics", "stop_metric",
                       "stop_tol", "output_dir", "plot_metric"});
  if (f.has("run", "seeds")) {
    if (f.has("run", "num_seeds") || f.has("run", "seed_base"))
      throw std::invalid_argument(
          "give either an explicit seeds list or num_seeds/seed_base");
    for (const std::string& s : f.get_list("run", "seeds"))
      cfg.seeds.push_back(parse_u64(s));
  } else {
    // Ten seeds by default; enough for stable aggregate bands.
    const long num = f.get_long("run", "num_seeds", 10);
    const std::uint64_t base = f.get_u64("run", "seed_base", 1);
    if (num < 1) throw std::invalid_argument("num_seeds must be >= 1");
    for (long k = 0; k < num; ++k)
      cfg.seeds.push_back(base + static_cast<std::uint64_t>(k));
  }
  cfg.max_epochs = f.get_long("run", "max_epochs", 0);
  cfg.log_every_epochs = f.get_double("run", "log_every_epochs", 0.0);
  cfg.metrics = f.get_list("run", "metrics");
  cfg.stop_metric = f.get_or("run", "stop_metric", "");
  cfg.stop_tol = f.get_double("run", "stop_tol", 0.0);
  cfg.output_dir = f.get_or("run", "output_dir", "out");
  cfg.plot_metric = f.get_or("run", "plot_metric", "");

  for (const std::string& s : f.sections()) {
    if (s.rfind("solver ", 0) != 0) continue;
    reject_unknown_keys(f, s, {"method", "gamma", "sampling", "eta", "inner"});
    SolverEntry e;
    e.label = s.substr(7);
    if (e.label.empty())
      throw std::invalid_argument("solver section needs a label: [solver <name>]");
    e.method = f.get_or(s, "method", e.label);
    e.gamma = f.get_double(s, "gamma", 0.99);
    e.sampling = f.get_or(s, "sampling", "uniform");
    e.eta = f.get_double(s, "eta", 0.0);
    e.inner = f.get_long(s, "inner", 0);
    cfg.solvers.push_back(std::move(e));
  }

  if (full)
    cfg.validate();
  else
    validate_problem_part(cfg);
  return cfg;
}

std::string read_config_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A run.json starts with '{'; replay its embedded config.
bool extract_embedded(std::string& text, std::string& origin) {
  const size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') return false;
  const auto j = nlohmann::json::parse(text);
  text = j.at("config_text").get<std::string>();
  origin += " (embedded config)";
  return true;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin) {
  return parse_config_impl(text, origin, true);
}

ExperimentConfig parse_problem_config(const std::string& text,
                                      const std::string& origin) {
  return parse_config_impl(text, origin, false);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string text = read_config_text(path);
  std::string origin = path;
  extract_embedded(text, origin);
  return parse_experiment_config(text, origin);
}

ExperimentConfig load_problem_config(const std::string& path) {
  std::string text = read_config_text(path);
  std::string origin = path;
  extract_embedded(text, origin);
  return parse_problem_config(text, origin);
}

// ---------- assembly and certification ----------

namespace {

void apply_lambda(GeneratedProblem& gp, double lambda) {
  switch (gp.spec.kind) {
    case ProblemKind::BasisPursuit: return;
    case ProblemKind::Lasso:
      gp.problem.g = ProxableFunction::l1(lambda);
      break;
    case ProblemKind::Ridge:
    case ProblemKind::SvmHinge:
      gp.problem.g = ProxableFunction::squared_l2(lambda);
      break;
  }
  gp.spec.lambda = lambda;
}

}  // namespace

GeneratedProblem assemble_problem(const ExperimentConfig& cfg) {
  const bool rel = cfg.lambda_rel >= 0.0;
  GeneratorSpec gen = cfg.gen;
  if (rel && gen.lambda <= 0.0) gen.lambda = 1.0;  // placeholder until resolved
  GeneratedProblem gp;
  if (cfg.file.empty()) {
    gp = generate(gen);
  } else {
    gp = problem_from_data(load_libsvm(cfg.file, cfg.file_opts), gen.kind,
                           gen.lambda, gen.group_size);
  }
  if (rel) {
    const auto atb = gp.problem.op->adjoint(gp.targets);
    double sup = 0.0;
    for (double v : atb) sup = std::max(sup, std::abs(v));
    if (!(sup > 0.0))
      throw std::invalid_argument("lambda_rel needs a nonzero A^T b");
    apply_lambda(gp, cfg.lambda_rel * sup);
  }
  return gp;
}

ReferenceSolution certify_pdhg_oracle(const SaddleProblem& prob, double tol,
                                      long max_iters) {
  const StepSizes st = scalar_steps(prob, kCertifyGamma);
  double best = kInf;
  MetricFn metric = [&](const SolverState& s) {
    const double k = kkt_residual(prob, st, s.x, s.y);
    best = std::min(best, k);
    return std::vector<std::pair<std::string, double>>{{"kkt_residual", k}};
  };
  RunConfig rc;
  rc.max_iters = max_iters;
  rc.log_every = 100;
  rc.stop_metric = "kkt_residual";
  rc.stop_tol = tol;
  rc.method = "pdhg_oracle";
  auto res = pdhg_run(prob, kCertifyGamma, rc, metric);
  const double final_kkt = res.records.back().metric("kkt_residual", kInf);
  if (!(final_kkt <= tol))
    throw CertifyError("reference solve hit the iteration cap (" +
                           std::to_string(max_iters) + ") at residual " +
                           g17(best) + " > tol " + g17(tol),
                       best, max_iters);
  ReferenceSolution ref;
  ref.x_star = std::move(res.state.x);
  ref.y_star = std::move(res.state.y);
  ref.objective = reference_objective(prob, ref.x_star);
  ref.certified_tol = final_kkt;
  ref.provenance = "pdhg_oracle";
  return ref;
}

ReferenceSolution certify_planted(const GeneratedProblem& gp, double tol,
                                  long max_iters) {
  const SaddleProblem& prob = gp.problem;
  if (!gp.x_planted.empty() &&
      static_cast<int>(gp.x_planted.size()) == prob.primal_dim()) {
    const StepSizes st = scalar_steps(prob, kCertifyGamma);
    std::vector<std::vector<double>> candidates;
    bool all_smooth = true;
    for (int i = 0; i < prob.num_blocks(); ++i)
      all_smooth &= prob.f.block(i).kind() == FuncKind::LeastSquares;
    if (all_smooth) {
      // y = grad f(A x*) block-wise: A_i x* - b_i.
      std::vector<double> y = prob.op->apply(gp.x_planted);
      for (int i = 0; i < prob.num_blocks(); ++i) {
        const auto& b = prob.f.block(i).target();
        double* yi = y.data() + prob.f.offset(i);
        for (size_t j = 0; j < b.size(); ++j) yi[j] -= b[j];
      }
      candidates.push_back(std::move(y));
    }
    candidates.emplace_back(static_cast<size_t>(prob.dual_dim()), 0.0);
    for (auto& y : candidates) {
      const double k = kkt_residual(prob, st, gp.x_planted, y);
      if (k <= tol) {
        ReferenceSolution ref;
        ref.x_star = gp.x_planted;
        ref.y_star = std::move(y);
        ref.objective = reference_objective(prob, ref.x_star);
        ref.certified_tol = k;
        ref.provenance = "planted";
        return ref;
      }
    }
  }
  return certify_pdhg_oracle(prob, tol, max_iters);
}

namespace {

double json_number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace

ReferenceSolution load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const auto j = nlohmann::json::parse(in);
  ReferenceSolution ref;
  ref.x_star = j.at("x_star").get<std::vector<double>>();
  ref.y_star = j.at("y_star").get<std::vector<double>>();
  ref.objective = json_number_or(j, "objective", kNaN);
  ref.certified_tol = json_number_or(j, "certified_tol", kNaN);
  ref.provenance = j.value("provenance", std::string());
  return ref;
}

void save_reference(const std::string& path, const ReferenceSolution& ref) {
  nlohmann::ordered_json j;
  j["provenance"] = ref.provenance;
  j["objective"] = ref.objective;
  j["certified_tol"] = ref.certified_tol;
  j["x_star"] = ref.x_star;
  j["y_star"] = ref.y_star;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

ReferenceSolution certify_reference(const GeneratedProblem& gp,
                                    const ReferenceConfig& cfg) {
  if (cfg.mode == "pdhg_oracle")
    return certify_pdhg_oracle(gp.problem, cfg.tol, cfg.max_iters);
  if (cfg.mode == "planted")
    return certify_planted(gp, cfg.tol, cfg.max_iters);
  if (cfg.mode == "file") {
    ReferenceSolution ref = load_reference(cfg.path);
    if (static_cast<int>(ref.x_star.size()) != gp.problem.primal_dim() ||
        static_cast<int>(ref.y_star.size()) != gp.problem.dual_dim())
      throw std::invalid_argument(
          "stored reference dimensions do not match the problem");
    const StepSizes st = scalar_steps(gp.problem, kCertifyGamma);
    const double k = kkt_residual(gp.problem, st, ref.x_star, ref.y_star);
    const double stored =
        std::isfinite(ref.certified_tol) ? ref.certified_tol : 0.0;
    const double allow = 10.0 * std::max(cfg.tol, stored);
    if (!(k <= allow))
      throw CertifyError("stored reference fails re-verification: kkt " +
                             g17(k) + " > " + g17(allow),
                         k, 0);
    ref.certified_tol = k;
    ref.provenance = "file:" + cfg.path;
    return ref;
  }
  throw std::invalid_argument("unknown reference mode '" + cfg.mode + "'");
}

// ---------- CSV ----------

void write_records_csv(std::ostream& out,
                       const std::vector<ConvergenceRecord>& records,
                       const std::vector<std::string>& metric_names) {
  out << "iter,epoch,seed,method";
  for (const std::string& m : metric_names) out << ',' << m;
  out << '\n';
  for (const ConvergenceRecord& r : records) {
    out << r.iter << ',' << g17(r.epoch) << ',' << r.seed << ',' << r.method;
    for (const std::string& m : metric_names) out << ',' << g17(r.metric(m, kNaN));
    out << '\n';
  }
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

double CsvTable::value(size_t row, int col) const {
  return std::strtod(rows[row][static_cast<size_t>(col)].c_str(), nullptr);
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t at = 0;
    while (true) {
      const size_t comma = line.find(',', at);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(at));
        break;
      }
      fields.push_back(line.substr(at, comma - at));
      at = comma + 1;
    }
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_csv(in);
}

std::vector<std::pair<double, double>> csv_series(const CsvTable& table,
                                                  const std::string& metric) {
  const int xcol = table.column("epoch");
  const int ycol = table.column(metric);
  if (xcol < 0) throw std::invalid_argument("csv has no epoch column");
  if (ycol < 0)
    throw std::invalid_argument("csv has no '" + metric + "' column");
  std::vector<std::pair<double, double>> out;
  out.reserve(table.rows.size());
  for (size_t r = 0; r < table.rows.size(); ++r)
    out.emplace_back(table.value(r, xcol), table.value(r, ycol));
  return out;
}

// ---------- orchestration ----------

namespace {

struct PreparedSolver {
  SolverEntry entry;
  bool runs_steps = false;  // spdhg family (stochastic dual updates)
  StepSizes steps;          // family steps, or pdhg metric weighting
  SamplerSpec proto{};      // probabilities for weighted metrics
  std::vector<std::string> metric_names;
  long inner_eff = 0;
  double eta_eff = 0.0;
  std::vector<std::string> warnings;
};

int env_thread_count(size_t jobs) {
  long n = 0;
  if (const char* env = std::getenv("SPDHG_NUM_THREADS"))
    n = std::strtol(env, nullptr, 10);
  if (n <= 0) n = static_cast<long>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return static_cast<int>(
      std::min<long>(n, static_cast<long>(std::max<size_t>(jobs, 1))));
}

PreparedSolver prepare_solver(const SaddleProblem& prob, const SolverEntry& e,
                              const std::vector<std::string>& wanted) {
  PreparedSolver ps;
  ps.entry = e;
  const int n = prob.num_blocks();

  std::vector<double> probs;
  if (e.sampling == "norm_weighted") {
    probs.resize(static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += prob.op->block_norm(i);
    for (int i = 0; i < n; ++i)
      probs[static_cast<size_t>(i)] = prob.op->block_norm(i) / total;
    ps.proto = SamplerSpec::with_probs(probs, 0);
  } else {
    ps.proto = SamplerSpec::uniform(n, 0);
  }

  bool have_steps = true;
  bool have_sampler = true;
  bool have_dual = true;
  bool have_ergodic = true;
  if (e.method == "spdhg") {
    ps.steps = default_step_sizes(*prob.op, e.gamma, ps.proto);
    ps.runs_steps = true;
  } else if (e.method == "spdhg_mu") {
    ps.steps = strongly_convex_step_sizes(prob, e.gamma, ps.proto);
    ps.runs_steps = true;
  } else if (e.method == "fb_vc_cd") {
    ps.steps = fb_vc_cd_step_sizes(*prob.op, e.gamma);
    ps.runs_steps = true;
  } else if (e.method == "pdhg") {
    ps.steps = scalar_steps(prob, e.gamma);
    have_sampler = n == 1;  // probability weights are trivial only then
  } else {  // svrg | sdca
    have_steps = have_sampler = have_dual = have_ergodic = false;
    ps.inner_eff = e.inner > 0 ? e.inner : 2L * n;
    if (e.method == "svrg") {
      double lmax = 0.0;
      for (int i = 0; i < n; ++i)
        lmax = std::max(lmax, static_cast<double>(n) * prob.op->block_norm(i) *
                                  prob.op->block_norm(i));
      ps.eta_eff = e.eta > 0.0 ? e.eta : 0.1 / lmax;
    }
  }

  for (const std::string& name : wanted) {
    std::string base;
    const bool av = split_av(name, base);
    std::string why;
    if (av && !have_ergodic) why = "no ergodic average";
    else if (metric_needs_dual(base) && !have_dual) why = "no dual iterate";
    else if (metric_needs_steps(base) && !have_steps) why = "no step sizes";
    else if (metric_needs_sampler(base) && !have_sampler)
      why = "no sampling weights";
    if (why.empty()) ps.metric_names.push_back(name);
    else
      ps.warnings.push_back("metric '" + name + "' skipped for " + e.label +
                            ": " + why);
  }
  return ps;
}

TrajectoryResult run_trajectory(const SaddleProblem& prob,
                                const PreparedSolver& ps,
                                const ExperimentConfig& cfg,
                                std::shared_ptr<const MetricContext> ctx,
                                std::uint64_t seed) {
  TrajectoryResult tr;
  tr.label = ps.entry.label;
  tr.method = ps.entry.method;
  tr.seed = seed;
  tr.metric_names = ps.metric_names;

  const long n = prob.num_blocks();
  const long max_iters = cfg.max_epochs * n;
  const long log_every =
      cfg.log_every_epochs > 0.0
          ? std::max<long>(1, std::lround(cfg.log_every_epochs *
                                          static_cast<double>(n)))
          : 0;
  const std::string& method = ps.entry.method;
  try {
    if (method == "svrg") {
      SvrgConfig sc;
      sc.eta = ps.entry.eta;
      sc.inner = ps.inner_eff;
      sc.max_outer =
          (cfg.max_epochs * n + (n + ps.inner_eff) - 1) / (n + ps.inner_eff);
      sc.stop_metric = cfg.stop_metric;
      sc.stop_tol = cfg.stop_tol;
      sc.draw_seed = seed;
      sc.record_seed = seed;
      sc.method = ps.entry.label;
      auto res = svrg_run(prob, sc, make_primal_metric_fn(ctx, ps.metric_names));
      tr.records = std::move(res.records);
    } else if (method == "sdca") {
      SdcaConfig dc;
      dc.max_epochs = cfg.max_epochs;
      dc.stop_metric = cfg.stop_metric;
      dc.stop_tol = cfg.stop_tol;
      dc.draw_seed = seed;
      dc.record_seed = seed;
      dc.method = ps.entry.label;
      dc.log_every = log_every;
      auto res = sdca_run(prob, dc, make_primal_metric_fn(ctx, ps.metric_names));
      tr.records = std::move(res.records);
    } else if (method == "pdhg") {
      RunConfig rc;
      rc.max_iters = cfg.max_epochs;  // every iteration is one full pass
      rc.log_every =
          cfg.log_every_epochs > 0.0
              ? std::max<long>(1, std::lround(cfg.log_every_epochs))
              : 0;
      rc.stop_metric = cfg.stop_metric;
      rc.stop_tol = cfg.stop_tol;
      rc.method = ps.entry.label;
      rc.record_seed = seed;
      auto res =
          pdhg_run(prob, ps.entry.gamma, rc, make_state_metric_fn(ctx, ps.metric_names));
      tr.records = std::move(res.records);
    } else {
      SamplerSpec sampler = SamplerSpec::with_probs(ps.proto.probs, seed);
      RunConfig rc;
      rc.max_iters = max_iters;
      rc.log_every = log_every;
      rc.stop_metric = cfg.stop_metric;
      rc.stop_tol = cfg.stop_tol;
      rc.method = ps.entry.label;
      rc.record_seed = seed;
      auto res = spdhg_run(prob, ps.steps, sampler, rc,
                           make_state_metric_fn(ctx, ps.metric_names));
      tr.records = std::move(res.records);
    }
  } catch (const DivergenceError& e) {
    tr.diverged = true;
    tr.diverged_at = e.iter;
  }
  return tr;
}

// Epoch scale correction for pdhg records: the runner counts its iterations,
// each of which is one full data pass.
void fix_pdhg_epochs(TrajectoryResult& tr) {
  for (ConvergenceRecord& r : tr.records)
    r.epoch = static_cast<double>(r.iter);
}

std::string csv_name(const std::string& label, std::uint64_t seed) {
  return label + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.dir = cfg.output_dir;
  std::filesystem::create_directories(result.dir);

  GeneratedProblem gp = assemble_problem(cfg);
  result.reference = certify_reference(gp, cfg.reference);
  save_reference((result.dir / "reference.json").string(), result.reference);
  gp.problem.reference = std::make_shared<ReferenceSolution>(result.reference);
  const SaddleProblem& prob = gp.problem;
  const int n = prob.num_blocks();

  // Norms are cached up front so worker threads never contend on the cache.
  std::vector<double> block_norms(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) block_norms[static_cast<size_t>(i)] = prob.op->block_norm(i);
  prob.op->operator_norm();

  std::vector<PreparedSolver> prepared;
  prepared.reserve(cfg.solvers.size());
  for (const SolverEntry& e : cfg.solvers) {
    prepared.push_back(prepare_solver(prob, e, cfg.metrics));
    for (const std::string& w : prepared.back().warnings)
      result.warnings.push_back(w);
  }

  std::vector<std::shared_ptr<const MetricContext>> contexts;
  for (const PreparedSolver& ps : prepared) {
    auto ctx = std::make_shared<MetricContext>();
    ctx->prob = &prob;
    ctx->steps = &ps.steps;
    ctx->sampler = &ps.proto;
    ctx->x0.assign(static_cast<size_t>(prob.primal_dim()), 0.0);
    ctx->y0.assign(static_cast<size_t>(prob.dual_dim()), 0.0);
    contexts.push_back(std::move(ctx));
  }

  struct Job {
    size_t solver;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (size_t s = 0; s < prepared.size(); ++s)
    for (std::uint64_t seed : cfg.seeds) jobs.push_back({s, seed});

  result.trajectories.resize(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      const Job& job = jobs[j];
      try {
        result.trajectories[j] = run_trajectory(prob, prepared[job.solver], cfg,
                                                contexts[job.solver], job.seed);
        if (prepared[job.solver].entry.method == "pdhg")
          fix_pdhg_epochs(result.trajectories[j]);
      } catch (const std::exception& e) {
        result.trajectories[j].label = prepared[job.solver].entry.label;
        result.trajectories[j].method = prepared[job.solver].entry.method;
        result.trajectories[j].seed = job.seed;
        result.trajectories[j].diverged = true;
        errors[j] = e.what();
      }
    }
  };
  const int threads = env_thread_count(jobs.size());
  {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (size_t j = 0; j < jobs.size(); ++j)
    if (!errors[j].empty())
      result.warnings.push_back("trajectory " + result.trajectories[j].label +
                                " seed " +
                                std::to_string(result.trajectories[j].seed) +
                                " failed: " + errors[j]);

  // Per-trajectory CSVs, in deterministic job order.
  for (const TrajectoryResult& tr : result.trajectories) {
    std::ofstream out(result.dir / csv_name(tr.label, tr.seed));
    write_records_csv(out, tr.records, tr.metric_names);
  }

  // aggregate.csv: per (method, record index) mean and sample standard
  // deviation across seeds, accumulated in seed order.
  {
    std::ofstream out(result.dir / "aggregate.csv");
    out << "method,iter,epoch,seeds";
    for (const std::string& m : cfg.metrics) out << ',' << m << "_mean," << m << "_std";
    out << '\n';
    for (size_t s = 0; s < prepared.size(); ++s) {
      std::vector<const TrajectoryResult*> group;
      for (const TrajectoryResult& tr : result.trajectories)
        if (tr.label == prepared[s].entry.label && !tr.diverged &&
            !tr.records.empty())
          group.push_back(&tr);
      if (group.empty()) continue;
      size_t len = group.front()->records.size();
      for (const TrajectoryResult* tr : group)
        len = std::min(len, tr->records.size());
      for (size_t r = 0; r < len; ++r) {
        const ConvergenceRecord& head = group.front()->records[r];
        out << prepared[s].entry.label << ',' << head.iter << ','
            << g17(head.epoch) << ',' << group.size();
        for (const std::string& m : cfg.metrics) {
          if (!contains(prepared[s].metric_names, m)) {
            out << ",,";
            continue;
          }
          double mean = 0.0;
          for (const TrajectoryResult* tr : group)
            mean += tr->records[r].metric(m, kNaN);
          mean /= static_cast<double>(group.size());
          double var = 0.0;
          for (const TrajectoryResult* tr : group) {
            const double d = tr->records[r].metric(m, kNaN) - mean;
            var += d * d;
          }
          const double stdev =
              group.size() > 1
                  ? std::sqrt(var / static_cast<double>(group.size() - 1))
                  : 0.0;
          out << ',' << g17(mean) << ',' << g17(stdev);
        }
        out << '\n';
      }
    }
  }

  // run.json: everything needed to replay, and no timestamps, so a replay is
  // byte-identical.
  {
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["config_text"] = cfg.config_text;
    nlohmann::ordered_json jp;
    jp["kind"] = problem_kind_name(gp.spec.kind);
    jp["n"] = prob.num_blocks();
    jp["rows"] = prob.op->rows();
    jp["p"] = prob.op->cols();
    jp["rho"] = gp.spec.rho;
    jp["sparsity"] = gp.spec.sparsity;
    jp["lambda"] = gp.spec.lambda;
    jp["margin"] = gp.spec.margin;
    jp["group_size"] = gp.spec.group_size;
    jp["seed"] = gp.spec.seed;
    if (!cfg.file.empty()) {
      jp["file"] = cfg.file;
      jp["p_override"] = cfg.file_opts.p_override;
      jp["normalize"] = cfg.file_opts.normalize;
    }
    if (cfg.lambda_rel >= 0.0) jp["lambda_rel"] = cfg.lambda_rel;
    j["problem"] = std::move(jp);
    j["block_norms"] = block_norms;
    j["reference"] = {{"provenance", result.reference.provenance},
                      {"objective", result.reference.objective},
                      {"certified_tol", result.reference.certified_tol},
                      {"file", "reference.json"}};
    j["run"] = {{"seeds", cfg.seeds},
                {"max_epochs", cfg.max_epochs},
                {"log_every_epochs", cfg.log_every_epochs},
                {"metrics", cfg.metrics},
                {"stop_metric", cfg.stop_metric},
                {"stop_tol", cfg.stop_tol},
                {"output_dir", cfg.output_dir},
                {"plot_metric",
                 cfg.plot_metric.empty() ? cfg.metrics.front() : cfg.plot_metric},
                {"seed_band", "min-max"}};
    nlohmann::ordered_json solvers = nlohmann::ordered_json::array();
    for (const PreparedSolver& ps : prepared) {
      nlohmann::ordered_json e;
      e["label"] = ps.entry.label;
      e["method"] = ps.entry.method;
      e["gamma"] = ps.entry.gamma;
      e["sampling"] = ps.entry.sampling;
      if (ps.runs_steps || ps.entry.method == "pdhg") {
        e["tau"] = ps.steps.tau;
        e["sigma"] = ps.steps.sigma;
      }
      if (ps.runs_steps) e["probs"] = ps.proto.probs;
      if (ps.entry.method == "svrg") {
        e["eta"] = ps.eta_eff;
        e["inner"] = ps.inner_eff;
      }
      e["metrics"] = ps.metric_names;
      e["warnings"] = ps.warnings;
      solvers.push_back(std::move(e));
    }
    j["solvers"] = std::move(solvers);
    nlohmann::ordered_json trs = nlohmann::ordered_json::array();
    for (const TrajectoryResult& tr : result.trajectories) {
      trs.push_back({{"label", tr.label},
                     {"seed", tr.seed},
                     {"file", csv_name(tr.label, tr.seed)},
                     {"records", tr.records.size()},
                     {"diverged", tr.diverged},
                     {"diverged_at", tr.diverged_at}});
    }
    j["trajectories"] = std::move(trs);
    j["warnings"] = result.warnings;
    std::ofstream out(result.dir / "run.json");
    out << j.dump(2) << '\n';
  }

  // plot.svg over the configured plot metric.
  {
    const std::string metric =
        cfg.plot_metric.empty() ? cfg.metrics.front() : cfg.plot_metric;
    std::vector<PlotSeries> series;
    for (const PreparedSolver& ps : prepared) {
      if (!contains(ps.metric_names, metric)) continue;
      PlotSeries s;
      s.label = ps.entry.label;
      for (const TrajectoryResult& tr : result.trajectories) {
        if (tr.label != ps.entry.label || tr.diverged || tr.records.empty())
          continue;
        std::vector<std::pair<double, double>> pts;
        pts.reserve(tr.records.size());
        for (const ConvergenceRecord& r : tr.records)
          pts.emplace_back(r.epoch, r.metric(metric, kNaN));
        s.per_seed.push_back(std::move(pts));
      }
      if (!s.per_seed.empty()) series.push_back(std::move(s));
    }
    std::ofstream out(result.dir / "plot.svg");
    write_plot_svg(out, metric, series);
  }

  return result;
}

}  // namespace spdhg
