#pragma once

// Experiment front end: configuration, reference certification, multi-seed
// orchestration with CSV/JSON/SVG artifacts, and the runtime property suite
// that re-verifies the solver's descent and sampling identities on live
// trajectories.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "spdhg/config.hpp"
#include "spdhg/diagnostics.hpp"
#include "spdhg/problems.hpp"
#include "spdhg/solver.hpp"

namespace spdhg {

// ---------- experiment configuration ----------

struct SolverEntry {
  std::string method;  // spdhg | spdhg_mu | pdhg | fb_vc_cd | svrg | sdca
  std::string label;   // CSV method column and file stem; defaults to method
  double gamma = 0.99;
  std::string sampling = "uniform";  // uniform | norm_weighted
  double eta = 0.0;                  // svrg step; 0 = default rule
  long inner = 0;                    // svrg inner loop length; 0 = 2n
};

struct ReferenceConfig {
  std::string mode = "pdhg_oracle";  // pdhg_oracle | planted | file
  double tol = 1e-12;
  long max_iters = 1000000;
  std::string path;  // file mode: stored reference to load
};

struct ExperimentConfig {
  // [problem] — synthetic generator, or a LIBSVM file wrapped as gen.kind.
  GeneratorSpec gen;
  std::string file;
  LibsvmOptions file_opts;
  double lambda_rel = -1.0;  // >= 0: lambda = lambda_rel * ||A^T b||_inf

  // [reference]
  ReferenceConfig reference;

  // [run]
  std::vector<std::uint64_t> seeds;
  long max_epochs = 0;
  double log_every_epochs = 0.0;  // 0: log only first and last states
  std::vector<std::string> metrics;
  std::string stop_metric;
  double stop_tol = 0.0;
  std::string output_dir = "out";
  std::string plot_metric;  // defaults to metrics.front()

  // [solver <label>] sections, in file order.
  std::vector<SolverEntry> solvers;

  std::string config_text;  // verbatim source, echoed into run.json

  void validate() const;  // throws std::invalid_argument
};

// Rejects unknown sections and keys. load() also accepts a run.json produced
// by run_experiment and replays its embedded config text.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin = "<config>");
ExperimentConfig load_experiment_config(const std::string& path);

// Same grammar, but only problem assembly and certification are validated;
// a config that stops after [problem]/[reference] is accepted.
ExperimentConfig parse_problem_config(const std::string& text,
                                      const std::string& origin = "<config>");
ExperimentConfig load_problem_config(const std::string& path);

// Loggable metric names: objective_residual, feasibility, kkt_residual,
// dist_to_ref, bregman, smoothed_gap, gap_at_ref, lyapunov_V, plus an
// "_av" suffix evaluating the same quantity at the running ergodic average.
const std::vector<std::string>& known_metrics();
bool is_known_metric(const std::string& name);

// ---------- problem assembly and reference certification ----------

// Generator or LIBSVM file per the config; resolves lambda_rel against the
// assembled data.
GeneratedProblem assemble_problem(const ExperimentConfig& cfg);

struct CertifyError : std::runtime_error {
  CertifyError(const std::string& what, double best, long at_iters)
      : std::runtime_error(what), best_residual(best), iters(at_iters) {}
  double best_residual;
  long iters;
};

// Deterministic full-dual solve until the S-weighted KKT residual <= tol;
// throws CertifyError with the best residual when the cap is hit first.
ReferenceSolution certify_pdhg_oracle(const SaddleProblem& prob, double tol,
                                      long max_iters);
// Accepts the planted point when a closed-form dual certificate passes the
// KKT check at tol; otherwise falls back to certify_pdhg_oracle.
ReferenceSolution certify_planted(const GeneratedProblem& gp, double tol,
                                  long max_iters);
ReferenceSolution load_reference(const std::string& path);
void save_reference(const std::string& path, const ReferenceSolution& ref);
// Dispatch on cfg.mode; file mode re-verifies the loaded pair without solving.
ReferenceSolution certify_reference(const GeneratedProblem& gp,
                                    const ReferenceConfig& cfg);

// ---------- CSV ----------

// Header `iter,epoch,seed,method,<metric...>`; doubles with 17 significant
// digits so a reload parses to identical bits.
void write_records_csv(std::ostream& out,
                       const std::vector<ConvergenceRecord>& records,
                       const std::vector<std::string>& metric_names);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
  double value(size_t row, int col) const;    // strtod of the cell
};
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

// (x = epoch, y = metric) series from a trajectory CSV, for rate fitting.
std::vector<std::pair<double, double>> csv_series(const CsvTable& table,
                                                  const std::string& metric);

// ---------- orchestration ----------

struct TrajectoryResult {
  std::string label;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<std::string> metric_names;
  std::vector<ConvergenceRecord> records;
  std::vector<ErgodicSnapshot> snapshots;
  bool diverged = false;
  long diverged_at = -1;
};

struct ExperimentResult {
  std::filesystem::path dir;
  ReferenceSolution reference;
  std::vector<TrajectoryResult> trajectories;
  std::vector<std::string> warnings;
};

// Runs every (solver, seed) trajectory, concurrently up to SPDHG_NUM_THREADS
// (default: hardware threads); writes <label>_seed<k>.csv, aggregate.csv,
// reference.json, run.json, and plot.svg into cfg.output_dir. Divergent
// trajectories are recorded and do not abort the rest.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// ---------- plot ----------

struct PlotSeries {
  std::string label;
  // One polyline per seed; points are (epoch, value), nonpositive values are
  // dropped by the log-scale mapping.
  std::vector<std::vector<std::pair<double, double>>> per_seed;
};
// Self-contained SVG: log-y metric vs epoch, one mean curve per series with
// a min-max band across seeds.
void write_plot_svg(std::ostream& out, const std::string& metric_name,
                    const std::vector<PlotSeries>& series);

// ---------- property suite ----------

struct PropertyReport {
  bool passed = true;
  long descent_points = 0;     // one-step descent inequality evaluations
  long coercivity_points = 0;  // Lyapunov lower-bound evaluations
  long sampler_identities = 0;
  long calculus_points = 0;
  // Most negative normalized descent slack observed (>= 0 means no slack
  // was consumed at all).
  double worst_descent_slack = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
  std::string first_violation;  // empty when passed
  std::string summary() const;
};

struct DescentCheckOptions {
  long iters = 200;
  int random_anchors = 5;  // per iteration, in addition to the reference
  double tol = 1e-9;       // normalized slack tolerance
  std::uint64_t anchor_seed = 0;
};

// One-step descent inequality with the conditional expectation over the
// drawn block enumerated exactly, checked at the reference point and at
// random in-domain anchors every iteration. Violations populate
// report.first_violation with a state dump.
void check_descent(const SaddleProblem& prob, const StepSizes& steps,
                   const SamplerSpec& sampler, const DescentCheckOptions& opts,
                   PropertyReport& report);

// Lower bounds on V and V_k over random single-block dual differences;
// requires a valid contraction (step ratio < 1), else records a warning.
void check_coercivity(const SaddleProblem& prob, const StepSizes& steps,
                      const SamplerSpec& sampler, long points,
                      std::uint64_t seed, double tol, PropertyReport& report);

// Exact-enumeration and Monte Carlo expectation identities of the dual update.
void check_sampler_identities(const SaddleProblem& prob, const StepSizes& steps,
                              const SamplerSpec& sampler, std::uint64_t seed,
                              PropertyReport& report);

// Moreau identity, prox optimality, and Fenchel-Young equality at prox pairs
// for every distinct function in the problem.
void check_calculus(const SaddleProblem& prob, long rounds, std::uint64_t seed,
                    double tol, PropertyReport& report);

// Full suite on the config's problem (requires n <= 8): certifies a
// reference, then runs descent, coercivity, sampler, and calculus checks.
PropertyReport check_properties(const ExperimentConfig& cfg);

}  // namespace spdhg
