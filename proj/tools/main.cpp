// Command-line front end: generate problem data, certify reference solutions,
// run experiments, check solver properties, and fit convergence rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spdhg/diagnostics.hpp"
#include "spdhg/harness.hpp"
#include "spdhg/problems.hpp"
#include "spdhg/version.hpp"

namespace {

int cmd_generate(const std::string& config_path, const CLI::Option* seed_opt,
                 std::uint64_t seed, const std::string& out) {
  spdhg::ExperimentConfig cfg = spdhg::load_problem_config(config_path);
  if (seed_opt->count() > 0) cfg.gen.seed = seed;
  const spdhg::GeneratedProblem gp = spdhg::assemble_problem(cfg);
  spdhg::save_libsvm(out, spdhg::to_libsvm(gp));
  std::printf("wrote %s: %s, %d rows, %d features, %d dual blocks\n",
              out.c_str(), spdhg::problem_kind_name(gp.spec.kind),
              gp.problem.op->rows(), gp.problem.op->cols(),
              gp.problem.num_blocks());
  return 0;
}

int cmd_certify(const std::string& config_path, const CLI::Option* tol_opt,
                double tol, const std::string& out) {
  spdhg::ExperimentConfig cfg = spdhg::load_problem_config(config_path);
  if (tol_opt->count() > 0) cfg.reference.tol = tol;
  const spdhg::GeneratedProblem gp = spdhg::assemble_problem(cfg);
  const spdhg::ReferenceSolution ref = spdhg::certify_reference(gp, cfg.reference);
  spdhg::save_reference(out, ref);
  std::printf("wrote %s: provenance %s, objective %.17g, certified_tol %.3g\n",
              out.c_str(), ref.provenance.c_str(), ref.objective,
              ref.certified_tol);
  return 0;
}

int cmd_run(const std::string& config_path, const CLI::Option* seed_opt,
            std::uint64_t seed, const CLI::Option* out_opt,
            const std::string& out) {
  spdhg::ExperimentConfig cfg = spdhg::load_experiment_config(config_path);
  if (seed_opt->count() > 0) cfg.seeds = {seed};
  if (out_opt->count() > 0) cfg.output_dir = out;
  const spdhg::ExperimentResult res = spdhg::run_experiment(cfg);
  const long diverged =
      std::count_if(res.trajectories.begin(), res.trajectories.end(),
                    [](const spdhg::TrajectoryResult& t) { return t.diverged; });
  std::printf("wrote %s: %zu trajectories", res.dir.string().c_str(),
              res.trajectories.size());
  if (diverged > 0) std::printf(", %ld diverged", diverged);
  std::printf("\n");
  for (const std::string& w : res.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

int cmd_check(const std::string& config_path) {
  const spdhg::ExperimentConfig cfg = spdhg::load_experiment_config(config_path);
  const spdhg::PropertyReport report = spdhg::check_properties(cfg);
  std::printf("%s\n", report.summary().c_str());
  return report.passed ? 0 : 1;
}

int cmd_fit(const std::string& csv_path, const std::string& metric) {
  const spdhg::CsvTable table = spdhg::read_csv(csv_path);
  const auto series = spdhg::csv_series(table, metric);
  const spdhg::RateModel model = spdhg::rate_fit(series, 0.0);
  std::printf(
      "%s: slope %.6g per epoch (decay factor %.6g), R^2 %.4f\n"
      "window rows [%zu, %zu) of %zu, %ld nonpositive samples excluded\n",
      metric.c_str(), model.slope, std::exp(model.slope), model.r_squared,
      model.window_begin, model.window_end, series.size(), model.excluded);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic primal-dual saddle-point solver bench"};
  app.set_version_flag("--version", std::string(spdhg::kVersion));
  app.require_subcommand(1);

  auto* gen = app.add_subcommand(
      "generate", "write the configured problem to disk in LIBSVM format");
  std::string gen_config;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "problem.libsvm";
  gen->add_option("--config", gen_config, "problem or experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  const CLI::Option* gen_seed_opt =
      gen->add_option("--seed", gen_seed, "override the generator seed");
  gen->add_option("--out", gen_out, "output path (default problem.libsvm)");

  auto* cert = app.add_subcommand(
      "certify", "solve for a certified reference solution");
  std::string cert_config;
  double cert_tol = 0.0;
  std::string cert_out = "reference.json";
  cert->add_option("--config", cert_config, "problem or experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  const CLI::Option* cert_tol_opt = cert->add_option(
      "--tol", cert_tol, "override the reference tolerance");
  cert->add_option("--out", cert_out, "output path (default reference.json)");

  auto* run = app.add_subcommand("run", "run the configured experiment");
  std::string run_config;
  std::uint64_t run_seed = 0;
  std::string run_out;
  run->add_option("--config", run_config,
                  "experiment config, or a run.json to replay")
      ->required()
      ->check(CLI::ExistingFile);
  const CLI::Option* run_seed_opt = run->add_option(
      "--seed", run_seed, "run this single seed instead of the configured list");
  const CLI::Option* run_out_opt =
      run->add_option("--out", run_out, "override the output directory");

  auto* chk = app.add_subcommand(
      "check", "run the property suite on the configured problem");
  std::string chk_config;
  chk->add_option("--config", chk_config, "experiment config")
      ->required()
      ->check(CLI::ExistingFile);

  auto* fit = app.add_subcommand(
      "fit", "fit a linear convergence rate to a trajectory CSV");
  std::string fit_csv, fit_metric;
  fit->add_option("csv", fit_csv, "trajectory CSV written by run")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--metric", fit_metric, "metric column to fit")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_seed_opt, gen_seed, gen_out);
    if (cert->parsed()) return cmd_certify(cert_config, cert_tol_opt, cert_tol, cert_out);
    if (run->parsed()) return cmd_run(run_config, run_seed_opt, run_seed, run_out_opt, run_out);
    if (chk->parsed()) return cmd_check(chk_config);
    if (fit->parsed()) return cmd_fit(fit_csv, fit_metric);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
