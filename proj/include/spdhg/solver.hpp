#pragma once

// Saddle-point problem container, step-size rules, and the solvers:
// the stochastic primal-dual method with one dual block updated per
// iteration (the library's core), its deterministic full-dual variant,
// step-size variants for strongly convex and coordinate-descent-style
// baselines, and the stochastic primal baselines (variance-reduced
// proximal gradient, dual coordinate ascent).

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "spdhg/funcs.hpp"
#include "spdhg/linops.hpp"
#include "spdhg/record.hpp"
#include "spdhg/sampling.hpp"

namespace spdhg {

struct StepSizes {
  double tau = 0.0;
  std::vector<double> sigma;  // one entry per dual block
  double gamma = 0.0;         // contraction factor the rule was built for
};

struct ReferenceSolution {
  std::vector<double> x_star;
  std::vector<double> y_star;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double certified_tol = std::numeric_limits<double>::quiet_NaN();
  std::string provenance;  // "pdhg_oracle" | "planted" | "file:<path>"
};

// min_x g(x) + sum_i f_i(A_i x); duals y_i attached to the blocks of A.
struct SaddleProblem {
  ProxableFunction g = ProxableFunction::zero();
  SeparableSum f;
  std::shared_ptr<const BlockLinearOperator> op;
  std::shared_ptr<const ReferenceSolution> reference;

  int num_blocks() const { return f.num_blocks(); }
  int primal_dim() const { return op ? op->cols() : 0; }
  int dual_dim() const { return f.total_dim(); }
  void validate() const;
  // True when every dual block is a point indicator (f = delta_b).
  bool is_linear_constraint() const;
  std::vector<double> constraint_target() const;
};

// tau = gamma / (n max_i ||A_i||); uniform probabilities pair it with
// sigma_i = gamma / ||A_i||, non-uniform ones with
// sigma_i = gamma^2 p_i / (tau ||A_i||^2), so that
// p_i^{-1} tau sigma_i ||A_i||^2 <= gamma^2 with equality at the largest
// block (uniform) or at every block (non-uniform).
StepSizes default_step_sizes(const BlockLinearOperator& op, double gamma,
                             const SamplerSpec& sampler);

// Coordinate-descent-style scaling: tau = gamma / (n^2 max_i ||A_i||),
// sigma_i = gamma / ||A_i||. The primal step is n times shorter than the
// default rule's.
StepSizes fb_vc_cd_step_sizes(const BlockLinearOperator& op, double gamma);

// Balanced scaling for strongly convex g and strongly convex conjugates:
// with r = sqrt(min_i mu_i / mu_g), tau = r gamma / (n max_i ||A_i||) and
// sigma_i = gamma / (r ||A_i||). Requires uniform sampling.
StepSizes strongly_convex_step_sizes(const SaddleProblem& prob, double gamma,
                                     const SamplerSpec& sampler);

struct StepSizeReport {
  bool pass = true;
  double gamma = 0.0;
  double max_ratio = 0.0;  // max_i p_i^{-1} tau sigma_i ||A_i||^2
  int argmax_block = -1;
  std::vector<double> ratios;
};
StepSizeReport validate_step_sizes(const StepSizes& steps,
                                   const BlockLinearOperator& op,
                                   const SamplerSpec& sampler);

// Running averages (1/K) sum_{k=1..K} x^k and (1/K) sum_{k=1..K} y^{k+1}.
// Dual blocks accumulate lazily: a block's sum is settled only when the
// block changes or an average is materialized.
class ErgodicAccumulator {
 public:
  ErgodicAccumulator() = default;
  ErgodicAccumulator(int primal_dim, const std::vector<int>& dual_dims);

  void add_x(std::span<const double> x);  // call once per step, with x^k
  // Call before overwriting block i at step k (= current count + 1), then
  // record the new block value.
  void settle_block(int i, std::span<const double> y_block);
  void add_y_block(int i, std::span<const double> y_block);

  long count() const { return count_; }
  // Averages over the first `count` steps; settles internal sums.
  ErgodicSnapshot snapshot(std::span<const double> y_current) const;

 private:
  long count_ = 0;
  std::vector<double> x_sum_;
  mutable std::vector<double> y_sum_;
  mutable std::vector<long> y_mark_;  // per block: steps already settled
  std::vector<int> offsets_;
  std::vector<int> dims_;
};

// After k completed steps: x = x^k, y = y^{k+1}, aty = A^T y,
// aty_bar = A^T ybar^{k+1}. The dual lags one step behind in last_block /
// last_old_y: y^{k+1} - y^k is supported on last_block with old values
// last_old_y (empty before the first step).
struct SolverState {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> aty;
  std::vector<double> aty_bar;
  int last_block = -1;
  std::vector<double> last_old_y;
  long iter = 0;
  std::uint64_t draw_counter = 0;
  ErgodicAccumulator ergodic;
};

SolverState make_initial_state(const SaddleProblem& prob,
                               std::vector<double> x0 = {},
                               std::vector<double> y0 = {});

struct Scratch {
  std::vector<double> u, w, ax, t, yhat;
};
Scratch make_scratch(const SaddleProblem& prob);

// Pre-commit view of one step, for property checks: the full prox candidate
// y_hat (every block's would-be update) plus the previous iterates.
struct StepCandidate {
  int drawn = -1;
  std::vector<double> x_prev;       // x^{k-1}
  std::vector<double> y_before;     // y^k
  std::vector<double> y_hat;        // hat y^{k+1}, all blocks
  int prev_diff_block = -1;         // support of y^k - y^{k-1}
  std::vector<double> y_prev_old;   // y^{k-1} on that block
};

// One step of the stochastic method; returns the drawn block. When `inspect`
// is non-null the full candidate is recorded; the committed trajectory is
// bitwise identical either way (the drawn block's update is computed by the
// same per-block kernel).
int spdhg_step(const SaddleProblem& prob, const StepSizes& steps,
               const SamplerSpec& sampler, SolverState& state, Scratch& scratch,
               StepCandidate* inspect = nullptr);

// Recompute aty / aty_bar from scratch; returns the relative drift of the
// incremental aty against the recomputed one (checked by property tests).
double resync_state(const SaddleProblem& prob, const SamplerSpec& sampler,
                    SolverState& state);

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(long at_iter)
      : std::runtime_error("divergent iterate at iteration " +
                           std::to_string(at_iter)),
        iter(at_iter) {}
  long iter;
};

using MetricFn = std::function<std::vector<std::pair<std::string, double>>(
    const SolverState&)>;
using StepHook =
    std::function<void(const SolverState& after, const StepCandidate&)>;

struct RunConfig {
  long max_iters = 0;
  long log_every = 0;  // 0: log only the initial and final states
  std::string stop_metric;
  double stop_tol = 0.0;
  long sync_every = 0;  // 0: every max(1, n) iterations
  std::vector<long> ergodic_snapshots;
  std::string method = "spdhg";
  std::uint64_t record_seed = 0;
};

struct RunResult {
  SolverState state;
  std::vector<ConvergenceRecord> records;
  std::vector<ErgodicSnapshot> snapshots;
  double max_sync_drift = 0.0;
  bool stopped_early = false;
};

RunResult spdhg_run(const SaddleProblem& prob, const StepSizes& steps,
                    const SamplerSpec& sampler, const RunConfig& config,
                    const MetricFn& metrics = {}, const StepHook& hook = {});

// Deterministic variant updating every dual block each iteration, with
// scalar steps tau = sigma = gamma / ||A||. With a single dual block this
// routes through spdhg_run (single-outcome sampler) and is bitwise equal to
// the stochastic method.
RunResult pdhg_run(const SaddleProblem& prob, double gamma,
                   const RunConfig& config, const MetricFn& metrics = {});

// Primal-only baselines log through a reduced metric callback.
using PrimalMetricFn = std::function<std::vector<std::pair<std::string, double>>(
    const std::vector<double>& x)>;

// Variance-reduced proximal stochastic gradient for
// min_x (1/n) sum_i n f_i(A_i x) + g(x) with smooth least-squares blocks.
struct SvrgConfig {
  double eta = 0.0;      // 0: 0.1 / max_i (n ||A_i||^2)
  long inner = 0;        // 0: 2n
  long max_outer = 0;
  std::string stop_metric;
  double stop_tol = 0.0;
  std::uint64_t draw_seed = 0;
  std::uint64_t record_seed = 0;
  std::string method = "svrg";
};
RunResult svrg_run(const SaddleProblem& prob, const SvrgConfig& config,
                   const PrimalMetricFn& metrics = {});

// Stochastic dual coordinate ascent for g = (lambda/2)||x||^2 and
// single-row least-squares or hinge blocks, with closed-form coordinate
// maximization.
struct SdcaConfig {
  long max_epochs = 0;
  std::string stop_metric;
  double stop_tol = 0.0;
  std::uint64_t draw_seed = 0;
  std::uint64_t record_seed = 0;
  std::string method = "sdca";
  long log_every = 0;  // in iterations; 0: once per epoch
};
RunResult sdca_run(const SaddleProblem& prob, const SdcaConfig& config,
                   const PrimalMetricFn& metrics = {});

}  // namespace spdhg
