#include "spdhg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace spdhg {

namespace {

bool all_finite(std::span<const double> v) {
  for (double t : v) {
    if (!std::isfinite(t)) return false;
  }
  return true;
}

}  // namespace

void SaddleProblem::validate() const {
  if (!op) throw std::invalid_argument("problem has no operator");
  if (f.num_blocks() != op->num_blocks())
    throw std::invalid_argument("dual block count does not match operator");
  for (int i = 0; i < f.num_blocks(); ++i) {
    if (f.block_dim(i) != op->block_rows(i))
      throw std::invalid_argument("dual block dimension mismatch at block " +
                                  std::to_string(i));
  }
  if (g.fixed_dim() != 0 && g.fixed_dim() != op->cols())
    throw std::invalid_argument("primal payload dimension mismatch");
}

bool SaddleProblem::is_linear_constraint() const {
  for (int i = 0; i < f.num_blocks(); ++i) {
    if (f.block(i).kind() != FuncKind::IndicatorPoint) return false;
  }
  return f.num_blocks() > 0;
}

std::vector<double> SaddleProblem::constraint_target() const {
  if (!is_linear_constraint())
    throw std::logic_error("problem is not a linear constraint");
  std::vector<double> b(static_cast<std::size_t>(dual_dim()), 0.0);
  for (int i = 0; i < f.num_blocks(); ++i) {
    const auto& t = f.block(i).target();
    std::copy(t.begin(), t.end(), b.begin() + f.offset(i));
  }
  return b;
}

StepSizes default_step_sizes(const BlockLinearOperator& op, double gamma,
                             const SamplerSpec& sampler) {
  const int n = op.num_blocks();
  if (static_cast<int>(sampler.probs.size()) != n)
    throw std::invalid_argument("sampler size does not match operator");
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  double max_norm = 0.0;
  std::vector<double> norms(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    norms[static_cast<std::size_t>(i)] = op.block_norm(i);
    max_norm = std::max(max_norm, norms[static_cast<std::size_t>(i)]);
  }
  if (!(max_norm > 0.0))
    throw std::invalid_argument("operator has no nonzero block");
  StepSizes s;
  s.gamma = gamma;
  s.tau = gamma / (static_cast<double>(n) * max_norm);
  s.sigma.resize(static_cast<std::size_t>(n));
  bool uniform = true;
  for (double p : sampler.probs) {
    if (std::abs(p - 1.0 / static_cast<double>(n)) > 1e-15) uniform = false;
  }
  for (int i = 0; i < n; ++i) {
    const double nrm = norms[static_cast<std::size_t>(i)];
    if (!(nrm > 0.0))
      throw std::invalid_argument("zero-norm block " + std::to_string(i) +
                                  " admits no dual step size");
    s.sigma[static_cast<std::size_t>(i)] =
        uniform ? gamma / nrm
                : gamma * gamma * sampler.probs[static_cast<std::size_t>(i)] /
                      (s.tau * nrm * nrm);
  }
  return s;
}

StepSizes fb_vc_cd_step_sizes(const BlockLinearOperator& op, double gamma) {
  const int n = op.num_blocks();
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  double max_norm = 0.0;
  for (int i = 0; i < n; ++i) max_norm = std::max(max_norm, op.block_norm(i));
  if (!(max_norm > 0.0))
    throw std::invalid_argument("operator has no nonzero block");
  StepSizes s;
  s.gamma = gamma;
  s.tau = gamma / (static_cast<double>(n) * static_cast<double>(n) * max_norm);
  s.sigma.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double nrm = op.block_norm(i);
    if (!(nrm > 0.0))
      throw std::invalid_argument("zero-norm block " + std::to_string(i) +
                                  " admits no dual step size");
    s.sigma[static_cast<std::size_t>(i)] = gamma / nrm;
  }
  return s;
}

StepSizes strongly_convex_step_sizes(const SaddleProblem& prob, double gamma,
                                     const SamplerSpec& sampler) {
  const int n = prob.num_blocks();
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  const auto mu_g = prob.g.strong_convexity();
  if (!mu_g || !(*mu_g > 0.0))
    throw std::invalid_argument("primal term is not strongly convex");
  double mu_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const auto mu = prob.f.block(i).conj_strong_convexity();
    if (!mu || !(*mu > 0.0))
      throw std::invalid_argument("conjugate of block " + std::to_string(i) +
                                  " is not strongly convex");
    mu_min = std::min(mu_min, *mu);
  }
  for (double p : sampler.probs) {
    if (std::abs(p - 1.0 / static_cast<double>(n)) > 1e-15)
      throw std::invalid_argument(
          "balanced step sizes require uniform sampling");
  }
  double max_norm = 0.0;
  for (int i = 0; i < n; ++i)
    max_norm = std::max(max_norm, prob.op->block_norm(i));
  if (!(max_norm > 0.0))
    throw std::invalid_argument("operator has no nonzero block");
  const double r = std::sqrt(mu_min / *mu_g);
  StepSizes s;
  s.gamma = gamma;
  s.tau = r * gamma / (static_cast<double>(n) * max_norm);
  s.sigma.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double nrm = prob.op->block_norm(i);
    if (!(nrm > 0.0))
      throw std::invalid_argument("zero-norm block " + std::to_string(i) +
                                  " admits no dual step size");
    s.sigma[static_cast<std::size_t>(i)] = gamma / (r * nrm);
  }
  return s;
}

StepSizeReport validate_step_sizes(const StepSizes& steps,
                                   const BlockLinearOperator& op,
                                   const SamplerSpec& sampler) {
  const int n = op.num_blocks();
  if (static_cast<int>(steps.sigma.size()) != n ||
      static_cast<int>(sampler.probs.size()) != n)
    throw std::invalid_argument("step-size / sampler size mismatch");
  StepSizeReport rep;
  rep.gamma = steps.gamma;
  rep.ratios.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double nrm = op.block_norm(i);
    const double ratio = steps.tau * steps.sigma[static_cast<std::size_t>(i)] *
                         nrm * nrm / sampler.probs[static_cast<std::size_t>(i)];
    rep.ratios[static_cast<std::size_t>(i)] = ratio;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.argmax_block = i;
    }
  }
  rep.pass = rep.max_ratio <= steps.gamma * steps.gamma * (1.0 + 1e-12);
  return rep;
}

ErgodicAccumulator::ErgodicAccumulator(int primal_dim,
                                       const std::vector<int>& dual_dims) {
  x_sum_.assign(static_cast<std::size_t>(primal_dim), 0.0);
  dims_ = dual_dims;
  offsets_.resize(dual_dims.size());
  int off = 0;
  for (std::size_t i = 0; i < dual_dims.size(); ++i) {
    offsets_[i] = off;
    off += dual_dims[i];
  }
  y_sum_.assign(static_cast<std::size_t>(off), 0.0);
  y_mark_.assign(dual_dims.size(), 0);
}

void ErgodicAccumulator::add_x(std::span<const double> x) {
  ++count_;
  for (std::size_t j = 0; j < x_sum_.size(); ++j) x_sum_[j] += x[j];
}

void ErgodicAccumulator::settle_block(int i, std::span<const double> y_block) {
  // The block has held y_block since step y_mark_[i]+1; credit it up to the
  // step about to be produced (count_ already includes the current step).
  const long upto = count_ - 1;
  const long reps = upto - y_mark_[static_cast<std::size_t>(i)];
  if (reps > 0) {
    double* s = y_sum_.data() + offsets_[static_cast<std::size_t>(i)];
    for (int j = 0; j < dims_[static_cast<std::size_t>(i)]; ++j)
      s[j] += static_cast<double>(reps) * y_block[static_cast<std::size_t>(j)];
  }
  y_mark_[static_cast<std::size_t>(i)] = upto;
}

void ErgodicAccumulator::add_y_block(int i, std::span<const double> y_block) {
  double* s = y_sum_.data() + offsets_[static_cast<std::size_t>(i)];
  for (int j = 0; j < dims_[static_cast<std::size_t>(i)]; ++j)
    s[j] += y_block[static_cast<std::size_t>(j)];
  y_mark_[static_cast<std::size_t>(i)] = count_;
}

ErgodicSnapshot ErgodicAccumulator::snapshot(
    std::span<const double> y_current) const {
  ErgodicSnapshot snap;
  snap.iter = count_;
  if (count_ == 0) return snap;
  const double inv = 1.0 / static_cast<double>(count_);
  snap.x_av.resize(x_sum_.size());
  for (std::size_t j = 0; j < x_sum_.size(); ++j)
    snap.x_av[j] = x_sum_[j] * inv;
  // Settle every block up to the current step without mutating the marks
  // observed by future settles (sums and marks stay coherent).
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const long reps = count_ - y_mark_[i];
    if (reps > 0) {
      const double* cur = y_current.data() + offsets_[i];
      double* s = y_sum_.data() + offsets_[i];
      for (int j = 0; j < dims_[i]; ++j)
        s[j] += static_cast<double>(reps) * cur[j];
      y_mark_[i] = count_;
    }
  }
  snap.y_av.resize(y_sum_.size());
  for (std::size_t j = 0; j < y_sum_.size(); ++j)
    snap.y_av[j] = y_sum_[j] * inv;
  return snap;
}

SolverState make_initial_state(const SaddleProblem& prob,
                               std::vector<double> x0, std::vector<double> y0) {
  prob.validate();
  SolverState st;
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  const auto dd = static_cast<std::size_t>(prob.dual_dim());
  if (x0.empty()) x0.assign(pd, 0.0);
  if (y0.empty()) y0.assign(dd, 0.0);
  if (x0.size() != pd || y0.size() != dd)
    throw std::invalid_argument("initial point dimension mismatch");
  st.x = std::move(x0);
  st.y = std::move(y0);
  st.aty.assign(pd, 0.0);
  prob.op->adjoint(st.y, st.aty);
  st.aty_bar = st.aty;
  std::vector<int> dims(static_cast<std::size_t>(prob.num_blocks()));
  for (int i = 0; i < prob.num_blocks(); ++i) dims[static_cast<std::size_t>(i)] = prob.f.block_dim(i);
  st.ergodic = ErgodicAccumulator(prob.primal_dim(), dims);
  return st;
}

Scratch make_scratch(const SaddleProblem& prob) {
  Scratch sc;
  sc.u.resize(static_cast<std::size_t>(prob.primal_dim()));
  sc.w.resize(static_cast<std::size_t>(prob.primal_dim()));
  int max_rows = 0;
  for (int i = 0; i < prob.num_blocks(); ++i)
    max_rows = std::max(max_rows, prob.op->block_rows(i));
  sc.ax.resize(static_cast<std::size_t>(max_rows));
  sc.t.resize(static_cast<std::size_t>(max_rows));
  sc.yhat.resize(static_cast<std::size_t>(max_rows));
  return sc;
}

namespace {

// hat y_i = prox_{sigma_i f_i^*}(y_i + sigma_i A_i x); shared between the
// committed update and the inspection path so both are bitwise identical.
void dual_candidate(const SaddleProblem& prob, const StepSizes& steps, int i,
                    std::span<const double> x, std::span<const double> y,
                    Scratch& sc, std::span<double> out) {
  const int rows = prob.op->block_rows(i);
  auto ax = std::span<double>(sc.ax).first(static_cast<std::size_t>(rows));
  auto t = std::span<double>(sc.t).first(static_cast<std::size_t>(rows));
  prob.op->apply_block(i, x, ax);
  const double sigma = steps.sigma[static_cast<std::size_t>(i)];
  const double* yi = y.data() + prob.f.offset(i);
  for (int j = 0; j < rows; ++j) t[static_cast<std::size_t>(j)] = yi[j] + sigma * ax[static_cast<std::size_t>(j)];
  prob.f.block(i).conj_prox(t, sigma, out.first(static_cast<std::size_t>(rows)));
}

}  // namespace

int spdhg_step(const SaddleProblem& prob, const StepSizes& steps,
               const SamplerSpec& sampler, SolverState& state, Scratch& scratch,
               StepCandidate* inspect) {
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  // Primal update: x^k = prox_{tau g}(x^{k-1} - tau A^T ybar^k).
  for (std::size_t j = 0; j < pd; ++j)
    scratch.u[j] = state.x[j] - steps.tau * state.aty_bar[j];
  if (inspect) {
    inspect->x_prev = state.x;
    inspect->y_before = state.y;
    inspect->prev_diff_block = state.last_block;
    inspect->y_prev_old = state.last_old_y;
  }
  prob.g.prox(scratch.u, steps.tau, state.x);
  state.ergodic.add_x(state.x);

  const int i = draw(sampler, state.draw_counter);
  ++state.draw_counter;

  if (inspect) {
    // Full prox candidate over all blocks, drawn block included; the drawn
    // block reuses the same kernel below.
    inspect->drawn = i;
    inspect->y_hat.resize(state.y.size());
    for (int b = 0; b < prob.num_blocks(); ++b) {
      const int rows = prob.op->block_rows(b);
      dual_candidate(prob, steps, b, state.x, state.y, scratch,
                     std::span<double>(scratch.yhat));
      std::copy_n(scratch.yhat.begin(), rows,
                  inspect->y_hat.begin() + prob.f.offset(b));
    }
  }

  const int rows = prob.op->block_rows(i);
  auto yhat = std::span<double>(scratch.yhat).first(static_cast<std::size_t>(rows));
  dual_candidate(prob, steps, i, state.x, state.y, scratch, yhat);

  double* yi = state.y.data() + prob.f.offset(i);
  state.ergodic.settle_block(i, std::span<const double>(yi, static_cast<std::size_t>(rows)));
  state.last_block = i;
  state.last_old_y.assign(yi, yi + rows);

  // w = A_i^T (hat y_i - y_i); update aty incrementally and extrapolate:
  // ybar^{k+1} = y^{k+1} + p_i^{-1} (y^{k+1} - y^k).
  std::fill(scratch.w.begin(), scratch.w.end(), 0.0);
  for (int j = 0; j < rows; ++j) {
    const double delta = yhat[static_cast<std::size_t>(j)] - yi[j];
    if (delta != 0.0)
      prob.op->row_axpy(prob.op->block_row_offset(i) + j, delta, scratch.w);
    yi[j] = yhat[static_cast<std::size_t>(j)];
  }
  state.ergodic.add_y_block(
      i, std::span<const double>(yi, static_cast<std::size_t>(rows)));

  const double inv_p = 1.0 / sampler.probs[static_cast<std::size_t>(i)];
  for (std::size_t j = 0; j < pd; ++j) {
    state.aty[j] += scratch.w[j];
    state.aty_bar[j] = state.aty[j] + inv_p * scratch.w[j];
  }
  ++state.iter;
  return i;
}

double resync_state(const SaddleProblem& prob, const SamplerSpec& sampler,
                    SolverState& state) {
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  std::vector<double> fresh(pd, 0.0);
  prob.op->adjoint(state.y, fresh);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < pd; ++j) {
    num = std::max(num, std::abs(fresh[j] - state.aty[j]));
    den = std::max(den, std::abs(fresh[j]));
  }
  const double drift = num / std::max(den, 1.0);
  state.aty = fresh;
  if (state.last_block >= 0) {
    const int i = state.last_block;
    const int rows = prob.op->block_rows(i);
    const double inv_p = 1.0 / sampler.probs[static_cast<std::size_t>(i)];
    std::vector<double> w(pd, 0.0);
    const double* yi = state.y.data() + prob.f.offset(i);
    for (int j = 0; j < rows; ++j) {
      const double delta = yi[j] - state.last_old_y[static_cast<std::size_t>(j)];
      if (delta != 0.0)
        prob.op->row_axpy(prob.op->block_row_offset(i) + j, delta, w);
    }
    for (std::size_t j = 0; j < pd; ++j)
      state.aty_bar[j] = state.aty[j] + inv_p * w[j];
  } else {
    state.aty_bar = state.aty;
  }
  return drift;
}

namespace {

ConvergenceRecord make_record(const RunConfig& config, const SolverState& st,
                              int n, const MetricFn& metrics) {
  ConvergenceRecord rec;
  rec.iter = st.iter;
  rec.epoch = static_cast<double>(st.iter) / static_cast<double>(std::max(n, 1));
  rec.seed = config.record_seed;
  rec.method = config.method;
  if (metrics) rec.metrics = metrics(st);
  for (const auto& [name, value] : rec.metrics) {
    if (!std::isfinite(value)) throw DivergenceError(st.iter);
    (void)name;
  }
  return rec;
}

bool should_stop(const RunConfig& config, const ConvergenceRecord& rec) {
  if (config.stop_metric.empty()) return false;
  const double v = rec.metric(config.stop_metric,
                              std::numeric_limits<double>::infinity());
  return v <= config.stop_tol;
}

}  // namespace

RunResult spdhg_run(const SaddleProblem& prob, const StepSizes& steps,
                    const SamplerSpec& sampler, const RunConfig& config,
                    const MetricFn& metrics, const StepHook& hook) {
  prob.validate();
  const int n = prob.num_blocks();
  RunResult res;
  res.state = make_initial_state(prob);
  Scratch scratch = make_scratch(prob);
  const long sync_every =
      config.sync_every > 0 ? config.sync_every : std::max(1, n);
  auto snap_it = config.ergodic_snapshots.begin();

  res.records.push_back(make_record(config, res.state, n, metrics));
  if (should_stop(config, res.records.back())) {
    res.stopped_early = config.max_iters > 0;
    return res;
  }
  StepCandidate cand;
  for (long k = 0; k < config.max_iters; ++k) {
    spdhg_step(prob, steps, sampler, res.state, scratch,
               hook ? &cand : nullptr);
    if (hook) hook(res.state, cand);
    if (res.state.iter % sync_every == 0) {
      res.max_sync_drift = std::max(
          res.max_sync_drift, resync_state(prob, sampler, res.state));
    }
    while (snap_it != config.ergodic_snapshots.end() &&
           *snap_it == res.state.iter) {
      res.snapshots.push_back(res.state.ergodic.snapshot(res.state.y));
      ++snap_it;
    }
    const bool last = (k + 1 == config.max_iters);
    const bool logged =
        (config.log_every > 0 && res.state.iter % config.log_every == 0);
    if (logged || last) {
      if (!all_finite(res.state.x) || !all_finite(res.state.y))
        throw DivergenceError(res.state.iter);
      res.records.push_back(make_record(config, res.state, n, metrics));
      if (should_stop(config, res.records.back())) {
        res.stopped_early = !last;
        break;
      }
      if (last) break;
    }
  }
  return res;
}

RunResult pdhg_run(const SaddleProblem& prob, double gamma,
                   const RunConfig& config, const MetricFn& metrics) {
  prob.validate();
  const int n = prob.num_blocks();
  if (n == 1) {
    SamplerSpec sampler = SamplerSpec::uniform(1, config.record_seed);
    StepSizes steps = default_step_sizes(*prob.op, gamma, sampler);
    return spdhg_run(prob, steps, sampler, config, metrics);
  }
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  const double norm = prob.op->operator_norm();
  if (!(norm > 0.0)) throw std::invalid_argument("operator is zero");
  const double tau = gamma / norm;
  const double sigma = gamma / norm;

  RunResult res;
  res.state = make_initial_state(prob);
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  const auto dd = static_cast<std::size_t>(prob.dual_dim());
  std::vector<double> u(pd), t(dd), yhat(dd), aty_new(pd);
  StepSizes steps;
  steps.tau = tau;
  steps.gamma = gamma;
  steps.sigma.assign(static_cast<std::size_t>(n), sigma);

  res.records.push_back(make_record(config, res.state, n, metrics));
  if (should_stop(config, res.records.back())) {
    res.stopped_early = config.max_iters > 0;
    return res;
  }
  auto snap_it = config.ergodic_snapshots.begin();
  for (long k = 0; k < config.max_iters; ++k) {
    for (std::size_t j = 0; j < pd; ++j)
      u[j] = res.state.x[j] - tau * res.state.aty_bar[j];
    prob.g.prox(u, tau, res.state.x);
    res.state.ergodic.add_x(res.state.x);
    prob.op->apply(res.state.x, t);
    for (std::size_t j = 0; j < dd; ++j)
      t[j] = res.state.y[j] + sigma * t[j];
    for (int i = 0; i < n; ++i) {
      const int rows = prob.op->block_rows(i);
      const int off = prob.f.offset(i);
      prob.f.block(i).conj_prox(
          std::span<const double>(t).subspan(static_cast<std::size_t>(off),
                                             static_cast<std::size_t>(rows)),
          sigma,
          std::span<double>(yhat).subspan(static_cast<std::size_t>(off),
                                          static_cast<std::size_t>(rows)));
      res.state.ergodic.settle_block(
          i, std::span<const double>(res.state.y)
                 .subspan(static_cast<std::size_t>(off),
                          static_cast<std::size_t>(rows)));
    }
    res.state.y = yhat;
    for (int i = 0; i < n; ++i) {
      const int rows = prob.op->block_rows(i);
      const int off = prob.f.offset(i);
      res.state.ergodic.add_y_block(
          i, std::span<const double>(res.state.y)
                 .subspan(static_cast<std::size_t>(off),
                          static_cast<std::size_t>(rows)));
    }
    prob.op->adjoint(res.state.y, aty_new);
    // ybar^{k+1} = 2 y^{k+1} - y^k, applied through the adjoint.
    for (std::size_t j = 0; j < pd; ++j)
      res.state.aty_bar[j] = 2.0 * aty_new[j] - res.state.aty[j];
    res.state.aty = aty_new;
    ++res.state.iter;
    while (snap_it != config.ergodic_snapshots.end() &&
           *snap_it == res.state.iter) {
      res.snapshots.push_back(res.state.ergodic.snapshot(res.state.y));
      ++snap_it;
    }
    const bool last = (k + 1 == config.max_iters);
    const bool logged =
        (config.log_every > 0 && res.state.iter % config.log_every == 0);
    if (logged || last) {
      if (!all_finite(res.state.x) || !all_finite(res.state.y))
        throw DivergenceError(res.state.iter);
      res.records.push_back(make_record(config, res.state, n, metrics));
      if (should_stop(config, res.records.back())) {
        res.stopped_early = !last;
        break;
      }
      if (last) break;
    }
  }
  return res;
}

}  // namespace spdhg
