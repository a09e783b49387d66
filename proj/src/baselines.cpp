#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spdhg/rng.hpp"
#include "spdhg/solver.hpp"

namespace spdhg {

namespace {

ConvergenceRecord primal_record(const std::string& method, std::uint64_t seed,
                                long iter, double epoch,
                                const std::vector<double>& x,
                                const PrimalMetricFn& metrics) {
  ConvergenceRecord rec;
  rec.iter = iter;
  rec.epoch = epoch;
  rec.seed = seed;
  rec.method = method;
  if (metrics) rec.metrics = metrics(x);
  for (const auto& [name, value] : rec.metrics) {
    if (!std::isfinite(value)) throw DivergenceError(iter);
    (void)name;
  }
  return rec;
}

bool metric_reached(const ConvergenceRecord& rec, const std::string& name,
                    double tol) {
  if (name.empty()) return false;
  return rec.metric(name, std::numeric_limits<double>::infinity()) <= tol;
}

}  // namespace

RunResult svrg_run(const SaddleProblem& prob, const SvrgConfig& config,
                   const PrimalMetricFn& metrics) {
  prob.validate();
  const int n = prob.num_blocks();
  for (int i = 0; i < n; ++i) {
    if (prob.f.block(i).kind() != FuncKind::LeastSquares)
      throw std::invalid_argument(
          "variance-reduced gradient needs least-squares blocks");
  }
  // Objective as a finite sum (1/n) sum_i psi_i(x) + g(x) with
  // psi_i(x) = (n/2) ||A_i x - b_i||^2, so grad psi_i is n L_i-Lipschitz
  // with L_i = n ||A_i||^2.
  double l_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const double nrm = prob.op->block_norm(i);
    l_max = std::max(l_max, static_cast<double>(n) * nrm * nrm);
  }
  if (!(l_max > 0.0)) throw std::invalid_argument("operator is zero");
  const double eta = config.eta > 0.0 ? config.eta : 0.1 / l_max;
  const long inner = config.inner > 0 ? config.inner : 2L * n;

  RunResult res;
  res.state = make_initial_state(prob);
  std::vector<double>& x = res.state.x;
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  const auto dd = static_cast<std::size_t>(prob.dual_dim());
  std::vector<double> ax_snap(dd), mu(pd), v(pd), u(pd);
  std::vector<double> x_snap = x;
  int max_rows = 0;
  for (int i = 0; i < n; ++i)
    max_rows = std::max(max_rows, prob.op->block_rows(i));
  std::vector<double> ax_blk(static_cast<std::size_t>(max_rows));

  RngStream rng(config.draw_seed);
  long iters = 0;
  double epoch = 0.0;
  res.records.push_back(primal_record(config.method, config.record_seed, 0,
                                      0.0, x, metrics));
  for (long outer = 0; outer < config.max_outer; ++outer) {
    // Full gradient at the snapshot: mu = A^T (A x_snap - b).
    x_snap = x;
    prob.op->apply(x_snap, ax_snap);
    std::fill(mu.begin(), mu.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const int rows = prob.op->block_rows(i);
      const int off = prob.f.offset(i);
      const auto& b = prob.f.block(i).target();
      for (int j = 0; j < rows; ++j) {
        const double r = ax_snap[static_cast<std::size_t>(off + j)] -
                         b[static_cast<std::size_t>(j)];
        if (r != 0.0) prob.op->row_axpy(off + j, r, mu);
      }
    }
    epoch += 1.0;
    for (long t = 0; t < inner; ++t) {
      const int i = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n)));
      const int rows = prob.op->block_rows(i);
      const int off = prob.f.offset(i);
      auto ax = std::span<double>(ax_blk).first(static_cast<std::size_t>(rows));
      prob.op->apply_block(i, x, ax);
      // v = mu + n A_i^T (A_i x - (A x_snap)_i)
      v = mu;
      for (int j = 0; j < rows; ++j) {
        const double r = static_cast<double>(n) *
                         (ax[static_cast<std::size_t>(j)] -
                          ax_snap[static_cast<std::size_t>(off + j)]);
        if (r != 0.0) prob.op->row_axpy(off + j, r, v);
      }
      for (std::size_t j = 0; j < pd; ++j) u[j] = x[j] - eta * v[j];
      prob.g.prox(u, eta, x);
      ++iters;
      epoch += 1.0 / static_cast<double>(n);
    }
    res.state.iter = iters;
    for (double t : x) {
      if (!std::isfinite(t)) throw DivergenceError(iters);
    }
    res.records.push_back(primal_record(config.method, config.record_seed,
                                        iters, epoch, x, metrics));
    if (metric_reached(res.records.back(), config.stop_metric,
                       config.stop_tol)) {
      res.stopped_early = (outer + 1 < config.max_outer);
      break;
    }
  }
  return res;
}

RunResult sdca_run(const SaddleProblem& prob, const SdcaConfig& config,
                   const PrimalMetricFn& metrics) {
  prob.validate();
  const int n = prob.num_blocks();
  if (prob.g.kind() != FuncKind::SquaredL2)
    throw std::invalid_argument(
        "dual coordinate ascent needs a squared-l2 primal term");
  const double lambda = prob.g.param();
  for (int i = 0; i < n; ++i) {
    if (prob.f.block_dim(i) != 1)
      throw std::invalid_argument(
          "dual coordinate ascent needs single-row blocks");
    const FuncKind k = prob.f.block(i).kind();
    if (k == FuncKind::Hinge) {
      if (prob.f.block(i).sign() != 1)
        throw std::invalid_argument(
            "hinge blocks must carry the label in the row");
    } else if (k != FuncKind::LeastSquares) {
      throw std::invalid_argument(
          "dual coordinate ascent needs hinge or least-squares blocks");
    }
  }

  RunResult res;
  res.state = make_initial_state(prob);
  std::vector<double>& w = res.state.x;
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> row_sq(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    row_sq[static_cast<std::size_t>(i)] = prob.op->row_sq_norm(i);

  RngStream rng(config.draw_seed);
  const double ln = lambda * static_cast<double>(n);
  const long log_every = config.log_every > 0 ? config.log_every : n;
  const long max_iters = config.max_epochs * static_cast<long>(n);
  res.records.push_back(primal_record(config.method, config.record_seed, 0,
                                      0.0, w, metrics));
  for (long k = 0; k < max_iters; ++k) {
    const int i = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n)));
    const double sq = row_sq[static_cast<std::size_t>(i)];
    if (sq > 0.0) {
      const double margin = prob.op->row_dot(i, w);
      const double a_old = alpha[static_cast<std::size_t>(i)];
      double a_new;
      if (prob.f.block(i).kind() == FuncKind::Hinge) {
        const double cap = prob.f.block(i).param() * static_cast<double>(n);
        a_new = std::clamp(a_old + (1.0 - margin) * ln / sq, 0.0, cap);
      } else {
        const double b = prob.f.block(i).target()[0];
        a_new = (ln * (b - margin) + a_old * sq) / (lambda + sq);
      }
      const double delta = a_new - a_old;
      if (delta != 0.0) {
        alpha[static_cast<std::size_t>(i)] = a_new;
        prob.op->row_axpy(i, delta / ln, w);
      }
    }
    res.state.iter = k + 1;
    const bool last = (k + 1 == max_iters);
    if ((k + 1) % log_every == 0 || last) {
      for (double t : w) {
        if (!std::isfinite(t)) throw DivergenceError(k + 1);
      }
      res.records.push_back(primal_record(
          config.method, config.record_seed, k + 1,
          static_cast<double>(k + 1) / static_cast<double>(n), w, metrics));
      if (metric_reached(res.records.back(), config.stop_metric,
                         config.stop_tol)) {
        res.stopped_early = !last;
        break;
      }
    }
  }
  return res;
}

}  // namespace spdhg
