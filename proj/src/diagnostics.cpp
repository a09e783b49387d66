#include "spdhg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spdhg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double sq_norm(std::span<const double> a) { return dot(a, a); }

// ||y||^2_{D(sigma)^-1 P^-1} = sum_i (sigma_i p_i)^-1 ||y_i||^2.
double dual_sq_dsp_inv(const BlockLinearOperator& op, const StepSizes& steps,
                       const SamplerSpec& sampler, std::span<const double> y) {
  double s = 0.0;
  for (int i = 0; i < op.num_blocks(); ++i) {
    const int off = op.block_row_offset(i);
    const int rows = op.block_rows(i);
    double blk = 0.0;
    for (int j = 0; j < rows; ++j) {
      const double t = y[static_cast<std::size_t>(off + j)];
      blk += t * t;
    }
    s += blk / (steps.sigma[static_cast<std::size_t>(i)] *
                sampler.probs[static_cast<std::size_t>(i)]);
  }
  return s;
}

// <A dx, P^-1 w> = sum_i p_i^-1 <(A dx)_i, w_i>.
double cross_p_inv(const BlockLinearOperator& op, const SamplerSpec& sampler,
                   std::span<const double> adx, std::span<const double> w) {
  double s = 0.0;
  for (int i = 0; i < op.num_blocks(); ++i) {
    const int off = op.block_row_offset(i);
    const int rows = op.block_rows(i);
    double blk = 0.0;
    for (int j = 0; j < rows; ++j)
      blk += adx[static_cast<std::size_t>(off + j)] *
             w[static_cast<std::size_t>(off + j)];
    s += blk / sampler.probs[static_cast<std::size_t>(i)];
  }
  return s;
}

const ReferenceSolution& require_reference(const SaddleProblem& prob) {
  if (!prob.reference)
    throw std::logic_error("problem carries no reference solution");
  return *prob.reference;
}

}  // namespace

double bregman_dg(const SaddleProblem& prob, std::span<const double> x,
                  std::span<const double> xbar, std::span<const double> ybar) {
  const double gx = prob.g.value(x);
  const double gbar = prob.g.value(xbar);
  if (!std::isfinite(gx) || !std::isfinite(gbar)) return kInf;
  std::vector<double> aty(static_cast<std::size_t>(prob.primal_dim()), 0.0);
  prob.op->adjoint(ybar, aty);
  double inner = 0.0;
  for (std::size_t j = 0; j < aty.size(); ++j)
    inner += aty[j] * (x[j] - xbar[j]);
  return gx - gbar + inner;
}

double bregman_dfstar(const SaddleProblem& prob, std::span<const double> y,
                      std::span<const double> xbar,
                      std::span<const double> ybar) {
  const double fy = prob.f.conj_value(y);
  const double fbar = prob.f.conj_value(ybar);
  if (!std::isfinite(fy) || !std::isfinite(fbar)) return kInf;
  std::vector<double> ax(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(xbar, ax);
  double inner = 0.0;
  for (std::size_t j = 0; j < ax.size(); ++j) inner += ax[j] * (y[j] - ybar[j]);
  return fy - fbar - inner;
}

double lyapunov_v(const BlockLinearOperator& op, const StepSizes& steps,
                  const SamplerSpec& sampler, std::span<const double> dx,
                  std::span<const double> dy) {
  std::vector<double> adx(static_cast<std::size_t>(op.rows()), 0.0);
  op.apply(dx, adx);
  return 0.5 * sq_norm(dx) / steps.tau +
         0.5 * dual_sq_dsp_inv(op, steps, sampler, dy) +
         cross_p_inv(op, sampler, adx, dy);
}

double lyapunov_vk(const BlockLinearOperator& op, const StepSizes& steps,
                   const SamplerSpec& sampler, std::span<const double> dx,
                   std::span<const double> dy, std::span<const double> ydiff) {
  std::vector<double> adx(static_cast<std::size_t>(op.rows()), 0.0);
  op.apply(dx, adx);
  return 0.5 * sq_norm(dx) / steps.tau -
         cross_p_inv(op, sampler, adx, ydiff) +
         0.5 * dual_sq_dsp_inv(op, steps, sampler, ydiff) +
         0.5 * dual_sq_dsp_inv(op, steps, sampler, dy);
}

double delta0(const SaddleProblem& prob, const StepSizes& steps,
              const SamplerSpec& sampler, std::span<const double> x0,
              std::span<const double> y0) {
  const auto& ref = require_reference(prob);
  std::vector<double> dx(x0.size()), dy(y0.size());
  for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = x0[j] - ref.x_star[j];
  for (std::size_t j = 0; j < dy.size(); ++j) dy[j] = y0[j] - ref.y_star[j];
  return 0.5 * sq_norm(dx) / steps.tau +
         0.5 * dual_sq_dsp_inv(*prob.op, steps, sampler, dy);
}

double kkt_residual(const SaddleProblem& prob, const StepSizes& steps,
                    std::span<const double> x, std::span<const double> y,
                    KktWeighting weighting) {
  std::vector<double> aty(static_cast<std::size_t>(prob.primal_dim()), 0.0);
  prob.op->adjoint(y, aty);
  for (auto& t : aty) t = -t;
  std::vector<double> ax(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(x, ax);
  double acc = 0.0;
  try {
    const double dg = prob.g.subdiff_dist(x, aty);
    acc += weighting == KktWeighting::s_weighted ? dg * dg / steps.tau
                                                 : dg * dg;
    for (int i = 0; i < prob.num_blocks(); ++i) {
      const int off = prob.f.offset(i);
      const auto rows = static_cast<std::size_t>(prob.f.block_dim(i));
      const double di = prob.f.block(i).conj_subdiff_dist(
          y.subspan(static_cast<std::size_t>(off), rows),
          std::span<const double>(ax).subspan(static_cast<std::size_t>(off),
                                              rows));
      acc += weighting == KktWeighting::s_weighted
                 ? di * di / steps.sigma[static_cast<std::size_t>(i)]
                 : di * di;
    }
  } catch (const std::domain_error&) {
    return kInf;
  }
  return std::sqrt(acc);
}

double gap_at(const SaddleProblem& prob, std::span<const double> xbar,
              std::span<const double> ybar, std::span<const double> x,
              std::span<const double> y) {
  const double gbar = prob.g.value(xbar);
  const double fbar = prob.f.conj_value(ybar);
  if (!std::isfinite(gbar) || !std::isfinite(fbar)) return kInf;
  const double gx = prob.g.value(x);
  const double fy = prob.f.conj_value(y);
  if (!std::isfinite(gx) || !std::isfinite(fy)) return -kInf;
  std::vector<double> axbar(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  std::vector<double> ax(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(xbar, axbar);
  prob.op->apply(x, ax);
  return gbar + dot(axbar, y) - fy - gx - dot(ax, ybar) + fbar;
}

double smoothed_gap(const SaddleProblem& prob, std::span<const double> xbar,
                    std::span<const double> ybar, std::span<const double> xhat,
                    std::span<const double> yhat, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("smoothing parameters must be positive");
  const auto pd = static_cast<std::size_t>(prob.primal_dim());
  const auto dd = static_cast<std::size_t>(prob.dual_dim());

  // Dual maximizer: v* = prox_{(1/beta) f*}(yhat + (1/beta) A xbar).
  std::vector<double> t(dd, 0.0), vstar(dd, 0.0);
  prob.op->apply(xbar, t);
  for (std::size_t j = 0; j < dd; ++j) t[j] = yhat[j] + t[j] / beta;
  for (int i = 0; i < prob.num_blocks(); ++i) {
    const int off = prob.f.offset(i);
    const auto rows = static_cast<std::size_t>(prob.f.block_dim(i));
    prob.f.conj_prox_block(
        i,
        std::span<const double>(t).subspan(static_cast<std::size_t>(off), rows),
        1.0 / beta,
        std::span<double>(vstar).subspan(static_cast<std::size_t>(off), rows));
  }
  // Primal maximizer of the concave part: u* = prox_{(1/alpha) g}
  // (xhat - (1/alpha) A^T ybar).
  std::vector<double> u(pd, 0.0), ustar(pd, 0.0);
  prob.op->adjoint(ybar, u);
  for (std::size_t j = 0; j < pd; ++j) u[j] = xhat[j] - u[j] / alpha;
  prob.g.prox(u, 1.0 / alpha, ustar);

  double pen = 0.0;
  for (std::size_t j = 0; j < pd; ++j) {
    const double d = ustar[j] - xhat[j];
    pen += 0.5 * alpha * d * d;
  }
  for (std::size_t j = 0; j < dd; ++j) {
    const double d = vstar[j] - yhat[j];
    pen += 0.5 * beta * d * d;
  }
  return gap_at(prob, xbar, ybar, ustar, vstar) - pen;
}

double objective_value(const SaddleProblem& prob, std::span<const double> x) {
  std::vector<double> ax(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(x, ax);
  return prob.g.value(x) + prob.f.value(ax);
}

double objective_residual(const SaddleProblem& prob,
                          std::span<const double> x) {
  const auto& ref = require_reference(prob);
  if (prob.is_linear_constraint())
    return prob.g.value(x) - prob.g.value(ref.x_star);
  const double p_star = std::isfinite(ref.objective)
                            ? ref.objective
                            : objective_value(prob, ref.x_star);
  return objective_value(prob, x) - p_star;
}

namespace {

std::vector<double> constraint_residual(const SaddleProblem& prob,
                                        std::span<const double> x) {
  const auto b = prob.constraint_target();
  std::vector<double> r(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(x, r);
  for (std::size_t j = 0; j < r.size(); ++j) r[j] -= b[j];
  return r;
}

}  // namespace

double feasibility(const SaddleProblem& prob, std::span<const double> x) {
  return std::sqrt(sq_norm(constraint_residual(prob, x)));
}

double feasibility_weighted(const SaddleProblem& prob, const StepSizes& steps,
                            const SamplerSpec& sampler,
                            std::span<const double> x) {
  const auto r = constraint_residual(prob, x);
  double s = 0.0;
  for (int i = 0; i < prob.num_blocks(); ++i) {
    const int off = prob.f.offset(i);
    double blk = 0.0;
    for (int j = 0; j < prob.f.block_dim(i); ++j) {
      const double t = r[static_cast<std::size_t>(off + j)];
      blk += t * t;
    }
    s += steps.sigma[static_cast<std::size_t>(i)] *
         sampler.probs[static_cast<std::size_t>(i)] * blk;
  }
  return std::sqrt(s);
}

double dist_to_reference(const SaddleProblem& prob,
                         std::span<const double> x) {
  const auto& ref = require_reference(prob);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - ref.x_star[j];
    num += d * d;
    den += ref.x_star[j] * ref.x_star[j];
  }
  const double ref_norm = std::sqrt(den);
  return std::sqrt(num) / (ref_norm > 0.0 ? ref_norm : 1.0);
}

TheoryConstants theory_constants(const SaddleProblem& prob,
                                 const StepSizes& steps,
                                 const SamplerSpec& sampler,
                                 std::span<const double> x0,
                                 std::span<const double> y0) {
  const auto& ref = require_reference(prob);
  const double gamma = steps.gamma;
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  const double p_min = sampler.min_prob();
  const int n = prob.num_blocks();

  TheoryConstants tc;
  tc.delta0 = delta0(prob, steps, sampler, x0, y0);

  tc.term_x0 = gamma * sq_norm(x0) / steps.tau;
  std::vector<double> dy(y0.size());
  for (std::size_t j = 0; j < dy.size(); ++j) dy[j] = y0[j] - ref.y_star[j];
  const double dy_sq = dual_sq_dsp_inv(*prob.op, steps, sampler, dy);
  tc.term_y0 = gamma / p_min * dy_sq;
  tc.term_delta_p = 2.0 * gamma / p_min * tc.delta0;
  tc.term_delta_c1 = tc.delta0 / (1.0 - gamma);

  std::vector<double> ax_star(static_cast<std::size_t>(prob.dual_dim()), 0.0);
  prob.op->apply(ref.x_star, ax_star);
  tc.term_fstar_y0 = 0.0;
  tc.term_fstar_ystar = 0.0;
  for (int i = 0; i < n; ++i) {
    const double skew = 1.0 / sampler.probs[static_cast<std::size_t>(i)] - 1.0;
    const int off = prob.f.offset(i);
    const auto rows = static_cast<std::size_t>(prob.f.block_dim(i));
    const double f_y0 = prob.f.block(i).conj_value(
        y0.subspan(static_cast<std::size_t>(off), rows));
    if (!std::isfinite(f_y0))
      throw std::domain_error("initial dual point leaves dom f* at block " +
                              std::to_string(i));
    const double f_ystar = prob.f.block(i).conj_value(
        std::span<const double>(ref.y_star)
            .subspan(static_cast<std::size_t>(off), rows));
    double blk = 0.0;
    for (std::size_t j = 0; j < rows; ++j) {
      const double t = ax_star[static_cast<std::size_t>(off) + j];
      blk += t * t;
    }
    const double ax_weighted =
        std::sqrt(steps.sigma[static_cast<std::size_t>(i)] *
                  sampler.probs[static_cast<std::size_t>(i)] * blk);
    tc.term_fstar_y0 += skew * f_y0;
    tc.term_fstar_ystar +=
        skew * (-f_ystar + ax_weighted * std::sqrt(2.0 * tc.delta0));
  }
  tc.c_e = tc.term_x0 + tc.term_y0 + tc.term_delta_p + tc.term_delta_c1 +
           tc.term_fstar_y0 + tc.term_fstar_ystar;

  // l_f = sup over dom f* of ||y||_{D(sigma)^-1}; finite iff f is Lipschitz.
  double lf_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double bound = prob.f.block(i).conj_dom_coord_bound();
    lf_sq += bound * bound * static_cast<double>(prob.f.block_dim(i)) /
             steps.sigma[static_cast<std::size_t>(i)];
  }
  tc.l_f = std::sqrt(lf_sq);

  const double x_gap_sq = [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < x0.size(); ++j) {
      const double d = x0[j] - ref.x_star[j];
      s += d * d;
    }
    return s / steps.tau;
  }();
  tc.c_e1 = tc.c_e + 2.0 / p_min * tc.l_f * tc.l_f +
            (1.0 + 2.0 * gamma) / 2.0 * x_gap_sq;

  if (prob.is_linear_constraint()) {
    // ydot = y^1 = y0, so ||y* - ydot|| reuses the dy norm above.
    const double dy_norm = std::sqrt(dy_sq);
    tc.c_e3 = 0.5 * (dy_norm +
                     std::sqrt(dy_sq + 4.0 * tc.c_e +
                               2.0 * (1.0 + 2.0 * gamma) * x_gap_sq));
    const double ystar_norm = std::sqrt(
        dual_sq_dsp_inv(*prob.op, steps, sampler, ref.y_star));
    tc.c_e2 = tc.c_e + 0.5 * dy_sq + (1.0 + 2.0 * gamma) / 2.0 * x_gap_sq +
              ystar_norm * tc.c_e3;
  } else {
    tc.c_e2 = std::numeric_limits<double>::quiet_NaN();
    tc.c_e3 = std::numeric_limits<double>::quiet_NaN();
  }
  return tc;
}

RateModel rate_fit(const std::vector<std::pair<double, double>>& series,
                   double c1) {
  if (series.empty()) throw std::invalid_argument("empty metric series");
  const double v0 = series.front().second;
  if (!(v0 > 0.0))
    throw std::invalid_argument("metric series must start positive");
  const double floor = 10.0 * std::numeric_limits<double>::epsilon() * v0;

  // Head is dropped up to the first sample at or below v0/10; a series that
  // never decays that far is fitted whole.
  std::size_t begin = 0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (series[k].second <= v0 / 10.0) {
      begin = k;
      break;
    }
  }
  // Tail is cut at the numerical floor; nonpositive samples are not floor
  // signals (they are excluded below, with a count).
  std::size_t end = series.size();
  for (std::size_t k = begin; k < series.size(); ++k) {
    if (series[k].second > 0.0 && series[k].second <= 1e3 * floor) {
      end = k;
      break;
    }
  }

  RateModel model;
  model.c1 = c1;
  model.window_begin = begin;
  model.window_end = end;
  std::vector<double> xs, ys;
  for (std::size_t k = begin; k < end; ++k) {
    if (series[k].second > 0.0) {
      xs.push_back(series[k].first);
      ys.push_back(std::log(series[k].second));
    } else {
      ++model.excluded;
    }
  }
  if (xs.size() < 10)
    throw std::invalid_argument(
        "rate fit needs at least 10 positive samples in the window");

  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mx;
    const double dyv = ys[k] - my;
    sxx += dx * dx;
    sxy += dx * dyv;
    syy += dyv * dyv;
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("degenerate iteration coordinates");
  model.slope = sxy / sxx;
  model.intercept = my - model.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (model.intercept + model.slope * xs[k]);
    ss_res += r * r;
  }
  // A flat series is fit exactly by its own constant.
  model.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  model.r_squared = std::clamp(model.r_squared, 0.0, 1.0);
  return model;
}

}  // namespace spdhg
