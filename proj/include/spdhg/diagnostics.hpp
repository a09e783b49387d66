#pragma once

// Theory-side quantities: Bregman distances, the Lyapunov quadratic forms,
// KKT residuals, duality gaps (plain and smoothed), objective / feasibility
// residuals, the ergodic-rate constants, and empirical rate fitting.
// Everything here is pure; solvers never call into this header.

#include <span>
#include <utility>
#include <vector>

#include "spdhg/solver.hpp"

namespace spdhg {

// D_g(x; zbar) = g(x) - g(xbar) + <A^T ybar, x - xbar>; +inf off-domain.
double bregman_dg(const SaddleProblem& prob, std::span<const double> x,
                  std::span<const double> xbar, std::span<const double> ybar);

// D_f*(y; zbar) = f*(y) - f*(ybar) - <A xbar, y - ybar>; +inf off-domain.
double bregman_dfstar(const SaddleProblem& prob, std::span<const double> y,
                      std::span<const double> xbar,
                      std::span<const double> ybar);

// V(dx, dy) = 1/2 ||dx||^2_{tau^-1} + 1/2 ||dy||^2_{D(sigma)^-1 P^-1}
//             + <A dx, P^-1 dy>.
double lyapunov_v(const BlockLinearOperator& op, const StepSizes& steps,
                  const SamplerSpec& sampler, std::span<const double> dx,
                  std::span<const double> dy);

// V_k(dx, dy) with trailing dual difference ydiff = y^k - y^{k-1}:
// 1/2 ||dx||^2_{tau^-1} - <A dx, P^-1 ydiff>
// + 1/2 ||ydiff||^2_{D(sigma)^-1 P^-1} + 1/2 ||dy||^2_{D(sigma)^-1 P^-1}.
double lyapunov_vk(const BlockLinearOperator& op, const StepSizes& steps,
                   const SamplerSpec& sampler, std::span<const double> dx,
                   std::span<const double> dy, std::span<const double> ydiff);

// 1/2 ||x0 - x*||^2_{tau^-1} + 1/2 ||y0 - y*||^2_{D(sigma)^-1 P^-1};
// requires the problem's reference solution.
double delta0(const SaddleProblem& prob, const StepSizes& steps,
              const SamplerSpec& sampler, std::span<const double> x0,
              std::span<const double> y0);

enum class KktWeighting { s_weighted, euclidean };

// Distance of 0 to the optimality system: d_g = dist(-A^T y, partial g(x)),
// d_i = dist(A_i x, partial f_i^*(y_i)); returns
// sqrt(d_g^2 / tau + sum_i d_i^2 / sigma_i) (s_weighted, the default) or the
// unweighted root-sum-square. Off-domain points yield +inf.
double kkt_residual(const SaddleProblem& prob, const StepSizes& steps,
                    std::span<const double> x, std::span<const double> y,
                    KktWeighting weighting = KktWeighting::s_weighted);

// H(xbar, ybar; x, y) = g(xbar) + <A xbar, y> - f*(y)
//                       - g(x) - <A x, ybar> + f*(ybar).
// +inf when g(xbar) or f*(ybar) is infinite; -inf when the candidate
// (x, y) leaves its domain.
double gap_at(const SaddleProblem& prob, std::span<const double> xbar,
              std::span<const double> ybar, std::span<const double> x,
              std::span<const double> y);

// Smoothed gap sup_{u,v} H(xbar, ybar; u, v) - alpha/2 ||u - xhat||^2
// - beta/2 ||v - yhat||^2, in closed form through the two proxes.
double smoothed_gap(const SaddleProblem& prob, std::span<const double> xbar,
                    std::span<const double> ybar, std::span<const double> xhat,
                    std::span<const double> yhat, double alpha, double beta);

// P(x) = g(x) + f(Ax) (extended-real).
double objective_value(const SaddleProblem& prob, std::span<const double> x);

// P(x) - P(x*) in the Lipschitz case; g(x) - g(x*) (signed) when every block
// is a point indicator. Requires the reference.
double objective_residual(const SaddleProblem& prob,
                          std::span<const double> x);

// ||A x - b||_2 for point-indicator problems.
double feasibility(const SaddleProblem& prob, std::span<const double> x);
// Same residual in the ||.||_{D(sigma)P} norm (block weight sigma_i p_i).
double feasibility_weighted(const SaddleProblem& prob, const StepSizes& steps,
                            const SamplerSpec& sampler,
                            std::span<const double> x);

// ||x - x*|| / max(||x*||, 1 if x* = 0).
double dist_to_reference(const SaddleProblem& prob, std::span<const double> x);

// Constants of the ergodic O(1/K) bounds, with the per-term breakdown of
// c_e. With ydot = y^1 = y0, the expected-gap constant is
//   c_e = gamma ||x0||^2_{tau^-1}
//       + (gamma/p_min) ||y0 - y*||^2_{D(sigma)^-1 P^-1}
//       + (2 gamma/p_min) delta0 + delta0 / (1 - gamma)
//       + sum_i (1/p_i - 1) f_i^*(y0_i)
//       + sum_i (1/p_i - 1) (-f_i^*(y*_i)
//                            + sqrt(sigma_i p_i) ||A_i x*|| sqrt(2 delta0)).
// c_e1 bounds K E[P(x_av) - P*] when f is Lipschitz (l_f finite); c_e2 and
// c_e3 bound K E[g(x_av) - g(x*)] and K E[||A x_av - b||_{D(sigma)P}] for
// point-indicator problems and are NaN otherwise.
struct TheoryConstants {
  double delta0 = 0.0;
  double l_f = 0.0;  // sup_{y in dom f*} ||y||_{D(sigma)^-1}; +inf possible
  double c_e = 0.0;
  double c_e1 = 0.0;
  double c_e2 = 0.0;
  double c_e3 = 0.0;
  double term_x0 = 0.0;          // gamma ||x0||^2_{tau^-1}
  double term_y0 = 0.0;          // (gamma/p_min) ||y0 - y*||^2
  double term_delta_p = 0.0;     // (2 gamma/p_min) delta0
  double term_delta_c1 = 0.0;    // delta0 / (1 - gamma)
  double term_fstar_y0 = 0.0;    // sum_i (1/p_i - 1) f_i^*(y0_i)
  double term_fstar_ystar = 0.0; // remaining probability-skew sum
};

TheoryConstants theory_constants(const SaddleProblem& prob,
                                 const StepSizes& steps,
                                 const SamplerSpec& sampler,
                                 std::span<const double> x0,
                                 std::span<const double> y0);

// Least-squares fit of log(metric) against the iteration coordinate.
struct RateModel {
  double slope = 0.0;      // per-unit log decay
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t window_begin = 0;  // fitted index range [begin, end)
  std::size_t window_end = 0;
  double c1 = 0.0;         // 1 - gamma, carried for reporting
  long excluded = 0;       // nonpositive samples dropped inside the window
};

// Window policy: start at the first sample with value <= value0 / 10 (or at
// the head when the metric never decays that far), stop before the first
// sample at or below 1e3 * (10 * eps * value0). Needs >= 10 positive samples
// in the window.
RateModel rate_fit(const std::vector<std::pair<double, double>>& series,
                   double c1);

}  // namespace spdhg
