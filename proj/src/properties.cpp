#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "spdhg/harness.hpp"
#include "spdhg/rng.hpp"
#include "spdhg/sampling.hpp"

namespace spdhg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string vec_str(std::span<const double> v) {
  std::string s = "[";
  for (size_t j = 0; j < v.size(); ++j) {
    if (j) s += ", ";
    s += g17(v[j]);
  }
  return s + "]";
}

void fail(PropertyReport& report, std::string what) {
  if (report.passed) {
    report.passed = false;
    report.first_violation = std::move(what);
  }
}

// Thrown to unwind out of the step hook at the first violation.
struct CheckAbort {};

// 1/2 ||dx||^2_{tau^-1}
double half_sq_tau(const StepSizes& steps, std::span<const double> dx) {
  double s = 0.0;
  for (double v : dx) s += v * v;
  return 0.5 * s / steps.tau;
}

// 1/2 ||dy||^2_{D(sigma)^-1 P^-1}
double half_sq_sp(const SaddleProblem& prob, const StepSizes& steps,
                  const SamplerSpec& sampler, std::span<const double> dy) {
  double s = 0.0;
  for (int i = 0; i < prob.num_blocks(); ++i) {
    const int off = prob.f.offset(i);
    const int rows = prob.f.block_dim(i);
    double blk = 0.0;
    for (int j = 0; j < rows; ++j) {
      const double v = dy[static_cast<size_t>(off + j)];
      blk += v * v;
    }
    s += 0.5 * blk /
         (steps.sigma[static_cast<size_t>(i)] * sampler.probs[static_cast<size_t>(i)]);
  }
  return s;
}

struct Anchor {
  std::vector<double> x, y;
};

// In-domain anchor: prox maps land inside dom g and dom f* for any input.
Anchor random_anchor(const SaddleProblem& prob, RngStream& rng) {
  Anchor z;
  const auto p = static_cast<size_t>(prob.primal_dim());
  const auto m = static_cast<size_t>(prob.dual_dim());
  std::vector<double> u(p);
  for (double& v : u) v = 3.0 * rng.next_normal();
  z.x.resize(p);
  prob.g.prox(u, 1.0, z.x);
  std::vector<double> w(m);
  for (double& v : w) v = 3.0 * rng.next_normal();
  z.y.resize(m);
  for (int i = 0; i < prob.num_blocks(); ++i) {
    const auto off = static_cast<size_t>(prob.f.offset(i));
    const auto rows = static_cast<size_t>(prob.f.block_dim(i));
    prob.f.block(i).conj_prox(std::span<const double>(w).subspan(off, rows),
                              1.0, std::span<double>(z.y).subspan(off, rows));
  }
  return z;
}

}  // namespace

void check_descent(const SaddleProblem& prob, const StepSizes& steps,
                   const SamplerSpec& sampler, const DescentCheckOptions& opts,
                   PropertyReport& report) {
  prob.validate();
  const int n = prob.num_blocks();
  const auto p = static_cast<size_t>(prob.primal_dim());
  const auto m = static_cast<size_t>(prob.dual_dim());
  const auto& probs = sampler.probs;
  RngStream anchor_rng(opts.anchor_seed);

  std::vector<double> ydiff_prev(m), dx_step(p), dx_prev(p), dx_next(p);
  std::vector<double> dy(m), y_next(m), ydiff_i(m);

  auto hook = [&](const SolverState& after, const StepCandidate& cand) {
    std::fill(ydiff_prev.begin(), ydiff_prev.end(), 0.0);
    if (cand.prev_diff_block >= 0) {
      const auto off =
          static_cast<size_t>(prob.f.offset(cand.prev_diff_block));
      for (size_t j = 0; j < cand.y_prev_old.size(); ++j)
        ydiff_prev[off + j] = cand.y_before[off + j] - cand.y_prev_old[j];
    }
    for (size_t j = 0; j < p; ++j) dx_step[j] = after.x[j] - cand.x_prev[j];
    const double vstep =
        lyapunov_v(*prob.op, steps, sampler, dx_step, ydiff_prev);

    const int total_anchors = (prob.reference ? 1 : 0) + opts.random_anchors;
    for (int a = 0; a < total_anchors; ++a) {
      Anchor z;
      const bool is_ref = prob.reference && a == 0;
      if (is_ref) {
        z.x = prob.reference->x_star;
        z.y = prob.reference->y_star;
      } else {
        z = random_anchor(prob, anchor_rng);
      }

      const double lhs = bregman_dg(prob, after.x, z.x, z.y) +
                         bregman_dfstar(prob, cand.y_hat, z.x, z.y);

      for (size_t j = 0; j < p; ++j) dx_prev[j] = cand.x_prev[j] - z.x[j];
      for (size_t j = 0; j < m; ++j) dy[j] = cand.y_before[j] - z.y[j];
      const double vk =
          lyapunov_vk(*prob.op, steps, sampler, dx_prev, dy, ydiff_prev);

      for (size_t j = 0; j < p; ++j) dx_next[j] = after.x[j] - z.x[j];
      double exp_vk1 = 0.0;
      y_next = cand.y_before;
      std::fill(ydiff_i.begin(), ydiff_i.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        const auto off = static_cast<size_t>(prob.f.offset(i));
        const auto rows = static_cast<size_t>(prob.f.block_dim(i));
        for (size_t j = 0; j < rows; ++j) {
          y_next[off + j] = cand.y_hat[off + j];
          ydiff_i[off + j] = cand.y_hat[off + j] - cand.y_before[off + j];
        }
        for (size_t j = 0; j < m; ++j) dy[j] = y_next[j] - z.y[j];
        exp_vk1 += probs[static_cast<size_t>(i)] *
                   lyapunov_vk(*prob.op, steps, sampler, dx_next, dy, ydiff_i);
        for (size_t j = 0; j < rows; ++j) {
          y_next[off + j] = cand.y_before[off + j];
          ydiff_i[off + j] = 0.0;
        }
      }

      const double rhs = vk - exp_vk1 - vstep;
      const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
      const double slack = (rhs - lhs) / scale;
      ++report.descent_points;
      report.worst_descent_slack = std::min(report.worst_descent_slack, slack);
      if (!(slack >= -opts.tol)) {
        std::ostringstream os;
        os << "one-step descent inequality violated at iteration " << after.iter
           << " (drawn block " << cand.drawn << ", anchor "
           << (is_ref ? "reference" : "random #" + std::to_string(a)) << "):\n"
           << "  lhs (bregman sum) = " << g17(lhs) << "\n"
           << "  rhs = V_k - E[V_{k+1}] - V(step) = " << g17(vk) << " - "
           << g17(exp_vk1) << " - " << g17(vstep) << " = " << g17(rhs) << "\n"
           << "  normalized slack  = " << g17(slack) << " < -" << g17(opts.tol)
           << "\n"
           << "  x_prev   = " << vec_str(cand.x_prev) << "\n"
           << "  x_next   = " << vec_str(after.x) << "\n"
           << "  y_before = " << vec_str(cand.y_before) << "\n"
           << "  y_hat    = " << vec_str(cand.y_hat) << "\n"
           << "  prev_diff_block = " << cand.prev_diff_block
           << ", y_prev_old = " << vec_str(cand.y_prev_old) << "\n"
           << "  anchor x = " << vec_str(z.x) << "\n"
           << "  anchor y = " << vec_str(z.y);
        fail(report, os.str());
        throw CheckAbort{};
      }
    }
  };

  RunConfig rc;
  rc.max_iters = opts.iters;
  rc.log_every = 0;
  rc.method = "descent_check";
  try {
    spdhg_run(prob, steps, sampler, rc, {}, hook);
  } catch (const CheckAbort&) {
  } catch (const DivergenceError& e) {
    report.warnings.push_back(
        "descent check stopped early: iterates diverged at iteration " +
        std::to_string(e.iter) + "; inequality held up to that point");
  }
}

void check_coercivity(const SaddleProblem& prob, const StepSizes& steps,
                      const SamplerSpec& sampler, long points,
                      std::uint64_t seed, double tol, PropertyReport& report) {
  const StepSizeReport sr = validate_step_sizes(steps, *prob.op, sampler);
  if (sr.max_ratio >= 1.0) {
    report.warnings.push_back(
        "coercivity check skipped: step ratio " + g17(sr.max_ratio) +
        " >= 1 leaves no contraction margin");
    return;
  }
  const double c1 = 1.0 - std::sqrt(sr.max_ratio);
  const int n = prob.num_blocks();
  const auto p = static_cast<size_t>(prob.primal_dim());
  const auto m = static_cast<size_t>(prob.dual_dim());
  RngStream rng(seed);

  std::vector<double> dx(p), dy(m), ydiff(m), dy_full(m);
  const double scales[] = {1e-2, 1.0, 1e2};
  for (long t = 0; t < points; ++t) {
    const double scale = scales[t % 3];

    // Lower bound on V over a single-block dual difference.
    for (double& v : dx) v = scale * rng.next_normal();
    std::fill(dy.begin(), dy.end(), 0.0);
    {
      const int i = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n)));
      const auto off = static_cast<size_t>(prob.f.offset(i));
      const auto rows = static_cast<size_t>(prob.f.block_dim(i));
      for (size_t j = 0; j < rows; ++j) dy[off + j] = scale * rng.next_normal();
    }
    const double v = lyapunov_v(*prob.op, steps, sampler, dx, dy);
    const double bound =
        c1 * (half_sq_tau(steps, dx) + half_sq_sp(prob, steps, sampler, dy));
    ++report.coercivity_points;
    const double sc = std::max({1.0, std::abs(v), std::abs(bound)});
    if (!((v - bound) / sc >= -tol)) {
      fail(report, "V lower bound violated: V = " + g17(v) + " < " + g17(bound) +
                       " (C1 = " + g17(c1) + ")\n  dx = " + vec_str(dx) +
                       "\n  dy = " + vec_str(dy));
      return;
    }

    // Lower bound on V_k: arbitrary (dx, dy), single-block trailing diff.
    for (double& w : dx) w = scale * rng.next_normal();
    for (double& w : dy_full) w = scale * rng.next_normal();
    std::fill(ydiff.begin(), ydiff.end(), 0.0);
    {
      const int i = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n)));
      const auto off = static_cast<size_t>(prob.f.offset(i));
      const auto rows = static_cast<size_t>(prob.f.block_dim(i));
      for (size_t j = 0; j < rows; ++j)
        ydiff[off + j] = scale * rng.next_normal();
    }
    const double vk = lyapunov_vk(*prob.op, steps, sampler, dx, dy_full, ydiff);
    const double bound_k =
        c1 * (half_sq_tau(steps, dx) + half_sq_sp(prob, steps, sampler, ydiff)) +
        half_sq_sp(prob, steps, sampler, dy_full);
    ++report.coercivity_points;
    const double sck = std::max({1.0, std::abs(vk), std::abs(bound_k)});
    if (!((vk - bound_k) / sck >= -tol)) {
      fail(report, "V_k lower bound violated: V_k = " + g17(vk) + " < " +
                       g17(bound_k) + " (C1 = " + g17(c1) + ")\n  dx = " +
                       vec_str(dx) + "\n  dy = " + vec_str(dy_full) +
                       "\n  ydiff = " + vec_str(ydiff));
      return;
    }
  }
}

void check_sampler_identities(const SaddleProblem& prob, const StepSizes& steps,
                              const SamplerSpec& sampler, std::uint64_t seed,
                              PropertyReport& report) {
  const int n = prob.num_blocks();
  const auto m = static_cast<size_t>(prob.dual_dim());
  std::vector<int> dims;
  dims.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) dims.push_back(prob.f.block_dim(i));

  RngStream rng(seed);
  auto in_domain_dual = [&] {
    std::vector<double> raw(m), y(m);
    for (double& v : raw) v = 2.0 * rng.next_normal();
    for (int i = 0; i < n; ++i) {
      const auto off = static_cast<size_t>(prob.f.offset(i));
      const auto rows = static_cast<size_t>(prob.f.block_dim(i));
      prob.f.block(i).conj_prox(std::span<const double>(raw).subspan(off, rows),
                                1.0, std::span<double>(y).subspan(off, rows));
    }
    return y;
  };
  const std::vector<double> y_k = in_domain_dual();
  const std::vector<double> y_hat = in_domain_dual();
  const std::vector<double> y_anchor = in_domain_dual();

  const IdentityReport exact = check_expectation_identities_exact(
      dims, steps.sigma, sampler, y_k, y_hat, y_anchor, 1e-10);
  report.sampler_identities += static_cast<long>(exact.entries.size());
  if (!exact.pass) {
    fail(report, "sampler expectation identity (exact enumeration) failed:\n" +
                     exact.summary());
    return;
  }
  const IdentityReport mc = check_expectation_identities_mc(
      dims, steps.sigma, sampler, y_k, y_hat, y_anchor, 100000, 0, 3.0);
  report.sampler_identities += static_cast<long>(mc.entries.size());
  if (!mc.pass)
    fail(report,
         "sampler expectation identity (Monte Carlo) failed:\n" + mc.summary());
}

namespace {

double linf_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j)
    s = std::max(s, std::abs(a[j] - b[j]));
  return s;
}

// |F(x) + F*(y) - <x, y>| for a subgradient pair. A point one rounding error
// off an exact domain boundary is pulled back on before evaluating (prox with
// a vanishing step is the domain projection); points genuinely off-domain
// stay infinite and fail the check.
double fenchel_young_gap(const ProxableFunction& F, std::vector<double> x,
                         std::vector<double> y, double grace) {
  double fx = F.value(x);
  if (!std::isfinite(fx)) {
    std::vector<double> px(x.size());
    F.prox(x, 1e-300, px);
    if (linf_diff(px, x) > grace) return kInf;
    x = std::move(px);
    fx = F.value(x);
  }
  double fy = F.conj_value(y);
  if (!std::isfinite(fy)) {
    std::vector<double> py(y.size());
    F.conj_prox(y, 1e-300, py);
    if (linf_diff(py, y) > grace) return kInf;
    y = std::move(py);
    fy = F.conj_value(y);
  }
  if (!std::isfinite(fx) || !std::isfinite(fy)) return kInf;
  double dot = 0.0;
  for (size_t j = 0; j < x.size(); ++j) dot += x[j] * y[j];
  return std::abs(fx + fy - dot);
}

bool check_one_function(const ProxableFunction& F, int dim, long rounds,
                        RngStream& rng, double tol, const std::string& who,
                        PropertyReport& report) {
  constexpr double kMoreauTol = 1e-12;
  const double draw_scales[] = {0.3, 1.0, 10.0};
  const double prox_steps[] = {0.1, 1.0, 3.0};
  const auto d = static_cast<size_t>(dim);
  std::vector<double> v(d), u(d), mrel(d), grad(d), yh(d), xg(d), scaled(d);

  for (long r = 0; r < rounds; ++r) {
    const double scale = draw_scales[r % 3];
    const double t = prox_steps[(r / 3) % 3];
    for (double& w : v) w = scale * rng.next_normal();
    const double vmax =
        std::max(1.0, std::abs(*std::max_element(
                          v.begin(), v.end(),
                          [](double a, double b) { return std::abs(a) < std::abs(b); })));

    // Moreau: prox_{tF}(v) + t prox_{F*/t}(v/t) = v.
    F.prox(v, t, u);
    for (size_t j = 0; j < d; ++j) scaled[j] = v[j] / t;
    F.conj_prox(scaled, 1.0 / t, mrel);
    double worst = 0.0;
    for (size_t j = 0; j < d; ++j)
      worst = std::max(worst, std::abs(u[j] + t * mrel[j] - v[j]));
    ++report.calculus_points;
    if (worst > kMoreauTol * vmax) {
      fail(report, who + ": Moreau identity off by " + g17(worst) +
                       " at step " + g17(t) + "\n  v = " + vec_str(v));
      return false;
    }

    // Prox optimality: (v - u)/t lies in the subdifferential at u.
    for (size_t j = 0; j < d; ++j) grad[j] = (v[j] - u[j]) / t;
    const double sd = F.subdiff_dist(u, grad);
    ++report.calculus_points;
    if (sd > tol * vmax) {
      fail(report, who + ": prox optimality residual " + g17(sd) + " at step " +
                       g17(t) + "\n  v = " + vec_str(v));
      return false;
    }

    // Conjugate prox optimality: (v - yh)/t lies in the conjugate
    // subdifferential at yh.
    F.conj_prox(v, t, yh);
    for (size_t j = 0; j < d; ++j) xg[j] = (v[j] - yh[j]) / t;
    const double csd = F.conj_subdiff_dist(yh, xg);
    ++report.calculus_points;
    if (csd > tol * vmax) {
      fail(report, who + ": conjugate prox optimality residual " + g17(csd) +
                       " at step " + g17(t) + "\n  v = " + vec_str(v));
      return false;
    }

    // Fenchel-Young holds with equality on both subgradient pairs.
    const double grace = 64.0 * std::numeric_limits<double>::epsilon() * vmax;
    const double fy1 = fenchel_young_gap(
        F, {u.begin(), u.end()}, {grad.begin(), grad.end()}, grace);
    ++report.calculus_points;
    if (!(fy1 <= tol * vmax)) {
      fail(report, who + ": Fenchel-Young gap " + g17(fy1) +
                       " at the primal prox pair, step " + g17(t) +
                       "\n  v = " + vec_str(v));
      return false;
    }
    const double fy2 = fenchel_young_gap(
        F, {xg.begin(), xg.end()}, {yh.begin(), yh.end()}, grace);
    ++report.calculus_points;
    if (!(fy2 <= tol * vmax)) {
      fail(report, who + ": Fenchel-Young gap " + g17(fy2) +
                       " at the conjugate prox pair, step " + g17(t) +
                       "\n  v = " + vec_str(v));
      return false;
    }
  }
  return true;
}

}  // namespace

void check_calculus(const SaddleProblem& prob, long rounds, std::uint64_t seed,
                    double tol, PropertyReport& report) {
  RngStream rng(seed);
  if (!check_one_function(prob.g, prob.primal_dim(), rounds, rng, tol, "g",
                          report))
    return;
  for (int i = 0; i < prob.num_blocks(); ++i) {
    if (!check_one_function(prob.f.block(i), prob.f.block_dim(i), rounds, rng,
                            tol, "f[" + std::to_string(i) + "]", report))
      return;
  }
}

PropertyReport check_properties(const ExperimentConfig& cfg) {
  cfg.validate();
  PropertyReport report;
  GeneratedProblem gp = assemble_problem(cfg);
  SaddleProblem& prob = gp.problem;
  if (prob.num_blocks() > 8)
    throw std::invalid_argument(
        "property suite enumerates block outcomes exactly and requires n <= 8");
  prob.reference =
      std::make_shared<ReferenceSolution>(certify_reference(gp, cfg.reference));

  const SolverEntry& e = cfg.solvers.front();
  const int n = prob.num_blocks();
  const std::uint64_t seed = cfg.seeds.front();
  SamplerSpec sampler = SamplerSpec::uniform(n, seed);
  if (e.sampling == "norm_weighted") {
    std::vector<double> probs(static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += prob.op->block_norm(i);
    for (int i = 0; i < n; ++i)
      probs[static_cast<size_t>(i)] = prob.op->block_norm(i) / total;
    sampler = SamplerSpec::with_probs(std::move(probs), seed);
  }
  StepSizes steps;
  if (e.method == "fb_vc_cd")
    steps = fb_vc_cd_step_sizes(*prob.op, e.gamma);
  else if (e.method == "spdhg_mu")
    steps = strongly_convex_step_sizes(prob, e.gamma, sampler);
  else
    steps = default_step_sizes(*prob.op, e.gamma, sampler);

  DescentCheckOptions opts;
  opts.anchor_seed = seed;
  check_descent(prob, steps, sampler, opts, report);
  if (report.passed)
    check_coercivity(prob, steps, sampler, 1000, seed + 1, 1e-9, report);
  if (report.passed) check_sampler_identities(prob, steps, sampler, seed + 2, report);
  if (report.passed) check_calculus(prob, 50, seed + 3, 1e-9, report);
  return report;
}

std::string PropertyReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << ": descent " << descent_points
     << " points";
  if (descent_points > 0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", worst_descent_slack);
    os << " (worst normalized slack " << buf << ")";
  }
  os << ", coercivity " << coercivity_points << ", sampler identities "
     << sampler_identities << ", calculus " << calculus_points;
  for (const std::string& w : warnings) os << "\n  warning: " << w;
  if (!passed) os << "\n" << first_violation;
  return os.str();
}

}  // namespace spdhg
