#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "oracle.hpp"
#include "spdhg/sampling.hpp"
#include "spdhg/solver.hpp"
#include "test_util.hpp"

using namespace spdhg;

namespace {

SaddleProblem make_problem(BlockLinearOperator op, ProxableFunction g,
                           SeparableSum f) {
  SaddleProblem p;
  p.g = std::move(g);
  p.f = std::move(f);
  p.op = std::make_shared<BlockLinearOperator>(std::move(op));
  return p;
}

// Random least-squares problem: g = (mu/2)||x||^2, f_i = (1/2)||s - b_i||^2.
SaddleProblem random_ls_problem(std::uint64_t seed, int n_blocks,
                                int max_rows, int cols, double mu) {
  auto dims = testutil::random_block_dims(seed, n_blocks, max_rows);
  int rows = 0;
  for (int d : dims) rows += d;
  auto dense = testutil::random_dense(seed + 1, rows, cols, dims);
  auto b = testutil::random_vec(seed + 2, static_cast<size_t>(rows));
  std::vector<ProxableFunction> blocks;
  int off = 0;
  for (int d : dims) {
    blocks.push_back(ProxableFunction::least_squares(
        std::vector<double>(b.begin() + off, b.begin() + off + d)));
    off += d;
  }
  return make_problem(testutil::make_op(dense),
                      ProxableFunction::squared_l2(mu),
                      SeparableSum(std::move(blocks), dims));
}

}  // namespace

TEST_CASE("default step sizes satisfy the coupling rule with equality") {
  // Two single-row blocks with norms 2 and 4.
  std::vector<double> rows = {2.0, 4.0};
  auto op = BlockLinearOperator::from_dense(rows, 2, 1, {1, 1});

  SUBCASE("uniform probabilities") {
    auto sampler = SamplerSpec::uniform(2, 7);
    auto s = default_step_sizes(op, 0.99, sampler);
    CHECK(s.tau == doctest::Approx(0.12375).epsilon(1e-15));
    CHECK(s.sigma[0] == doctest::Approx(0.495).epsilon(1e-15));
    CHECK(s.sigma[1] == doctest::Approx(0.2475).epsilon(1e-15));
    auto rep = validate_step_sizes(s, op, sampler);
    CHECK(rep.pass);
    CHECK(rep.argmax_block == 1);
    // Equality at the largest block, strict inequality elsewhere.
    CHECK(std::abs(rep.max_ratio - 0.99 * 0.99) <= 1e-12);
    CHECK(rep.ratios[0] < 0.99 * 0.99 - 1e-3);
  }

  SUBCASE("non-uniform probabilities hit equality at every block") {
    auto sampler = SamplerSpec::with_probs({0.25, 0.75}, 7);
    auto s = default_step_sizes(op, 0.99, sampler);
    CHECK(s.tau == doctest::Approx(0.12375).epsilon(1e-15));
    auto rep = validate_step_sizes(s, op, sampler);
    CHECK(rep.pass);
    for (double r : rep.ratios)
      CHECK(std::abs(r - 0.99 * 0.99) <= 1e-12 * 0.99 * 0.99);
  }

  SUBCASE("coordinate-descent scaling shrinks tau by the block count") {
    auto d = default_step_sizes(op, 0.99, SamplerSpec::uniform(2, 7));
    auto c = fb_vc_cd_step_sizes(op, 0.99);
    CHECK(c.tau == doctest::Approx(d.tau / 2.0).epsilon(1e-15));
    CHECK(c.sigma == d.sigma);
    // The scaled rule sits strictly inside the admissible region.
    auto rep = validate_step_sizes(c, op, SamplerSpec::uniform(2, 7));
    CHECK(rep.pass);
    CHECK(rep.max_ratio < 0.99 * 0.99 / 1.5);
  }

  SUBCASE("rejections") {
    CHECK_THROWS_AS(default_step_sizes(op, 0.0, SamplerSpec::uniform(2, 7)),
                    std::invalid_argument);
    CHECK_THROWS_AS(default_step_sizes(op, 1.0, SamplerSpec::uniform(2, 7)),
                    std::invalid_argument);
    CHECK_THROWS_AS(default_step_sizes(op, 0.5, SamplerSpec::uniform(3, 7)),
                    std::invalid_argument);
    // A zero block admits no dual step.
    std::vector<double> z = {1.0, 0.0};
    auto opz = BlockLinearOperator::from_dense(z, 2, 1, {1, 1});
    CHECK_THROWS_AS(default_step_sizes(opz, 0.5, SamplerSpec::uniform(2, 7)),
                    std::invalid_argument);
    // Inflated tau violates the rule and the validator reports it.
    auto s = default_step_sizes(op, 0.99, SamplerSpec::uniform(2, 7));
    s.tau *= 1.5;
    auto rep = validate_step_sizes(s, op, SamplerSpec::uniform(2, 7));
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_ratio > 0.99 * 0.99);
  }
}

TEST_CASE("balanced step sizes for strongly convex terms") {
  std::vector<double> rows = {2.0, 4.0};
  auto op = BlockLinearOperator::from_dense(rows, 2, 1, {1, 1});
  SaddleProblem p = make_problem(
      std::move(op), ProxableFunction::squared_l2(2.0),
      SeparableSum({ProxableFunction::least_squares({1.0}),
                    ProxableFunction::least_squares({-1.0})},
                   {1, 1}));
  auto sampler = SamplerSpec::uniform(2, 3);
  auto s = strongly_convex_step_sizes(p, 0.99, sampler);
  const double r = std::sqrt(1.0 / 2.0);  // conjugates have modulus 1
  CHECK(s.tau == doctest::Approx(r * 0.99 / (2.0 * 4.0)).epsilon(1e-14));
  CHECK(s.sigma[0] == doctest::Approx(0.99 / (r * 2.0)).epsilon(1e-14));
  CHECK(s.sigma[1] == doctest::Approx(0.99 / (r * 4.0)).epsilon(1e-14));
  auto rep = validate_step_sizes(s, *p.op, sampler);
  CHECK(std::abs(rep.max_ratio - 0.99 * 0.99) <= 1e-12);

  CHECK_THROWS_AS(
      strongly_convex_step_sizes(p, 0.99, SamplerSpec::with_probs({0.3, 0.7}, 3)),
      std::invalid_argument);
  SaddleProblem weak = p;
  weak.g = ProxableFunction::l1(1.0);
  CHECK_THROWS_AS(strongly_convex_step_sizes(weak, 0.99, sampler),
                  std::invalid_argument);
}

TEST_CASE("frozen hand trace of the stochastic method") {
  // One 1x1 block A = [1], g = 0, f = indicator of {0}; tau = sigma = 1/2,
  // x0 = 1, y0 = 0. All iterates are dyadic rationals:
  //   x:       1, 1/2, 0, -3/8
  //   y next:  1/2, 3/4, 3/4, 9/16
  //   A^T ybar next: 1, 1, 3/4, 3/8
  std::vector<double> a = {1.0};
  SaddleProblem p = make_problem(
      BlockLinearOperator::from_dense(a, 1, 1, {1}), ProxableFunction::zero(),
      SeparableSum({ProxableFunction::indicator_point({0.0})}, {1}));
  StepSizes s;
  s.tau = 0.5;
  s.sigma = {0.5};
  s.gamma = 0.5;
  auto sampler = SamplerSpec::uniform(1, 11);
  auto st = make_initial_state(p, {1.0}, {0.0});
  auto sc = make_scratch(p);

  const double xs[] = {1.0, 0.5, 0.0, -0.375};
  const double ys[] = {0.5, 0.75, 0.75, 0.5625};
  const double bars[] = {1.0, 1.0, 0.75, 0.375};
  for (int k = 0; k < 4; ++k) {
    spdhg_step(p, s, sampler, st, sc);
    CHECK(st.x[0] == xs[k]);
    CHECK(st.y[0] == ys[k]);
    CHECK(st.aty_bar[0] == bars[k]);
  }
  CHECK(st.iter == 4);
  auto snap = st.ergodic.snapshot(st.y);
  CHECK(snap.x_av[0] == (1.0 + 0.5 + 0.0 - 0.375) / 4.0);
  CHECK(snap.y_av[0] == (0.5 + 0.75 + 0.75 + 0.5625) / 4.0);
}

TEST_CASE("step candidate matches the committed update bitwise") {
  auto p = random_ls_problem(91, 5, 3, 6, 0.5);
  auto sampler = SamplerSpec::with_probs({0.1, 0.3, 0.2, 0.25, 0.15}, 5);
  auto steps = default_step_sizes(*p.op, 0.9, sampler);
  auto st = make_initial_state(p);
  auto sc = make_scratch(p);
  StepCandidate cand;
  std::vector<double> y_prev = st.y;
  for (int k = 0; k < 60; ++k) {
    spdhg_step(p, steps, sampler, st, sc, &cand);
    REQUIRE(cand.drawn >= 0);
    // Off-drawn blocks unchanged; drawn block committed exactly as proposed.
    for (int i = 0; i < p.num_blocks(); ++i) {
      const int off = p.f.offset(i);
      for (int j = 0; j < p.f.block_dim(i); ++j) {
        const auto idx = static_cast<size_t>(off + j);
        if (i == cand.drawn) {
          CHECK(st.y[idx] == cand.y_hat[idx]);
        } else {
          CHECK(st.y[idx] == cand.y_before[idx]);
        }
      }
    }
    CHECK(cand.y_before == y_prev);
    y_prev = st.y;
  }
}

TEST_CASE("incremental adjoint caches stay synchronized") {
  auto p = random_ls_problem(17, 6, 4, 8, 0.2);
  auto sampler = SamplerSpec::uniform(6, 5);
  auto steps = default_step_sizes(*p.op, 0.95, sampler);
  RunConfig cfg;
  cfg.max_iters = 3000;
  cfg.log_every = 500;
  auto res = spdhg_run(p, steps, sampler, cfg);
  CHECK(res.max_sync_drift <= 1e-8);

  // After the run the stored adjoints agree with fresh recomputation.
  std::vector<double> fresh(static_cast<size_t>(p.primal_dim()), 0.0);
  p.op->adjoint(res.state.y, fresh);
  for (size_t j = 0; j < fresh.size(); ++j)
    CHECK(res.state.aty[j] == doctest::Approx(fresh[j]).epsilon(1e-9));
}

TEST_CASE("ergodic averages match a dense recomputation") {
  auto p = random_ls_problem(233, 4, 3, 5, 0.3);
  auto sampler = SamplerSpec::with_probs({0.4, 0.3, 0.2, 0.1}, 21);
  auto steps = default_step_sizes(*p.op, 0.9, sampler);
  auto st = make_initial_state(p);
  auto sc = make_scratch(p);
  std::vector<double> x_sum(static_cast<size_t>(p.primal_dim()), 0.0);
  std::vector<double> y_sum(static_cast<size_t>(p.dual_dim()), 0.0);
  const int K = 57;
  for (int k = 0; k < K; ++k) {
    spdhg_step(p, steps, sampler, st, sc);
    for (size_t j = 0; j < x_sum.size(); ++j) x_sum[j] += st.x[j];
    for (size_t j = 0; j < y_sum.size(); ++j) y_sum[j] += st.y[j];
    if (k == 20) {
      // Materializing mid-run must not disturb later accounting.
      auto mid = st.ergodic.snapshot(st.y);
      CHECK(mid.iter == 21);
    }
  }
  auto snap = st.ergodic.snapshot(st.y);
  REQUIRE(snap.iter == K);
  for (size_t j = 0; j < x_sum.size(); ++j)
    CHECK(snap.x_av[j] == doctest::Approx(x_sum[j] / K).epsilon(1e-13));
  for (size_t j = 0; j < y_sum.size(); ++j)
    CHECK(snap.y_av[j] == doctest::Approx(y_sum[j] / K).epsilon(1e-13));
}

TEST_CASE("runner logging, snapshots, and early stop") {
  auto p = random_ls_problem(5, 3, 2, 4, 1.0);
  auto sampler = SamplerSpec::uniform(3, 9);
  auto steps = default_step_sizes(*p.op, 0.9, sampler);

  MetricFn metrics = [&](const SolverState& st) {
    double nx = 0.0;
    for (double t : st.aty) nx += t * t;
    return std::vector<std::pair<std::string, double>>{
        {"aty_sq", nx},
        {"iter_copy", static_cast<double>(st.iter)},
        {"countdown", 1000.0 - static_cast<double>(st.iter)}};
  };

  SUBCASE("records appear at the configured cadence") {
    RunConfig cfg;
    cfg.max_iters = 100;
    cfg.log_every = 25;
    cfg.method = "spdhg";
    cfg.record_seed = 42;
    cfg.ergodic_snapshots = {10, 50, 100};
    auto res = spdhg_run(p, steps, sampler, cfg, metrics);
    REQUIRE(res.records.size() == 5);  // 0, 25, 50, 75, 100
    CHECK(res.records[0].iter == 0);
    CHECK(res.records[2].iter == 50);
    CHECK(res.records[2].epoch == doctest::Approx(50.0 / 3.0));
    CHECK(res.records.back().iter == 100);
    CHECK(res.records.back().seed == 42);
    CHECK(res.records.back().method == "spdhg");
    CHECK(res.records.back().metric("iter_copy", -1.0) == 100.0);
    REQUIRE(res.snapshots.size() == 3);
    CHECK(res.snapshots[1].iter == 50);
    CHECK_FALSE(res.stopped_early);
  }

  SUBCASE("zero cadence logs only the endpoints") {
    RunConfig cfg;
    cfg.max_iters = 37;
    auto res = spdhg_run(p, steps, sampler, cfg, metrics);
    REQUIRE(res.records.size() == 2);
    CHECK(res.records[0].iter == 0);
    CHECK(res.records[1].iter == 37);
  }

  SUBCASE("stop metric halts at a log point") {
    RunConfig cfg;
    cfg.max_iters = 10000;
    cfg.log_every = 10;
    cfg.stop_metric = "countdown";
    cfg.stop_tol = 970.0;  // countdown first reaches 970 at iteration 30
    auto res = spdhg_run(p, steps, sampler, cfg, metrics);
    CHECK(res.stopped_early);
    CHECK(res.records.back().iter == 30);
    CHECK(res.state.iter == 30);
  }

  SUBCASE("non-finite metrics raise a divergence error") {
    RunConfig cfg;
    cfg.max_iters = 100;
    cfg.log_every = 7;
    MetricFn bad = [&](const SolverState& st) {
      return std::vector<std::pair<std::string, double>>{
          {"v", st.iter >= 14 ? std::nan("") : 1.0}};
    };
    CHECK_THROWS_AS(spdhg_run(p, steps, sampler, cfg, bad), DivergenceError);
  }
}

TEST_CASE("deterministic full-dual variant is bitwise the n=1 stochastic run") {
  auto dense = testutil::random_dense(301, 6, 4, {6});
  auto b = testutil::random_vec(302, 6);
  SaddleProblem p = make_problem(
      testutil::make_op(dense), ProxableFunction::l1(0.05),
      SeparableSum({ProxableFunction::least_squares(b)}, {6}));

  MetricFn metrics = [&](const SolverState& st) {
    std::vector<std::pair<std::string, double>> m;
    for (size_t j = 0; j < st.x.size(); ++j)
      m.emplace_back("x" + std::to_string(j), st.x[j]);
    for (size_t j = 0; j < st.y.size(); ++j)
      m.emplace_back("y" + std::to_string(j), st.y[j]);
    return m;
  };
  RunConfig cfg;
  cfg.max_iters = 200;
  cfg.log_every = 20;

  auto det = pdhg_run(p, 0.9, cfg, metrics);
  auto sto = spdhg_run(p, default_step_sizes(*p.op, 0.9, SamplerSpec::uniform(1, 999)),
                       SamplerSpec::uniform(1, 999), cfg, metrics);
  REQUIRE(det.records.size() == sto.records.size());
  for (size_t r = 0; r < det.records.size(); ++r) {
    REQUIRE(det.records[r].metrics.size() == sto.records[r].metrics.size());
    for (size_t j = 0; j < det.records[r].metrics.size(); ++j)
      CHECK(det.records[r].metrics[j].second ==
            sto.records[r].metrics[j].second);
  }
  CHECK(det.state.x == sto.state.x);
  CHECK(det.state.y == sto.state.y);
}

TEST_CASE("full-dual variant solves a small least-squares saddle") {
  // g = 0, f = (1/2)||. - b||^2 over two blocks: minimizer solves the
  // normal equations A^T A x = A^T b.
  auto dense = testutil::random_dense(77, 6, 3, {3, 3});
  auto b = testutil::random_vec(78, 6);
  std::vector<ProxableFunction> blocks = {
      ProxableFunction::least_squares({b[0], b[1], b[2]}),
      ProxableFunction::least_squares({b[3], b[4], b[5]})};
  SaddleProblem p = make_problem(testutil::make_op(dense),
                                 ProxableFunction::zero(),
                                 SeparableSum(std::move(blocks), {3, 3}));
  RunConfig cfg;
  cfg.max_iters = 4000;
  auto res = pdhg_run(p, 0.95, cfg);
  auto xs = oracle::solve_normal_equations(dense.data, dense.rows, dense.cols,
                                           b, 0.0);
  for (int j = 0; j < 3; ++j)
    CHECK(res.state.x[static_cast<size_t>(j)] ==
          doctest::Approx(xs[static_cast<size_t>(j)]).epsilon(1e-6));
}

TEST_CASE("stochastic method approaches the regularized least-squares solution") {
  auto dense = testutil::random_dense(404, 8, 4, {2, 2, 2, 2});
  auto b = testutil::random_vec(405, 8);
  std::vector<ProxableFunction> blocks;
  for (int i = 0; i < 4; ++i)
    blocks.push_back(ProxableFunction::least_squares(
        {b[static_cast<size_t>(2 * i)], b[static_cast<size_t>(2 * i + 1)]}));
  const double mu = 0.5;
  SaddleProblem p = make_problem(testutil::make_op(dense),
                                 ProxableFunction::squared_l2(mu),
                                 SeparableSum(std::move(blocks), {2, 2, 2, 2}));
  auto sampler = SamplerSpec::uniform(4, 2024);
  auto steps = default_step_sizes(*p.op, 0.99, sampler);
  RunConfig cfg;
  cfg.max_iters = 60000;
  auto res = spdhg_run(p, steps, sampler, cfg);
  auto xs = oracle::solve_normal_equations(dense.data, dense.rows, dense.cols,
                                           b, mu);
  for (int j = 0; j < 4; ++j)
    CHECK(res.state.x[static_cast<size_t>(j)] ==
          doctest::Approx(xs[static_cast<size_t>(j)]).epsilon(1e-5));
}

TEST_CASE("problem validation rejects inconsistent shapes") {
  auto dense = testutil::random_dense(1, 4, 3, {2, 2});
  SaddleProblem p;
  p.op = std::make_shared<BlockLinearOperator>(testutil::make_op(dense));
  p.f = SeparableSum({ProxableFunction::least_squares({0.0, 0.0}),
                      ProxableFunction::least_squares({0.0, 0.0})},
                     {2, 2});
  CHECK_NOTHROW(p.validate());
  SaddleProblem wrong_count = p;
  wrong_count.f = SeparableSum({ProxableFunction::least_squares(
                                   {0.0, 0.0, 0.0, 0.0})},
                               {4});
  CHECK_THROWS_AS(wrong_count.validate(), std::invalid_argument);
  SaddleProblem wrong_g = p;
  wrong_g.g = ProxableFunction::indicator_point({1.0, 2.0});
  CHECK_THROWS_AS(wrong_g.validate(), std::invalid_argument);

  CHECK_FALSE(p.is_linear_constraint());
  SaddleProblem cons = p;
  cons.f = SeparableSum({ProxableFunction::indicator_point({1.0, 2.0}),
                         ProxableFunction::indicator_point({3.0, 4.0})},
                        {2, 2});
  CHECK(cons.is_linear_constraint());
  CHECK(cons.constraint_target() == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("variance-reduced gradient baseline reaches the ridge solution") {
  auto dense = testutil::random_dense(550, 10, 4, BlockLinearOperator::unit_blocks(10));
  auto b = testutil::random_vec(551, 10);
  std::vector<ProxableFunction> blocks;
  for (int i = 0; i < 10; ++i)
    blocks.push_back(ProxableFunction::least_squares({b[static_cast<size_t>(i)]}));
  const double mu = 0.3;
  SaddleProblem p = make_problem(
      testutil::make_op(dense), ProxableFunction::squared_l2(mu),
      SeparableSum(std::move(blocks), std::vector<int>(10, 1)));

  PrimalMetricFn metrics = [&](const std::vector<double>& x) {
    double nx = 0.0;
    for (double t : x) nx += t * t;
    return std::vector<std::pair<std::string, double>>{{"x_sq", nx}};
  };
  SvrgConfig cfg;
  cfg.max_outer = 400;
  cfg.draw_seed = 31;
  auto res = svrg_run(p, cfg, metrics);
  auto xs = oracle::solve_normal_equations(dense.data, dense.rows, dense.cols,
                                           b, mu);
  for (int j = 0; j < 4; ++j)
    CHECK(res.state.x[static_cast<size_t>(j)] ==
          doctest::Approx(xs[static_cast<size_t>(j)]).epsilon(1e-6));
  // Epoch accounting: one pass per snapshot plus inner/n passes.
  CHECK(res.records.back().epoch ==
        doctest::Approx(400.0 * (1.0 + 2.0)).epsilon(1e-12));

  SaddleProblem hinge_prob = p;
  hinge_prob.f = SeparableSum::uniform(ProxableFunction::hinge(0.1), 10, 1);
  CHECK_THROWS_AS(svrg_run(hinge_prob, cfg, metrics), std::invalid_argument);
}

TEST_CASE("dual coordinate ascent baseline") {
  SUBCASE("least-squares blocks reach the ridge solution") {
    auto dense = testutil::random_dense(660, 12, 5,
                                        BlockLinearOperator::unit_blocks(12));
    auto b = testutil::random_vec(661, 12);
    std::vector<ProxableFunction> blocks;
    for (int i = 0; i < 12; ++i)
      blocks.push_back(
          ProxableFunction::least_squares({b[static_cast<size_t>(i)]}));
    const double mu = 0.4;
    SaddleProblem p = make_problem(
        testutil::make_op(dense), ProxableFunction::squared_l2(mu),
        SeparableSum(std::move(blocks), std::vector<int>(12, 1)));
    SdcaConfig cfg;
    cfg.max_epochs = 600;
    cfg.draw_seed = 88;
    auto res = sdca_run(p, cfg);
    auto xs = oracle::solve_normal_equations(dense.data, dense.rows,
                                             dense.cols, b, mu);
    for (int j = 0; j < 5; ++j)
      CHECK(res.state.x[static_cast<size_t>(j)] ==
            doctest::Approx(xs[static_cast<size_t>(j)]).epsilon(1e-6));
    CHECK(res.records.back().epoch == doctest::Approx(600.0));
  }

  SUBCASE("hinge blocks reach the full-dual variant's objective") {
    // Tiny separable margin problem; rows already carry the labels.
    std::vector<double> rows = {1.0, 0.4,  0.9, 0.6,  1.1, 0.2,
                                0.8, -0.9, 1.2, -0.7, 0.7, -1.1};
    auto op = BlockLinearOperator::from_dense(rows, 6, 2,
                                              BlockLinearOperator::unit_blocks(6));
    const double lam = 0.05;
    SaddleProblem p = make_problem(
        std::move(op), ProxableFunction::squared_l2(lam),
        SeparableSum::uniform(ProxableFunction::hinge(1.0 / 6.0), 6, 1));

    auto objective = [&](const std::vector<double>& x) {
      auto ax = p.op->apply(x);
      return p.g.value(x) + p.f.value(ax);
    };
    SdcaConfig cfg;
    cfg.max_epochs = 4000;
    cfg.draw_seed = 19;
    auto res = sdca_run(p, cfg);

    RunConfig pcfg;
    pcfg.max_iters = 30000;
    auto det = pdhg_run(p, 0.95, pcfg);
    CHECK(objective(res.state.x) ==
          doctest::Approx(objective(det.state.x)).epsilon(1e-5));
  }

  SUBCASE("rejections") {
    auto dense = testutil::random_dense(1, 4, 3, {2, 2});
    SaddleProblem p = make_problem(
        testutil::make_op(dense), ProxableFunction::squared_l2(1.0),
        SeparableSum({ProxableFunction::least_squares({0.0, 0.0}),
                      ProxableFunction::least_squares({0.0, 0.0})},
                     {2, 2}));
    SdcaConfig cfg;
    cfg.max_epochs = 1;
    CHECK_THROWS_AS(sdca_run(p, cfg), std::invalid_argument);  // wide blocks
    auto unit = testutil::random_dense(2, 4, 3,
                                       BlockLinearOperator::unit_blocks(4));
    SaddleProblem q = make_problem(
        testutil::make_op(unit), ProxableFunction::l1(1.0),
        SeparableSum::uniform(ProxableFunction::hinge(0.25), 4, 1));
    CHECK_THROWS_AS(sdca_run(q, cfg), std::invalid_argument);  // g not ridge
  }
}
