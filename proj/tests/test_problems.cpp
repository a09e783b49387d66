#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracle.hpp"
#include "spdhg/diagnostics.hpp"
#include "spdhg/problems.hpp"
#include "test_util.hpp"

using namespace spdhg;

namespace {

GeneratorSpec base_spec(ProblemKind kind, int n, int p, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = kind;
  s.n = n;
  s.p = p;
  s.seed = seed;
  return s;
}

std::vector<double> solve_pdhg(const SaddleProblem& prob, long iters,
                               double gamma = 0.95) {
  RunConfig cfg;
  cfg.max_iters = iters;
  return pdhg_run(prob, gamma, cfg).state.x;
}

std::vector<double> dense_of(const BlockLinearOperator& op) {
  std::vector<double> dense(static_cast<size_t>(op.rows()) * op.cols(), 0.0);
  for (const Triplet& t : op.to_triplets())
    dense[static_cast<size_t>(t.row) * op.cols() + t.col] = t.value;
  return dense;
}

void check_same_triplets(const BlockLinearOperator& a,
                         const BlockLinearOperator& b) {
  const auto ta = a.to_triplets();
  const auto tb = b.to_triplets();
  REQUIRE(ta.size() == tb.size());
  for (size_t k = 0; k < ta.size(); ++k) {
    CHECK(ta[k].row == tb[k].row);
    CHECK(ta[k].col == tb[k].col);
    CHECK(ta[k].value == tb[k].value);
  }
}

void expect_parse_error(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  try {
    parse_libsvm(in, {}, "mem");
    FAIL("expected parse failure for: " << text);
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "missing '" << needle << "' in: " << what);
    CHECK(what.find("mem:") != std::string::npos);
  }
}

}  // namespace

TEST_CASE("generator spec validation") {
  auto ok = base_spec(ProblemKind::Lasso, 10, 5, 1);
  ok.lambda = 0.0;  // L1 weight zero is allowed
  CHECK_NOTHROW(ok.validate());

  auto bad = ok;
  bad.n = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.p = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.rho = -0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.sparsity = 6;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.sparsity = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.group_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.margin = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  auto ridge = base_spec(ProblemKind::Ridge, 10, 5, 1);
  CHECK_THROWS_AS(ridge.validate(), std::invalid_argument);  // lambda == 0
  ridge.lambda = 0.1;
  CHECK_NOTHROW(ridge.validate());
  auto svm = base_spec(ProblemKind::SvmHinge, 10, 5, 1);
  CHECK_THROWS_AS(svm.validate(), std::invalid_argument);
  svm.lambda = 0.1;
  CHECK_NOTHROW(svm.validate());

  CHECK_THROWS_AS(gen_svm(ok), std::invalid_argument);       // kind mismatch
  CHECK_THROWS_AS(gen_basis_pursuit(ridge), std::invalid_argument);
  CHECK_THROWS_AS(gen_regression(svm), std::invalid_argument);
}

TEST_CASE("problem kind names round-trip") {
  for (ProblemKind k : {ProblemKind::BasisPursuit, ProblemKind::Lasso,
                        ProblemKind::Ridge, ProblemKind::SvmHinge})
    CHECK(problem_kind_from_name(problem_kind_name(k)) == k);
  CHECK_THROWS_AS(problem_kind_from_name("quadratic"), std::invalid_argument);
}

TEST_CASE("basis pursuit plants an exactly feasible sparse point") {
  auto spec = base_spec(ProblemKind::BasisPursuit, 15, 40, 7);
  spec.rho = 0.5;
  spec.sparsity = 5;
  auto gp = gen_basis_pursuit(spec);

  CHECK(gp.problem.g.kind() == FuncKind::L1);
  CHECK(gp.problem.g.param() == 1.0);
  CHECK(gp.problem.num_blocks() == 15);
  CHECK(gp.problem.is_linear_constraint());
  for (int i = 0; i < 15; ++i)
    CHECK(gp.problem.f.block(i).kind() == FuncKind::IndicatorPoint);

  int nonzeros = 0;
  for (double v : gp.x_planted) nonzeros += v != 0.0 ? 1 : 0;
  CHECK(nonzeros == 5);

  // The planted point satisfies the constraint to the last bit.
  const auto ax = gp.problem.op->apply(gp.x_planted);
  REQUIRE(ax.size() == gp.targets.size());
  for (size_t i = 0; i < ax.size(); ++i) CHECK(ax[i] == gp.targets[i]);
  CHECK(feasibility(gp.problem, gp.x_planted) == 0.0);

  double l1 = 0.0;
  for (double v : gp.x_planted) l1 += std::abs(v);
  CHECK(objective_value(gp.problem, gp.x_planted) == doctest::Approx(l1).epsilon(1e-15));

  CHECK(gp.problem.reference == nullptr);
  CHECK(generate(spec).targets == gp.targets);  // dispatch hits the same path
}

TEST_CASE("generation is deterministic in spec and seed") {
  for (ProblemKind kind :
       {ProblemKind::BasisPursuit, ProblemKind::Lasso, ProblemKind::SvmHinge}) {
    auto spec = base_spec(kind, 12, 9, 42);
    spec.rho = 0.3;
    spec.sparsity = 4;
    spec.lambda = 0.5;
    auto a = generate(spec);
    auto b = generate(spec);
    check_same_triplets(*a.problem.op, *b.problem.op);
    CHECK(a.targets == b.targets);
    CHECK(a.x_planted == b.x_planted);

    // A different seed draws a different data matrix (svm labels alone are
    // seed-independent, so compare entries).
    auto other = spec;
    other.seed = 43;
    const auto ta = a.problem.op->to_triplets();
    const auto tb = generate(other).problem.op->to_triplets();
    bool any_diff = ta.size() != tb.size();
    for (size_t k = 0; !any_diff && k < ta.size(); ++k)
      any_diff = ta[k].value != tb[k].value;
    CHECK(any_diff);
  }
}

TEST_CASE("row sampling matches the requested feature covariance") {
  // Monte Carlo sample covariance over many rows.
  auto run = [](double rho) {
    auto spec = base_spec(ProblemKind::BasisPursuit, 10000, 6, 11);
    spec.rho = rho;
    auto gp = gen_basis_pursuit(spec);
    const auto dense = dense_of(*gp.problem.op);
    const int n = spec.n, p = spec.p;
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < p; ++k) {
        double c = 0.0;
        for (int r = 0; r < n; ++r)
          c += dense[static_cast<size_t>(r) * p + j] *
               dense[static_cast<size_t>(r) * p + k];
        c /= n;
        CHECK(std::abs(c - std::pow(rho, std::abs(j - k))) < 0.1);
      }
    }
  };
  run(0.0);
  run(0.6);
}

TEST_CASE("regression noise has the pinned scale") {
  auto spec = base_spec(ProblemKind::Lasso, 2000, 3, 19);
  spec.sparsity = 2;
  spec.lambda = 0.1;
  auto gp = gen_regression(spec);
  const auto ax = gp.problem.op->apply(gp.x_planted);
  double sq = 0.0;
  for (size_t i = 0; i < ax.size(); ++i) {
    const double r = gp.targets[i] - ax[i];
    sq += r * r;
  }
  const double stddev = std::sqrt(sq / static_cast<double>(ax.size()));
  CHECK(stddev == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("ridge instance agrees with the dense normal-equations solve") {
  auto spec = base_spec(ProblemKind::Ridge, 25, 8, 3);
  spec.rho = 0.3;
  spec.sparsity = 4;
  spec.lambda = 0.7;
  auto gp = gen_regression(spec);
  CHECK(gp.problem.g.kind() == FuncKind::SquaredL2);

  // Objective at the origin is half the squared target norm.
  double half_b_sq = 0.0;
  for (double b : gp.targets) half_b_sq += 0.5 * b * b;
  CHECK(objective_value(gp.problem, std::vector<double>(8, 0.0)) ==
        doctest::Approx(half_b_sq).epsilon(1e-12));

  const auto x_star = oracle::solve_normal_equations(
      dense_of(*gp.problem.op), spec.n, spec.p, gp.targets, spec.lambda);
  const auto x = solve_pdhg(gp.problem, 30000);
  for (int j = 0; j < spec.p; ++j)
    CHECK(x[static_cast<size_t>(j)] ==
          doctest::Approx(x_star[static_cast<size_t>(j)]).epsilon(1e-6));
}

TEST_CASE("lasso at the null threshold solves to zero") {
  auto spec = base_spec(ProblemKind::Lasso, 12, 6, 5);
  spec.rho = 0.2;
  spec.sparsity = 3;
  spec.lambda = 1.0;
  auto probe = gen_regression(spec);
  const auto atb = probe.problem.op->adjoint(probe.targets);
  double thresh = 0.0;
  for (double v : atb) thresh = std::max(thresh, std::abs(v));
  REQUIRE(thresh > 0.0);

  auto above = spec;
  above.lambda = 1.01 * thresh;
  auto gp = gen_regression(above);
  CHECK(gp.targets == probe.targets);  // lambda does not perturb the data
  double sup = 0.0;
  for (double v : solve_pdhg(gp.problem, 5000)) sup = std::max(sup, std::abs(v));
  CHECK(sup <= 1e-6);

  auto below = spec;
  below.lambda = 0.5 * thresh;
  double nrm = 0.0;
  for (double v : solve_pdhg(gen_regression(below).problem, 5000))
    nrm += v * v;
  CHECK(std::sqrt(nrm) > 1e-3);
}

TEST_CASE("svm instance has unit objective at the origin") {
  auto spec = base_spec(ProblemKind::SvmHinge, 30, 5, 9);
  spec.lambda = 1e-3;
  spec.margin = 8.0;
  auto gp = gen_svm(spec);

  CHECK(gp.x_planted.empty());
  CHECK(objective_value(gp.problem, std::vector<double>(5, 0.0)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 15; ++i) CHECK(gp.targets[static_cast<size_t>(i)] == 1.0);
  for (int i = 15; i < 30; ++i) CHECK(gp.targets[static_cast<size_t>(i)] == -1.0);
  for (int i = 0; i < gp.problem.num_blocks(); ++i) {
    CHECK(gp.problem.f.block(i).kind() == FuncKind::Hinge);
    CHECK(gp.problem.f.block(i).param() == doctest::Approx(1.0 / 30.0));
  }
}

TEST_CASE("well-separated svm drives the hinge loss to zero") {
  auto spec = base_spec(ProblemKind::SvmHinge, 30, 5, 9);
  spec.lambda = 1e-3;
  spec.margin = 8.0;
  auto gp = gen_svm(spec);
  const auto x = solve_pdhg(gp.problem, 20000);
  const auto ax = gp.problem.op->apply(x);
  CHECK(gp.problem.f.value(ax) < 1e-3);

  auto heavy = spec;
  heavy.lambda = 1e7;
  double nrm = 0.0;
  for (double v : solve_pdhg(gen_svm(heavy).problem, 5000)) nrm += v * v;
  CHECK(std::sqrt(nrm) <= 1e-3);
}

TEST_CASE("grouped rows partition the dual blocks") {
  auto spec = base_spec(ProblemKind::Lasso, 10, 4, 21);
  spec.sparsity = 2;
  spec.lambda = 0.05;
  auto flat = gen_regression(spec);
  auto grouped_spec = spec;
  grouped_spec.group_size = 3;
  auto grouped = gen_regression(grouped_spec);

  CHECK(grouped.problem.num_blocks() == 4);
  CHECK(grouped.problem.f.block_dim(0) == 3);
  CHECK(grouped.problem.f.block_dim(3) == 1);
  CHECK(grouped.problem.dual_dim() == 10);
  check_same_triplets(*flat.problem.op, *grouped.problem.op);
  // Block targets are contiguous slices of b.
  int at = 0;
  for (int i = 0; i < grouped.problem.num_blocks(); ++i) {
    const auto& tgt = grouped.problem.f.block(i).target();
    for (double v : tgt) CHECK(v == grouped.targets[static_cast<size_t>(at++)]);
  }
  // Same minimizer regardless of the partition.
  const auto xa = solve_pdhg(flat.problem, 20000);
  const auto xb = solve_pdhg(grouped.problem, 20000);
  for (int j = 0; j < spec.p; ++j)
    CHECK(xa[static_cast<size_t>(j)] ==
          doctest::Approx(xb[static_cast<size_t>(j)]).epsilon(1e-5));
}

TEST_CASE("libsvm parser accepts the standard shapes") {
  std::istringstream in("1 1:0.5 3:2.5\n-1 2:1e-3\n\n+1 1:2\r\n");
  const auto data = parse_libsvm(in);
  CHECK(data.rows == 3);
  CHECK(data.cols == 3);
  REQUIRE(data.labels.size() == 3);
  CHECK(data.labels[0] == 1.0);
  CHECK(data.labels[1] == -1.0);
  CHECK(data.labels[2] == 1.0);
  REQUIRE(data.entries.size() == 4);
  CHECK(data.entries[0].row == 0);
  CHECK(data.entries[0].col == 0);
  CHECK(data.entries[0].value == 0.5);
  CHECK(data.entries[1].col == 2);
  CHECK(data.entries[2].row == 1);
  CHECK(data.entries[2].value == 1e-3);
  CHECK(data.entries[3].row == 2);

  LibsvmOptions wide;
  wide.p_override = 7;
  std::istringstream in2("1 1:1\n");
  CHECK(parse_libsvm(in2, wide).cols == 7);

  LibsvmOptions norm;
  norm.normalize = true;
  std::istringstream in3("1 1:3 2:4\n");
  const auto unit = parse_libsvm(in3, norm);
  CHECK(unit.entries[0].value == 3.0 / 5.0);
  CHECK(unit.entries[1].value == 4.0 / 5.0);
}

TEST_CASE("libsvm parser reports malformed lines by number") {
  expect_parse_error("x 1:2\n", "bad label");
  expect_parse_error("1 0:2\n", "bad feature index");
  expect_parse_error("1 a:2\n", "bad feature index");
  expect_parse_error("1 2:1 2:3\n", "strictly increasing");
  expect_parse_error("1 3:1 2:5\n", "strictly increasing");
  expect_parse_error("1 2:x\n", "bad feature value");
  expect_parse_error("1 2\n", "expected index:value");
  expect_parse_error("1 :2\n", "expected index:value");
  expect_parse_error("1 2:\n", "expected index:value");

  // Line numbers point at the offending line.
  std::istringstream in("1 1:1\n1 1:1\nbroken\n");
  try {
    parse_libsvm(in, {}, "mem");
    FAIL("expected parse failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("mem:3") != std::string::npos);
  }

  LibsvmOptions cap;
  cap.p_override = 2;
  std::istringstream over("1 3:1\n");
  CHECK_THROWS_WITH_AS(parse_libsvm(over, cap, "mem"),
                       "mem:1: feature index 3 exceeds dimension 2",
                       std::runtime_error);
}

TEST_CASE("libsvm write and load round-trips bit-identically") {
  RngStream rng(77);
  LibsvmData data;
  data.rows = 100;
  data.cols = 30;
  for (int r = 0; r < data.rows; ++r) {
    data.labels.push_back(rng.next_normal() * 3.0);
    for (int c = 0; c < data.cols; ++c) {
      if (rng.next_uniform() < 0.3) {
        const double scale = std::pow(10.0, std::floor(rng.next_uniform() * 21.0) - 10.0);
        data.entries.push_back({r, c, rng.next_normal() * scale});
      }
    }
  }
  // Pin an entry in the last column so the dimension survives the trip.
  data.entries.push_back({data.rows - 1, data.cols - 1, 1.0});

  const auto path =
      (std::filesystem::temp_directory_path() / "spdhg_libsvm_roundtrip.txt")
          .string();
  save_libsvm(path, data);
  const auto back = load_libsvm(path);
  std::filesystem::remove(path);

  CHECK(back.rows == data.rows);
  CHECK(back.cols == data.cols);
  REQUIRE(back.labels.size() == data.labels.size());
  for (size_t i = 0; i < data.labels.size(); ++i)
    CHECK(back.labels[i] == data.labels[i]);
  REQUIRE(back.entries.size() == data.entries.size());
  for (size_t k = 0; k < data.entries.size(); ++k) {
    CHECK(back.entries[k].row == data.entries[k].row);
    CHECK(back.entries[k].col == data.entries[k].col);
    CHECK(back.entries[k].value == data.entries[k].value);
  }
}

TEST_CASE("loaded data assembles every problem kind") {
  std::istringstream in("1 1:1 2:2\n-1 1:3\n");
  const auto data = parse_libsvm(in);

  auto lasso = problem_from_data(data, ProblemKind::Lasso, 0.3);
  CHECK(lasso.problem.g.kind() == FuncKind::L1);
  CHECK(lasso.problem.g.param() == 0.3);
  CHECK(lasso.problem.f.block(0).kind() == FuncKind::LeastSquares);
  CHECK(lasso.targets == std::vector<double>{1.0, -1.0});

  auto bp = problem_from_data(data, ProblemKind::BasisPursuit, 0.0);
  CHECK(bp.problem.is_linear_constraint());

  auto svm = problem_from_data(data, ProblemKind::SvmHinge, 0.5);
  const auto t = svm.problem.op->to_triplets();
  REQUIRE(t.size() == 3);
  CHECK(t[0].value == 1.0);   // label +1 leaves the row alone
  CHECK(t[2].value == -3.0);  // label -1 flips it

  std::istringstream badlab("2 1:1\n");
  const auto bad = parse_libsvm(badlab);
  CHECK_THROWS_AS(problem_from_data(bad, ProblemKind::SvmHinge, 0.5),
                  std::invalid_argument);

  std::istringstream empty("1\n");
  const auto no_features = parse_libsvm(empty);
  CHECK(no_features.cols == 0);
  CHECK_THROWS_AS(problem_from_data(no_features, ProblemKind::Lasso, 0.1),
                  std::invalid_argument);
}

TEST_CASE("generated problems serialize and reload bit-identically") {
  for (ProblemKind kind :
       {ProblemKind::Lasso, ProblemKind::BasisPursuit, ProblemKind::SvmHinge}) {
    auto spec = base_spec(kind, 14, 6, 31);
    spec.sparsity = 3;
    spec.lambda = 0.4;
    spec.group_size = 4;
    auto gp = generate(spec);
    const auto data = to_libsvm(gp);
    const auto back = problem_from_data(data, kind, spec.lambda, spec.group_size);
    check_same_triplets(*gp.problem.op, *back.problem.op);
    CHECK(back.targets == gp.targets);
    CHECK(back.problem.num_blocks() == gp.problem.num_blocks());
    CHECK(back.problem.g.kind() == gp.problem.g.kind());
  }
}
