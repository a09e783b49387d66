#include "spdhg/problems.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "spdhg/rng.hpp"

namespace spdhg {

namespace {

// Rows per dual block: group_size rows each, last block takes the remainder.
std::vector<int> grouped_dims(int rows, int group_size) {
  std::vector<int> dims;
  for (int at = 0; at < rows; at += group_size)
    dims.push_back(std::min(group_size, rows - at));
  return dims;
}

// Lower Cholesky factor of the AR(1) covariance Sigma_jk = rho^|j-k|,
// row-major p x p. Positive definite for |rho| < 1.
std::vector<double> ar1_cholesky(int p, double rho) {
  std::vector<double> pw(static_cast<size_t>(p), 1.0);
  for (int d = 1; d < p; ++d) pw[static_cast<size_t>(d)] = pw[d - 1] * rho;
  std::vector<double> chol(static_cast<size_t>(p) * p, 0.0);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k <= j; ++k) {
      double s = pw[static_cast<size_t>(j - k)];
      for (int t = 0; t < k; ++t)
        s -= chol[static_cast<size_t>(j) * p + t] *
             chol[static_cast<size_t>(k) * p + t];
      chol[static_cast<size_t>(j) * p + k] =
          (k == j) ? std::sqrt(s) : s / chol[static_cast<size_t>(k) * p + k];
    }
  }
  return chol;
}

bool all_zero(std::span<const double> v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

// n rows a_r = L eps_r with eps_r ~ N(0, I); a zero row (measure zero) is
// redrawn so every block norm is positive.
std::vector<double> draw_gaussian_rows(RngStream& rng, int n, int p,
                                       const std::vector<double>& chol) {
  std::vector<double> dense(static_cast<size_t>(n) * p);
  std::vector<double> eps(static_cast<size_t>(p));
  for (int r = 0; r < n; ++r) {
    std::span<double> row(dense.data() + static_cast<size_t>(r) * p,
                          static_cast<size_t>(p));
    do {
      for (int j = 0; j < p; ++j) eps[static_cast<size_t>(j)] = rng.next_normal();
      for (int j = 0; j < p; ++j) {
        double s = 0.0;
        for (int k = 0; k <= j; ++k)
          s += chol[static_cast<size_t>(j) * p + k] * eps[static_cast<size_t>(k)];
        row[static_cast<size_t>(j)] = s;
      }
    } while (all_zero(row));
  }
  return dense;
}

// Sparse planted point: `sparsity` distinct positions by partial
// Fisher-Yates, then standard normal values in draw order.
std::vector<double> draw_planted(RngStream& rng, int p, int sparsity) {
  std::vector<int> idx(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) idx[static_cast<size_t>(j)] = j;
  for (int k = 0; k < sparsity; ++k) {
    const int j = k + static_cast<int>(rng.next_index(
                          static_cast<std::uint64_t>(p - k)));
    std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(j)]);
  }
  std::vector<double> x(static_cast<size_t>(p), 0.0);
  for (int k = 0; k < sparsity; ++k)
    x[static_cast<size_t>(idx[static_cast<size_t>(k)])] = rng.next_normal();
  return x;
}

std::vector<double> slice_copy(const std::vector<double>& v, int at, int len) {
  return std::vector<double>(v.begin() + at, v.begin() + at + len);
}

SeparableSum targeted_blocks(FuncKind kind, const std::vector<double>& b,
                             const std::vector<int>& dims) {
  std::vector<ProxableFunction> blocks;
  blocks.reserve(dims.size());
  int at = 0;
  for (int d : dims) {
    blocks.push_back(kind == FuncKind::IndicatorPoint
                         ? ProxableFunction::indicator_point(slice_copy(b, at, d))
                         : ProxableFunction::least_squares(slice_copy(b, at, d)));
    at += d;
  }
  return SeparableSum(std::move(blocks), dims);
}

SeparableSum hinge_blocks(int rows, const std::vector<int>& dims) {
  std::vector<ProxableFunction> blocks(
      dims.size(), ProxableFunction::hinge(1.0 / static_cast<double>(rows)));
  return SeparableSum(std::move(blocks), dims);
}

void require_kind(const GeneratorSpec& spec, bool ok, const char* expected) {
  if (!ok)
    throw std::invalid_argument(std::string("generator expects kind ") +
                                expected + ", got " +
                                problem_kind_name(spec.kind));
}

double parse_full_double(std::string_view tok, bool& ok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);  // "+1" labels
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = res.ec == std::errc() && res.ptr == tok.data() + tok.size() &&
       !tok.empty();
  return v;
}

int parse_full_int(std::string_view tok, bool& ok) {
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = res.ec == std::errc() && res.ptr == tok.data() + tok.size();
  return v;
}

}  // namespace

const char* problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::BasisPursuit: return "basis_pursuit";
    case ProblemKind::Lasso: return "lasso";
    case ProblemKind::Ridge: return "ridge";
    case ProblemKind::SvmHinge: return "svm_hinge";
  }
  return "?";
}

ProblemKind problem_kind_from_name(const std::string& name) {
  for (ProblemKind k : {ProblemKind::BasisPursuit, ProblemKind::Lasso,
                        ProblemKind::Ridge, ProblemKind::SvmHinge}) {
    if (name == problem_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown problem kind '" + name + "'");
}

void GeneratorSpec::validate() const {
  if (n < 1 || p < 1)
    throw std::invalid_argument("generator needs n >= 1 and p >= 1");
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("rho must lie in [0, 1)");
  if (sparsity < 0 || sparsity > p)
    throw std::invalid_argument("sparsity must lie in [0, p]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be finite and >= 0");
  if ((kind == ProblemKind::Ridge || kind == ProblemKind::SvmHinge) &&
      lambda <= 0.0)
    throw std::invalid_argument(std::string(problem_kind_name(kind)) +
                                " needs lambda > 0");
  if (!(margin >= 0.0) || !std::isfinite(margin))
    throw std::invalid_argument("margin must be finite and >= 0");
  if (group_size < 1)
    throw std::invalid_argument("group_size must be >= 1");
}

GeneratedProblem generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case ProblemKind::BasisPursuit: return gen_basis_pursuit(spec);
    case ProblemKind::Lasso:
    case ProblemKind::Ridge: return gen_regression(spec);
    case ProblemKind::SvmHinge: return gen_svm(spec);
  }
  throw std::invalid_argument("unknown problem kind");
}

GeneratedProblem gen_basis_pursuit(const GeneratorSpec& spec) {
  spec.validate();
  require_kind(spec, spec.kind == ProblemKind::BasisPursuit, "basis_pursuit");
  RngStream rng(spec.seed);
  const auto chol = ar1_cholesky(spec.p, spec.rho);
  const auto dense = draw_gaussian_rows(rng, spec.n, spec.p, chol);
  const auto dims = grouped_dims(spec.n, spec.group_size);
  auto op = std::make_shared<BlockLinearOperator>(
      BlockLinearOperator::from_dense(dense, spec.n, spec.p, dims));

  GeneratedProblem gp;
  gp.spec = spec;
  gp.x_planted = draw_planted(rng, spec.p, spec.sparsity);
  gp.targets = op->apply(gp.x_planted);  // feasible by construction, exactly
  gp.problem.g = ProxableFunction::l1(1.0);
  gp.problem.f = targeted_blocks(FuncKind::IndicatorPoint, gp.targets, dims);
  gp.problem.op = std::move(op);
  gp.problem.validate();
  return gp;
}

GeneratedProblem gen_regression(const GeneratorSpec& spec) {
  spec.validate();
  require_kind(spec,
               spec.kind == ProblemKind::Lasso || spec.kind == ProblemKind::Ridge,
               "lasso or ridge");
  RngStream rng(spec.seed);
  const auto chol = ar1_cholesky(spec.p, spec.rho);
  const auto dense = draw_gaussian_rows(rng, spec.n, spec.p, chol);
  const auto dims = grouped_dims(spec.n, spec.group_size);
  auto op = std::make_shared<BlockLinearOperator>(
      BlockLinearOperator::from_dense(dense, spec.n, spec.p, dims));

  GeneratedProblem gp;
  gp.spec = spec;
  gp.x_planted = draw_planted(rng, spec.p, spec.sparsity);
  gp.targets = op->apply(gp.x_planted);
  for (double& t : gp.targets) t += 0.1 * rng.next_normal();
  gp.problem.g = spec.kind == ProblemKind::Lasso
                     ? ProxableFunction::l1(spec.lambda)
                     : ProxableFunction::squared_l2(spec.lambda);
  gp.problem.f = targeted_blocks(FuncKind::LeastSquares, gp.targets, dims);
  gp.problem.op = std::move(op);
  gp.problem.validate();
  return gp;
}

GeneratedProblem gen_svm(const GeneratorSpec& spec) {
  spec.validate();
  require_kind(spec, spec.kind == ProblemKind::SvmHinge, "svm_hinge");
  RngStream rng(spec.seed);

  std::vector<double> dir(static_cast<size_t>(spec.p));
  double nrm = 0.0;
  do {
    nrm = 0.0;
    for (double& u : dir) {
      u = rng.next_normal();
      nrm += u * u;
    }
  } while (nrm == 0.0);
  nrm = std::sqrt(nrm);
  for (double& u : dir) u /= nrm;

  const int n = spec.n;
  const int p = spec.p;
  std::vector<double> dense(static_cast<size_t>(n) * p);
  std::vector<double> labels(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    const double lab = r < (n + 1) / 2 ? 1.0 : -1.0;
    labels[static_cast<size_t>(r)] = lab;
    std::span<double> row(dense.data() + static_cast<size_t>(r) * p,
                          static_cast<size_t>(p));
    do {
      for (int j = 0; j < p; ++j) {
        const double feat =
            lab * 0.5 * spec.margin * dir[static_cast<size_t>(j)] +
            rng.next_normal();
        row[static_cast<size_t>(j)] = lab * feat;  // label folded into the row
      }
    } while (all_zero(row));
  }

  const auto dims = grouped_dims(n, spec.group_size);
  GeneratedProblem gp;
  gp.spec = spec;
  gp.targets = std::move(labels);
  gp.problem.g = ProxableFunction::squared_l2(spec.lambda);
  gp.problem.f = hinge_blocks(n, dims);
  gp.problem.op = std::make_shared<BlockLinearOperator>(
      BlockLinearOperator::from_dense(dense, n, p, dims));
  gp.problem.validate();
  return gp;
}

LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& opts,
                        const std::string& origin) {
  if (opts.p_override < 0)
    throw std::invalid_argument("p_override must be >= 0");
  LibsvmData data;
  int max_idx = 0;
  std::string line;
  long lineno = 0;
  auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream toks(line);
    std::string tok;
    if (!(toks >> tok)) continue;  // blank line
    bool ok = false;
    const double label = parse_full_double(tok, ok);
    if (!ok) fail("bad label '" + tok + "'");
    const size_t row_begin = data.entries.size();
    int last_idx = 0;
    while (toks >> tok) {
      const size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        fail("expected index:value, got '" + tok + "'");
      const int idx = parse_full_int(std::string_view(tok).substr(0, colon), ok);
      if (!ok || idx < 1) fail("bad feature index in '" + tok + "'");
      if (idx <= last_idx)
        fail("feature indices must be strictly increasing at '" + tok + "'");
      if (opts.p_override > 0 && idx > opts.p_override)
        fail("feature index " + std::to_string(idx) + " exceeds dimension " +
             std::to_string(opts.p_override));
      const double value =
          parse_full_double(std::string_view(tok).substr(colon + 1), ok);
      if (!ok) fail("bad feature value in '" + tok + "'");
      data.entries.push_back({data.rows, idx - 1, value});
      last_idx = idx;
      max_idx = std::max(max_idx, idx);
    }
    if (opts.normalize) {
      double sq = 0.0;
      for (size_t k = row_begin; k < data.entries.size(); ++k)
        sq += data.entries[k].value * data.entries[k].value;
      if (sq > 0.0) {
        const double nrm = std::sqrt(sq);
        for (size_t k = row_begin; k < data.entries.size(); ++k)
          data.entries[k].value /= nrm;
      }
    }
    data.labels.push_back(label);
    ++data.rows;
  }
  data.cols = opts.p_override > 0 ? opts.p_override : max_idx;
  return data;
}

LibsvmData load_libsvm(const std::string& path, const LibsvmOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_libsvm(in, opts, path);
}

void write_libsvm(std::ostream& out, const LibsvmData& data) {
  if (data.labels.size() != static_cast<size_t>(data.rows))
    throw std::invalid_argument("label count does not match row count");
  char buf[64];
  size_t at = 0;
  for (int r = 0; r < data.rows; ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", data.labels[static_cast<size_t>(r)]);
    out << buf;
    while (at < data.entries.size() && data.entries[at].row == r) {
      std::snprintf(buf, sizeof buf, " %d:%.17g", data.entries[at].col + 1,
                    data.entries[at].value);
      out << buf;
      ++at;
    }
    out << '\n';
  }
  if (at != data.entries.size())
    throw std::invalid_argument("entries not sorted by row");
}

void save_libsvm(const std::string& path, const LibsvmData& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_libsvm(out, data);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

GeneratedProblem problem_from_data(const LibsvmData& data, ProblemKind kind,
                                   double lambda, int group_size) {
  if (data.rows < 1 || data.cols < 1)
    throw std::invalid_argument("data must have at least one row and column");
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  const auto dims = grouped_dims(data.rows, group_size);

  std::vector<Triplet> entries = data.entries;
  if (kind == ProblemKind::SvmHinge) {
    for (double lab : data.labels)
      if (lab != 1.0 && lab != -1.0)
        throw std::invalid_argument("svm_hinge labels must be +-1");
    for (Triplet& e : entries)
      e.value *= data.labels[static_cast<size_t>(e.row)];
  }
  auto op = std::make_shared<BlockLinearOperator>(BlockLinearOperator::from_triplets(
      entries, data.rows, data.cols, dims));

  GeneratedProblem gp;
  gp.spec.kind = kind;
  gp.spec.n = data.rows;
  gp.spec.p = data.cols;
  gp.spec.lambda = lambda;
  gp.spec.group_size = group_size;
  gp.targets = data.labels;
  switch (kind) {
    case ProblemKind::BasisPursuit:
      gp.problem.g = ProxableFunction::l1(1.0);
      gp.problem.f = targeted_blocks(FuncKind::IndicatorPoint, gp.targets, dims);
      break;
    case ProblemKind::Lasso:
      gp.problem.g = ProxableFunction::l1(lambda);
      gp.problem.f = targeted_blocks(FuncKind::LeastSquares, gp.targets, dims);
      break;
    case ProblemKind::Ridge:
      gp.problem.g = ProxableFunction::squared_l2(lambda);
      gp.problem.f = targeted_blocks(FuncKind::LeastSquares, gp.targets, dims);
      break;
    case ProblemKind::SvmHinge:
      gp.problem.g = ProxableFunction::squared_l2(lambda);
      gp.problem.f = hinge_blocks(data.rows, dims);
      break;
  }
  gp.problem.op = std::move(op);
  gp.problem.validate();
  return gp;
}

LibsvmData to_libsvm(const GeneratedProblem& gp) {
  if (!gp.problem.op) throw std::invalid_argument("problem has no operator");
  LibsvmData data;
  data.entries = gp.problem.op->to_triplets();
  data.labels = gp.targets;
  data.rows = gp.problem.op->rows();
  data.cols = gp.problem.op->cols();
  // Stored svm rows carry the label sign; unfold so a reload folds it back.
  if (gp.spec.kind == ProblemKind::SvmHinge) {
    for (Triplet& e : data.entries)
      e.value *= data.labels[static_cast<size_t>(e.row)];
  }
  return data;
}

}  // namespace spdhg
