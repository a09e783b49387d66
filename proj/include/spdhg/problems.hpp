#pragma once

// Seeded desk-scale problem generators for the saddle-point formulations the
// solvers are benchmarked on, plus a LIBSVM-format loader/writer for external
// data. The same spec and seed reproduce the same problem bit for bit.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spdhg/solver.hpp"

namespace spdhg {

enum class ProblemKind { BasisPursuit, Lasso, Ridge, SvmHinge };

const char* problem_kind_name(ProblemKind k);
// Accepts the names printed by problem_kind_name (snake_case); throws
// std::invalid_argument otherwise.
ProblemKind problem_kind_from_name(const std::string& name);

struct GeneratorSpec {
  ProblemKind kind = ProblemKind::Lasso;
  int n = 0;            // data rows
  int p = 0;            // features
  double rho = 0.0;     // AR(1) feature correlation, 0 <= rho < 1
  int sparsity = 0;     // nonzeros in the planted primal point
  double lambda = 0.0;  // regularizer weight; ignored by BasisPursuit
  double margin = 2.0;  // class-cluster separation (SvmHinge only)
  int group_size = 1;   // rows per dual block (last block may be smaller)
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct GeneratedProblem {
  SaddleProblem problem;
  std::vector<double> x_planted;  // empty for SvmHinge
  // Right-hand sides: constraint/regression targets b, or +-1 class labels.
  std::vector<double> targets;
  GeneratorSpec spec;
};

// Dispatch on spec.kind.
GeneratedProblem generate(const GeneratorSpec& spec);

// min ||x||_1 s.t. Ax = b with rows a_i ~ N(0, Sigma), Sigma_jk = rho^|j-k|
// (sampled through the dense Cholesky factor of Sigma), and b = A x_planted
// held exactly: the planted point is feasible to the last bit.
GeneratedProblem gen_basis_pursuit(const GeneratorSpec& spec);

// Least-squares rows f_i(s) = (1/2)||s - b_i||^2 with b = A x_planted +
// 0.1 N(0, I), regularized by lambda ||x||_1 (Lasso) or
// (lambda/2)||x||^2 (Ridge).
GeneratedProblem gen_regression(const GeneratorSpec& spec);

// Binary classification: features cluster at +-(margin/2) u for a random
// unit direction u, rows are label-scaled features b_i a_i, f_i = (1/n) hinge,
// g = (lambda/2)||x||^2.
GeneratedProblem gen_svm(const GeneratorSpec& spec);

// ---- LIBSVM-format sparse data: "label index:value ...", 1-based ----

struct LibsvmOptions {
  int p_override = 0;      // 0: dimension = max feature index seen
  bool normalize = false;  // scale each row to unit Euclidean norm
};

struct LibsvmData {
  std::vector<Triplet> entries;  // row-major, ascending columns within a row
  std::vector<double> labels;    // one per row
  int rows = 0;
  int cols = 0;
};

// Malformed input throws std::runtime_error naming "<origin>:<line>".
// Feature indices must be >= 1 and strictly increasing within a row.
LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& opts = {},
                        const std::string& origin = "<stream>");
LibsvmData load_libsvm(const std::string& path, const LibsvmOptions& opts = {});

// 17-significant-digit output: a write/load round trip is bit-identical.
void write_libsvm(std::ostream& out, const LibsvmData& data);
void save_libsvm(const std::string& path, const LibsvmData& data);

// Wrap loaded rows as a saddle problem: labels become constraint right-hand
// sides (BasisPursuit), regression targets (Lasso/Ridge), or +-1 classes
// folded into the rows (SvmHinge).
GeneratedProblem problem_from_data(const LibsvmData& data, ProblemKind kind,
                                   double lambda, int group_size = 1);

// Serialize a generated problem's data matrix and targets; feeding the result
// back through problem_from_data reproduces the same operator bit for bit.
LibsvmData to_libsvm(const GeneratedProblem& gp);

}  // namespace spdhg
