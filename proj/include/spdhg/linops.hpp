#pragma once

// Block-row sparse linear operator. Rows are stored in CSR order and grouped
// into contiguous blocks A_1..A_n; per-block applies, adjoints, and operator
// norms are the primitives every solver in this library is built on.

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace spdhg {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

class BlockLinearOperator {
 public:
  // block_dims[i] = number of rows in block i; must sum to rows.
  static BlockLinearOperator from_dense(std::span<const double> row_major,
                                        int rows, int cols,
                                        std::vector<int> block_dims);
  static BlockLinearOperator from_triplets(std::span<const Triplet> entries,
                                           int rows, int cols,
                                           std::vector<int> block_dims);
  // One block per row.
  static std::vector<int> unit_blocks(int rows);

  int num_blocks() const { return static_cast<int>(block_ptr_.size()) - 1; }
  int rows() const { return static_cast<int>(row_ptr_.size()) - 1; }
  int cols() const { return cols_; }
  int block_rows(int i) const { return block_ptr_[i + 1] - block_ptr_[i]; }
  int block_row_offset(int i) const { return block_ptr_[i]; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }
  std::int64_t block_nnz(int i) const;

  // out = A_i x ; out has block_rows(i) entries.
  void apply_block(int i, std::span<const double> x,
                   std::span<double> out) const;
  // acc += scale * A_i^T y_block ; acc has cols() entries.
  void adjoint_block_add(int i, std::span<const double> y_block, double scale,
                         std::span<double> acc) const;
  // out = A x (all blocks, in block order; identical accumulation path as
  // apply_block so full and per-block results agree bitwise).
  void apply(std::span<const double> x, std::span<double> out) const;
  // out = A^T y.
  void adjoint(std::span<const double> y, std::span<double> out) const;

  std::vector<double> apply(const std::vector<double>& x) const;
  std::vector<double> adjoint(const std::vector<double>& y) const;

  // Stored entries in CSR order (row-major, ascending columns within a row);
  // rebuilding with from_triplets reproduces the operator bit for bit.
  std::vector<Triplet> to_triplets() const;

  // Row primitives for solvers that walk single rows.
  double row_dot(int r, std::span<const double> x) const;
  void row_axpy(int r, double coef, std::span<double> acc) const;
  double row_sq_norm(int r) const;

  // Spectral norm of A_i via power iteration on A_i^T A_i with a seeded
  // deterministic start; cached after first evaluation (thread safe).
  double block_norm(int i) const;
  double max_block_norm() const;
  // Spectral norm of the full operator. With a single block this is exactly
  // block_norm(0) (same cached value, same bits).
  double operator_norm() const;

  struct PowerIterOptions {
    double tol = 1e-10;   // relative change of successive Rayleigh quotients
    int max_iter = 1000;
    std::uint64_t seed = 0x9d2c5680u;  // start-vector stream
  };
  const PowerIterOptions& power_options() const { return power_; }

 private:
  BlockLinearOperator() = default;
  void check_block(int i) const;
  double power_norm(int row_begin, int row_end, std::uint64_t stream) const;

  int cols_ = 0;
  std::vector<int> block_ptr_;   // size n+1, row index where each block starts
  std::vector<int> row_ptr_;     // CSR
  std::vector<int> col_idx_;
  std::vector<double> values_;
  PowerIterOptions power_;

  // Norm cache is write-once behind a mutex; the indirection keeps the
  // operator movable.
  mutable std::unique_ptr<std::mutex> norm_mutex_;
  mutable std::vector<double> block_norms_;  // NaN until computed
  mutable double full_norm_ = 0.0;           // NaN until computed
};

}  // namespace spdhg
