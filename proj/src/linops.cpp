#include "spdhg/linops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "spdhg/rng.hpp"

namespace spdhg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_dims(int rows, int cols, const std::vector<int>& block_dims) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("operator dimensions must be positive");
  long total = 0;
  for (int d : block_dims) {
    if (d <= 0) throw std::invalid_argument("block dims must be positive");
    total += d;
  }
  if (block_dims.empty() || total != rows)
    throw std::invalid_argument("block dims must sum to row count, got " +
                                std::to_string(total) + " for " +
                                std::to_string(rows) + " rows");
}

}  // namespace

std::vector<int> BlockLinearOperator::unit_blocks(int rows) {
  return std::vector<int>(static_cast<size_t>(rows), 1);
}

BlockLinearOperator BlockLinearOperator::from_dense(
    std::span<const double> row_major, int rows, int cols,
    std::vector<int> block_dims) {
  check_dims(rows, cols, block_dims);
  if (row_major.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("dense data size does not match rows*cols");
  BlockLinearOperator op;
  op.cols_ = cols;
  op.row_ptr_.assign(static_cast<size_t>(rows) + 1, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = row_major[static_cast<size_t>(r) * cols + c];
      if (v != 0.0) {
        op.col_idx_.push_back(c);
        op.values_.push_back(v);
      }
    }
    op.row_ptr_[static_cast<size_t>(r) + 1] =
        static_cast<int>(op.col_idx_.size());
  }
  op.block_ptr_.assign(1, 0);
  for (int d : block_dims) op.block_ptr_.push_back(op.block_ptr_.back() + d);
  op.norm_mutex_ = std::make_unique<std::mutex>();
  op.block_norms_.assign(block_dims.size(), kNaN);
  op.full_norm_ = kNaN;
  return op;
}

BlockLinearOperator BlockLinearOperator::from_triplets(
    std::span<const Triplet> entries, int rows, int cols,
    std::vector<int> block_dims) {
  check_dims(rows, cols, block_dims);
  std::vector<int> counts(static_cast<size_t>(rows), 0);
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw std::invalid_argument("triplet index out of range");
    ++counts[static_cast<size_t>(t.row)];
  }
  BlockLinearOperator op;
  op.cols_ = cols;
  op.row_ptr_.assign(static_cast<size_t>(rows) + 1, 0);
  for (int r = 0; r < rows; ++r)
    op.row_ptr_[static_cast<size_t>(r) + 1] =
        op.row_ptr_[static_cast<size_t>(r)] + counts[static_cast<size_t>(r)];
  op.col_idx_.assign(entries.size(), 0);
  op.values_.assign(entries.size(), 0.0);
  std::vector<int> cursor(op.row_ptr_.begin(), op.row_ptr_.end() - 1);
  for (const Triplet& t : entries) {
    const int at = cursor[static_cast<size_t>(t.row)]++;
    op.col_idx_[static_cast<size_t>(at)] = t.col;
    op.values_[static_cast<size_t>(at)] = t.value;
  }
  // Deterministic column order within each row.
  for (int r = 0; r < rows; ++r) {
    const int b = op.row_ptr_[static_cast<size_t>(r)];
    const int e = op.row_ptr_[static_cast<size_t>(r) + 1];
    std::vector<std::pair<int, double>> row;
    row.reserve(static_cast<size_t>(e - b));
    for (int k = b; k < e; ++k)
      row.emplace_back(op.col_idx_[static_cast<size_t>(k)],
                       op.values_[static_cast<size_t>(k)]);
    std::sort(row.begin(), row.end());
    for (int k = b; k < e; ++k) {
      op.col_idx_[static_cast<size_t>(k)] = row[static_cast<size_t>(k - b)].first;
      op.values_[static_cast<size_t>(k)] = row[static_cast<size_t>(k - b)].second;
    }
  }
  op.block_ptr_.assign(1, 0);
  for (int d : block_dims) op.block_ptr_.push_back(op.block_ptr_.back() + d);
  op.norm_mutex_ = std::make_unique<std::mutex>();
  op.block_norms_.assign(block_dims.size(), kNaN);
  op.full_norm_ = kNaN;
  return op;
}

void BlockLinearOperator::check_block(int i) const {
  if (i < 0 || i >= num_blocks())
    throw std::out_of_range("block index " + std::to_string(i) +
                            " out of range");
}

std::int64_t BlockLinearOperator::block_nnz(int i) const {
  check_block(i);
  return row_ptr_[static_cast<size_t>(block_ptr_[i + 1])] -
         row_ptr_[static_cast<size_t>(block_ptr_[i])];
}

void BlockLinearOperator::apply_block(int i, std::span<const double> x,
                                      std::span<double> out) const {
  check_block(i);
  const int rb = block_ptr_[i], re = block_ptr_[i + 1];
  for (int r = rb; r < re; ++r) {
    double acc = 0.0;
    const int b = row_ptr_[static_cast<size_t>(r)];
    const int e = row_ptr_[static_cast<size_t>(r) + 1];
    for (int k = b; k < e; ++k)
      acc += values_[static_cast<size_t>(k)] *
             x[static_cast<size_t>(col_idx_[static_cast<size_t>(k)])];
    out[static_cast<size_t>(r - rb)] = acc;
  }
}

void BlockLinearOperator::adjoint_block_add(int i,
                                            std::span<const double> y_block,
                                            double scale,
                                            std::span<double> acc) const {
  check_block(i);
  const int rb = block_ptr_[i], re = block_ptr_[i + 1];
  for (int r = rb; r < re; ++r) {
    const double w = scale * y_block[static_cast<size_t>(r - rb)];
    if (w == 0.0) continue;
    const int b = row_ptr_[static_cast<size_t>(r)];
    const int e = row_ptr_[static_cast<size_t>(r) + 1];
    for (int k = b; k < e; ++k)
      acc[static_cast<size_t>(col_idx_[static_cast<size_t>(k)])] +=
          w * values_[static_cast<size_t>(k)];
  }
}

void BlockLinearOperator::apply(std::span<const double> x,
                                std::span<double> out) const {
  for (int i = 0; i < num_blocks(); ++i)
    apply_block(i, x,
                out.subspan(static_cast<size_t>(block_ptr_[i]),
                            static_cast<size_t>(block_rows(i))));
}

void BlockLinearOperator::adjoint(std::span<const double> y,
                                  std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < num_blocks(); ++i)
    adjoint_block_add(i,
                      y.subspan(static_cast<size_t>(block_ptr_[i]),
                                static_cast<size_t>(block_rows(i))),
                      1.0, out);
}

std::vector<double> BlockLinearOperator::apply(
    const std::vector<double>& x) const {
  std::vector<double> out(static_cast<size_t>(rows()), 0.0);
  apply(std::span<const double>(x), std::span<double>(out));
  return out;
}

std::vector<double> BlockLinearOperator::adjoint(
    const std::vector<double>& y) const {
  std::vector<double> out(static_cast<size_t>(cols()), 0.0);
  adjoint(std::span<const double>(y), std::span<double>(out));
  return out;
}

std::vector<Triplet> BlockLinearOperator::to_triplets() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (int r = 0; r < rows(); ++r) {
    for (int k = row_ptr_[static_cast<size_t>(r)];
         k < row_ptr_[static_cast<size_t>(r) + 1]; ++k) {
      out.push_back({r, col_idx_[static_cast<size_t>(k)],
                     values_[static_cast<size_t>(k)]});
    }
  }
  return out;
}

double BlockLinearOperator::row_dot(int r, std::span<const double> x) const {
  double acc = 0.0;
  const int b = row_ptr_[static_cast<size_t>(r)];
  const int e = row_ptr_[static_cast<size_t>(r) + 1];
  for (int k = b; k < e; ++k)
    acc += values_[static_cast<size_t>(k)] *
           x[static_cast<size_t>(col_idx_[static_cast<size_t>(k)])];
  return acc;
}

void BlockLinearOperator::row_axpy(int r, double coef,
                                   std::span<double> acc) const {
  if (coef == 0.0) return;
  const int b = row_ptr_[static_cast<size_t>(r)];
  const int e = row_ptr_[static_cast<size_t>(r) + 1];
  for (int k = b; k < e; ++k)
    acc[static_cast<size_t>(col_idx_[static_cast<size_t>(k)])] +=
        coef * values_[static_cast<size_t>(k)];
}

double BlockLinearOperator::row_sq_norm(int r) const {
  double acc = 0.0;
  const int b = row_ptr_[static_cast<size_t>(r)];
  const int e = row_ptr_[static_cast<size_t>(r) + 1];
  for (int k = b; k < e; ++k)
    acc += values_[static_cast<size_t>(k)] * values_[static_cast<size_t>(k)];
  return acc;
}

// Power iteration on the Gram matrix of the row range [row_begin, row_end).
// Restarts from a fresh seeded vector if the iterate lands in the null space.
double BlockLinearOperator::power_norm(int row_begin, int row_end,
                                       std::uint64_t stream) const {
  const size_t p = static_cast<size_t>(cols_);
  const size_t m = static_cast<size_t>(row_end - row_begin);
  bool any = false;
  for (int r = row_begin; r < row_end && !any; ++r)
    any = row_ptr_[static_cast<size_t>(r) + 1] > row_ptr_[static_cast<size_t>(r)];
  if (!any) return 0.0;

  std::vector<double> v(p), z(m), w(p);
  for (int attempt = 0; attempt < 8; ++attempt) {
    RngStream rng(power_.seed + stream, static_cast<std::uint64_t>(attempt) << 32);
    double nv = 0.0;
    for (size_t j = 0; j < p; ++j) {
      v[j] = rng.next_uniform() - 0.5;
      nv += v[j] * v[j];
    }
    nv = std::sqrt(nv);
    if (nv == 0.0) continue;
    for (size_t j = 0; j < p; ++j) v[j] /= nv;

    double lambda_prev = -1.0;
    for (int it = 0; it < power_.max_iter; ++it) {
      // z = A v over the row range, lambda = ||z||^2 (Rayleigh at unit v).
      double lambda = 0.0;
      for (int r = row_begin; r < row_end; ++r) {
        const double zr = row_dot(r, v);
        z[static_cast<size_t>(r - row_begin)] = zr;
        lambda += zr * zr;
      }
      if (lambda == 0.0) break;  // v in null space; try a new start
      if (lambda_prev >= 0.0 &&
          std::abs(lambda - lambda_prev) <= power_.tol * lambda)
        return std::sqrt(lambda);
      lambda_prev = lambda;
      std::fill(w.begin(), w.end(), 0.0);
      for (int r = row_begin; r < row_end; ++r)
        row_axpy(r, z[static_cast<size_t>(r - row_begin)], w);
      double nw = 0.0;
      for (size_t j = 0; j < p; ++j) nw += w[j] * w[j];
      nw = std::sqrt(nw);
      if (nw == 0.0) break;
      for (size_t j = 0; j < p; ++j) v[j] = w[j] / nw;
    }
    if (lambda_prev > 0.0) return std::sqrt(lambda_prev);
  }
  throw std::runtime_error("power iteration failed to make progress");
}

double BlockLinearOperator::block_norm(int i) const {
  check_block(i);
  std::lock_guard<std::mutex> lock(*norm_mutex_);
  double& cached = block_norms_[static_cast<size_t>(i)];
  if (std::isnan(cached))
    cached = power_norm(block_ptr_[i], block_ptr_[i + 1],
                        static_cast<std::uint64_t>(i));
  return cached;
}

double BlockLinearOperator::max_block_norm() const {
  double m = 0.0;
  for (int i = 0; i < num_blocks(); ++i) m = std::max(m, block_norm(i));
  return m;
}

double BlockLinearOperator::operator_norm() const {
  if (num_blocks() == 1) return block_norm(0);
  std::lock_guard<std::mutex> lock(*norm_mutex_);
  if (std::isnan(full_norm_))
    full_norm_ = power_norm(0, rows(), 0xf0f0f0f0ull);
  return full_norm_;
}

}  // namespace spdhg
