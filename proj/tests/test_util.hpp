#pragma once

// Shared random-instance helpers for the unit tests.

#include <cstdint>
#include <vector>

#include "spdhg/linops.hpp"
#include "spdhg/rng.hpp"

namespace testutil {

struct DenseOp {
  std::vector<double> data;  // row major
  int rows = 0;
  int cols = 0;
  std::vector<int> block_dims;
};

inline DenseOp random_dense(std::uint64_t seed, int rows, int cols,
                            std::vector<int> block_dims,
                            double density = 1.0) {
  DenseOp d;
  d.rows = rows;
  d.cols = cols;
  d.block_dims = std::move(block_dims);
  d.data.assign(static_cast<size_t>(rows) * cols, 0.0);
  spdhg::RngStream rng(seed);
  for (auto& v : d.data) {
    const double keep = rng.next_uniform();
    const double val = rng.next_normal();
    if (keep < density) v = val;
  }
  return d;
}

inline std::vector<int> random_block_dims(std::uint64_t seed, int n_blocks,
                                          int max_rows_per_block) {
  spdhg::RngStream rng(seed);
  std::vector<int> dims(static_cast<size_t>(n_blocks));
  for (auto& d : dims)
    d = 1 + static_cast<int>(rng.next_index(
                static_cast<std::uint64_t>(max_rows_per_block)));
  return dims;
}

inline spdhg::BlockLinearOperator make_op(const DenseOp& d) {
  return spdhg::BlockLinearOperator::from_dense(d.data, d.rows, d.cols,
                                                d.block_dims);
}

inline std::vector<double> random_vec(std::uint64_t seed, size_t n,
                                      double scale = 1.0) {
  spdhg::RngStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.next_normal();
  return v;
}

}  // namespace testutil
