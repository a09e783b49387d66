#pragma once

// Catalog of proxable convex functions with closed-form prox, conjugate
// value, conjugate prox, and subdifferential distances. Values are extended
// reals: +inf encodes domain violations. All functions are separable across
// coordinates; SeparableSum groups them into dual blocks.

#include <optional>
#include <span>
#include <vector>

namespace spdhg {

enum class FuncKind { Zero, L1, SquaredL2, IndicatorPoint, LeastSquares, Hinge };

const char* func_kind_name(FuncKind k);

class ProxableFunction {
 public:
  // f = 0
  static ProxableFunction zero();
  // f(x) = lambda * ||x||_1, lambda >= 0
  static ProxableFunction l1(double lambda);
  // f(x) = (lambda/2) * ||x||^2, lambda > 0
  static ProxableFunction squared_l2(double lambda);
  // f = indicator of {target}
  static ProxableFunction indicator_point(std::vector<double> target);
  // f(s) = (1/2) * ||s - target||^2
  static ProxableFunction least_squares(std::vector<double> target);
  // f(t) = weight * sum_j max(0, 1 - sign*t_j), weight > 0, sign in {-1,+1}
  static ProxableFunction hinge(double weight, int sign = 1);

  FuncKind kind() const { return kind_; }
  // Dimension pinned by the payload; 0 when any dimension is accepted.
  int fixed_dim() const;

  double value(std::span<const double> x) const;
  double conj_value(std::span<const double> y) const;

  // out = argmin_u f(u) + ||u - v||^2 / (2*step), step > 0.
  void prox(std::span<const double> v, double step, std::span<double> out) const;
  // Same for the conjugate f*.
  void conj_prox(std::span<const double> v, double step,
                 std::span<double> out) const;

  // Euclidean distance from v to the subdifferential set at the given point;
  // throws std::domain_error when the point is outside the domain.
  double subdiff_dist(std::span<const double> x, std::span<const double> v) const;
  double conj_subdiff_dist(std::span<const double> y,
                           std::span<const double> v) const;

  // Strong convexity modulus of the function / of its conjugate; nullopt
  // when the modulus is unbounded (point indicators).
  std::optional<double> strong_convexity() const;
  std::optional<double> conj_strong_convexity() const;

  // sup of |y_j| over dom f* per coordinate; +inf when unbounded. Finite
  // exactly when the function is Lipschitz.
  double conj_dom_coord_bound() const;

  double param() const { return param_; }
  int sign() const { return sign_; }
  const std::vector<double>& target() const { return target_; }

 private:
  ProxableFunction(FuncKind kind, double param, int sign,
                   std::vector<double> target);
  void check_dim(size_t n) const;

  FuncKind kind_;
  double param_ = 0.0;
  int sign_ = 1;
  std::vector<double> target_;
};

// f(y) = sum_i f_i(y_i) over contiguous blocks of the given dimensions.
class SeparableSum {
 public:
  SeparableSum() = default;
  SeparableSum(std::vector<ProxableFunction> blocks, std::vector<int> dims);
  // n_blocks copies of the same function.
  static SeparableSum uniform(const ProxableFunction& f, int n_blocks,
                              int block_dim);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_dim(int i) const { return dims_[static_cast<size_t>(i)]; }
  int offset(int i) const { return offsets_[static_cast<size_t>(i)]; }
  int total_dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  const ProxableFunction& block(int i) const {
    return blocks_[static_cast<size_t>(i)];
  }

  double value(std::span<const double> x) const;
  double conj_value(std::span<const double> y) const;
  void conj_prox_block(int i, std::span<const double> v, double step,
                       std::span<double> out) const;

  std::span<const double> slice(std::span<const double> full, int i) const;
  std::span<double> slice(std::span<double> full, int i) const;

 private:
  std::vector<ProxableFunction> blocks_;
  std::vector<int> dims_;
  std::vector<int> offsets_;  // size n+1 after construction
};

}  // namespace spdhg
