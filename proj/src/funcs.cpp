#include "spdhg/funcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spdhg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clip(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Distance from v to the closed interval [lo, hi].
double interval_dist(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

void check_step(double step) {
  if (!(step > 0.0)) throw std::invalid_argument("prox step must be positive");
}

}  // namespace

const char* func_kind_name(FuncKind k) {
  switch (k) {
    case FuncKind::Zero: return "zero";
    case FuncKind::L1: return "l1";
    case FuncKind::SquaredL2: return "squared_l2";
    case FuncKind::IndicatorPoint: return "indicator_point";
    case FuncKind::LeastSquares: return "least_squares";
    case FuncKind::Hinge: return "hinge";
  }
  return "?";
}

ProxableFunction::ProxableFunction(FuncKind kind, double param, int sign,
                                   std::vector<double> target)
    : kind_(kind), param_(param), sign_(sign), target_(std::move(target)) {}

ProxableFunction ProxableFunction::zero() {
  return {FuncKind::Zero, 0.0, 1, {}};
}

ProxableFunction ProxableFunction::l1(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("l1 weight must be >= 0");
  return {FuncKind::L1, lambda, 1, {}};
}

ProxableFunction ProxableFunction::squared_l2(double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("squared_l2 weight must be > 0 (use zero())");
  return {FuncKind::SquaredL2, lambda, 1, {}};
}

ProxableFunction ProxableFunction::indicator_point(std::vector<double> target) {
  return {FuncKind::IndicatorPoint, 0.0, 1, std::move(target)};
}

ProxableFunction ProxableFunction::least_squares(std::vector<double> target) {
  return {FuncKind::LeastSquares, 0.0, 1, std::move(target)};
}

ProxableFunction ProxableFunction::hinge(double weight, int sign) {
  if (!(weight > 0.0)) throw std::invalid_argument("hinge weight must be > 0");
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("hinge sign must be +1 or -1");
  return {FuncKind::Hinge, weight, sign, {}};
}

int ProxableFunction::fixed_dim() const {
  return target_.empty() ? 0 : static_cast<int>(target_.size());
}

void ProxableFunction::check_dim(size_t n) const {
  if (!target_.empty() && n != target_.size())
    throw std::invalid_argument(std::string(func_kind_name(kind_)) +
                                ": input dimension does not match payload");
}

double ProxableFunction::value(std::span<const double> x) const {
  check_dim(x.size());
  switch (kind_) {
    case FuncKind::Zero:
      return 0.0;
    case FuncKind::L1: {
      double s = 0.0;
      for (double v : x) s += std::abs(v);
      return param_ * s;
    }
    case FuncKind::SquaredL2: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return 0.5 * param_ * s;
    }
    case FuncKind::IndicatorPoint: {
      for (size_t j = 0; j < x.size(); ++j)
        if (x[j] != target_[j]) return kInf;
      return 0.0;
    }
    case FuncKind::LeastSquares: {
      double s = 0.0;
      for (size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - target_[j];
        s += d * d;
      }
      return 0.5 * s;
    }
    case FuncKind::Hinge: {
      double s = 0.0;
      for (double v : x) s += std::max(0.0, 1.0 - sign_ * v);
      return param_ * s;
    }
  }
  return 0.0;
}

double ProxableFunction::conj_value(std::span<const double> y) const {
  check_dim(y.size());
  switch (kind_) {
    case FuncKind::Zero: {
      for (double v : y)
        if (v != 0.0) return kInf;
      return 0.0;
    }
    case FuncKind::L1: {
      for (double v : y)
        if (std::abs(v) > param_) return kInf;
      return 0.0;
    }
    case FuncKind::SquaredL2: {
      double s = 0.0;
      for (double v : y) s += v * v;
      return 0.5 * s / param_;
    }
    case FuncKind::IndicatorPoint: {
      double s = 0.0;
      for (size_t j = 0; j < y.size(); ++j) s += target_[j] * y[j];
      return s;
    }
    case FuncKind::LeastSquares: {
      double s = 0.0;
      for (size_t j = 0; j < y.size(); ++j)
        s += 0.5 * y[j] * y[j] + target_[j] * y[j];
      return s;
    }
    case FuncKind::Hinge: {
      double s = 0.0;
      for (double v : y) {
        const double w = sign_ * v;
        if (w < -param_ || w > 0.0) return kInf;
        s += w;
      }
      return s;
    }
  }
  return 0.0;
}

void ProxableFunction::prox(std::span<const double> v, double step,
                            std::span<double> out) const {
  check_dim(v.size());
  check_step(step);
  switch (kind_) {
    case FuncKind::Zero:
      std::copy(v.begin(), v.end(), out.begin());
      return;
    case FuncKind::L1: {
      const double t = step * param_;
      for (size_t j = 0; j < v.size(); ++j) out[j] = soft(v[j], t);
      return;
    }
    case FuncKind::SquaredL2: {
      const double d = 1.0 / (1.0 + step * param_);
      for (size_t j = 0; j < v.size(); ++j) out[j] = v[j] * d;
      return;
    }
    case FuncKind::IndicatorPoint:
      std::copy(target_.begin(), target_.end(), out.begin());
      return;
    case FuncKind::LeastSquares: {
      const double d = 1.0 / (1.0 + step);
      for (size_t j = 0; j < v.size(); ++j)
        out[j] = (v[j] + step * target_[j]) * d;
      return;
    }
    case FuncKind::Hinge: {
      const double ct = param_ * step;
      for (size_t j = 0; j < v.size(); ++j) {
        const double w = sign_ * v[j];
        double u;
        if (w >= 1.0)
          u = w;
        else if (w + ct <= 1.0)
          u = w + ct;
        else
          u = 1.0;
        out[j] = sign_ * u;
      }
      return;
    }
  }
}

void ProxableFunction::conj_prox(std::span<const double> v, double step,
                                 std::span<double> out) const {
  check_dim(v.size());
  check_step(step);
  switch (kind_) {
    case FuncKind::Zero:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case FuncKind::L1:
      for (size_t j = 0; j < v.size(); ++j)
        out[j] = clip(v[j], -param_, param_);
      return;
    case FuncKind::SquaredL2: {
      const double d = param_ / (param_ + step);
      for (size_t j = 0; j < v.size(); ++j) out[j] = v[j] * d;
      return;
    }
    case FuncKind::IndicatorPoint:
      for (size_t j = 0; j < v.size(); ++j)
        out[j] = v[j] - step * target_[j];
      return;
    case FuncKind::LeastSquares: {
      const double d = 1.0 / (1.0 + step);
      for (size_t j = 0; j < v.size(); ++j)
        out[j] = (v[j] - step * target_[j]) * d;
      return;
    }
    case FuncKind::Hinge:
      for (size_t j = 0; j < v.size(); ++j)
        out[j] = sign_ * clip(sign_ * v[j] - step, -param_, 0.0);
      return;
  }
}

double ProxableFunction::subdiff_dist(std::span<const double> x,
                                      std::span<const double> v) const {
  check_dim(x.size());
  double sq = 0.0;
  switch (kind_) {
    case FuncKind::Zero:
      for (double w : v) sq += w * w;
      break;
    case FuncKind::L1:
      for (size_t j = 0; j < x.size(); ++j) {
        double d;
        if (x[j] > 0.0)
          d = v[j] - param_;
        else if (x[j] < 0.0)
          d = v[j] + param_;
        else
          d = interval_dist(v[j], -param_, param_);
        sq += d * d;
      }
      break;
    case FuncKind::SquaredL2:
      for (size_t j = 0; j < x.size(); ++j) {
        const double d = v[j] - param_ * x[j];
        sq += d * d;
      }
      break;
    case FuncKind::IndicatorPoint:
      for (size_t j = 0; j < x.size(); ++j)
        if (x[j] != target_[j])
          throw std::domain_error("indicator_point: point not in domain");
      return 0.0;  // subdifferential is the whole space
    case FuncKind::LeastSquares:
      for (size_t j = 0; j < x.size(); ++j) {
        const double d = v[j] - (x[j] - target_[j]);
        sq += d * d;
      }
      break;
    case FuncKind::Hinge:
      for (size_t j = 0; j < x.size(); ++j) {
        const double u = sign_ * x[j];
        // in u-space the subgradient set is {-c} / [-c,0] / {0}; map to
        // v-space by multiplying with sign
        double d;
        if (u < 1.0)
          d = std::abs(sign_ * v[j] + param_);
        else if (u > 1.0)
          d = std::abs(v[j]);
        else
          d = interval_dist(sign_ * v[j], -param_, 0.0);
        sq += d * d;
      }
      break;
  }
  return std::sqrt(sq);
}

double ProxableFunction::conj_subdiff_dist(std::span<const double> y,
                                           std::span<const double> v) const {
  check_dim(y.size());
  double sq = 0.0;
  switch (kind_) {
    case FuncKind::Zero:
      for (double w : y)
        if (w != 0.0) throw std::domain_error("zero conj: point not in domain");
      return 0.0;  // conjugate is the indicator of {0}
    case FuncKind::L1:
      for (size_t j = 0; j < y.size(); ++j) {
        if (std::abs(y[j]) > param_)
          throw std::domain_error("l1 conj: point not in domain");
        double d;
        if (param_ == 0.0)
          d = 0.0;  // conjugate is the indicator of {0}
        else if (y[j] == param_)
          d = std::max(0.0, -v[j]);  // normal cone [0, inf)
        else if (y[j] == -param_)
          d = std::max(0.0, v[j]);  // normal cone (-inf, 0]
        else
          d = std::abs(v[j]);
        sq += d * d;
      }
      break;
    case FuncKind::SquaredL2:
      for (size_t j = 0; j < y.size(); ++j) {
        const double d = v[j] - y[j] / param_;
        sq += d * d;
      }
      break;
    case FuncKind::IndicatorPoint:
      for (size_t j = 0; j < y.size(); ++j) {
        const double d = v[j] - target_[j];
        sq += d * d;
      }
      break;
    case FuncKind::LeastSquares:
      for (size_t j = 0; j < y.size(); ++j) {
        const double d = v[j] - (y[j] + target_[j]);
        sq += d * d;
      }
      break;
    case FuncKind::Hinge:
      for (size_t j = 0; j < y.size(); ++j) {
        const double w = sign_ * y[j];
        if (w < -param_ || w > 0.0)
          throw std::domain_error("hinge conj: point not in domain");
        const double g = sign_ * v[j];  // gradient set lives in u-space
        double d;
        if (w == 0.0)
          d = std::max(0.0, 1.0 - g);  // normal cone adds [0, inf)
        else if (w == -param_)
          d = std::max(0.0, g - 1.0);  // normal cone adds (-inf, 0]
        else
          d = std::abs(g - 1.0);
        sq += d * d;
      }
      break;
  }
  return std::sqrt(sq);
}

std::optional<double> ProxableFunction::strong_convexity() const {
  switch (kind_) {
    case FuncKind::Zero: return 0.0;
    case FuncKind::L1: return 0.0;
    case FuncKind::SquaredL2: return param_;
    case FuncKind::IndicatorPoint: return std::nullopt;
    case FuncKind::LeastSquares: return 1.0;
    case FuncKind::Hinge: return 0.0;
  }
  return 0.0;
}

std::optional<double> ProxableFunction::conj_strong_convexity() const {
  switch (kind_) {
    case FuncKind::Zero: return std::nullopt;
    case FuncKind::L1: return 0.0;
    case FuncKind::SquaredL2: return 1.0 / param_;
    case FuncKind::IndicatorPoint: return 0.0;
    case FuncKind::LeastSquares: return 1.0;
    case FuncKind::Hinge: return 0.0;
  }
  return 0.0;
}

double ProxableFunction::conj_dom_coord_bound() const {
  switch (kind_) {
    case FuncKind::Zero: return 0.0;
    case FuncKind::L1: return param_;
    case FuncKind::SquaredL2: return kInf;
    case FuncKind::IndicatorPoint: return kInf;
    case FuncKind::LeastSquares: return kInf;
    case FuncKind::Hinge: return param_;
  }
  return kInf;
}

SeparableSum::SeparableSum(std::vector<ProxableFunction> blocks,
                           std::vector<int> dims)
    : blocks_(std::move(blocks)), dims_(std::move(dims)) {
  if (blocks_.size() != dims_.size())
    throw std::invalid_argument("separable sum: blocks/dims size mismatch");
  if (blocks_.empty())
    throw std::invalid_argument("separable sum: needs at least one block");
  offsets_.assign(1, 0);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (dims_[i] <= 0)
      throw std::invalid_argument("separable sum: block dims must be positive");
    const int fixed = blocks_[i].fixed_dim();
    if (fixed != 0 && fixed != dims_[i])
      throw std::invalid_argument(
          "separable sum: block payload dimension mismatch");
    offsets_.push_back(offsets_.back() + dims_[i]);
  }
}

SeparableSum SeparableSum::uniform(const ProxableFunction& f, int n_blocks,
                                   int block_dim) {
  return SeparableSum(
      std::vector<ProxableFunction>(static_cast<size_t>(n_blocks), f),
      std::vector<int>(static_cast<size_t>(n_blocks), block_dim));
}

std::span<const double> SeparableSum::slice(std::span<const double> full,
                                            int i) const {
  return full.subspan(static_cast<size_t>(offset(i)),
                      static_cast<size_t>(block_dim(i)));
}

std::span<double> SeparableSum::slice(std::span<double> full, int i) const {
  return full.subspan(static_cast<size_t>(offset(i)),
                      static_cast<size_t>(block_dim(i)));
}

double SeparableSum::value(std::span<const double> x) const {
  double s = 0.0;
  for (int i = 0; i < num_blocks(); ++i) s += block(i).value(slice(x, i));
  return s;
}

double SeparableSum::conj_value(std::span<const double> y) const {
  double s = 0.0;
  for (int i = 0; i < num_blocks(); ++i) s += block(i).conj_value(slice(y, i));
  return s;
}

void SeparableSum::conj_prox_block(int i, std::span<const double> v,
                                   double step, std::span<double> out) const {
  block(i).conj_prox(v, step, out);
}

}  // namespace spdhg
