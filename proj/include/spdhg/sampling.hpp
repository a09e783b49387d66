#pragma once

// Categorical block sampling over a counter-based stream, plus checkers for
// the conditional-expectation identities the dual update relies on. The
// checkers enumerate outcomes exactly (weighted by block probabilities) or
// estimate them by Monte Carlo, and compare against the closed forms.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spdhg {

struct SamplerSpec {
  std::vector<double> probs;  // strictly positive, sums to 1 within 1e-12
  std::uint64_t seed = 0;

  static SamplerSpec uniform(int n_blocks, std::uint64_t seed);
  static SamplerSpec with_probs(std::vector<double> probs, std::uint64_t seed);

  int num_blocks() const { return static_cast<int>(probs.size()); }
  double min_prob() const;
  // Inclusive prefix sums, cached at construction.
  const std::vector<double>& cumulative() const { return cum_; }

 private:
  std::vector<double> cum_;
};

// Index drawn at the given counter position; a pure function of
// (spec.seed, counter) via inverse CDF.
int draw(const SamplerSpec& spec, std::uint64_t counter);

struct IdentityEntry {
  std::string name;
  double lhs = 0.0;    // direct / enumged value
  double rhs = 0.0;    // closed form
  double err = 0.0;    // relative (exact mode) or sigma deviations (MC mode)
  bool pass = true;
};

struct IdentityReport {
  bool pass = true;
  double max_err = 0.0;
  std::vector<IdentityEntry> entries;
  std::string summary() const;
};

// Exact mode: enumerates the n possible next duals y+ (block i replaced by
// y_hat_i, probability p_i) and checks, with relative tolerance tol:
//   mean:      E[y+]                      == P y_hat + (I-P) y_k
//   var_ds:    E[|y+ - Y|^2_{D^-1}]       == |y_hat-Y|^2_{D^-1 P} + |y_k-Y|^2_{D^-1 (I-P)}
//   var_dspi:  |y_hat-Y|^2_{D^-1}         == E[|y+ - Y|^2_{D^-1 P^-1}] - |y_k-Y|^2_{D^-1 (P^-1 - I)}
//   step_dspi: |y_hat-y_k|^2_{D^-1}       == E[|y+ - y_k|^2_{D^-1 P^-1}]
// where D = diag(sigma) per block and P = diag(p) per block.
IdentityReport check_expectation_identities_exact(
    const std::vector<int>& block_dims, std::span<const double> sigma,
    const SamplerSpec& sampler, std::span<const double> y_k,
    std::span<const double> y_hat, std::span<const double> y_anchor,
    double tol);

// Monte Carlo mode: estimates the same expectations from `draws` samples of
// the block index (counter stream starting at counter_start) and requires
// each estimate to fall within n_sigmas standard errors of the closed form.
IdentityReport check_expectation_identities_mc(
    const std::vector<int>& block_dims, std::span<const double> sigma,
    const SamplerSpec& sampler, std::span<const double> y_k,
    std::span<const double> y_hat, std::span<const double> y_anchor,
    long draws, std::uint64_t counter_start, double n_sigmas);

}  // namespace spdhg
