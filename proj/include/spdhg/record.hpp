#pragma once

// Logged trajectory rows shared by every solver and the experiment harness.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spdhg {

struct ConvergenceRecord {
  long iter = 0;
  double epoch = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  // Insertion order defines CSV column order.
  std::vector<std::pair<std::string, double>> metrics;

  double metric(const std::string& name, double fallback) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    return fallback;
  }
};

struct ErgodicSnapshot {
  long iter = 0;
  std::vector<double> x_av;
  std::vector<double> y_av;
};

}  // namespace spdhg
