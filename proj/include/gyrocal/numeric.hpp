#pragma once

#include <cstddef>
#include <span>

namespace gyrocal {

/// Kahan-compensated sum. Keeps long constant-signal averages accurate to a
/// few ulps instead of drifting with sequence length.
inline double kahan_sum(std::span<const double> xs) {
  double sum = 0.0;
  double carry = 0.0;
  for (double x : xs) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline double kahan_mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : kahan_sum(xs) / static_cast<double>(xs.size());
}

}  // namespace gyrocal
