#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace regnn {

// Tolerances shared by validation, oracles and tests.
namespace tol {
inline constexpr double equivariance_abs = 1e-9;
inline constexpr double filter_commutation_abs = 1e-12;
inline constexpr double reward_equivariance_abs = 1e-12;
inline constexpr double filter_power_rel = 1e-10;
inline constexpr double gradient_rel = 1e-5;
inline constexpr double composed_gradient_rel = 1e-4;
inline constexpr double finite_difference_step = 1e-6;
}  // namespace tol

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Relative error with an absolute floor so that near-zero references do not blow up.
inline double relative_error(double value, double reference, double floor = 1e-8) {
  return std::abs(value - reference) / std::max(std::abs(reference), floor);
}

}  // namespace regnn
