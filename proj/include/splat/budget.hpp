#pragma once

#include "splat/types.hpp"

namespace splat {

// Bytes per primitive assumed by the budget formula. The serialized
// primitive is larger; see codec.hpp.
inline constexpr double kBudgetBytesPerPrimitive = 7.0;

// n_g = floor(3HW / (7 cr)), n_vs = floor(lambda_g n_g), n_us = n_g - n_vs,
// s_base = sqrt(HW / (pi n_g)) / 3. Throws kBudgetTooSmall when n_g < 1.
Budget compute_budget(int height, int width, double cr, double lambda_g);

// sqrt(HW / (pi n)) / 3.
double base_scale(int height, int width, std::int64_t n_g);

// Largest compression ratio that still yields one primitive.
double max_feasible_ratio(int height, int width);

// 3 sigma radius of an axis-aligned bounding box around a primitive.
inline double influence_radius(double s_x, double s_y) {
  return 3.0 * (s_x > s_y ? s_x : s_y);
}

}  // namespace splat
