#include "splat/budget.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace splat {

double base_scale(int height, int width, std::int64_t n_g) {
  const double area = static_cast<double>(height) * static_cast<double>(width);
  return std::sqrt(area / (std::numbers::pi * static_cast<double>(n_g))) / 3.0;
}

double max_feasible_ratio(int height, int width) {
  return 3.0 * static_cast<double>(height) * static_cast<double>(width) /
         kBudgetBytesPerPrimitive;
}

Budget compute_budget(int height, int width, double cr, double lambda_g) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (!(cr > 0.0) || !std::isfinite(cr)) {
    throw Error(ErrorCode::kInvalidArgument, "compression ratio must be > 0");
  }
  if (!(lambda_g >= 0.0 && lambda_g <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_g must lie in [0,1]");
  }

  // 3HW is an exact integer in double up to 2^53; the floor is corrected
  // below so that n_g * 7 * cr <= 3HW < (n_g + 1) * 7 * cr holds exactly.
  const double raw = 3.0 * static_cast<double>(height) * static_cast<double>(width);
  const double denom = kBudgetBytesPerPrimitive * cr;
  auto n_g = static_cast<std::int64_t>(std::floor(raw / denom));
  while (n_g > 0 && static_cast<double>(n_g) * denom > raw) --n_g;
  while (static_cast<double>(n_g + 1) * denom <= raw) ++n_g;

  if (n_g < 1) {
    std::ostringstream msg;
    msg << "compression ratio " << cr << " leaves no primitives for a " << height
        << "x" << width << " image (maximum feasible ratio "
        << max_feasible_ratio(height, width) << ")";
    throw Error(ErrorCode::kBudgetTooSmall, msg.str());
  }

  Budget b;
  b.cr = cr;
  b.n_g = n_g;
  b.n_vs = static_cast<std::int64_t>(std::floor(lambda_g * static_cast<double>(n_g)));
  if (b.n_vs > n_g) b.n_vs = n_g;
  b.n_us = n_g - b.n_vs;
  b.s_base = base_scale(height, width, n_g);
  return b;
}

}  // namespace splat
