#pragma once

#include <cstdint>
#include <vector>

#include "splat/types.hpp"

namespace splat {

/// One rectangular tile of the image, in pixel indices.
struct Tile {
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;
  std::int64_t quota_vs = 0;
  std::int64_t quota_us = 0;

  friend bool operator==(const Tile&, const Tile&) = default;
};

/// Adaptive tiling of an H x W canvas with tile size T. Tiles are stored in
/// row-major (i * n_w + j) order.
struct TilePlan {
  int tile_size = 0;
  int n_h = 0;
  int n_w = 0;
  std::vector<Tile> tiles;
};

/// Tile start offsets along one axis of length `extent`. With a single tile
/// the tile is centered (clamped to 0); otherwise offset i is
/// min(floor(i * (extent - T) / (n - 1)), extent - T).
std::vector<int> tile_offsets(int extent, int tile_size);

/// Splits `total` across `n_tiles` slots: floor(total / n) each, plus one
/// for the first (total mod n) slots.
std::vector<std::int64_t> allocate_quotas(std::int64_t total, std::size_t n_tiles);

TilePlan plan_tiles(int height, int width, int tile_size, std::int64_t n_vs, std::int64_t n_us);

/// Dense per-pixel scalar field over a tile, row-major.
struct ScalarMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  ScalarMap() = default;
  ScalarMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  double max() const;
};

/// Channel-mean of the L2 norm of the spatial gradient inside `tile`.
/// Central differences in the interior, one-sided at tile borders, zero along
/// an axis of length 1.
ScalarMap gradient_magnitude(const ImageBuffer& image, const Tile& tile);

/// Channel-mean of the population variance over a window x window square
/// neighborhood, truncated at tile borders.
ScalarMap color_variance(const ImageBuffer& image, const Tile& tile, int window);

struct WeightMap {
  ScalarMap weights;
  ScalarMap grad_norm;      // m / (max m + eps)
  ScalarMap variance_norm;  // v / (max v + eps)
};

inline constexpr double kNormalizeEpsilon = 1e-8;

WeightMap sampling_weights(const ScalarMap& grad, const ScalarMap& variance, double lambda_m,
                           double epsilon = kNormalizeEpsilon);

/// Convenience: gradient, variance and combined weight for one tile.
WeightMap tile_weights(const ImageBuffer& image, const Tile& tile, double lambda_m, int window);

}  // namespace splat
