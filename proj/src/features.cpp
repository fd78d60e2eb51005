#include "splat/features.hpp"

#include <algorithm>
#include <cmath>

namespace splat {

std::vector<int> tile_offsets(int extent, int tile_size) {
  const int n = std::max(1, (extent + tile_size - 1) / tile_size);
  std::vector<int> offsets(static_cast<std::size_t>(n));
  if (n == 1) {
    offsets[0] = std::max(0, (extent - tile_size) / 2);
    return offsets;
  }
  const std::int64_t span = extent - tile_size;
  for (int i = 0; i < n; ++i) {
    const auto stride_pos = static_cast<int>(span * i / (n - 1));
    offsets[static_cast<std::size_t>(i)] = std::min(stride_pos, extent - tile_size);
  }
  return offsets;
}

std::vector<std::int64_t> allocate_quotas(std::int64_t total, std::size_t n_tiles) {
  std::vector<std::int64_t> quotas(n_tiles, 0);
  if (n_tiles == 0) return quotas;
  const auto n = static_cast<std::int64_t>(n_tiles);
  const std::int64_t base = total / n;
  const std::int64_t rem = total % n;
  for (std::int64_t t = 0; t < n; ++t) {
    quotas[static_cast<std::size_t>(t)] = base + (t < rem ? 1 : 0);
  }
  return quotas;
}

TilePlan plan_tiles(int height, int width, int tile_size, std::int64_t n_vs, std::int64_t n_us) {
  if (height < 1 || width < 1 || tile_size < 1 || n_vs < 0 || n_us < 0) {
    throw Error(ErrorCode::kInvalidArgument, "plan_tiles: invalid dimensions or counts");
  }
  TilePlan plan;
  plan.tile_size = tile_size;
  const std::vector<int> rows = tile_offsets(height, tile_size);
  const std::vector<int> cols = tile_offsets(width, tile_size);
  plan.n_h = static_cast<int>(rows.size());
  plan.n_w = static_cast<int>(cols.size());

  const std::size_t n_tiles = rows.size() * cols.size();
  const auto vs = allocate_quotas(n_vs, n_tiles);
  const auto us = allocate_quotas(n_us, n_tiles);
  plan.tiles.reserve(n_tiles);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      Tile t;
      t.row0 = rows[i];
      t.col0 = cols[j];
      t.height = std::min(tile_size, height - t.row0);
      t.width = std::min(tile_size, width - t.col0);
      const std::size_t idx = i * cols.size() + j;
      t.quota_vs = vs[idx];
      t.quota_us = us[idx];
      plan.tiles.push_back(t);
    }
  }
  return plan;
}

double ScalarMap::max() const {
  if (values.empty()) return 0.0;
  return *std::max_element(values.begin(), values.end());
}

ScalarMap gradient_magnitude(const ImageBuffer& image, const Tile& tile) {
  ScalarMap out(tile.height, tile.width);
  const int h = tile.height;
  const int w = tile.width;
  auto px = [&](int r, int c, int ch) { return image.at(tile.row0 + r, tile.col0 + c, ch); };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double sum = 0.0;
      for (int ch = 0; ch < ImageBuffer::kChannels; ++ch) {
        double gx = 0.0;
        if (w > 1) {
          if (c == 0) {
            gx = px(r, 1, ch) - px(r, 0, ch);
          } else if (c == w - 1) {
            gx = px(r, c, ch) - px(r, c - 1, ch);
          } else {
            gx = 0.5 * (px(r, c + 1, ch) - px(r, c - 1, ch));
          }
        }
        double gy = 0.0;
        if (h > 1) {
          if (r == 0) {
            gy = px(1, c, ch) - px(0, c, ch);
          } else if (r == h - 1) {
            gy = px(r, c, ch) - px(r - 1, c, ch);
          } else {
            gy = 0.5 * (px(r + 1, c, ch) - px(r - 1, c, ch));
          }
        }
        sum += std::sqrt(gx * gx + gy * gy);
      }
      out.at(r, c) = sum / ImageBuffer::kChannels;
    }
  }
  return out;
}

ScalarMap color_variance(const ImageBuffer& image, const Tile& tile, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "variance window must be odd and >= 1");
  }
  ScalarMap out(tile.height, tile.width);
  const int half = window / 2;
  for (int r = 0; r < tile.height; ++r) {
    const int r_lo = std::max(0, r - half);
    const int r_hi = std::min(tile.height - 1, r + half);
    for (int c = 0; c < tile.width; ++c) {
      const int c_lo = std::max(0, c - half);
      const int c_hi = std::min(tile.width - 1, c + half);
      const double count = static_cast<double>((r_hi - r_lo + 1) * (c_hi - c_lo + 1));
      double total = 0.0;
      for (int ch = 0; ch < ImageBuffer::kChannels; ++ch) {
        double mean = 0.0;
        for (int rr = r_lo; rr <= r_hi; ++rr) {
          for (int cc = c_lo; cc <= c_hi; ++cc) {
            mean += image.at(tile.row0 + rr, tile.col0 + cc, ch);
          }
        }
        mean /= count;
        double var = 0.0;
        for (int rr = r_lo; rr <= r_hi; ++rr) {
          for (int cc = c_lo; cc <= c_hi; ++cc) {
            const double d = image.at(tile.row0 + rr, tile.col0 + cc, ch) - mean;
            var += d * d;
          }
        }
        total += var / count;
      }
      out.at(r, c) = total / ImageBuffer::kChannels;
    }
  }
  return out;
}

WeightMap sampling_weights(const ScalarMap& grad, const ScalarMap& variance, double lambda_m,
                           double epsilon) {
  if (grad.height != variance.height || grad.width != variance.width) {
    throw Error(ErrorCode::kShapeMismatch, "gradient and variance maps differ in shape");
  }
  if (!(lambda_m >= 0.0 && lambda_m <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_m must lie in [0,1]");
  }
  WeightMap out;
  out.grad_norm = ScalarMap(grad.height, grad.width);
  out.variance_norm = ScalarMap(grad.height, grad.width);
  out.weights = ScalarMap(grad.height, grad.width);

  const double grad_scale = grad.max() + epsilon;
  const double var_scale = variance.max() + epsilon;
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    const double m = grad.values[i] / grad_scale;
    const double v = variance.values[i] / var_scale;
    out.grad_norm.values[i] = m;
    out.variance_norm.values[i] = v;
    out.weights.values[i] = lambda_m * m + (1.0 - lambda_m) * v;
  }
  return out;
}

WeightMap tile_weights(const ImageBuffer& image, const Tile& tile, double lambda_m, int window) {
  return sampling_weights(gradient_magnitude(image, tile), color_variance(image, tile, window),
                          lambda_m);
}

}  // namespace splat
