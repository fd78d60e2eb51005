#include "splat/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "splat/parallel.hpp"

namespace splat {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Stream identifiers for Rng::stream; tile streams use the tile index.
constexpr std::uint64_t kUniformStream = 1ull << 40;
constexpr std::uint64_t kThetaStream = (1ull << 40) + 1;
constexpr std::uint64_t kRandomAttrStream = (1ull << 40) + 2;

// Bucket grid over a fixed point set, for k-nearest-neighbor queries.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Point2d> points) : points_(points) {
    min_x_ = min_y_ = std::numeric_limits<double>::infinity();
    double max_x = -min_x_;
    double max_y = -min_y_;
    for (const auto& p : points) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    const double span_x = std::max(max_x - min_x_, 1e-9);
    const double span_y = std::max(max_y - min_y_, 1e-9);
    cell_ = std::max(std::sqrt(span_x * span_y / static_cast<double>(points.size())), 1e-6);
    cols_ = static_cast<int>(std::floor(span_x / cell_)) + 1;
    rows_ = static_cast<int>(std::floor(span_y / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(cols_) * rows_ + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = flat(cell_x(points[i].x), cell_y(points[i].y));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    members_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) members_[fill[cell_of[i]]++] = i;
  }

  // Sum of squared distances to the k nearest points other than `self`.
  double k_nearest_sq_sum(std::size_t self, int k) const {
    const Point2d q = points_[self];
    const int cx = cell_x(q.x);
    const int cy = cell_y(q.y);
    std::priority_queue<double> best;  // max-heap of squared distances
    const int max_ring = std::max(cols_, rows_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int gy = cy - ring; gy <= cy + ring; ++gy) {
        if (gy < 0 || gy >= rows_) continue;
        const bool edge_row = (gy == cy - ring || gy == cy + ring);
        for (int gx = cx - ring; gx <= cx + ring; gx += (edge_row || ring == 0) ? 1 : 2 * ring) {
          if (gx < 0 || gx >= cols_) continue;
          const std::size_t c = flat(gx, gy);
          for (std::size_t m = start_[c]; m < start_[c + 1]; ++m) {
            const std::size_t j = members_[m];
            if (j == self) continue;
            const double dx = points_[j].x - q.x;
            const double dy = points_[j].y - q.y;
            const double d2 = dx * dx + dy * dy;
            if (static_cast<int>(best.size()) < k) {
              best.push(d2);
            } else if (d2 < best.top()) {
              best.pop();
              best.push(d2);
            }
          }
        }
      }
      // Unvisited points are at least ring * cell away.
      if (static_cast<int>(best.size()) == k) {
        const double reach = static_cast<double>(ring) * cell_;
        if (best.top() <= reach * reach) break;
      }
    }
    double sum = 0.0;
    while (!best.empty()) {
      sum += best.top();
      best.pop();
    }
    return sum;
  }

 private:
  int cell_x(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - min_x_) / cell_)), 0, cols_ - 1);
  }
  int cell_y(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - min_y_) / cell_)), 0, rows_ - 1);
  }
  std::size_t flat(int gx, int gy) const {
    return static_cast<std::size_t>(gy) * cols_ + gx;
  }

  std::span<const Point2d> points_;
  double min_x_;
  double min_y_;
  double cell_;
  int cols_;
  int rows_;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> members_;
};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

std::vector<SamplePoint> variational_sample_tile(const WeightMap& weights, std::int64_t quota,
                                                 double s_base, Rng& rng) {
  std::vector<SamplePoint> out;
  if (quota <= 0) return out;
  const ScalarMap& w = weights.weights;
  const std::size_t n = w.values.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot sample from an empty tile");
  }

  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.values[i];
    if (wi < 0.0 || !std::isfinite(wi)) {
      throw Error(ErrorCode::kInvalidArgument, "sampling weights must be finite and >= 0");
    }
    total += wi;
    cumulative[i] = total;
  }
  const bool degenerate = !(total > 0.0);

  out.reserve(static_cast<std::size_t>(quota));
  for (std::int64_t k = 0; k < quota; ++k) {
    std::size_t idx;
    if (degenerate) {
      idx = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    } else {
      const double target = rng.uniform() * total;
      idx = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin());
      idx = std::min(idx, n - 1);
      // Never land on a zero-weight pixel through rounding at the top end.
      while (w.values[idx] == 0.0 && idx > 0) --idx;
    }
    const int r = static_cast<int>(idx / static_cast<std::size_t>(w.width));
    const int c = static_cast<int>(idx % static_cast<std::size_t>(w.width));
    SamplePoint p;
    p.x = c + 0.5;
    p.y = r + 0.5;
    p.weight = w.values[idx];
    p.scale = s_base * std::exp(-0.5 * p.weight);
    p.kind = SampleKind::kVariational;
    out.push_back(p);
  }
  return out;
}

std::vector<SamplePoint> to_global(std::vector<SamplePoint> points, int row0, int col0) {
  for (auto& p : points) {
    p.x += col0;
    p.y += row0;
  }
  return points;
}

double exclusion_radius(double s_base, std::span<const SamplePoint> variational) {
  std::vector<double> scales;
  scales.reserve(variational.size());
  for (const auto& p : variational) scales.push_back(p.scale);
  return std::max(s_base, median_of(std::move(scales)));
}

ExclusionSampler::ExclusionSampler(double r_excl, double canvas_width, double canvas_height,
                                   std::size_t expected_points)
    : r_excl_(r_excl) {
  if (!(r_excl > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "exclusion radius must be > 0");
  }
  // Cells no smaller than r_excl so a 3x3 neighborhood covers the radius, and
  // no more numerous than roughly the expected point count.
  const double area = std::max(canvas_width * canvas_height, 1.0);
  const double density_cell =
      std::sqrt(area / static_cast<double>(std::max<std::size_t>(expected_points, 1)));
  cell_ = std::max(r_excl, density_cell);
  cols_ = std::max(1, static_cast<int>(std::ceil(canvas_width / cell_)));
  rows_ = std::max(1, static_cast<int>(std::ceil(canvas_height / cell_)));
  head_.assign(static_cast<std::size_t>(cols_) * rows_, -1);
}

std::size_t ExclusionSampler::cell_of(double x, double y) const {
  const int cx = std::clamp(static_cast<int>(std::floor(x / cell_)), 0, cols_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(y / cell_)), 0, rows_ - 1);
  return static_cast<std::size_t>(cy) * cols_ + cx;
}

void ExclusionSampler::insert(double x, double y) {
  const std::size_t c = cell_of(x, y);
  points_.push_back({x, y});
  next_.push_back(head_[c]);
  head_[c] = static_cast<int>(points_.size() - 1);
}

double ExclusionSampler::nearest_within_radius(double x, double y) const {
  const int cx = std::clamp(static_cast<int>(std::floor(x / cell_)), 0, cols_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(y / cell_)), 0, rows_ - 1);
  double best = std::numeric_limits<double>::infinity();
  for (int gy = std::max(0, cy - 1); gy <= std::min(rows_ - 1, cy + 1); ++gy) {
    for (int gx = std::max(0, cx - 1); gx <= std::min(cols_ - 1, cx + 1); ++gx) {
      for (int i = head_[static_cast<std::size_t>(gy) * cols_ + gx]; i >= 0;
           i = next_[static_cast<std::size_t>(i)]) {
        const double dx = points_[static_cast<std::size_t>(i)].x - x;
        const double dy = points_[static_cast<std::size_t>(i)].y - y;
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
      }
    }
  }
  return best < r_excl_ ? best : std::numeric_limits<double>::infinity();
}

std::vector<SamplePoint> ExclusionSampler::sample(std::int64_t quota, const Rect& region,
                                                  Rng& rng, int max_attempts) {
  std::vector<SamplePoint> out;
  if (quota <= 0) return out;
  out.reserve(static_cast<std::size_t>(quota));
  for (std::int64_t k = 0; k < quota; ++k) {
    double best_x = 0.0;
    double best_y = 0.0;
    double best_dist = -1.0;
    bool accepted = false;
    for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
      const double x = region.x0 + rng.uniform() * region.width;
      const double y = region.y0 + rng.uniform() * region.height;
      const double d = nearest_within_radius(x, y);
      if (std::isinf(d)) {
        best_x = x;
        best_y = y;
        accepted = true;
        break;
      }
      if (d > best_dist) {
        best_dist = d;
        best_x = x;
        best_y = y;
      }
    }
    SamplePoint p;
    p.x = best_x;
    p.y = best_y;
    p.kind = SampleKind::kUniform;
    p.degraded = !accepted;
    insert(p.x, p.y);
    out.push_back(p);
  }
  return out;
}

std::vector<SamplePoint> uniform_sample_excluded(std::span<const SamplePoint> existing,
                                                 std::int64_t quota, double r_excl, int height,
                                                 int width, Rng& rng, int max_attempts) {
  if (quota <= 0) return {};
  ExclusionSampler sampler(r_excl, width, height,
                           existing.size() + static_cast<std::size_t>(quota));
  for (const auto& p : existing) sampler.insert(p.x, p.y);
  return sampler.sample(quota, Rect{0.0, 0.0, static_cast<double>(width),
                                    static_cast<double>(height)},
                        rng, max_attempts);
}

std::vector<double> knn_scales(std::span<const Point2d> reference,
                               std::span<const std::size_t> query_indices, int k, int threads) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (reference.size() <= static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kInsufficientPoints,
                "KNN needs more reference points than neighbors requested");
  }
  for (std::size_t q : query_indices) {
    if (q >= reference.size()) {
      throw Error(ErrorCode::kInvalidArgument, "query index outside the reference set");
    }
  }
  const PointGrid grid(reference);
  std::vector<double> scales(query_indices.size());
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (query_indices.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t chunk) {
    const std::size_t end = std::min(query_indices.size(), (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      scales[i] = std::sqrt(grid.k_nearest_sq_sum(query_indices[i], k) / k);
    }
  });
  return scales;
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "weighted_median needs matching nonempty inputs");
  }
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  double total = 0.0;
  for (double w : weights) total += w;
  const double half = 0.5 * total;
  double running = 0.0;
  for (std::size_t i : order) {
    running += weights[i];
    if (running >= half) return values[i];
  }
  return values[order.back()];
}

Color weighted_median_color(const ImageBuffer& image, double x, double y, double scale) {
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "median scale must be > 0");
  }
  // Pixel (r, c) has its center at (c + 0.5, r + 0.5).
  const int r_lo = std::max(0, static_cast<int>(std::ceil(y - scale - 0.5)));
  const int r_hi = std::min(image.height() - 1, static_cast<int>(std::floor(y + scale - 0.5)));
  const int c_lo = std::max(0, static_cast<int>(std::ceil(x - scale - 0.5)));
  const int c_hi = std::min(image.width() - 1, static_cast<int>(std::floor(x + scale - 0.5)));

  const double inv_two_sigma_sq = 1.0 / (2.0 * scale * scale);
  const double radius_sq = scale * scale;
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<double> weights;
  for (int r = r_lo; r <= r_hi; ++r) {
    for (int c = c_lo; c <= c_hi; ++c) {
      const double dx = c + 0.5 - x;
      const double dy = r + 0.5 - y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > radius_sq) continue;
      rows.push_back(r);
      cols.push_back(c);
      weights.push_back(std::exp(-d2 * inv_two_sigma_sq));
    }
  }

  Color out{};
  if (weights.empty()) {
    const int r = std::clamp(static_cast<int>(std::floor(y)), 0, image.height() - 1);
    const int c = std::clamp(static_cast<int>(std::floor(x)), 0, image.width() - 1);
    for (int ch = 0; ch < 3; ++ch) out[ch] = static_cast<float>(image.at(r, c, ch));
    return out;
  }
  std::vector<double> values(weights.size());
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < weights.size(); ++i) values[i] = image.at(rows[i], cols[i], ch);
    out[ch] = static_cast<float>(weighted_median(values, weights));
  }
  return out;
}

InitResult initialize_detailed(const ImageBuffer& image, const Budget& budget,
                               const EncoderConfig& config, InitVariant variant) {
  config.validate();
  if (budget.n_g < 1) {
    throw Error(ErrorCode::kBudgetTooSmall, "budget holds no primitives");
  }
  if (budget.n_vs + budget.n_us != budget.n_g || budget.n_vs < 0 || budget.n_us < 0) {
    throw Error(ErrorCode::kInvalidArgument, "budget split does not sum to n_g");
  }
  const int height = image.height();
  const int width = image.width();
  const int threads = config.threads;

  InitResult result;
  result.plan = plan_tiles(height, width, config.tile_size, budget.n_vs, budget.n_us);
  const auto n_g = static_cast<std::size_t>(budget.n_g);

  std::vector<SamplePoint> samples;
  samples.reserve(n_g);

  if (variant == InitVariant::kRandom) {
    Rng rng = Rng::stream(config.seed, kUniformStream);
    for (std::size_t i = 0; i < n_g; ++i) {
      SamplePoint p;
      p.x = rng.uniform() * width;
      p.y = rng.uniform() * height;
      p.kind = i < static_cast<std::size_t>(budget.n_vs) ? SampleKind::kVariational
                                                         : SampleKind::kUniform;
      samples.push_back(p);
    }
  } else {
    // Variational samples, one independent stream per tile.
    const auto& tiles = result.plan.tiles;
    std::vector<std::vector<SamplePoint>> per_tile(tiles.size());
    parallel_for(tiles.size(), threads, [&](std::size_t t) {
      const Tile& tile = tiles[t];
      if (tile.quota_vs <= 0) return;
      const WeightMap wm = tile_weights(image, tile, config.lambda_m, config.variance_window);
      Rng rng = Rng::stream(config.seed, t);
      per_tile[t] = to_global(variational_sample_tile(wm, tile.quota_vs, budget.s_base, rng),
                              tile.row0, tile.col0);
    });
    for (auto& v : per_tile) samples.insert(samples.end(), v.begin(), v.end());

    result.r_excl = exclusion_radius(budget.s_base, samples);

    if (budget.n_us > 0) {
      ExclusionSampler sampler(result.r_excl, width, height, n_g);
      for (const auto& p : samples) sampler.insert(p.x, p.y);
      Rng rng = Rng::stream(config.seed, kUniformStream);
      for (const Tile& tile : tiles) {
        const Rect region{static_cast<double>(tile.col0), static_cast<double>(tile.row0),
                          static_cast<double>(tile.width), static_cast<double>(tile.height)};
        auto us = sampler.sample(tile.quota_us, region, rng);
        samples.insert(samples.end(), us.begin(), us.end());
      }

      // Uniform samples take their scale from the k nearest samples overall.
      std::vector<Point2d> reference(samples.size());
      std::vector<std::size_t> queries;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        reference[i] = {samples[i].x, samples[i].y};
        if (samples[i].kind == SampleKind::kUniform) queries.push_back(i);
      }
      const int k = std::min<int>(config.k_neighbors, static_cast<int>(samples.size()) - 1);
      std::vector<double> scales;
      if (k >= 1) {
        scales = knn_scales(reference, queries, k, threads);
      } else {
        scales.assign(queries.size(), budget.s_base);
      }
      for (std::size_t i = 0; i < queries.size(); ++i) {
        samples[queries[i]].scale = scales[i] > 0.0 ? scales[i] : budget.s_base;
      }
    }
  }

  // Attributes that are not feature-derived in this variant.
  Rng attr_rng = Rng::stream(config.seed, kRandomAttrStream);
  const bool random_scales = variant == InitVariant::kRandom || variant == InitVariant::kMeans;
  const bool random_colors = variant != InitVariant::kFull;
  std::vector<Color> colors(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (random_scales) samples[i].scale = attr_rng.uniform(kRandomScaleMin, kRandomScaleMax);
    if (random_colors) {
      for (auto& c : colors[i]) c = static_cast<float>(attr_rng.uniform());
    }
  }
  if (!random_colors) {
    constexpr std::size_t kChunk = 512;
    const std::size_t chunks = (samples.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t chunk) {
      const std::size_t end = std::min(samples.size(), (chunk + 1) * kChunk);
      for (std::size_t i = chunk * kChunk; i < end; ++i) {
        colors[i] = weighted_median_color(image, samples[i].x, samples[i].y, samples[i].scale);
      }
    });
  }

  Rng theta_rng = Rng::stream(config.seed, kThetaStream);
  result.set.means.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = samples[i];
    const auto log_s = static_cast<float>(std::log(p.scale));
    auto theta = static_cast<float>(theta_rng.uniform() * kTwoPi);
    if (theta >= kTwoPi) theta = std::nextafter(static_cast<float>(kTwoPi), 0.0f);
    result.set.push_back({static_cast<float>(p.x), static_cast<float>(p.y)}, {log_s, log_s},
                         theta, colors[i]);
  }
  result.samples = std::move(samples);
  return result;
}

GaussianSet initialize(const ImageBuffer& image, const Budget& budget,
                       const EncoderConfig& config) {
  return initialize_detailed(image, budget, config, InitVariant::kFull).set;
}

}  // namespace splat
