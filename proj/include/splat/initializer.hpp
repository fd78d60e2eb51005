#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splat/features.hpp"
#include "splat/rng.hpp"
#include "splat/types.hpp"

namespace splat {

enum class SampleKind : std::uint8_t { kVariational, kUniform };

struct SamplePoint {
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;  // sampling weight, variational samples only
  double scale = 0.0;   // isotropic initial scale in pixels
  SampleKind kind = SampleKind::kVariational;
  bool degraded = false;  // uniform sample placed after the attempt budget ran out
};

struct Point2d {
  double x = 0.0;
  double y = 0.0;
};

/// Draws `quota` pixels from the tile with probability proportional to the
/// weight (with replacement) and places each at the pixel center in tile-local
/// coordinates. Scale is s_base * exp(-w / 2). An all-zero map falls back to a
/// uniform distribution over the tile.
std::vector<SamplePoint> variational_sample_tile(const WeightMap& weights, std::int64_t quota,
                                                 double s_base, Rng& rng);

/// Offsets tile-local points by the tile origin (row0 -> y, col0 -> x).
std::vector<SamplePoint> to_global(std::vector<SamplePoint> points, int row0, int col0);

/// max(s_base, median of the variational scales).
double exclusion_radius(double s_base, std::span<const SamplePoint> variational);

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;
};

inline constexpr int kExclusionAttempts = 30;

/// Exclusion-constrained uniform sampler. Keeps a spatial hash of every point
/// inserted so far; each accepted point is at least r_excl away from all of
/// them. When `max_attempts` candidates in a row are rejected, the candidate
/// with the largest nearest-neighbor distance is kept and flagged degraded.
class ExclusionSampler {
 public:
  ExclusionSampler(double r_excl, double canvas_width, double canvas_height,
                   std::size_t expected_points);

  void insert(double x, double y);

  std::vector<SamplePoint> sample(std::int64_t quota, const Rect& region, Rng& rng,
                                  int max_attempts = kExclusionAttempts);

  double radius() const { return r_excl_; }

 private:
  // Distance to the nearest stored point, or +inf if none lies within r_excl.
  double nearest_within_radius(double x, double y) const;
  std::size_t cell_of(double x, double y) const;

  double r_excl_;
  double cell_;
  int cols_;
  int rows_;
  std::vector<int> head_;
  std::vector<int> next_;
  std::vector<Point2d> points_;
};

/// Samples `quota` points over [0,W) x [0,H) respecting the exclusion radius
/// against `existing` and each other.
std::vector<SamplePoint> uniform_sample_excluded(std::span<const SamplePoint> existing,
                                                 std::int64_t quota, double r_excl, int height,
                                                 int width, Rng& rng,
                                                 int max_attempts = kExclusionAttempts);

/// For each query index into `reference`, the RMS distance to its k nearest
/// neighbors in `reference`, excluding the query itself. Throws
/// kInsufficientPoints when reference.size() <= k.
std::vector<double> knn_scales(std::span<const Point2d> reference,
                               std::span<const std::size_t> query_indices, int k,
                               int threads = 1);

/// Smallest value whose cumulative weight reaches half the total.
double weighted_median(std::span<const double> values, std::span<const double> weights);

/// Per-channel Gaussian-weighted median over pixel centers within `scale` of
/// (x, y), sigma = scale. Falls back to the nearest pixel when no center is
/// inside the disc.
Color weighted_median_color(const ImageBuffer& image, double x, double y, double scale);

// Scale range for randomly initialized primitives, in pixels.
inline constexpr double kRandomScaleMin = 0.5;
inline constexpr double kRandomScaleMax = 1.5;

/// Which attributes come from feature-aware sampling; the rest are random.
/// Variants are cumulative in the order listed.
enum class InitVariant {
  kRandom,       // uniform means, random scales and colors
  kMeans,        // sampled means, random scales and colors
  kMeansScales,  // sampled means and scales, random colors
  kFull,         // sampled means, scales, weighted-median colors
};

struct InitResult {
  GaussianSet set;
  std::vector<SamplePoint> samples;  // same order as `set`
  TilePlan plan;
  double r_excl = 0.0;
};

InitResult initialize_detailed(const ImageBuffer& image, const Budget& budget,
                               const EncoderConfig& config,
                               InitVariant variant = InitVariant::kFull);

GaussianSet initialize(const ImageBuffer& image, const Budget& budget,
                       const EncoderConfig& config);

}  // namespace splat
