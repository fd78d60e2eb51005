#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "splat/types.hpp"

namespace splat {

// Scales below this many pixels are clamped inside the renderer and receive
// no log-scale gradient.
inline constexpr double kScaleFloor = 0.3;
// Pixels inside the 3 sigma box but where G < kGaussianCutoff (far out along
// the minor axis of an elongated primitive) are skipped. Eight orders below
// the transmittance cutoff, so invisible in the output, but it keeps long thin
// primitives from paying for their whole square box.
inline constexpr double kGaussianCutoff = 1e-12;
inline const double kMaxMahalanobis2 = -2.0 * std::log(kGaussianCutoff);

// Compositing at a pixel stops once transmittance falls below this.
inline constexpr double kTransmittanceCutoff = 1e-4;
// Side of the square pixel blocks used for binning and parallel work.
inline constexpr int kBlockSize = 16;

using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 rotation_matrix(double theta);

// Sigma^-1 = R diag(1/sx^2, 1/sy^2) R^T, without a general inverse.
Mat2 inverse_covariance(double theta, double s_x, double s_y);

// exp(-0.5 d^T Sigma^-1 d) with d = point - mean and s = exp(log_scales).
double gaussian_value(Vec2 mean, Vec2 log_scales, double theta, double px, double py);

struct RenderOptions {
  CompositeMode mode = CompositeMode::kAlphaBlend;
  int threads = 1;
};

// One primitive's contribution at one pixel, in compositing order.
struct Contribution {
  std::uint32_t slot = 0;     // index into the owning block's `bin`
  double g = 0.0;             // Gaussian value at the pixel center
  double transmittance = 0.0; // transmittance before this primitive
};

struct PixelBlock {
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> bin;      // primitives whose 3 sigma box meets the block, ascending
  std::vector<std::uint32_t> offsets;  // per pixel, start into `entries`; size h*w + 1
  std::vector<Contribution> entries;
};

struct RenderOutput {
  ImageBuffer image;
  CompositeMode mode = CompositeMode::kAlphaBlend;
  std::vector<PixelBlock> blocks;
  std::vector<std::uint8_t> clamped;  // per image value, 1 where the final clamp was active
  std::uint64_t pair_count = 0;       // (pixel, primitive) pairs composited
};

// Same shape as GaussianSet, in double precision.
struct GradientSet {
  std::vector<std::array<double, 2>> means;
  std::vector<std::array<double, 2>> log_scales;
  std::vector<double> thetas;
  std::vector<std::array<double, 3>> colors;

  explicit GradientSet(std::size_t n = 0)
      : means(n, {0.0, 0.0}), log_scales(n, {0.0, 0.0}), thetas(n, 0.0),
        colors(n, {0.0, 0.0, 0.0}) {}
  std::size_t size() const noexcept { return means.size(); }
  bool all_finite() const;
};

struct BackwardStats {
  std::uint64_t pair_count = 0;  // (pixel, primitive) pairs visited
};

// Rasterizes the set onto a height x width canvas. Pixel (r, c) is sampled at
// (c + 0.5, r + 0.5); primitives composite in ascending index order.
RenderOutput render(const GaussianSet& set, int height, int width,
                    const RenderOptions& options = {});
// Same, reusing the buffers already held by `out`.
void render(const GaussianSet& set, int height, int width, const RenderOptions& options,
            RenderOutput& out);

// Gradient of a scalar loss with respect to every parameter, given dL/dI for
// each rendered value (same layout as ImageBuffer::data()).
GradientSet backward(const GaussianSet& set, const RenderOutput& output,
                     std::span<const double> d_loss_d_image, int threads = 1,
                     BackwardStats* stats = nullptr);

// Uniformly rescales the canvas: means and scales are multiplied by `factor`.
GaussianSet rescale(const GaussianSet& set, double factor);

}  // namespace splat
