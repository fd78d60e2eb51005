#include "splat/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "splat/budget.hpp"
#include "splat/parallel.hpp"

namespace splat {
namespace {

// Per-primitive quantities shared by the forward and backward passes.
struct Prepared {
  double mx, my;
  double sx, sy;
  bool floored_x, floored_y;
  double cos_t, sin_t;
  double inv_sx2, inv_sy2;
  double radius;
  double rx, ry;      // box half-extents, trimmed to the G >= kGaussianCutoff ellipse
  double qa, qb, qc;  // q = qa dx^2 + 2 qb dx dy + qc dy^2
  std::array<double, 3> color;
  std::array<bool, 3> color_clamped;
};

std::vector<Prepared> prepare(const GaussianSet& set) {
  set.check_consistent();
  std::vector<Prepared> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    Prepared& p = out[i];
    p.mx = set.means[i].x;
    p.my = set.means[i].y;
    const double raw_x = std::exp(static_cast<double>(set.log_scales[i].x));
    const double raw_y = std::exp(static_cast<double>(set.log_scales[i].y));
    p.floored_x = !(raw_x > kScaleFloor);
    p.floored_y = !(raw_y > kScaleFloor);
    p.sx = p.floored_x ? kScaleFloor : raw_x;
    p.sy = p.floored_y ? kScaleFloor : raw_y;
    const double theta = set.thetas[i];
    p.cos_t = std::cos(theta);
    p.sin_t = std::sin(theta);
    p.inv_sx2 = 1.0 / (p.sx * p.sx);
    p.inv_sy2 = 1.0 / (p.sy * p.sy);
    p.radius = influence_radius(p.sx, p.sy);
    const double c2 = p.cos_t * p.cos_t, s2 = p.sin_t * p.sin_t, cs = p.cos_t * p.sin_t;
    p.qa = c2 * p.inv_sx2 + s2 * p.inv_sy2;
    p.qb = cs * (p.inv_sx2 - p.inv_sy2);
    p.qc = s2 * p.inv_sx2 + c2 * p.inv_sy2;
    const double sx2 = p.sx * p.sx, sy2 = p.sy * p.sy;
    p.rx = std::min(p.radius, std::sqrt(kMaxMahalanobis2 * (c2 * sx2 + s2 * sy2)));
    p.ry = std::min(p.radius, std::sqrt(kMaxMahalanobis2 * (s2 * sx2 + c2 * sy2)));
    for (int ch = 0; ch < 3; ++ch) {
      const double c = set.colors[i][ch];
      p.color_clamped[ch] = !(c >= 0.0 && c <= 1.0);
      p.color[ch] = std::clamp(c, 0.0, 1.0);
    }
  }
  return out;
}

// Local-frame offsets u = R^T (x - mean).
inline void local_offsets(const Prepared& p, double px, double py, double& ux, double& uy) {
  const double dx = px - p.mx;
  const double dy = py - p.my;
  ux = p.cos_t * dx + p.sin_t * dy;
  uy = -p.sin_t * dx + p.cos_t * dy;
}

inline double evaluate(const Prepared& p, double px, double py) {
  double ux, uy;
  local_offsets(p, px, py, ux, uy);
  return std::exp(-0.5 * (ux * ux * p.inv_sx2 + uy * uy * p.inv_sy2));
}

// Inclusive pixel index range whose centers satisfy |i + 0.5 - m| <= r.
inline void pixel_span(double m, double r, int extent, int& lo, int& hi) {
  const double a = std::ceil(m - r - 0.5);
  const double b = std::floor(m + r - 0.5);
  lo = static_cast<int>(std::max(a, 0.0));
  hi = static_cast<int>(std::min(b, static_cast<double>(extent - 1)));
}

}  // namespace

Mat2 rotation_matrix(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {{{c, -s}, {s, c}}};
}

Mat2 inverse_covariance(double theta, double s_x, double s_y) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double a = 1.0 / (s_x * s_x);
  const double b = 1.0 / (s_y * s_y);
  return {{{c * c * a + s * s * b, c * s * (a - b)}, {c * s * (a - b), s * s * a + c * c * b}}};
}

double gaussian_value(Vec2 mean, Vec2 log_scales, double theta, double px, double py) {
  const Mat2 inv = inverse_covariance(theta, std::exp(static_cast<double>(log_scales.x)),
                                      std::exp(static_cast<double>(log_scales.y)));
  const double dx = px - mean.x;
  const double dy = py - mean.y;
  const double q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
  return std::exp(-0.5 * q);
}

bool GradientSet::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::all_of(means[i].begin(), means[i].end(), finite) ||
        !std::all_of(log_scales[i].begin(), log_scales[i].end(), finite) ||
        !std::isfinite(thetas[i]) || !std::all_of(colors[i].begin(), colors[i].end(), finite)) {
      return false;
    }
  }
  return true;
}

RenderOutput render(const GaussianSet& set, int height, int width, const RenderOptions& options) {
  RenderOutput out;
  render(set, height, width, options, out);
  return out;
}

void render(const GaussianSet& set, int height, int width, const RenderOptions& options,
            RenderOutput& out) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "render canvas must be at least 1x1");
  }
  const std::vector<Prepared> prims = prepare(set);

  out.mode = options.mode;
  out.pair_count = 0;
  if (out.image.height() != height || out.image.width() != width) {
    out.image = ImageBuffer(height, width);
  }
  out.clamped.assign(out.image.size(), 0);

  const int blocks_x = (width + kBlockSize - 1) / kBlockSize;
  const int blocks_y = (height + kBlockSize - 1) / kBlockSize;
  out.blocks.resize(static_cast<std::size_t>(blocks_x) * blocks_y);
  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      PixelBlock& b = out.blocks[static_cast<std::size_t>(by) * blocks_x + bx];
      b.row0 = by * kBlockSize;
      b.col0 = bx * kBlockSize;
      b.height = std::min(kBlockSize, height - b.row0);
      b.width = std::min(kBlockSize, width - b.col0);
      b.bin.clear();
    }
  }

  // Bin primitives into every block their box touches, in index order.
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const Prepared& p = prims[i];
    int c_lo, c_hi, r_lo, r_hi;
    pixel_span(p.mx, p.rx, width, c_lo, c_hi);
    pixel_span(p.my, p.ry, height, r_lo, r_hi);
    if (c_lo > c_hi || r_lo > r_hi) continue;
    for (int by = r_lo / kBlockSize; by <= r_hi / kBlockSize; ++by) {
      for (int bx = c_lo / kBlockSize; bx <= c_hi / kBlockSize; ++bx) {
        out.blocks[static_cast<std::size_t>(by) * blocks_x + bx].bin.push_back(
            static_cast<std::uint32_t>(i));
      }
    }
  }

  const bool alpha = options.mode == CompositeMode::kAlphaBlend;
  std::vector<std::uint64_t> block_pairs(out.blocks.size(), 0);
  parallel_for(out.blocks.size(), options.threads, [&](std::size_t bi) {
    PixelBlock& b = out.blocks[bi];
    b.offsets.assign(static_cast<std::size_t>(b.height) * b.width + 1, 0);
    b.entries.clear();

    // Local pixel spans of every binned box, then per-row lists of the slots
    // whose box covers that row (still in slot order).
    struct Span {
      int r_lo, r_hi, c_lo, c_hi;
    };
    std::vector<Span> spans(b.bin.size());
    std::size_t covered = 0;
    for (std::size_t slot = 0; slot < b.bin.size(); ++slot) {
      const Prepared& p = prims[b.bin[slot]];
      Span& sp = spans[slot];
      pixel_span(p.mx, p.rx, width, sp.c_lo, sp.c_hi);
      pixel_span(p.my, p.ry, height, sp.r_lo, sp.r_hi);
      sp.c_lo = std::max(sp.c_lo, b.col0) - b.col0;
      sp.c_hi = std::min(sp.c_hi, b.col0 + b.width - 1) - b.col0;
      sp.r_lo = std::max(sp.r_lo, b.row0) - b.row0;
      sp.r_hi = std::min(sp.r_hi, b.row0 + b.height - 1) - b.row0;
      if (sp.r_lo <= sp.r_hi && sp.c_lo <= sp.c_hi) {
        covered += static_cast<std::size_t>(sp.r_hi - sp.r_lo + 1) * (sp.c_hi - sp.c_lo + 1);
      }
    }
    b.entries.reserve(covered);
    // Per row: slots that reach it, with the columns where the box and the
    // q <= kMaxMahalanobis2 ellipse overlap.
    struct RowSpan {
      std::uint32_t slot;
      int c_lo, c_hi;
    };
    std::vector<RowSpan> active;
    active.reserve(b.bin.size());

    for (int lr = 0; lr < b.height; ++lr) {
      const int row = b.row0 + lr;
      const double py = row + 0.5;
      active.clear();
      for (std::size_t slot = 0; slot < b.bin.size(); ++slot) {
        const Span& sp = spans[slot];
        if (lr < sp.r_lo || lr > sp.r_hi) continue;
        const Prepared& p = prims[b.bin[slot]];
        const double dy = py - p.my;
        const double q_min = p.inv_sx2 * p.inv_sy2 / p.qa * dy * dy;  // det / qa, no cancellation
        if (q_min > kMaxMahalanobis2) continue;
        const double half = std::sqrt((kMaxMahalanobis2 - q_min) / p.qa);
        int e_lo, e_hi;
        pixel_span(p.mx - p.qb * dy / p.qa, half, width, e_lo, e_hi);
        const int c_lo = std::max(sp.c_lo, e_lo - b.col0);
        const int c_hi = std::min(sp.c_hi, e_hi - b.col0);
        if (c_lo <= c_hi) active.push_back({static_cast<std::uint32_t>(slot), c_lo, c_hi});
      }
      for (int lc = 0; lc < b.width; ++lc) {
        const int col = b.col0 + lc;
        const double px = col + 0.5;
        const std::size_t local = static_cast<std::size_t>(lr) * b.width + lc;
        b.offsets[local] = static_cast<std::uint32_t>(b.entries.size());
        double acc[3] = {0.0, 0.0, 0.0};
        double t = 1.0;
        for (const RowSpan& rs : active) {
          if (lc < rs.c_lo || lc > rs.c_hi) continue;
          if (alpha && t < kTransmittanceCutoff) break;
          const std::uint32_t slot = rs.slot;
          const Prepared& p = prims[b.bin[slot]];
          const double g = evaluate(p, px, py);
          b.entries.push_back({slot, g, t});
          if (alpha) {
            const double w = g * t;
            for (int ch = 0; ch < 3; ++ch) acc[ch] += p.color[ch] * w;
            t *= (1.0 - g);
          } else {
            for (int ch = 0; ch < 3; ++ch) acc[ch] += p.color[ch] * g;
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          const std::size_t idx = out.image.index(row, col, ch);
          const double v = acc[ch];
          if (v < 0.0 || v > 1.0) out.clamped[idx] = 1;
          out.image.data()[idx] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    b.offsets.back() = static_cast<std::uint32_t>(b.entries.size());
    block_pairs[bi] = b.entries.size();
  });
  for (auto n : block_pairs) out.pair_count += n;
}

GradientSet backward(const GaussianSet& set, const RenderOutput& output,
                     std::span<const double> d_loss_d_image, int threads, BackwardStats* stats) {
  if (d_loss_d_image.size() != output.image.size()) {
    throw Error(ErrorCode::kShapeMismatch, "image gradient does not match the render");
  }
  const std::vector<Prepared> prims = prepare(set);
  const bool alpha = output.mode == CompositeMode::kAlphaBlend;
  constexpr int kParams = 8;  // mean x/y, log-scale x/y, theta, rgb

  // Each block accumulates into its own slot-indexed buffer; buffers are
  // merged in block order below so the sum order never depends on threads.
  std::vector<std::vector<double>> local(output.blocks.size());
  std::vector<std::uint64_t> visited(output.blocks.size(), 0);
  parallel_for(output.blocks.size(), threads, [&](std::size_t bi) {
    const PixelBlock& b = output.blocks[bi];
    std::vector<double>& acc = local[bi];
    acc.assign(b.bin.size() * kParams, 0.0);
    std::uint64_t count = 0;
    for (int lr = 0; lr < b.height; ++lr) {
      const int row = b.row0 + lr;
      const double py = row + 0.5;
      for (int lc = 0; lc < b.width; ++lc) {
        const int col = b.col0 + lc;
        const double px = col + 0.5;
        const std::size_t local_px = static_cast<std::size_t>(lr) * b.width + lc;
        const std::uint32_t begin = b.offsets[local_px];
        const std::uint32_t end = b.offsets[local_px + 1];
        if (begin == end) continue;

        double grad[3];
        bool any = false;
        for (int ch = 0; ch < 3; ++ch) {
          const std::size_t idx = output.image.index(row, col, ch);
          grad[ch] = output.clamped[idx] ? 0.0 : d_loss_d_image[idx];
          any = any || grad[ch] != 0.0;
        }
        count += end - begin;
        if (!any) continue;

        // Color of everything composited behind the current entry, relative
        // to the transmittance just after it.
        double behind[3] = {0.0, 0.0, 0.0};
        for (std::uint32_t e = end; e-- > begin;) {
          const Contribution& ct = b.entries[e];
          const Prepared& p = prims[b.bin[ct.slot]];
          double* a = &acc[static_cast<std::size_t>(ct.slot) * kParams];
          const double g = ct.g;

          double d_g = 0.0;
          if (alpha) {
            const double w = g * ct.transmittance;
            for (int ch = 0; ch < 3; ++ch) {
              if (!p.color_clamped[ch]) a[5 + ch] += grad[ch] * w;
              d_g += grad[ch] * ct.transmittance * (p.color[ch] - behind[ch]);
              behind[ch] = p.color[ch] * g + (1.0 - g) * behind[ch];
            }
          } else {
            for (int ch = 0; ch < 3; ++ch) {
              if (!p.color_clamped[ch]) a[5 + ch] += grad[ch] * g;
              d_g += grad[ch] * p.color[ch];
            }
          }
          if (d_g == 0.0) continue;

          // G = exp(-q/2), q = ux^2/sx^2 + uy^2/sy^2.
          const double d_q = -0.5 * g * d_g;
          double ux, uy;
          local_offsets(p, px, py, ux, uy);
          const double ax = 2.0 * ux * p.inv_sx2;
          const double ay = 2.0 * uy * p.inv_sy2;
          a[0] += d_q * -(ax * p.cos_t - ay * p.sin_t);
          a[1] += d_q * -(ax * p.sin_t + ay * p.cos_t);
          if (!p.floored_x) a[2] += d_q * (-ax * ux);
          if (!p.floored_y) a[3] += d_q * (-ay * uy);
          a[4] += d_q * (ax * uy - ay * ux);
        }
      }
    }
    visited[bi] = count;
  });

  GradientSet grads(set.size());
  std::uint64_t pairs = 0;
  for (std::size_t bi = 0; bi < output.blocks.size(); ++bi) {
    const PixelBlock& b = output.blocks[bi];
    const std::vector<double>& acc = local[bi];
    for (std::size_t slot = 0; slot < b.bin.size(); ++slot) {
      const std::size_t i = b.bin[slot];
      const double* a = &acc[slot * kParams];
      grads.means[i][0] += a[0];
      grads.means[i][1] += a[1];
      grads.log_scales[i][0] += a[2];
      grads.log_scales[i][1] += a[3];
      grads.thetas[i] += a[4];
      for (int ch = 0; ch < 3; ++ch) grads.colors[i][ch] += a[5 + ch];
    }
    pairs += visited[bi];
  }
  if (stats != nullptr) stats->pair_count = pairs;
  return grads;
}

GaussianSet rescale(const GaussianSet& set, double factor) {
  if (!(factor > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rescale factor must be > 0");
  }
  GaussianSet out = set;
  const auto log_f = static_cast<float>(std::log(factor));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.means[i].x = static_cast<float>(out.means[i].x * factor);
    out.means[i].y = static_cast<float>(out.means[i].y * factor);
    out.log_scales[i].x += log_f;
    out.log_scales[i].y += log_f;
  }
  return out;
}

}  // namespace splat
