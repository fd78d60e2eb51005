#pragma once

// Slow, obviously-correct reference implementations shared by the unit tests
// and the acceptance binary. None of these call into the code they check
// beyond render() for finite differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "splat/initializer.hpp"
#include "splat/renderer.hpp"
#include "test_util.hpp"

namespace splat::oracle {

using Channel = std::vector<std::vector<double>>;

inline Channel channel(const ImageBuffer& img, int ch) {
  Channel out(img.height(), std::vector<double>(img.width()));
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) out[r][c] = img.at(r, c, ch);
  }
  return out;
}

// Per-window SSIM with an explicit 2D Gaussian window; returns mean SSIM and
// mean contrast-structure.
inline std::pair<double, double> naive_window_scores(const Channel& x, const Channel& y) {
  double win[11][11];
  double total = 0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += win[i][j];
    }
  }
  const double c1 = 0.0001, c2 = 0.0009;
  double s_sum = 0, cs_sum = 0;
  int count = 0;
  const int h = static_cast<int>(x.size()), w = static_cast<int>(x[0].size());
  for (int r = 0; r + 11 <= h; ++r) {
    for (int c = 0; c + 11 <= w; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          mx += win[i][j] / total * x[r + i][c + j];
          my += win[i][j] / total * y[r + i][c + j];
        }
      }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double wt = win[i][j] / total;
          const double dx = x[r + i][c + j] - mx, dy = y[r + i][c + j] - my;
          vx += wt * dx * dx;
          vy += wt * dy * dy;
          cov += wt * dx * dy;
        }
      }
      const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
      const double cs = (2 * cov + c2) / (vx + vy + c2);
      s_sum += l * cs;
      cs_sum += cs;
      ++count;
    }
  }
  return {s_sum / count, cs_sum / count};
}

inline double naive_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  double s = 0;
  for (int ch = 0; ch < 3; ++ch) s += naive_window_scores(channel(a, ch), channel(b, ch)).first;
  return s / 3;
}

inline Channel halve(const Channel& x) {
  Channel out(x.size() / 2, std::vector<double>(x[0].size() / 2));
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t c = 0; c < out[0].size(); ++c) {
      out[r][c] = (x[2 * r][2 * c] + x[2 * r + 1][2 * c] + x[2 * r][2 * c + 1] + x[2 * r + 1][2 * c + 1]) / 4;
    }
  }
  return out;
}

inline double naive_ms_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    Channel x = channel(a, ch), y = channel(b, ch);
    double prod = 1;
    for (int level = 0; level < 5; ++level) {
      const auto [s, cs] = naive_window_scores(x, y);
      prod *= std::pow(std::max(0.0, level == 4 ? s : cs), weights[level]);
      x = halve(x);
      y = halve(y);
    }
    total += prod;
  }
  return total / 3;
}

// argmin over candidate values of sum w |z - v|, smallest on ties.
inline double brute_median(const std::vector<double>& v, const std::vector<double>& w) {
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  std::vector<double> cand = v;
  std::sort(cand.begin(), cand.end());
  for (double z : cand) {
    double cost = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) cost += w[i] * std::abs(z - v[i]);
    if (cost < best) {
      best = cost;
      arg = z;
    }
  }
  return arg;
}

inline std::vector<double> brute_knn(const std::vector<Point2d>& pts,
                                     const std::vector<std::size_t>& q, int k) {
  std::vector<double> out;
  for (std::size_t i : q) {
    std::vector<double> d2;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      d2.push_back((pts[i].x - pts[j].x) * (pts[i].x - pts[j].x) +
                   (pts[i].y - pts[j].y) * (pts[i].y - pts[j].y));
    }
    std::sort(d2.begin(), d2.end());
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += d2[t];
    out.push_back(std::sqrt(s / k));
  }
  return out;
}

// Straightforward per-pixel compositing.
inline ImageBuffer naive_render(const GaussianSet& set, int h, int w, bool alpha) {
  ImageBuffer img(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      double acc[3] = {0, 0, 0};
      double t = 1.0;
      for (std::size_t i = 0; i < set.size(); ++i) {
        if (alpha && t < kTransmittanceCutoff) break;
        const double sx = std::max(kScaleFloor, std::exp(double(set.log_scales[i].x)));
        const double sy = std::max(kScaleFloor, std::exp(double(set.log_scales[i].y)));
        const double rad = 3 * std::max(sx, sy);
        if (std::abs(px - set.means[i].x) > rad || std::abs(py - set.means[i].y) > rad) continue;
        const Mat2 inv = inverse_covariance(set.thetas[i], sx, sy);
        const double dx = px - set.means[i].x, dy = py - set.means[i].y;
        const double q = inv[0][0] * dx * dx + 2 * inv[0][1] * dx * dy + inv[1][1] * dy * dy;
        if (q > -2 * std::log(kGaussianCutoff)) continue;
        const double g = std::exp(-0.5 * q);
        for (int ch = 0; ch < 3; ++ch) {
          const double col = std::clamp<double>(set.colors[i][ch], 0.0, 1.0);
          acc[ch] += alpha ? col * g * t : col * g;
        }
        if (alpha) t *= 1 - g;
      }
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = std::clamp(acc[ch], 0.0, 1.0);
    }
  }
  return img;
}

// Ordered primitive ids contributing to every pixel.
inline std::vector<std::vector<std::uint32_t>> support(const RenderOutput& out, int h, int w) {
  std::vector<std::vector<std::uint32_t>> s(static_cast<std::size_t>(h) * w);
  for (const auto& b : out.blocks) {
    for (int lr = 0; lr < b.height; ++lr) {
      for (int lc = 0; lc < b.width; ++lc) {
        const std::size_t l = static_cast<std::size_t>(lr) * b.width + lc;
        auto& dst = s[static_cast<std::size_t>(b.row0 + lr) * w + b.col0 + lc];
        for (auto e = b.offsets[l]; e < b.offsets[l + 1]; ++e) dst.push_back(b.bin[b.entries[e].slot]);
      }
    }
  }
  return s;
}

inline double functional(const ImageBuffer& img, const std::vector<double>& weights) {
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * img.data()[i];
  return s;
}

struct FdStats {
  int checked = 0;
  int skipped = 0;
  int failed = 0;
  double worst = 0;  // largest relative error among checked probes
  std::vector<std::string> failures;
};

inline bool close(double a, double f, double rel, double abs_tol) {
  return std::abs(a - f) <= std::max(rel * std::max(std::abs(a), std::abs(f)), abs_tol);
}

// Compares every analytic derivative with a central difference taken over
// the exact float perturbation, using a random linear functional of the image
// as the loss. Perturbations that change which primitives reach which pixels
// (or which values hit the final clamp) cross a discontinuity and are skipped.
inline void check_scene(const GaussianSet& set, int h, int w, CompositeMode mode, Rng& rng,
                        FdStats& st) {
  RenderOptions opt;
  opt.mode = mode;
  const RenderOutput base = render(set, h, w, opt);
  std::vector<double> weights(base.image.size());
  for (auto& x : weights) x = rng.uniform(-1, 1);
  const GradientSet g = backward(set, base, weights);
  const auto base_support = support(base, h, w);

  auto probe = [&](auto&& get, double analytic, const char* what, std::size_t i) {
    GaussianSet plus = set, minus = set;
    float& vp = get(plus);
    float& vm = get(minus);
    const float v0 = vp;
    const double step = 1e-4 * std::max(1.0, std::abs(double(v0)));
    vp = static_cast<float>(v0 + step);
    vm = static_cast<float>(v0 - step);
    const double denom = double(vp) - double(vm);
    const RenderOutput rp = render(plus, h, w, opt);
    const RenderOutput rm = render(minus, h, w, opt);
    if (support(rp, h, w) != base_support || support(rm, h, w) != base_support ||
        rp.clamped != base.clamped || rm.clamped != base.clamped) {
      ++st.skipped;
      return;
    }
    const double fd = (functional(rp.image, weights) - functional(rm.image, weights)) / denom;
    ++st.checked;
    if (!close(analytic, fd, 1e-3, 1e-6)) {
      ++st.failed;
      st.failures.push_back(std::string(what) + "[" + std::to_string(i) + "] analytic " +
                            std::to_string(analytic) + " vs fd " + std::to_string(fd));
    }
    st.worst = std::max(st.worst, std::abs(analytic - fd) / std::max(1e-6, std::abs(fd)));
  };

  for (std::size_t i = 0; i < set.size(); ++i) {
    probe([i](GaussianSet& s) -> float& { return s.means[i].x; }, g.means[i][0], "mean_x", i);
    probe([i](GaussianSet& s) -> float& { return s.means[i].y; }, g.means[i][1], "mean_y", i);
    probe([i](GaussianSet& s) -> float& { return s.log_scales[i].x; }, g.log_scales[i][0], "log_sx", i);
    probe([i](GaussianSet& s) -> float& { return s.log_scales[i].y; }, g.log_scales[i][1], "log_sy", i);
    probe([i](GaussianSet& s) -> float& { return s.thetas[i]; }, g.thetas[i], "theta", i);
    for (int ch = 0; ch < 3; ++ch) {
      probe([i, ch](GaussianSet& s) -> float& { return s.colors[i][ch]; }, g.colors[i][ch], "color", i);
    }
  }
}

// Up to 10 primitives with colors kept off the clamp boundaries.
inline GaussianSet fd_scene(Rng& rng, int h, int w) {
  const auto n = 1 + static_cast<std::size_t>(rng.uniform() * 10);
  GaussianSet set = testing::random_set(n, h, w, rng, 1.0, 5.0);
  for (auto& c : set.colors) {
    for (auto& v : c) v = static_cast<float>(0.05 + 0.9 * v);
  }
  return set;
}

}  // namespace splat::oracle
