#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "splat/budget.hpp"
#include "splat/renderer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace splat;
using splat::testing::random_set;

namespace {

using oracle::check_scene;
using oracle::fd_scene;
using oracle::FdStats;
using oracle::naive_render;

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST(GaussianValue, Examples) {
  EXPECT_DOUBLE_EQ(gaussian_value({3, 4}, {0.3f, -0.2f}, 1.1, 3, 4), 1.0);
  EXPECT_NEAR(gaussian_value({0, 0}, {0, 0}, 0.0, 1, 0), std::exp(-0.5), 1e-15);
  const Mat2 r = rotation_matrix(std::numbers::pi / 2);
  EXPECT_NEAR(r[0][0], 0, 1e-15);
  EXPECT_NEAR(r[0][1], -1, 1e-15);
  EXPECT_NEAR(r[1][0], 1, 1e-15);
  EXPECT_NEAR(r[1][1], 0, 1e-15);
}

TEST(GaussianValue, CovarianceMatchesRotatedScales) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double th = rng.uniform() * 7, sx = rng.uniform(0.3, 5), sy = rng.uniform(0.3, 5);
    const Mat2 inv = inverse_covariance(th, sx, sy);
    // Sigma = R S S R^T, check Sigma * inv = I.
    const Mat2 rm = rotation_matrix(th);
    double sig[2][2];
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) sig[a][b] = rm[a][0] * rm[b][0] * sx * sx + rm[a][1] * rm[b][1] * sy * sy;
    }
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double p = sig[a][0] * inv[0][b] + sig[a][1] * inv[1][b];
        EXPECT_NEAR(p, a == b ? 1.0 : 0.0, 1e-9);
      }
    }
  }
}

TEST(Render, SinglePrimitiveAtItsMean) {
  GaussianSet set;
  set.push_back({2.5f, 1.5f}, {0, 0}, 0.4f, {0.2f, 0.6f, 0.9f});
  const RenderOutput out = render(set, 4, 5);
  EXPECT_NEAR(out.image.at(1, 2, 0), 0.2f, 1e-7);
  EXPECT_NEAR(out.image.at(1, 2, 1), 0.6f, 1e-7);
  EXPECT_NEAR(out.image.at(1, 2, 2), 0.9f, 1e-7);
}

TEST(Render, TwoHalfOpaquePrimitives) {
  const double d = std::sqrt(2 * std::log(2.0));
  GaussianSet set;
  set.push_back({static_cast<float>(0.5 + d), 0.5f}, {0, 0}, 0, {1, 0, 0});
  set.push_back({0.5f, static_cast<float>(0.5 + d)}, {0, 0}, 0, {0, 1, 0});
  const RenderOutput out = render(set, 1, 1);
  EXPECT_NEAR(out.image.at(0, 0, 0), 0.5, 1e-6);
  EXPECT_NEAR(out.image.at(0, 0, 1), 0.25, 1e-6);
  EXPECT_EQ(out.image.at(0, 0, 2), 0.0);
}

TEST(Render, EmptyCoverageIsBlack) {
  GaussianSet set;
  set.push_back({100, 100}, {0, 0}, 0, {1, 1, 1});
  const RenderOutput out = render(set, 8, 8);
  for (double v : out.image.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.pair_count, 0u);
  EXPECT_EQ(render(GaussianSet{}, 3, 3).image, ImageBuffer(3, 3));
}

TEST(Render, MatchesNaiveCompositing) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = 5 + static_cast<int>(rng.uniform() * 50);
    const int w = 5 + static_cast<int>(rng.uniform() * 50);
    GaussianSet set = random_set(1 + static_cast<std::size_t>(rng.uniform() * 60), h, w, rng, 0.1, 8);
    set.colors[0] = {1.4f, -0.2f, 0.5f};  // clamped per primitive
    const bool alpha = trial % 2 == 0;
    RenderOptions opt;
    opt.mode = alpha ? CompositeMode::kAlphaBlend : CompositeMode::kAdditive;
    EXPECT_LT(max_abs_diff(render(set, h, w, opt).image, naive_render(set, h, w, alpha)), 1e-11);
  }
}

TEST(Render, TransmittanceCutoffStopsCompositing) {
  GaussianSet set;
  for (int i = 0; i < 50; ++i) set.push_back({0.5f, 0.5f}, {0, 0}, 0, {1, 1, 1});
  const RenderOutput out = render(set, 1, 1);
  // The first primitive has G = 1 at its own center, so T drops to 0.
  EXPECT_EQ(out.pair_count, 1u);
  EXPECT_DOUBLE_EQ(out.image.at(0, 0, 0), 1.0);
}

TEST(Render, AdditiveClampFlagsAndZeroGradient) {
  GaussianSet set;
  for (int i = 0; i < 3; ++i) set.push_back({0.5f, 0.5f}, {0, 0}, 0, {0.6f, 0.1f, 0.1f});
  RenderOptions opt;
  opt.mode = CompositeMode::kAdditive;
  const RenderOutput out = render(set, 1, 1, opt);
  EXPECT_EQ(out.image.at(0, 0, 0), 1.0);
  EXPECT_EQ(out.clamped[0], 1);
  EXPECT_EQ(out.clamped[1], 0);
  const std::vector<double> d = {1.0, 0.0, 0.0};
  const GradientSet g = backward(set, out, d);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g.colors[i][0], 0.0);
}

TEST(Render, ScaleFloor) {
  GaussianSet a, b;
  a.push_back({2.3f, 2.7f}, {std::log(0.01f), std::log(0.2f)}, 0.3f, {1, 1, 1});
  b.push_back({2.3f, 2.7f}, {static_cast<float>(std::log(kScaleFloor)), static_cast<float>(std::log(kScaleFloor))}, 0.3f,
              {1, 1, 1});
  EXPECT_LT(max_abs_diff(render(a, 5, 5).image, render(b, 5, 5).image), 1e-6);
  std::vector<double> d(75, 1.0);
  const GradientSet g = backward(a, render(a, 5, 5), d);
  EXPECT_EQ(g.log_scales[0][0], 0.0);
  EXPECT_EQ(g.log_scales[0][1], 0.0);
}

TEST(Render, IdenticalAcrossThreadCounts) {
  Rng rng(3);
  const GaussianSet set = random_set(400, 100, 120, rng, 0.5, 10);
  RenderOptions one, many;
  many.threads = 4;
  const RenderOutput a = render(set, 100, 120, one);
  const RenderOutput b = render(set, 100, 120, many);
  EXPECT_EQ(a.image, b.image);
  std::vector<double> d(a.image.size());
  for (auto& x : d) x = rng.uniform(-1, 1);
  const GradientSet ga = backward(set, a, d, 1);
  const GradientSet gb = backward(set, b, d, 4);
  EXPECT_EQ(ga.means, gb.means);
  EXPECT_EQ(ga.log_scales, gb.log_scales);
  EXPECT_EQ(ga.thetas, gb.thetas);
  EXPECT_EQ(ga.colors, gb.colors);
}

TEST(Render, BufferReuseGivesSameResult) {
  Rng rng(4);
  const GaussianSet s1 = random_set(50, 40, 40, rng);
  const GaussianSet s2 = random_set(80, 40, 40, rng);
  RenderOutput reused;
  render(s1, 40, 40, {}, reused);
  render(s2, 40, 40, {}, reused);
  const RenderOutput fresh = render(s2, 40, 40);
  EXPECT_EQ(reused.image, fresh.image);
  EXPECT_EQ(reused.pair_count, fresh.pair_count);
}

TEST(Render, RejectsEmptyCanvas) {
  EXPECT_THROW(render(GaussianSet{}, 0, 4), Error);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  Rng rng(5);
  const GaussianSet set = random_set(20, 30, 30, rng);
  const RenderOutput out = render(set, 30, 30);
  BackwardStats stats;
  const GradientSet g = backward(set, out, std::vector<double>(out.image.size(), 0.0), 1, &stats);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(g.means[i][0], 0.0);
    EXPECT_EQ(g.log_scales[i][1], 0.0);
    EXPECT_EQ(g.thetas[i], 0.0);
    EXPECT_EQ(g.colors[i][2], 0.0);
  }
  EXPECT_EQ(stats.pair_count, out.pair_count);
}

TEST(Backward, StationaryAtMean) {
  GaussianSet set;
  set.push_back({2.5f, 2.5f}, {0.2f, -0.1f}, 0.7f, {0.3f, 0.5f, 0.7f});
  const RenderOutput out = render(set, 5, 5);
  std::vector<double> d(out.image.size(), 0.0);
  for (int ch = 0; ch < 3; ++ch) d[out.image.index(2, 2, ch)] = 1.0;
  const GradientSet g = backward(set, out, d);
  EXPECT_EQ(g.means[0][0], 0.0);
  EXPECT_EQ(g.means[0][1], 0.0);
}

TEST(Backward, ShapeMismatch) {
  GaussianSet set;
  set.push_back({1, 1}, {0, 0}, 0, {1, 1, 1});
  const RenderOutput out = render(set, 3, 3);
  EXPECT_THROW(backward(set, out, std::vector<double>(5, 0.0)), Error);
}

TEST(Backward, MatchesFiniteDifferencesAlpha) {
  Rng rng(6);
  FdStats st;
  for (int scene = 0; scene < 20; ++scene) check_scene(fd_scene(rng, 32, 32), 32, 32, CompositeMode::kAlphaBlend, rng, st);
  EXPECT_EQ(st.failed, 0) << (st.failures.empty() ? "" : st.failures.front());
  EXPECT_LT(st.skipped, st.checked / 10);
}

TEST(Backward, MatchesFiniteDifferencesAdditive) {
  Rng rng(7);
  FdStats st;
  for (int scene = 0; scene < 10; ++scene) {
    GaussianSet set = fd_scene(rng, 24, 24);
    for (auto& c : set.colors) {
      for (auto& v : c) v *= 0.1f;  // keep sums below the clamp
    }
    check_scene(set, 24, 24, CompositeMode::kAdditive, rng, st);
  }
  EXPECT_EQ(st.failed, 0) << (st.failures.empty() ? "" : st.failures.front());
  EXPECT_LT(st.skipped, st.checked / 10);
}

TEST(Rescale, HalfCanvasMatchesDownsampledRender) {
  Rng rng(8);
  const GaussianSet set = random_set(150, 64, 64, rng, 2, 8);
  const GaussianSet half = rescale(set, 0.5);
  EXPECT_FLOAT_EQ(half.means[3].x, set.means[3].x * 0.5f);
  EXPECT_NEAR(std::exp(half.log_scales[3].y), 0.5 * std::exp(set.log_scales[3].y), 1e-5);
  EXPECT_THROW(rescale(set, 0.0), Error);
}
