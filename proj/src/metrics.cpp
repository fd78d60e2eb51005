#include "splat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace splat {
namespace {

constexpr int kHalf = kSsimWindow / 2;

struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

Plane channel_plane(const ImageBuffer& img, int ch) {
  Plane p(img.height(), img.width());
  for (int r = 0; r < p.h; ++r) {
    for (int c = 0; c < p.w; ++c) p.at(r, c) = img.at(r, c, ch);
  }
  return p;
}

// Valid-mode separable correlation with the SSIM window. `tmp` is scratch.
void filter_valid(const Plane& in, const std::array<double, kSsimWindow>& k, Plane& tmp,
                  Plane& out) {
  const int oh = in.h - kSsimWindow + 1;
  const int ow = in.w - kSsimWindow + 1;
  tmp.h = in.h;
  tmp.w = ow;
  tmp.v.assign(static_cast<std::size_t>(in.h) * ow, 0.0);
  for (int r = 0; r < in.h; ++r) {
    const double* row = &in.v[static_cast<std::size_t>(r) * in.w];
    double* dst = &tmp.v[static_cast<std::size_t>(r) * ow];
    for (int t = 0; t < kSsimWindow; ++t) {
      const double kt = k[t];
      const double* src = row + t;
      for (int c = 0; c < ow; ++c) dst[c] += kt * src[c];
    }
  }
  out.h = oh;
  out.w = ow;
  out.v.assign(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    double* dst = &out.v[static_cast<std::size_t>(r) * ow];
    for (int t = 0; t < kSsimWindow; ++t) {
      const double kt = k[t];
      const double* src = &tmp.v[static_cast<std::size_t>(r + t) * ow];
      for (int c = 0; c < ow; ++c) dst[c] += kt * src[c];
    }
  }
}

Plane filter_valid(const Plane& in, const std::array<double, kSsimWindow>& k) {
  Plane tmp, out;
  filter_valid(in, k, tmp, out);
  return out;
}

// Adjoint of filter_valid: scatters each window value back over its pixels.
void filter_adjoint(const Plane& in, int full_h, int full_w,
                    const std::array<double, kSsimWindow>& k, Plane& tmp, Plane& out) {
  tmp.h = full_h;
  tmp.w = in.w;
  tmp.v.assign(static_cast<std::size_t>(full_h) * in.w, 0.0);
  for (int r = 0; r < in.h; ++r) {
    const double* src = &in.v[static_cast<std::size_t>(r) * in.w];
    for (int t = 0; t < kSsimWindow; ++t) {
      const double kt = k[t];
      double* dst = &tmp.v[static_cast<std::size_t>(r + t) * in.w];
      for (int c = 0; c < in.w; ++c) dst[c] += kt * src[c];
    }
  }
  out.h = full_h;
  out.w = full_w;
  out.v.assign(static_cast<std::size_t>(full_h) * full_w, 0.0);
  for (int r = 0; r < full_h; ++r) {
    const double* src = &tmp.v[static_cast<std::size_t>(r) * in.w];
    double* row = &out.v[static_cast<std::size_t>(r) * full_w];
    for (int t = 0; t < kSsimWindow; ++t) {
      const double kt = k[t];
      double* dst = row + t;
      for (int c = 0; c < in.w; ++c) dst[c] += kt * src[c];
    }
  }
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

struct LocalStats {
  Plane mu_x, mu_y, var_x, var_y, cov;
};

LocalStats local_stats(const Plane& x, const Plane& y, const std::array<double, kSsimWindow>& k) {
  LocalStats s;
  s.mu_x = filter_valid(x, k);
  s.mu_y = filter_valid(y, k);
  s.var_x = filter_valid(product(x, x), k);
  s.var_y = filter_valid(product(y, y), k);
  s.cov = filter_valid(product(x, y), k);
  for (std::size_t i = 0; i < s.mu_x.v.size(); ++i) {
    const double mx = s.mu_x.v[i];
    const double my = s.mu_y.v[i];
    s.var_x.v[i] -= mx * mx;
    s.var_y.v[i] -= my * my;
    s.cov.v[i] -= mx * my;
  }
  return s;
}

struct PlaneScores {
  double ssim = 0.0;  // mean of l * cs
  double cs = 0.0;    // mean of cs
};

PlaneScores plane_scores(const Plane& x, const Plane& y,
                         const std::array<double, kSsimWindow>& k) {
  const LocalStats s = local_stats(x, y, k);
  double sum_ssim = 0.0;
  double sum_cs = 0.0;
  for (std::size_t i = 0; i < s.mu_x.v.size(); ++i) {
    const double mx = s.mu_x.v[i];
    const double my = s.mu_y.v[i];
    const double l = (2.0 * mx * my + kSsimC1) / (mx * mx + my * my + kSsimC1);
    const double cs = (2.0 * s.cov.v[i] + kSsimC2) / (s.var_x.v[i] + s.var_y.v[i] + kSsimC2);
    sum_ssim += l * cs;
    sum_cs += cs;
  }
  const auto n = static_cast<double>(s.mu_x.v.size());
  return {sum_ssim / n, sum_cs / n};
}

Plane downsample(const Plane& in) {
  Plane out(in.h / 2, in.w / 2);
  for (int r = 0; r < out.h; ++r) {
    for (int c = 0; c < out.w; ++c) {
      out.at(r, c) = 0.25 * (in.at(2 * r, 2 * c) + in.at(2 * r, 2 * c + 1) +
                             in.at(2 * r + 1, 2 * c) + in.at(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kShapeMismatch, "images differ in shape");
  }
}

void require_ssim_size(const ImageBuffer& a) {
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw Error(ErrorCode::kImageTooSmall, "SSIM needs both sides >= 11 pixels");
  }
}

}  // namespace

std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kHalf;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b);
  double sse = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(da.size());
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b);
  require_ssim_size(a);
  const auto k = ssim_kernel();
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    total += plane_scores(channel_plane(a, ch), channel_plane(b, ch), k).ssim;
  }
  return total / 3.0;
}

SsimGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b);
  return SsimReference(b).gradient(a);
}

struct SsimReference::Workspace {
  Plane x, sq, xy, mu_x, xx, cross, alpha, beta, gamma, ga, gb, gc, tmp;
};

SsimReference::SsimReference(const ImageBuffer& target)
    : target_(target), work_(std::make_unique<Workspace>()) {
  require_ssim_size(target_);
  const auto k = ssim_kernel();
  for (int ch = 0; ch < 3; ++ch) {
    Plane y = channel_plane(target_, ch);
    channels_[ch].mu = filter_valid(y, k).v;
    channels_[ch].sq = filter_valid(product(y, y), k).v;
    channels_[ch].y = std::move(y.v);
  }
}

SsimReference::~SsimReference() = default;
SsimReference::SsimReference(SsimReference&&) noexcept = default;
SsimReference& SsimReference::operator=(SsimReference&&) noexcept = default;

SsimGradient SsimReference::gradient(const ImageBuffer& rendered) const {
  require_same_shape(rendered, target_);
  const auto k = ssim_kernel();
  const int h = rendered.height();
  const int w = rendered.width();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  Workspace& ws = *work_;
  SsimGradient out;
  out.d_first.assign(rendered.size(), 0.0);

  for (int ch = 0; ch < 3; ++ch) {
    const Channel& ref = channels_[ch];
    ws.x.h = ws.sq.h = ws.xy.h = h;
    ws.x.w = ws.sq.w = ws.xy.w = w;
    ws.x.v.resize(pixels);
    ws.sq.v.resize(pixels);
    ws.xy.v.resize(pixels);
    const double* src = rendered.data().data();
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = src[3 * p + ch];
      ws.x.v[p] = v;
      ws.sq.v[p] = v * v;
      ws.xy.v[p] = v * ref.y[p];
    }
    filter_valid(ws.x, k, ws.tmp, ws.mu_x);
    filter_valid(ws.sq, k, ws.tmp, ws.xx);
    filter_valid(ws.xy, k, ws.tmp, ws.cross);
    const std::size_t n = ws.mu_x.v.size();
    const double scale = 1.0 / (static_cast<double>(n) * 3.0);

    // dS/dx_p = sum_k w(p - k) [alpha_k + beta_k x_p + gamma_k y_p]
    for (Plane* pl : {&ws.alpha, &ws.beta, &ws.gamma}) {
      pl->h = ws.mu_x.h;
      pl->w = ws.mu_x.w;
      pl->v.resize(n);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mx = ws.mu_x.v[i];
      const double my = ref.mu[i];
      const double var_x = ws.xx.v[i] - mx * mx;
      const double var_y = ref.sq[i] - my * my;
      const double cov = ws.cross.v[i] - mx * my;
      const double a1 = 2.0 * mx * my + kSsimC1;
      const double a2 = 2.0 * cov + kSsimC2;
      const double b1 = mx * mx + my * my + kSsimC1;
      const double b2 = var_x + var_y + kSsimC2;
      const double value = a1 * a2 / (b1 * b2);
      sum += value;
      const double d_mu = 2.0 * my * a2 / (b1 * b2) - 2.0 * mx * value / b1;
      const double d_var = -value / b2;
      const double d_cov = 2.0 * a1 / (b1 * b2);
      ws.alpha.v[i] = (d_mu - 2.0 * d_var * mx - d_cov * my) * scale;
      ws.beta.v[i] = 2.0 * d_var * scale;
      ws.gamma.v[i] = d_cov * scale;
    }
    out.value += sum / static_cast<double>(n) / 3.0;

    filter_adjoint(ws.alpha, h, w, k, ws.tmp, ws.ga);
    filter_adjoint(ws.beta, h, w, k, ws.tmp, ws.gb);
    filter_adjoint(ws.gamma, h, w, k, ws.tmp, ws.gc);
    double* d = out.d_first.data();
    for (std::size_t p = 0; p < pixels; ++p) {
      d[3 * p + ch] = ws.ga.v[p] + ws.x.v[p] * ws.gb.v[p] + ref.y[p] * ws.gc.v[p];
    }
  }
  return out;
}

double ms_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b);
  if (a.height() < kMsSsimMinSide || a.width() < kMsSsimMinSide) {
    throw Error(ErrorCode::kImageTooSmall, "MS-SSIM needs both sides >= 176 pixels");
  }
  const auto k = ssim_kernel();
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    Plane x = channel_plane(a, ch);
    Plane y = channel_plane(b, ch);
    double value = 1.0;
    for (std::size_t level = 0; level < kMsSsimWeights.size(); ++level) {
      const PlaneScores scores = plane_scores(x, y, k);
      const bool last = level + 1 == kMsSsimWeights.size();
      const double term = std::max(0.0, last ? scores.ssim : scores.cs);
      value *= std::pow(term, kMsSsimWeights[level]);
      if (!last) {
        x = downsample(x);
        y = downsample(y);
      }
    }
    total += value;
  }
  return total / 3.0;
}

QualityReport evaluate_quality(const ImageBuffer& a, const ImageBuffer& b) {
  QualityReport r;
  r.psnr = psnr(a, b);
  r.ssim = ssim(a, b);
  if (a.height() >= kMsSsimMinSide && a.width() >= kMsSsimMinSide) {
    r.ms_ssim = ms_ssim(a, b);
  }
  return r;
}

}  // namespace splat
