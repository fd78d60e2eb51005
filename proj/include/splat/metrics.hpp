#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "splat/types.hpp"

namespace splat {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
// Smallest side for which five dyadic scales still fit one 11x11 window.
inline constexpr int kMsSsimMinSide = kSsimWindow << 4;

// Peak 1.0; identical inputs report kPsnrCap.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Mean over all valid 11x11 windows (no padding) of the local SSIM with a
// Gaussian window (sigma 1.5), averaged over channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct SsimGradient {
  double value = 0.0;
  std::vector<double> d_first;  // dSSIM / d a, same layout as ImageBuffer::data()
};

// SSIM(a, b) and its gradient with respect to `a`.
SsimGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b);

// Fixed second operand with its window statistics cached, for repeated
// SSIM gradients against the same target. Holds scratch buffers, so one
// instance must not be used from two threads at once.
class SsimReference {
 public:
  explicit SsimReference(const ImageBuffer& target);
  ~SsimReference();
  SsimReference(SsimReference&&) noexcept;
  SsimReference& operator=(SsimReference&&) noexcept;

  const ImageBuffer& target() const { return target_; }
  SsimGradient gradient(const ImageBuffer& rendered) const;

 private:
  struct Channel {
    std::vector<double> y;
    std::vector<double> mu;
    std::vector<double> sq;  // filtered y^2
  };
  struct Workspace;
  ImageBuffer target_;
  std::array<Channel, 3> channels_;
  std::unique_ptr<Workspace> work_;
};

// Five-scale MS-SSIM with 2x2 mean-pool downsampling. Throws kImageTooSmall
// when either side is below kMsSsimMinSide.
double ms_ssim(const ImageBuffer& a, const ImageBuffer& b);

// 1D normalized Gaussian taps of the SSIM window.
std::array<double, kSsimWindow> ssim_kernel();

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> ms_ssim;  // absent when the image is too small
};

QualityReport evaluate_quality(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace splat
