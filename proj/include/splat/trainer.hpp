#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "splat/renderer.hpp"
#include "splat/metrics.hpp"
#include "splat/types.hpp"

namespace splat {

struct LossResult {
  double loss = 0.0;
  double l1 = 0.0;
  double ssim = 1.0;
  std::vector<double> d_rendered;  // dL / d rendered, ImageBuffer layout
};

// L = lambda_l * mean|R - T| + (1 - lambda_l) * (1 - SSIM(R, T)).
LossResult composite_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                          double lambda_l);
// Same, with the target's SSIM statistics precomputed.
LossResult composite_loss(const ImageBuffer& rendered, const SsimReference& target,
                          double lambda_l);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments for one parameter group, stored flat.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, AdamParams params = {})
      : lr_(lr), params_(params), m_(n, 0.0), v_(n, 0.0) {}

  // Returns the update to subtract for element i at 1-based step t.
  double step(std::size_t i, double grad, int t);

  std::size_t size() const noexcept { return m_.size(); }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }

 private:
  double lr_ = 0.0;
  AdamParams params_;
  std::vector<double> m_;
  std::vector<double> v_;
};

inline constexpr int kPsnrInterval = 100;

struct TrainState {
  int step = 0;
  Adam means;   // 2 per primitive, in max(H, W)-normalized coordinates
  Adam scales;  // 2 per primitive, log domain
  Adam colors;  // 3 per primitive
  Adam thetas;  // 1 per primitive
  // loss_history[s] is the loss of the parameters after s updates; it holds
  // iterations + 1 entries.
  std::vector<double> loss_history;
  std::vector<std::pair<int, double>> psnr_history;  // (step, dB)
};

struct TrainOptions {
  // Called with (step, loss, psnr) whenever PSNR is sampled.
  std::function<void(int, double, double)> on_progress;
};

struct TrainResult {
  GaussianSet set;
  TrainState state;
};

// Runs config.iterations Adam steps of the composite loss. Throws
// kNonFiniteLoss if the loss ever stops being finite.
TrainResult train(const ImageBuffer& image, GaussianSet set, const EncoderConfig& config,
                  const TrainOptions& options = {});

}  // namespace splat
