#include "splat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "splat/metrics.hpp"

namespace splat {
namespace {
LossResult loss_impl(const ImageBuffer& rendered, const ImageBuffer& target,
                     const SsimReference* ref, double lambda_l);
}  // namespace

LossResult composite_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                          double lambda_l) {
  if (lambda_l < 1.0 && rendered.same_shape(target)) {
    return composite_loss(rendered, SsimReference(target), lambda_l);
  }
  return loss_impl(rendered, target, nullptr, lambda_l);
}

LossResult composite_loss(const ImageBuffer& rendered, const SsimReference& target,
                          double lambda_l) {
  return loss_impl(rendered, target.target(), &target, lambda_l);
}

namespace {

LossResult loss_impl(const ImageBuffer& rendered, const ImageBuffer& target,
                     const SsimReference* ref, double lambda_l) {
  if (!rendered.same_shape(target)) {
    throw Error(ErrorCode::kShapeMismatch, "rendered and target images differ in shape");
  }
  if (!(lambda_l >= 0.0 && lambda_l <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_l must lie in [0,1]");
  }
  LossResult out;
  const auto r = rendered.data();
  const auto t = target.data();
  const auto n = static_cast<double>(r.size());
  out.d_rendered.assign(r.size(), 0.0);

  double abs_sum = 0.0;
  const double l1_scale = lambda_l / n;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - t[i];
    abs_sum += std::abs(d);
    out.d_rendered[i] = d > 0.0 ? l1_scale : (d < 0.0 ? -l1_scale : 0.0);
  }
  out.l1 = abs_sum / n;
  out.loss = lambda_l * out.l1;

  if (lambda_l < 1.0) {
    const SsimGradient s = ref->gradient(rendered);
    out.ssim = s.value;
    out.loss += (1.0 - lambda_l) * (1.0 - s.value);
    for (std::size_t i = 0; i < r.size(); ++i) {
      out.d_rendered[i] -= (1.0 - lambda_l) * s.d_first[i];
    }
  }
  return out;
}

}  // namespace

double Adam::step(std::size_t i, double grad, int t) {
  m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad;
  v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad * grad;
  const double m_hat = m_[i] / (1.0 - std::pow(params_.beta1, t));
  const double v_hat = v_[i] / (1.0 - std::pow(params_.beta2, t));
  return lr_ * m_hat / (std::sqrt(v_hat) + params_.epsilon);
}

namespace {

[[noreturn]] void abort_non_finite(int step, double loss, const GaussianSet& set) {
  double min_ls = 0.0;
  double max_ls = 0.0;
  bool first = true;
  for (const auto& ls : set.log_scales) {
    for (float v : {ls.x, ls.y}) {
      min_ls = first ? v : std::min<double>(min_ls, v);
      max_ls = first ? v : std::max<double>(max_ls, v);
      first = false;
    }
  }
  std::ostringstream msg;
  msg << "loss became non-finite (" << loss << ") at step " << step << "; " << set.size()
      << " primitives, log-scale range [" << min_ls << ", " << max_ls << "]";
  throw Error(ErrorCode::kNonFiniteLoss, msg.str());
}

}  // namespace

TrainResult train(const ImageBuffer& image, GaussianSet set, const EncoderConfig& config,
                  const TrainOptions& options) {
  config.validate();
  set.check_consistent();
  if (set.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot train an empty GaussianSet");
  }
  const std::size_t n = set.size();
  const int height = image.height();
  const int width = image.width();
  const double extent = std::max(height, width);
  const LearningRates& lr = config.learning_rates;

  TrainResult result;
  TrainState& state = result.state;
  state.means = Adam(2 * n, lr.means);
  state.scales = Adam(2 * n, lr.scales);
  state.colors = Adam(3 * n, lr.colors);
  state.thetas = Adam(n, lr.thetas);
  state.loss_history.reserve(static_cast<std::size_t>(config.iterations) + 1);

  RenderOptions ropts;
  ropts.mode = config.composite;
  ropts.threads = config.threads;

  std::optional<SsimReference> reference;
  if (config.lambda_l < 1.0) reference.emplace(image);

  RenderOutput rendered;
  for (int step = 0;; ++step) {
    render(set, height, width, ropts, rendered);
    const LossResult loss = reference
                                ? composite_loss(rendered.image, *reference, config.lambda_l)
                                : composite_loss(rendered.image, image, config.lambda_l);
    if (!std::isfinite(loss.loss)) abort_non_finite(step, loss.loss, set);
    state.loss_history.push_back(loss.loss);
    state.step = step;

    const bool last = step == config.iterations;
    if (step % kPsnrInterval == 0 || last) {
      const double db = psnr(rendered.image, image);
      state.psnr_history.emplace_back(step, db);
      if (options.on_progress) options.on_progress(step, loss.loss, db);
    }
    if (last) break;

    const GradientSet grads = backward(set, rendered, loss.d_rendered, config.threads);
    const int t = step + 1;
    for (std::size_t i = 0; i < n; ++i) {
      // Means move in [0,1]-normalized coordinates: x_n = x / extent.
      set.means[i].x -= static_cast<float>(extent * state.means.step(2 * i, grads.means[i][0] * extent, t));
      set.means[i].y -= static_cast<float>(extent * state.means.step(2 * i + 1, grads.means[i][1] * extent, t));
      set.log_scales[i].x -= static_cast<float>(state.scales.step(2 * i, grads.log_scales[i][0], t));
      set.log_scales[i].y -= static_cast<float>(state.scales.step(2 * i + 1, grads.log_scales[i][1], t));
      for (int ch = 0; ch < 3; ++ch) {
        set.colors[i][ch] -= static_cast<float>(state.colors.step(3 * i + ch, grads.colors[i][ch], t));
      }
      set.thetas[i] -= static_cast<float>(state.thetas.step(i, grads.thetas[i], t));
    }
  }
  result.set = std::move(set);
  return result;
}

}  // namespace splat
