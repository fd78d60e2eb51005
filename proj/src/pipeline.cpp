#include "splat/pipeline.hpp"

#include <chrono>

#include "splat/budget.hpp"
#include "splat/renderer.hpp"

namespace splat {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double nominal_ratio(const Budget& budget, int height, int width) {
  return 3.0 * static_cast<double>(height) * static_cast<double>(width) /
         (kBudgetBytesPerPrimitive * static_cast<double>(budget.n_g));
}

EncodeResult encode_image(const ImageBuffer& image, double cr, const EncoderConfig& config,
                          InitVariant variant, CodecMode mode,
                          const TrainOptions& train_options) {
  config.validate();
  EncodeResult out;
  out.budget = compute_budget(image.height(), image.width(), cr, config.lambda_g);

  auto start = std::chrono::steady_clock::now();
  out.init = initialize_detailed(image, out.budget, config, variant);
  out.timings.init_seconds = seconds_since(start);

  start = std::chrono::steady_clock::now();
  TrainResult trained = train(image, out.init.set, config, train_options);
  out.timings.train_seconds = seconds_since(start);
  out.trained = std::move(trained.set);
  out.state = std::move(trained.state);

  start = std::chrono::steady_clock::now();
  out.file = encode_file(out.trained, image.height(), image.width(), mode);
  out.timings.encode_seconds = seconds_since(start);

  const DecodedFile decoded = decode_file(out.file);
  RenderOptions ropts;
  ropts.mode = config.composite;
  ropts.threads = config.threads;
  const RenderOutput recon = render(decoded.set, decoded.height, decoded.width, ropts);
  out.quality = evaluate_quality(image, recon.image);
  out.nominal_ratio = nominal_ratio(out.budget, image.height(), image.width());
  out.achieved_ratio = achieved_ratio(out.file.size(), image.height(), image.width());
  return out;
}

}  // namespace splat
