#pragma once

#include <cstdint>
#include <vector>

#include "splat/codec.hpp"
#include "splat/initializer.hpp"
#include "splat/metrics.hpp"
#include "splat/trainer.hpp"
#include "splat/types.hpp"

namespace splat {

struct PhaseTimings {
  double init_seconds = 0.0;
  double train_seconds = 0.0;
  double encode_seconds = 0.0;
};

struct EncodeResult {
  Budget budget;
  InitResult init;
  GaussianSet trained;
  TrainState state;
  std::vector<std::uint8_t> file;
  PhaseTimings timings;
  QualityReport quality;  // decoded file vs source image
  double nominal_ratio = 0.0;
  double achieved_ratio = 0.0;
};

// compute_budget -> initialize -> train -> encode_file, then decodes the
// file once more to score it against the source.
EncodeResult encode_image(const ImageBuffer& image, double cr, const EncoderConfig& config,
                          InitVariant variant = InitVariant::kFull,
                          CodecMode mode = CodecMode::kQuantized,
                          const TrainOptions& train_options = {});

// Nominal ratio implied by the budget: 3HW / (7 n_g).
double nominal_ratio(const Budget& budget, int height, int width);

}  // namespace splat
