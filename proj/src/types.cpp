#include "splat/types.hpp"

#include <algorithm>
#include <cmath>

namespace splat {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kBudgetTooSmall: return "budget-too-small";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kImageTooSmall: return "image-too-small";
    case ErrorCode::kInsufficientPoints: return "insufficient-points";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kTruncatedPayload: return "truncated-payload";
    case ErrorCode::kUnreadableImage: return "unreadable-image";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
  }
  return "unknown";
}

ImageBuffer::ImageBuffer(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (!(fill >= 0.0 && fill <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fill value outside [0,1]");
  }
  data_.assign(pixel_count() * kChannels, fill);
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (data_.size() != pixel_count() * kChannels) {
    throw Error(ErrorCode::kShapeMismatch, "pixel data does not match H*W*3");
  }
  const bool in_range = std::all_of(data_.begin(), data_.end(), [](double v) {
    return v >= 0.0 && v <= 1.0;
  });
  if (!in_range) {
    throw Error(ErrorCode::kInvalidArgument, "pixel intensity outside [0,1]");
  }
}

void GaussianSet::resize(std::size_t n) {
  means.resize(n);
  log_scales.resize(n);
  thetas.resize(n);
  colors.resize(n);
}

void GaussianSet::push_back(Vec2 mean, Vec2 log_scale, float theta, Color color) {
  means.push_back(mean);
  log_scales.push_back(log_scale);
  thetas.push_back(theta);
  colors.push_back(color);
}

void GaussianSet::check_consistent() const {
  const std::size_t n = means.size();
  if (log_scales.size() != n || thetas.size() != n || colors.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "GaussianSet arrays differ in length");
  }
}

void EncoderConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(lambda_m) || !unit(lambda_g) || !unit(lambda_l)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda weights must lie in [0,1]");
  }
  if (k_neighbors < 1) {
    throw Error(ErrorCode::kInvalidArgument, "k_neighbors must be >= 1");
  }
  if (tile_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "tile_size must be >= 1");
  }
  if (variance_window < 1 || variance_window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "variance_window must be odd and >= 1");
  }
  if (iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 0");
  }
  if (threads < 0) {
    throw Error(ErrorCode::kInvalidArgument, "threads must be >= 0");
  }
}

}  // namespace splat
