#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splat {

enum class ErrorCode {
  kInvalidArgument,
  kBudgetTooSmall,
  kShapeMismatch,
  kImageTooSmall,
  kInsufficientPoints,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedPayload,
  kUnreadableImage,
  kNonFiniteLoss,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Vec2 {
  float x = 0.0f;
  float y = 0.0f;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

using Color = std::array<float, 3>;

// H x W x 3 intensities in [0,1], row-major, channel-interleaved.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int height, int width, double fill = 0.0);
  // Validates shape and that every value lies in [0,1].
  ImageBuffer(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return kChannels; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int row, int col, int ch) {
    return data_[index(row, col, ch)];
  }
  double at(int row, int col, int ch) const {
    return data_[index(row, col, ch)];
  }
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels + ch;
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Opacity is not stored: every primitive composites with opacity 1.
struct GaussianSet {
  std::vector<Vec2> means;       // pixel coordinates, x = column, y = row
  std::vector<Vec2> log_scales;  // natural log of pixel scales
  std::vector<float> thetas;     // radians
  std::vector<Color> colors;     // clamped to [0,1] only at render time

  std::size_t size() const noexcept { return means.size(); }
  bool empty() const noexcept { return means.empty(); }
  void resize(std::size_t n);
  void push_back(Vec2 mean, Vec2 log_scale, float theta, Color color);
  // Throws kInvalidArgument if the parallel arrays disagree in length.
  void check_consistent() const;

  friend bool operator==(const GaussianSet&, const GaussianSet&) = default;
};

struct Budget {
  double cr = 0.0;
  std::int64_t n_g = 0;
  std::int64_t n_vs = 0;
  std::int64_t n_us = 0;
  double s_base = 0.0;
};

struct LearningRates {
  double means = 1e-4;
  double scales = 5e-3;
  double colors = 5e-2;
  double thetas = 1e-3;
};

enum class CompositeMode {
  kAlphaBlend,  // front-to-back, opacity 1
  kAdditive,    // plain sum of c_i * G_i
};

struct EncoderConfig {
  double lambda_m = 0.9;
  double lambda_g = 0.7;
  double lambda_l = 0.9;
  int k_neighbors = 3;
  int tile_size = 1024;
  int variance_window = 5;
  int iterations = 10000;
  LearningRates learning_rates;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  CompositeMode composite = CompositeMode::kAlphaBlend;

  // Throws kInvalidArgument on out-of-range fields.
  void validate() const;
};

}  // namespace splat
