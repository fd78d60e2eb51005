#include "splat/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "splat/budget.hpp"
#include "splat/renderer.hpp"

namespace splat {
namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'S', 'P', 'L'};
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPosLevels = 65535.0;
constexpr double kByteLevels = 255.0;

class Writer {
 public:
  explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kTruncatedPayload, "ssplat file is truncated");
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t quantize(double value, double lo, double hi, double levels) {
  const double t = (value - lo) / (hi - lo);
  const double q = std::round(std::clamp(t, 0.0, 1.0) * levels);
  return static_cast<std::uint32_t>(q);
}

double dequantize(std::uint32_t q, double lo, double hi, double levels) {
  return lo + (hi - lo) * (static_cast<double>(q) / levels);
}

std::uint8_t quantize_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  const auto q = static_cast<long>(std::lround(t / kTwoPi * 256.0));
  return static_cast<std::uint8_t>(q & 0xff);
}

}  // namespace

QuantRange default_quant_range(int height, int width, std::size_t count) {
  const double s_base = base_scale(height, width, static_cast<std::int64_t>(std::max<std::size_t>(count, 1)));
  return {static_cast<float>(std::log(kScaleFloor)),
          static_cast<float>(std::log(3.0 * s_base * 8.0))};
}

std::vector<std::uint8_t> encode_file(const GaussianSet& set, int height, int width,
                                      CodecMode mode) {
  set.check_consistent();
  if (set.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty GaussianSet");
  }
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "canvas dimensions must be >= 1");
  }
  if (set.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "too many primitives for the format");
  }
  const bool quant = mode == CodecMode::kQuantized;
  const std::size_t per = quant ? kQuantPrimitiveBytes : kFloatPrimitiveBytes;
  Writer w(kHeaderBytes + (quant ? kQuantRangeBytes : 0) + per * set.size());
  for (auto c : kMagic) w.u8(c);
  w.u8(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(mode));
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(height));
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(set.size()));

  if (!quant) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      w.f32(set.means[i].x);
      w.f32(set.means[i].y);
      w.f32(set.log_scales[i].x);
      w.f32(set.log_scales[i].y);
      w.f32(set.thetas[i]);
      for (float c : set.colors[i]) w.f32(c);
    }
    return w.take();
  }

  const QuantRange range = default_quant_range(height, width, set.size());
  w.f32(range.log_scale_min);
  w.f32(range.log_scale_max);
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.u16(static_cast<std::uint16_t>(quantize(set.means[i].x, 0.0, width, kPosLevels)));
    w.u16(static_cast<std::uint16_t>(quantize(set.means[i].y, 0.0, height, kPosLevels)));
    w.u8(static_cast<std::uint8_t>(
        quantize(set.log_scales[i].x, range.log_scale_min, range.log_scale_max, kByteLevels)));
    w.u8(static_cast<std::uint8_t>(
        quantize(set.log_scales[i].y, range.log_scale_min, range.log_scale_max, kByteLevels)));
    w.u8(quantize_angle(set.thetas[i]));
    for (float c : set.colors[i]) {
      w.u8(static_cast<std::uint8_t>(quantize(c, 0.0, 1.0, kByteLevels)));
    }
  }
  return w.take();
}

DecodedFile decode_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "not an ssplat file (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported ssplat version " + std::to_string(version));
  }
  const std::uint8_t mode_byte = r.u8();
  if (mode_byte > static_cast<std::uint8_t>(CodecMode::kQuantized)) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unknown ssplat mode " + std::to_string(mode_byte));
  }
  r.u16();
  DecodedFile out;
  out.mode = static_cast<CodecMode>(mode_byte);
  const std::uint32_t height = r.u32();
  const std::uint32_t width = r.u32();
  const std::uint32_t count = r.u32();
  if (height < 1 || width < 1 || height > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
      width > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
    throw Error(ErrorCode::kUnreadableImage, "ssplat header has invalid dimensions");
  }
  out.height = static_cast<int>(height);
  out.width = static_cast<int>(width);

  const bool quant = out.mode == CodecMode::kQuantized;
  QuantRange range;
  if (quant) {
    range.log_scale_min = r.f32();
    range.log_scale_max = r.f32();
  }
  const std::size_t per = quant ? kQuantPrimitiveBytes : kFloatPrimitiveBytes;
  r.need(per * count);

  out.set.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!quant) {
      out.set.means[i] = {r.f32(), r.f32()};
      out.set.log_scales[i] = {r.f32(), r.f32()};
      out.set.thetas[i] = r.f32();
      for (auto& c : out.set.colors[i]) c = r.f32();
      continue;
    }
    const std::uint16_t qx = r.u16();
    const std::uint16_t qy = r.u16();
    out.set.means[i] = {static_cast<float>(dequantize(qx, 0.0, width, kPosLevels)),
                        static_cast<float>(dequantize(qy, 0.0, height, kPosLevels))};
    const std::uint8_t qsx = r.u8();
    const std::uint8_t qsy = r.u8();
    out.set.log_scales[i] = {
        static_cast<float>(dequantize(qsx, range.log_scale_min, range.log_scale_max, kByteLevels)),
        static_cast<float>(dequantize(qsy, range.log_scale_min, range.log_scale_max, kByteLevels))};
    out.set.thetas[i] = static_cast<float>(r.u8() * kTwoPi / 256.0);
    for (auto& c : out.set.colors[i]) {
      c = static_cast<float>(dequantize(r.u8(), 0.0, 1.0, kByteLevels));
    }
  }
  return out;
}

double achieved_ratio(std::size_t file_bytes, int height, int width) {
  if (file_bytes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "file size must be > 0");
  }
  return 3.0 * static_cast<double>(height) * static_cast<double>(width) /
         static_cast<double>(file_bytes);
}

}  // namespace splat
