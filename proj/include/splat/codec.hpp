#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splat/types.hpp"

namespace splat {

// .ssplat layout, all integers and floats little-endian:
//
//   offset size  field
//   0      4     magic "SSPL"
//   4      1     version (1)
//   5      1     mode (0 = float32, 1 = quantized)
//   6      2     reserved, zero
//   8      4     height (u32)
//   12     4     width (u32)
//   16     4     count (u32)
//   20     8     quantized only: log-scale range min, max (f32, f32)
//
// Float payload, 32 bytes per primitive:
//   mean_x, mean_y, log_s_x, log_s_y, theta, r, g, b   (f32 each)
// Quantized payload, 10 bytes per primitive:
//   mean_x, mean_y  u16 fractions of width / height (q / 65535)
//   log_s_x, log_s_y  u8 over [min, max]
//   theta  u8 fraction of 2 pi (q / 256)
//   r, g, b  u8 (q / 255)
enum class CodecMode : std::uint8_t { kFloat32 = 0, kQuantized = 1 };

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 20;
inline constexpr std::size_t kQuantRangeBytes = 8;
inline constexpr std::size_t kFloatPrimitiveBytes = 32;
inline constexpr std::size_t kQuantPrimitiveBytes = 10;

struct DecodedFile {
  GaussianSet set;
  int height = 0;
  int width = 0;
  CodecMode mode = CodecMode::kFloat32;
};

struct QuantRange {
  float log_scale_min = 0.0f;
  float log_scale_max = 0.0f;
};

// [log 0.3, log(24 s_base)] for the canvas and primitive count.
QuantRange default_quant_range(int height, int width, std::size_t count);

std::vector<std::uint8_t> encode_file(const GaussianSet& set, int height, int width,
                                      CodecMode mode);

// Throws kBadMagic, kUnsupportedVersion or kTruncatedPayload, and
// kUnreadableImage for a zero canvas dimension.
DecodedFile decode_file(std::span<const std::uint8_t> bytes);

// Raw-RGB size (3HW bytes) over the file size.
double achieved_ratio(std::size_t file_bytes, int height, int width);

}  // namespace splat
