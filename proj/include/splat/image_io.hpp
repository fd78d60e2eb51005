#pragma once

#include <string>

#include "splat/features.hpp"
#include "splat/types.hpp"

namespace splat {

// Reads an 8- or 16-bit PNG (gray, gray+alpha, RGB or RGBA; alpha is
// dropped) or a binary PPM (P6). Throws kUnreadableImage.
ImageBuffer read_image(const std::string& path);

// Writes an 8-bit RGB PNG.
void write_png(const std::string& path, const ImageBuffer& image);

// Writes an 8-bit grayscale PNG of values in [0,1].
void write_png_gray(const std::string& path, const ScalarMap& map);

}  // namespace splat
