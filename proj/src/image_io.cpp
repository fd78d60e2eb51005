#include "splat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace splat {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

bool has_suffix(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  if (s.size() < n) return false;
  return std::equal(s.end() - static_cast<std::ptrdiff_t>(n), s.end(), suffix,
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

ImageBuffer read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableImage, "cannot open " + path);
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    int v = -1;
    while (in >> std::ws && in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
    }
    in >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (magic != "P6" || w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw Error(ErrorCode::kUnreadableImage, path + " is not an 8-bit binary PPM");
  }
  in.get();
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw Error(ErrorCode::kUnreadableImage, path + " is truncated");
  std::vector<double> data(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) data[i] = raw[i] / static_cast<double>(maxval);
  return ImageBuffer(h, w, std::move(data));
}

ImageBuffer read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorCode::kUnreadableImage, "cannot read PNG " + path + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kUnreadableImage, "cannot decode PNG " + path + ": " + img.message);
  }
  std::vector<double> data(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) data[i] = raw[i] / 255.0;
  return ImageBuffer(static_cast<int>(img.height), static_cast<int>(img.width), std::move(data));
}

void write_png_bytes(const std::string& path, int height, int width, bool gray,
                     const std::vector<png_byte>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::kUnreadableImage, "cannot write PNG " + path + ": " + img.message);
  }
}

}  // namespace

ImageBuffer read_image(const std::string& path) {
  if (has_suffix(path, ".ppm")) return read_ppm(path);
  return read_png(path);
}

void write_png(const std::string& path, const ImageBuffer& image) {
  std::vector<png_byte> bytes(image.size());
  const auto data = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(data[i]);
  write_png_bytes(path, image.height(), image.width(), false, bytes);
}

void write_png_gray(const std::string& path, const ScalarMap& map) {
  std::vector<png_byte> bytes(map.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(map.values[i]);
  write_png_bytes(path, map.height, map.width, true, bytes);
}

}  // namespace splat
