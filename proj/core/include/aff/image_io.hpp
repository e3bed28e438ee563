#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aff/tensor.hpp"

namespace aff {

/// 8-bit raster, 1 (gray) or 3 (RGB) channels, row-major interleaved.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int r, int c, int ch) {
    return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  std::uint8_t at(int r, int c, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

/// Binary PGM (P5) / PPM (P6), maxval 255 only. Parse errors carry the
/// offending byte offset.
Image read_image(const std::string& path);
Image read_image(std::istream& in);
void write_image(const Image& img, const std::string& path);
void write_image(const Image& img, std::ostream& out);

std::vector<float> to_unit_floats(const Image& img);
Image from_unit_floats(const std::vector<float>& pixels, int height, int width);

/// Marks retained tokens as pure red pixels at 4x the token coordinates.
/// Grayscale bases are promoted to RGB. Out-of-range tokens are an error.
Image render_overlay(const Image& base, const std::vector<Vec2>& token_positions);

}  // namespace aff
