#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfl/grid.hpp"

namespace pfl {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// 8-bit grayscale PNG. Reading accepts any bit depth or color type and
// converts to 8-bit gray.
std::vector<std::uint8_t> encode_png(const GrayImage& image);
void write_png(const GrayImage& image, const std::string& file);
GrayImage decode_png(const std::vector<std::uint8_t>& bytes);
GrayImage read_png(const std::string& file);

// Masks travel as 1-bit grayscale PNGs (white = foreground).
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);
void write_mask_png(const Mask& mask, const std::string& file);
Mask read_mask_png(const std::string& file);

}  // namespace pfl
