#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rme/core.hpp"

namespace rme::render {

/// 8-bit gray image, row-major, `rows` x `cols`.
struct GrayImage {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(Index r, Index c) const { return pixels[static_cast<std::size_t>(r * cols + c)]; }
};

/// Log-power heat map: 10 log10(x + floor) mapped affinely onto [0, 255],
/// grid row m becomes image row m. A constant field renders mid-gray.
GrayImage heatmap(const Field& field);

std::vector<std::uint8_t> encode_png(const GrayImage& img);
GrayImage decode_png(const std::vector<std::uint8_t>& bytes);

void render_heatmap(const Field& field, const std::filesystem::path& path);

}  // namespace rme::render
