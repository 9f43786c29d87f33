#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

// H×W×C raster with interleaved channels, values in [0,1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<float> pixels;

  float& at(std::size_t h, std::size_t w, std::size_t c = 0) {
    return pixels[(h * width + w) * channels + c];
  }
  float at(std::size_t h, std::size_t w, std::size_t c = 0) const {
    return pixels[(h * width + w) * channels + c];
  }

  // C×H×W planar copy for the feature extractors.
  Tensor to_planar() const;
  static Image from_planar(const Tensor& t);

  bool operator==(const Image&) const = default;
};

// H×W binary ground truth, 1 = anomalous.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(std::size_t h, std::size_t w) const { return values[h * width + w]; }
  std::uint8_t& at(std::size_t h, std::size_t w) { return values[h * width + w]; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

// Masks are single-channel PNM binarized at 0.5.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

// Min-max scaled 8-bit preview of a score map.
void write_heat_preview(const std::filesystem::path& path, const ScoreMap& map);

// Quantizes to the 8-bit grid a PNM file stores.
std::uint8_t to_byte(float v);

// Bilinear resize of an image (corner-aligned), per channel.
Image resize_image(const Image& image, std::size_t height, std::size_t width);

}  // namespace afe
