#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

// levels[k-1] holds f_E^k, C^k × H/2^k × W/2^k.
using FeaturePyramid = std::vector<Tensor>;

struct EncoderSpec {
  std::uint64_t seed = 1;
  std::vector<std::size_t> level_channels{8, 16, 32, 64, 64};
  std::size_t input_channels = 1;
};

// 3×3, stride 2, reflect padding 1, zero bias, followed by rectification.
Tensor conv3x3_s2_relu(const Tensor& input, const Tensor& weight);

// Frozen multi-level feature extractor plus the one-class embedding
// bottleneck. Weights are drawn once from the seed and never change.
class ToyEncoder {
 public:
  explicit ToyEncoder(EncoderSpec spec);

  const EncoderSpec& spec() const noexcept { return spec_; }
  std::size_t num_levels() const noexcept { return spec_.level_channels.size(); }

  // Levels 1..max_level (all levels when max_level is 0). Input is C×H×W with
  // H and W divisible by 2^num_levels.
  FeaturePyramid extract(const Tensor& image, std::size_t max_level = 0) const;

  // Two stride-2 stages on the deepest level.
  Tensor oce(const Tensor& deepest) const;

  const std::vector<Tensor>& level_weights() const noexcept { return levels_; }
  const std::vector<Tensor>& oce_weights() const noexcept { return oce_; }

  // FNV-1a over every weight byte.
  std::uint64_t weights_hash() const;

  // One NPFT per stage: level{k}.npft and oce{1,2}.npft.
  void save(const std::filesystem::path& dir) const;
  static ToyEncoder load(const std::filesystem::path& dir, std::uint64_t seed);

 private:
  ToyEncoder() = default;

  EncoderSpec spec_;
  std::vector<Tensor> levels_;
  std::vector<Tensor> oce_;
};

}  // namespace afe
