#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afe/encoder.hpp"

namespace afe {

// Checks that levels[i] holds level first_level + i: rank 3, finite, channel
// counts divisible by 4, each level half the height and width of the one
// before it.
void validate_pyramid(const FeaturePyramid& levels, std::size_t first_level = 1);

// Precomputed feature pyramids laid out as <root>/<stem_path>/level{k}.npft,
// where stem_path is the sample's relative path without extension.
class FeatureStore {
 public:
  explicit FeatureStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path level_path(const std::string& stem_path, std::size_t level) const;

  // Levels 1..max_level, validated.
  FeaturePyramid load(const std::string& stem_path, std::size_t max_level = 5) const;

 private:
  std::filesystem::path root_;
};

// Encoder spec whose channel counts follow an external pyramid; only its OCE
// stages get used.
EncoderSpec external_encoder_spec(const FeaturePyramid& levels, std::uint64_t seed);

// A category text embedding: any-rank NPFT tensor, read flat. Must be
// non-empty and finite.
std::vector<float> read_embedding(const std::filesystem::path& path);

}  // namespace afe
