#include "afe/features.hpp"

#include <cmath>

#include "afe/npft.hpp"

namespace afe {

void validate_pyramid(const FeaturePyramid& levels, std::size_t first_level) {
  if (levels.empty()) throw InvalidArgument("feature pyramid is empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Tensor& f = levels[i];
    const std::string name = "level " + std::to_string(first_level + i);
    if (f.rank() != 3) {
      throw InvalidArgument(name + " must be C×H×W, got " + dims_to_string(f.dims()));
    }
    if (f.dim(0) % 4 != 0) {
      throw InvalidArgument(name + " has " + std::to_string(f.dim(0)) +
                            " channels, not a multiple of 4");
    }
    for (float v : f.values()) {
      if (!std::isfinite(v)) throw InvalidArgument(name + " has non-finite values");
    }
    if (i == 0) continue;
    const Tensor& up = levels[i - 1];
    if (up.dim(1) != 2 * f.dim(1) || up.dim(2) != 2 * f.dim(2)) {
      throw InvalidArgument(name + " is " + dims_to_string(f.dims()) +
                            " but must halve the previous level " + dims_to_string(up.dims()));
    }
  }
}

FeatureStore::FeatureStore(std::filesystem::path root) : root_(std::move(root)) {
  if (!std::filesystem::is_directory(root_)) {
    throw IoError("feature directory " + root_.string() + " not found");
  }
}

std::filesystem::path FeatureStore::level_path(const std::string& stem_path,
                                               std::size_t level) const {
  return root_ / stem_path / ("level" + std::to_string(level) + ".npft");
}

FeaturePyramid FeatureStore::load(const std::string& stem_path, std::size_t max_level) const {
  if (max_level == 0) throw InvalidArgument("FeatureStore::load needs max_level >= 1");
  FeaturePyramid levels;
  for (std::size_t k = 1; k <= max_level; ++k) {
    const auto path = level_path(stem_path, k);
    if (!std::filesystem::exists(path)) throw IoError("missing feature file " + path.string());
    levels.push_back(npft::read_tensor(path));
  }
  try {
    validate_pyramid(levels);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("features for " + stem_path + ": " + e.what());
  }
  return levels;
}

EncoderSpec external_encoder_spec(const FeaturePyramid& levels, std::uint64_t seed) {
  validate_pyramid(levels);
  EncoderSpec spec;
  spec.seed = seed;
  spec.level_channels.clear();
  for (const auto& f : levels) spec.level_channels.push_back(f.dim(0));
  return spec;
}

std::vector<float> read_embedding(const std::filesystem::path& path) {
  const Tensor t = npft::read_tensor(path);
  if (t.empty()) throw InvalidArgument("embedding " + path.string() + " is empty");
  for (float v : t.values()) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding " + path.string() + " is not finite");
  }
  return t.storage();
}

}  // namespace afe
