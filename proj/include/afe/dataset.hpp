#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afe/raster.hpp"

namespace afe {

enum class AnomalyKind { kNone, kLogical, kStructural };

std::string_view to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(std::string_view s);

struct Sample {
  // Path relative to the category root, e.g. "test/logical_anomalies/003.pgm".
  std::string relpath;
  Image image;
  int label = 0;
  AnomalyKind kind = AnomalyKind::kNone;
  std::optional<Mask> mask;

  // relpath without extension; keys maps and saturation files.
  std::string stem_path() const;
};

struct DatasetSplit {
  std::string category;
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

// Loads <root>/{train/good, validation/good, test/<kind>, ground_truth/<kind>}.
// root is the category directory.
DatasetSplit read_dataset(const std::filesystem::path& root);

struct PinboardConfig {
  std::string category = "pinboard";
  std::size_t grid = 4;
  std::size_t image_size = 128;
  std::size_t n_train = 64;
  std::size_t n_val = 16;
  std::size_t n_test_normal = 16;
  std::size_t n_test_logical = 16;
  std::size_t n_test_structural = 16;
  // Disc radius as a fraction of the cell side.
  double disc_radius = 0.25;
  // Fraction of the free travel inside a cell used for position jitter.
  double jitter = 0.1;
  double background = 0.25;
  double foreground = 0.9;
  double streak_level = 0.6;
  double noise_sigma = 0.02;
};

struct PinboardImage {
  Image image;
  std::optional<Mask> mask;
  std::size_t disc_count = 0;
};

// One image; `index` is its seed offset within the dataset.
PinboardImage render_pinboard(const PinboardConfig& config, AnomalyKind kind,
                              std::uint64_t seed, std::uint64_t index);

// Writes <out_root>/<category>/... plus manifest.txt and returns the category
// directory. The tree is produced in a sibling temp directory and renamed into
// place.
std::filesystem::path generate_pinboard(const PinboardConfig& config, std::uint64_t seed,
                                        const std::filesystem::path& out_root);

struct ManifestEntry {
  std::string relpath;
  std::string kind;
  std::uint64_t seed_offset = 0;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace afe
