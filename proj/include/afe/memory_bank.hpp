#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "afe/encoder.hpp"
#include "afe/raster.hpp"
#include "afe/tensor.hpp"

namespace afe {

enum class Metric { kL1, kL2 };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

// Each listed level (1-based) gets a 3×3 local average, is resampled to the
// grid of the last listed level and the results are concatenated channel-wise.
Tensor aggregate_features(const FeaturePyramid& pyramid, const std::vector<std::size_t>& levels);

// Farthest-point (k-center greedy) selection in squared Euclidean distance.
// The first id is a seeded uniform pick; ties go to the lowest id. Returns
// ceil(fraction * N) ids in selection order.
std::vector<std::size_t> coreset_subsample(const Tensor& vectors, double fraction,
                                           std::uint64_t seed);

// Same selection with an explicit first id and count, for tracing.
std::vector<std::size_t> greedy_coreset(const Tensor& vectors, std::size_t first,
                                        std::size_t count);

class MemoryBank {
 public:
  MemoryBank() = default;

  // Rows are all spatial vectors of every map in (image, h, w) order.
  static MemoryBank from_maps(const std::vector<Tensor>& aggregated);
  static MemoryBank from_rows(Tensor vectors);

  const Tensor& vectors() const noexcept { return vectors_; }
  std::size_t rows() const noexcept { return vectors_.empty() ? 0 : vectors_.dim(0); }
  std::size_t dim() const noexcept { return vectors_.empty() ? 0 : vectors_.dim(1); }
  bool built() const noexcept { return !coreset_.empty(); }
  const std::vector<std::size_t>& coreset() const noexcept { return coreset_; }

  void select_coreset(double fraction, std::uint64_t seed);
  void set_coreset(std::vector<std::size_t> ids);

  // Coreset rows as a dense n_s × C matrix.
  const Tensor& coreset_vectors() const;

  // Minimum distance from each location of `query` (C×H×W) to the coreset.
  Tensor nearest_distance(const Tensor& query, Metric metric) const;

 private:
  Tensor vectors_;
  std::vector<std::size_t> coreset_;
  Tensor coreset_rows_;
};

struct BankConfig {
  std::size_t image_size = 256;
  double input_offset = 0.5;
  EncoderSpec encoder{.seed = 2};
  std::vector<std::size_t> levels{2, 3};
  double fraction = 0.1;
  Metric metric = Metric::kL1;
  std::uint64_t seed = 1;
};

struct StructuralModel {
  BankConfig config;
  ToyEncoder encoder{EncoderSpec{}};
  MemoryBank bank;

  void save(const std::filesystem::path& dir) const;
  static StructuralModel load(const std::filesystem::path& dir);
};

// Encoder pyramid for the structural branch (image resized to config size and
// centered). With external levels the image is not touched.
FeaturePyramid structural_pyramid(const StructuralModel& model, const Image& image);

// Builds the bank from already-computed pyramids.
StructuralModel build_bank(const BankConfig& config, ToyEncoder encoder,
                           const std::vector<FeaturePyramid>& train_pyramids);

// A_str: minimum distance to the coreset per location, upsampled to out_h × out_w.
ScoreMap structural_score(const StructuralModel& model, const FeaturePyramid& pyramid,
                          std::size_t out_h, std::size_t out_w);

}  // namespace afe
