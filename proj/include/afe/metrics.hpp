#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "afe/raster.hpp"
#include "afe/tensor.hpp"

namespace afe {

// Mann–Whitney AUROC; tied scores count one half.
double auroc(std::span<const double> scores, std::span<const int> labels);

// AUROC over the pixels of all maps pooled together.
double pixel_auroc(const std::vector<ScoreMap>& maps, const std::vector<Mask>& masks);

// 8-connected components of a mask: labels[p] is 0 off-mask and 1..count on
// it, numbered in raster order of first pixel.
struct RegionLabels {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> labels;
  std::size_t count = 0;
  std::vector<std::size_t> areas;  // index region-1
};
RegionLabels label_regions(const Mask& mask);

struct SProPoint {
  double fpr = 0.0;
  double spro = 0.0;
};

struct SProCurve {
  std::vector<SProPoint> points;  // fpr non-decreasing from 0 to 1
};

// Saturation in pixels per (image index, region id). Missing entries use the
// full region area.
using SaturationTable = std::map<std::pair<std::size_t, std::uint32_t>, double>;

// Sweeps every distinct score, highest first; a pixel is flagged when its
// score is >= the threshold. The curve starts at (0, 0) and has one point per
// threshold.
SProCurve spro_curve(const std::vector<ScoreMap>& maps, const std::vector<Mask>& masks,
                     const SaturationTable& saturation = {});

// Trapezoidal area on [0, limit] with linear interpolation, divided by limit.
double spro_auc(const SProCurve& curve, double limit);

// Lines `<image> <region> <saturation_pixels>`; `<image>` is matched against
// the given names (stem paths) to produce image indices.
SaturationTable read_saturation_file(const std::filesystem::path& path,
                                     const std::vector<std::string>& image_names);

inline constexpr double kSproLimits[] = {0.01, 0.05, 0.1, 0.3, 1.0};

struct MetricsReport {
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  std::vector<std::pair<double, double>> spro;  // (limit, normalized area)
};

// `key: value` lines with four fractional digits.
std::string format_report(const MetricsReport& report);

}  // namespace afe
