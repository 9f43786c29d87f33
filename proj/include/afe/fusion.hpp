#pragma once

#include <filesystem>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kFusionSmoothing = 4.0;

struct CalibrationStats {
  double mu_str = 0.0;
  double sigma_str = 1.0;
  double mu_log = 0.0;
  double sigma_log = 1.0;
  double alpha = 1.0;
  double beta = 3.0;

  void save(const std::filesystem::path& path) const;
  static CalibrationStats load(const std::filesystem::path& path);
};

// Mean and population standard deviation over every pixel of every map.
struct PixelMoments {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};
PixelMoments pixel_moments(const std::vector<ScoreMap>& maps);

CalibrationStats calibrate(const std::vector<ScoreMap>& validation_str,
                           const std::vector<ScoreMap>& validation_log, double alpha,
                           double beta);

// α·z(A_str) + β·z(A_log) before smoothing.
ScoreMap fuse_unsmoothed(const ScoreMap& a_str, const ScoreMap& a_log,
                         const CalibrationStats& stats);

ScoreMap fuse(const ScoreMap& a_str, const ScoreMap& a_log, const CalibrationStats& stats,
              double smoothing = kFusionSmoothing);

// Largest pixel value.
double image_score(const ScoreMap& map);

}  // namespace afe
