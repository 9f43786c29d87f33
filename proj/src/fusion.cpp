#include "afe/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "afe/kv.hpp"
#include "afe/resample.hpp"

namespace afe {

PixelMoments pixel_moments(const std::vector<ScoreMap>& maps) {
  // Welford's streaming update.
  PixelMoments m;
  double mean = 0.0, m2 = 0.0;
  for (const auto& map : maps) {
    for (const float v : map.values()) {
      ++m.count;
      const double d = v - mean;
      mean += d / static_cast<double>(m.count);
      m2 += d * (v - mean);
    }
  }
  if (m.count == 0) return m;
  m.mean = mean;
  m.stddev = std::sqrt(std::max(m2 / static_cast<double>(m.count), 0.0));
  return m;
}

CalibrationStats calibrate(const std::vector<ScoreMap>& validation_str,
                           const std::vector<ScoreMap>& validation_log, double alpha,
                           double beta) {
  if (validation_str.empty() || validation_log.empty()) {
    throw InvalidArgument("calibration needs at least one validation map per branch");
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InvalidArgument("fusion weights must be finite");
  }
  const PixelMoments s = pixel_moments(validation_str);
  const PixelMoments l = pixel_moments(validation_log);
  CalibrationStats c;
  c.mu_str = s.mean;
  c.sigma_str = std::max(s.stddev, kSigmaFloor);
  c.mu_log = l.mean;
  c.sigma_log = std::max(l.stddev, kSigmaFloor);
  c.alpha = alpha;
  c.beta = beta;
  return c;
}

ScoreMap fuse_unsmoothed(const ScoreMap& a_str, const ScoreMap& a_log,
                         const CalibrationStats& stats) {
  if (a_str.height() != a_log.height() || a_str.width() != a_log.width()) {
    throw InvalidArgument("fuse: structural map is " + std::to_string(a_str.height()) + "x" +
                          std::to_string(a_str.width()) + ", logical map is " +
                          std::to_string(a_log.height()) + "x" + std::to_string(a_log.width()));
  }
  ScoreMap out(a_str.height(), a_str.width());
  const auto s = a_str.values();
  const auto l = a_log.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(stats.alpha * (s[i] - stats.mu_str) / stats.sigma_str +
                              stats.beta * (l[i] - stats.mu_log) / stats.sigma_log);
  }
  return out;
}

ScoreMap fuse(const ScoreMap& a_str, const ScoreMap& a_log, const CalibrationStats& stats,
              double smoothing) {
  return gaussian_smooth(fuse_unsmoothed(a_str, a_log, stats), smoothing);
}

double image_score(const ScoreMap& map) {
  const auto v = map.values();
  if (v.empty()) throw InvalidArgument("image_score: empty map");
  return *std::max_element(v.begin(), v.end());
}

void CalibrationStats::save(const std::filesystem::path& path) const {
  KeyValues kv;
  kv.set("mu_str", mu_str);
  kv.set("sigma_str", sigma_str);
  kv.set("mu_log", mu_log);
  kv.set("sigma_log", sigma_log);
  kv.set("alpha", alpha);
  kv.set("beta", beta);
  kv.write(path);
}

CalibrationStats CalibrationStats::load(const std::filesystem::path& path) {
  const KeyValues kv = KeyValues::read(path);
  CalibrationStats c;
  c.mu_str = kv.get_double("mu_str");
  c.sigma_str = kv.get_double("sigma_str");
  c.mu_log = kv.get_double("mu_log");
  c.sigma_log = kv.get_double("sigma_log");
  c.alpha = kv.get_double("alpha");
  c.beta = kv.get_double("beta");
  if (!(c.sigma_str > 0.0) || !(c.sigma_log > 0.0)) {
    throw InvalidArgument(path.string() + ": sigma values must be positive");
  }
  return c;
}

}  // namespace afe
