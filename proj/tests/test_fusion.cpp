#include <gtest/gtest.h>

#include "afe/fusion.hpp"
#include "afe/metrics.hpp"
#include "afe/resample.hpp"
#include "test_util.hpp"

namespace afe {
namespace {

ScoreMap random_map(std::size_t h, std::size_t w, std::uint64_t seed, double scale = 1.0,
                    double shift = 0.0) {
  const Tensor t = test::random_tensor({1, h, w}, seed, scale);
  ScoreMap m = ScoreMap::from_tensor(t);
  for (auto& v : m.values()) v = static_cast<float>(v + shift);
  return m;
}

ScoreMap affine(const ScoreMap& m, double a, double b) {
  ScoreMap out = m;
  for (auto& v : out.values()) v = static_cast<float>(a * v + b);
  return out;
}

// Plain two-pass mean and population deviation in double.
std::pair<double, double> two_pass(const std::vector<ScoreMap>& maps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& m : maps) {
    for (float v : m.values()) {
      sum += v;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& m : maps) {
    for (float v : m.values()) sq += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(sq / static_cast<double>(n))};
}

TEST(Calibrate, ClosedForms) {
  const CalibrationStats two = calibrate({ScoreMap(1, 2, {0, 2})}, {ScoreMap(2, 2, 3.0f)}, 1, 3);
  EXPECT_DOUBLE_EQ(two.mu_str, 1.0);
  EXPECT_DOUBLE_EQ(two.sigma_str, 1.0);
  EXPECT_DOUBLE_EQ(two.mu_log, 3.0);
  EXPECT_DOUBLE_EQ(two.sigma_log, kSigmaFloor);
  EXPECT_EQ(two.alpha, 1.0);
  EXPECT_EQ(two.beta, 3.0);
  EXPECT_THROW(calibrate({}, {ScoreMap(1, 1)}, 1, 3), InvalidArgument);
  EXPECT_THROW(calibrate({ScoreMap(1, 1)}, {}, 1, 3), InvalidArgument);
}

TEST(Calibrate, MatchesTwoPassOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    std::vector<ScoreMap> s, l;
    for (std::uint64_t i = 0; i < 5; ++i) {
      s.push_back(random_map(17, 13, seed * 10 + i, 0.3, 2.0));
      l.push_back(random_map(17, 13, seed * 100 + i, 2.0, -1.0));
    }
    const CalibrationStats c = calibrate(s, l, 1, 3);
    const auto [ms, ss] = two_pass(s);
    const auto [ml, sl] = two_pass(l);
    EXPECT_NEAR(c.mu_str, ms, 1e-9);
    EXPECT_NEAR(c.sigma_str, ss, 1e-9);
    EXPECT_NEAR(c.mu_log, ml, 1e-9);
    EXPECT_NEAR(c.sigma_log, sl, 1e-9);
    EXPECT_EQ(pixel_moments(s).count, 5u * 17 * 13);
  }
}

TEST(Calibrate, SaveLoadRoundTrip) {
  test::TempDir dir("calib");
  CalibrationStats c{0.1, 0.2, 1.0 / 3.0, 4e-9, 1.0, 3.0};
  c.save(dir / "calib.meta");
  const CalibrationStats back = CalibrationStats::load(dir / "calib.meta");
  EXPECT_EQ(back.mu_str, c.mu_str);
  EXPECT_EQ(back.sigma_str, c.sigma_str);
  EXPECT_EQ(back.mu_log, c.mu_log);
  EXPECT_EQ(back.sigma_log, c.sigma_log);
  EXPECT_EQ(back.beta, c.beta);
  EXPECT_THROW(CalibrationStats::load(dir / "absent.meta"), IoError);
}

TEST(Fuse, ClosedForms) {
  const CalibrationStats c{2.0, 0.5, -1.0, 4.0, 1.0, 3.0};
  const ScoreMap zero = fuse(ScoreMap(9, 9, 2.0f), ScoreMap(9, 9, -1.0f), c);
  for (float v : zero.values()) EXPECT_EQ(v, 0.0f);
  // Both normalized maps equal 1: 1·1 + 3·1 = 4 before and after smoothing.
  const ScoreMap pre = fuse_unsmoothed(ScoreMap(9, 9, 2.5f), ScoreMap(9, 9, 3.0f), c);
  const ScoreMap post = fuse(ScoreMap(9, 9, 2.5f), ScoreMap(9, 9, 3.0f), c);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    EXPECT_FLOAT_EQ(pre.values()[i], 4.0f);
    EXPECT_NEAR(post.values()[i], 4.0f, 1e-5);
  }
  EXPECT_THROW(fuse(ScoreMap(3, 3), ScoreMap(3, 4), c), InvalidArgument);
}

TEST(Fuse, SmoothsTheUnsmoothedMap) {
  const CalibrationStats c{0.3, 1.5, 0.1, 0.7, 1.0, 3.0};
  const ScoreMap s = random_map(20, 24, 1), l = random_map(20, 24, 2);
  EXPECT_EQ(fuse(s, l, c), gaussian_smooth(fuse_unsmoothed(s, l, c), kFusionSmoothing));
}

TEST(Fuse, AffineRescalingIsAbsorbed) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<ScoreMap> vs, vl;
    for (std::uint64_t i = 0; i < 4; ++i) {
      vs.push_back(random_map(16, 16, seed * 10 + i, 0.5, 1.0));
      vl.push_back(random_map(16, 16, seed * 20 + i, 0.2, 0.5));
    }
    const ScoreMap ts = random_map(16, 16, seed + 90, 0.5, 1.0);
    const ScoreMap tl = random_map(16, 16, seed + 91, 0.2, 0.5);
    const ScoreMap base = fuse(ts, tl, calibrate(vs, vl, 1, 3));
    for (const auto [a, b] : {std::pair{2.5, -3.0}, std::pair{0.25, 7.0}}) {
      std::vector<ScoreMap> vs2, vl2;
      for (const auto& m : vs) vs2.push_back(affine(m, a, b));
      for (const auto& m : vl) vl2.push_back(affine(m, a, b));
      const ScoreMap str_scaled = fuse(affine(ts, a, b), tl, calibrate(vs2, vl, 1, 3));
      const ScoreMap log_scaled = fuse(ts, affine(tl, a, b), calibrate(vs, vl2, 1, 3));
      for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_NEAR(str_scaled.values()[i], base.values()[i], 1e-5);
        EXPECT_NEAR(log_scaled.values()[i], base.values()[i], 1e-5);
      }
    }
  }
}

TEST(Fuse, ZeroBetaKeepsStructuralOrdering) {
  std::vector<ScoreMap> vs, vl;
  for (std::uint64_t i = 0; i < 3; ++i) {
    vs.push_back(random_map(12, 12, i + 1));
    vl.push_back(random_map(12, 12, i + 11));
  }
  const CalibrationStats c = calibrate(vs, vl, 1, 0);
  std::vector<double> fused, alone;
  for (std::uint64_t i = 0; i < 12; ++i) {
    const ScoreMap s = random_map(12, 12, 100 + i, 1.0 + 0.1 * i);
    fused.push_back(image_score(fuse(s, random_map(12, 12, 200 + i, 5.0), c)));
    alone.push_back(image_score(gaussian_smooth(s, kFusionSmoothing)));
  }
  for (std::size_t i = 0; i < fused.size(); ++i) {
    for (std::size_t j = 0; j < fused.size(); ++j) {
      EXPECT_EQ(fused[i] < fused[j], alone[i] < alone[j]) << i << " " << j;
    }
  }
}

TEST(ImageScore, MaxOfMap) {
  EXPECT_EQ(image_score(ScoreMap(2, 2, {1, 5, 3, 2})), 5.0);
  EXPECT_EQ(image_score(ScoreMap(3, 3, -2.0f)), -2.0);
  EXPECT_THROW(image_score(ScoreMap()), InvalidArgument);
  const ScoreMap a = random_map(8, 8, 1);
  const ScoreMap b = affine(a, 1.0, 0.5);
  EXPECT_GE(image_score(b), image_score(a));
}

}  // namespace
}  // namespace afe
