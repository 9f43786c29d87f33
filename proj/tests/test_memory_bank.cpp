#include <gtest/gtest.h>

#include <limits>

#include "afe/dataset.hpp"
#include "afe/memory_bank.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace afe {
namespace {

using namespace oracle;

double covering_radius(const Tensor& v, const std::vector<std::size_t>& sel) {
  double worst = 0.0;
  for (std::size_t i = 0; i < v.dim(0); ++i) {
    double mind = std::numeric_limits<double>::infinity();
    for (auto s : sel) {
      double d = 0.0;
      for (std::size_t ch = 0; ch < v.dim(1); ++ch) {
        const double x = static_cast<double>(v.at(i, ch)) - v.at(s, ch);
        d += x * x;
      }
      mind = std::min(mind, d);
    }
    worst = std::max(worst, mind);
  }
  return worst;
}

// 3×3 mirrored box mean, corner-aligned bilinear resize and concatenation,
// all written out directly.
Tensor naive_aggregate(const FeaturePyramid& p, const std::vector<std::size_t>& levels) {
  const Tensor& target = p[levels.back() - 1];
  const std::size_t th = target.height(), tw = target.width();
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  std::vector<std::vector<double>> channels;
  for (auto k : levels) {
    const Tensor& f = p[k - 1];
    const long h = static_cast<long>(f.height()), w = static_cast<long>(f.width());
    for (std::size_t ch = 0; ch < f.channels(); ++ch) {
      std::vector<double> box(f.height() * f.width());
      for (long i = 0; i < h; ++i) {
        for (long j = 0; j < w; ++j) {
          double s = 0.0;
          for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) s += f.at(ch, mirror(i + dy, h), mirror(j + dx, w));
          }
          box[i * w + j] = s / 9.0;
        }
      }
      std::vector<double> out(th * tw);
      for (std::size_t i = 0; i < th; ++i) {
        for (std::size_t j = 0; j < tw; ++j) {
          const double y = th > 1 ? i * double(h - 1) / double(th - 1) : 0.0;
          const double x = tw > 1 ? j * double(w - 1) / double(tw - 1) : 0.0;
          const long y0 = std::min(static_cast<long>(y), h - 1), x0 = std::min(static_cast<long>(x), w - 1);
          const long y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
          const double fy = y - y0, fx = x - x0;
          out[i * tw + j] = (1 - fy) * ((1 - fx) * box[y0 * w + x0] + fx * box[y0 * w + x1]) +
                            fy * ((1 - fx) * box[y1 * w + x0] + fx * box[y1 * w + x1]);
        }
      }
      channels.push_back(std::move(out));
    }
  }
  Tensor agg({channels.size(), th, tw});
  for (std::size_t ch = 0; ch < channels.size(); ++ch) {
    for (std::size_t q = 0; q < th * tw; ++q) agg[ch * th * tw + q] = static_cast<float>(channels[ch][q]);
  }
  return agg;
}

TEST(Coreset, ThreePointExample) {
  const Tensor pts({3, 2}, {0, 0, 0, 0.1f, 10, 10});
  EXPECT_EQ(greedy_coreset(pts, 0, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Coreset, MatchesBruteForceGreedyTrace) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const std::size_t n = seed <= 4 ? 20 : 200;
    const Tensor v = test::random_tensor({n, 6}, seed);
    const std::size_t first = seed % n;
    const std::size_t count = seed <= 4 ? 5 : 40;
    EXPECT_EQ(greedy_coreset(v, first, count), brute_greedy(v, first, count)) << "seed " << seed;
  }
}

TEST(Coreset, TiesGoToTheLowestId) {
  // Rows 1 and 2 are equally far from row 0.
  const Tensor pts({4, 1}, {0, 2, -2, 1});
  EXPECT_EQ(greedy_coreset(pts, 0, 2)[1], 1u);
}

TEST(Coreset, FractionCountsAndCoverage) {
  const Tensor v = test::random_tensor({50, 3}, 9);
  auto all = coreset_subsample(v, 1.0, 1);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(coreset_subsample(v, 0.1, 1).size(), 5u);
  EXPECT_EQ(coreset_subsample(v, 0.101, 1).size(), 6u);
  EXPECT_EQ(coreset_subsample(v, 0.1, 1), coreset_subsample(v, 0.1, 1));

  const auto trace = greedy_coreset(v, 3, 50);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= 50; ++k) {
    const double r = covering_radius(v, {trace.begin(), trace.begin() + k});
    EXPECT_LE(r, prev);
    prev = r;
  }
  EXPECT_EQ(prev, 0.0);
  EXPECT_THROW(coreset_subsample(v, 0.0, 1), InvalidArgument);
  EXPECT_THROW(coreset_subsample(v, 1.5, 1), InvalidArgument);
  EXPECT_THROW(coreset_subsample(Tensor(), 0.5, 1), InvalidState);
}

TEST(MemoryBank, NearestDistanceMatchesExhaustiveScan) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    MemoryBank bank = MemoryBank::from_rows(test::random_tensor({120, 5}, seed));
    bank.select_coreset(0.25, seed);
    const Tensor q = test::random_tensor({5, 6, 7}, seed + 10);
    for (Metric m : {Metric::kL1, Metric::kL2}) {
      const Tensor got = bank.nearest_distance(q, m);
      const Tensor want = scan_min(q, bank.coreset_vectors(), m);
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6) << i;
    }
  }
}

TEST(MemoryBank, ClosedForms) {
  MemoryBank bank = MemoryBank::from_rows(Tensor({1, 2}));
  EXPECT_THROW(bank.nearest_distance(Tensor({2, 1, 1}), Metric::kL1), InvalidState);
  bank.select_coreset(1.0, 1);
  EXPECT_FLOAT_EQ(bank.nearest_distance(Tensor({2, 1, 1}, {1, -2}), Metric::kL1)[0], 3.0f);
  EXPECT_FLOAT_EQ(bank.nearest_distance(Tensor({2, 1, 1}, {3, -4}), Metric::kL2)[0], 5.0f);
  EXPECT_EQ(bank.nearest_distance(Tensor({2, 1, 1}), Metric::kL1)[0], 0.0f);
  EXPECT_THROW(bank.nearest_distance(Tensor({3, 1, 1}), Metric::kL1), InvalidArgument);
  EXPECT_THROW(bank.set_coreset({0, 0}), InvalidArgument);
  EXPECT_THROW(bank.set_coreset({4}), InvalidArgument);
}

TEST(MemoryBank, FullCoresetLowerBoundsSubsets) {
  const Tensor rows = test::random_tensor({80, 4}, 3);
  MemoryBank full = MemoryBank::from_rows(rows), part = MemoryBank::from_rows(rows);
  full.select_coreset(1.0, 2);
  part.select_coreset(0.2, 2);
  const Tensor q = test::random_tensor({4, 5, 5}, 4);
  const Tensor a = full.nearest_distance(q, Metric::kL1), b = part.nearest_distance(q, Metric::kL1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(a[i], b[i]);
}

TEST(Aggregate, ConstantLevelsAndShapes) {
  FeaturePyramid p{Tensor({8, 16, 16}), Tensor({16, 8, 8}, 2.0f), Tensor({32, 4, 4}, 5.0f)};
  const Tensor agg = aggregate_features(p, {2, 3});
  EXPECT_EQ(agg.dims(), (Dims{48, 4, 4}));
  for (std::size_t ch = 0; ch < 48; ++ch) {
    for (std::size_t q = 0; q < 16; ++q) EXPECT_FLOAT_EQ(agg[ch * 16 + q], ch < 16 ? 2.0f : 5.0f);
  }
  EXPECT_THROW(aggregate_features(p, {2, 4}), InvalidArgument);
  EXPECT_THROW(aggregate_features(p, {}), InvalidArgument);
}

TEST(Aggregate, MatchesNaiveOracle) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    FeaturePyramid p{test::random_tensor({4, 16, 16}, seed), test::random_tensor({8, 8, 8}, seed + 1),
                     test::random_tensor({8, 4, 4}, seed + 2)};
    for (const std::vector<std::size_t>& levels : {std::vector<std::size_t>{2, 3},
                                                   std::vector<std::size_t>{1, 2, 3}}) {
      const Tensor got = aggregate_features(p, levels);
      const Tensor want = naive_aggregate(p, levels);
      ASSERT_EQ(got.dims(), want.dims());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5);
    }
  }
}

TEST(BuildBank, RowCountOrderAndSelfScore) {
  BankConfig cfg;
  cfg.image_size = 64;
  cfg.encoder = EncoderSpec{4};
  cfg.fraction = 1.0;
  const ToyEncoder enc(cfg.encoder);
  StructuralModel probe{cfg, enc, {}};
  const Image img = render_pinboard(PinboardConfig{}, AnomalyKind::kNone, 1, 0).image;
  const FeaturePyramid py = structural_pyramid(probe, img);
  ASSERT_EQ(py.size(), 3u);

  // Two identical images: 8×8 level-3 grid per image, second half repeats the first.
  const StructuralModel m = build_bank(cfg, enc, {py, py});
  EXPECT_EQ(m.bank.rows(), 2u * 8 * 8);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < m.bank.dim(); ++c) {
      EXPECT_EQ(m.bank.vectors().at(r, c), m.bank.vectors().at(r + 64, c));
    }
  }
  const ScoreMap s = structural_score(m, py, 64, 64);
  for (float v : s.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(build_bank(cfg, enc, {}), InvalidArgument);
  StructuralModel empty{cfg, enc, {}};
  EXPECT_THROW(structural_score(empty, py, 64, 64), InvalidState);
}

TEST(BuildBank, SaveLoadRoundTrip) {
  test::TempDir dir("bank");
  BankConfig cfg;
  cfg.image_size = 64;
  cfg.encoder = EncoderSpec{4};
  const ToyEncoder enc(cfg.encoder);
  StructuralModel probe{cfg, enc, {}};
  std::vector<FeaturePyramid> pys;
  for (std::uint64_t i = 0; i < 3; ++i) {
    pys.push_back(structural_pyramid(probe, render_pinboard(PinboardConfig{}, AnomalyKind::kNone, 1, i).image));
  }
  const StructuralModel m = build_bank(cfg, enc, pys);
  m.save(dir / "bank");
  for (const char* f : {"meta", "vectors.npft", "coreset.npft"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "bank" / f)) << f;
  }
  const StructuralModel back = StructuralModel::load(dir / "bank");
  EXPECT_EQ(back.bank.coreset(), m.bank.coreset());
  EXPECT_EQ(back.bank.vectors(), m.bank.vectors());
  EXPECT_EQ(back.encoder.weights_hash(), m.encoder.weights_hash());
  EXPECT_EQ(back.config.metric, Metric::kL1);
}

}  // namespace
}  // namespace afe
