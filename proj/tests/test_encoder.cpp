#include <gtest/gtest.h>

#include "afe/encoder.hpp"
#include "afe/features.hpp"
#include "afe/npft.hpp"
#include "test_util.hpp"

namespace afe {
namespace {

// Direct O(C²HWk²) convolution with mirrored borders, written without the
// precomputed tap tables.
Tensor naive_conv(const Tensor& x, const Tensor& w) {
  const long h = static_cast<long>(x.height()), wd = static_cast<long>(x.width());
  const std::size_t oh = (x.height() + 1) / 2, ow = (x.width() + 1) / 2;
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  Tensor out({w.dim(0), oh, ow});
  for (std::size_t co = 0; co < w.dim(0); ++co) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < x.channels(); ++ci) {
          for (long ky = 0; ky < 3; ++ky) {
            for (long kx = 0; kx < 3; ++kx) {
              const auto y = mirror(2 * static_cast<long>(i) + ky - 1, h);
              const auto xx = mirror(2 * static_cast<long>(j) + kx - 1, wd);
              acc += static_cast<double>(w[((co * x.channels() + ci) * 3 + ky) * 3 + kx]) *
                     x.at(ci, y, xx);
            }
          }
        }
        out.at(co, i, j) = static_cast<float>(std::max(acc, 0.0));
      }
    }
  }
  return out;
}

TEST(Encoder, LevelShapesHalve) {
  const ToyEncoder enc(EncoderSpec{});
  const FeaturePyramid p = enc.extract(test::random_tensor({1, 256, 256}, 1));
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[0].dims(), (Dims{8, 128, 128}));
  EXPECT_EQ(p[3].dims(), (Dims{64, 16, 16}));
  EXPECT_EQ(p[4].dims(), (Dims{64, 8, 8}));
  EXPECT_EQ(enc.oce(p[4]).dims(), (Dims{64, 2, 2}));
  EXPECT_EQ(enc.extract(test::random_tensor({1, 64, 64}, 1), 2).size(), 2u);
}

TEST(Encoder, RejectsBadInputs) {
  const ToyEncoder enc(EncoderSpec{});
  EXPECT_THROW(enc.extract(Tensor({1, 100, 96})), InvalidArgument);
  EXPECT_THROW(enc.extract(Tensor({3, 64, 64})), InvalidArgument);
  EXPECT_THROW(enc.oce(Tensor({64, 6, 6})), InvalidArgument);
  EXPECT_THROW(enc.oce(Tensor({32, 8, 8})), InvalidArgument);
  EXPECT_THROW(ToyEncoder(EncoderSpec{1, {8, 6, 32, 64, 64}, 1}), InvalidArgument);
}

TEST(Encoder, ZeroImageGivesZeroFeatures) {
  const ToyEncoder enc(EncoderSpec{});
  const FeaturePyramid p = enc.extract(Tensor({1, 64, 64}));
  for (const auto& f : p) {
    for (float v : f.values()) EXPECT_EQ(v, 0.0f);
  }
  const Tensor bottleneck = enc.oce(Tensor({64, 4, 4}));
  for (float v : bottleneck.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Encoder, DeterministicPerSeed) {
  const Tensor x = test::random_tensor({1, 64, 64}, 4);
  const ToyEncoder a(EncoderSpec{3}), b(EncoderSpec{3}), c(EncoderSpec{4});
  EXPECT_EQ(a.extract(x), b.extract(x));
  EXPECT_EQ(a.weights_hash(), b.weights_hash());
  EXPECT_NE(a.weights_hash(), c.weights_hash());
}

TEST(Encoder, ConvolutionMatchesNaiveReference) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Tensor x = test::random_tensor({3, 10, 14}, seed);
    const Tensor w = test::random_tensor({5, 3, 3, 3}, seed + 100, 0.3);
    const Tensor fast = conv3x3_s2_relu(x, w);
    const Tensor slow = naive_conv(x, w);
    ASSERT_EQ(fast.dims(), slow.dims());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-5);
  }
}

TEST(Encoder, PyramidAndOceMatchNaiveReference) {
  const ToyEncoder enc(EncoderSpec{9});
  const Tensor x = test::random_tensor({1, 128, 128}, 2);
  const FeaturePyramid p = enc.extract(x);
  Tensor cur = x;
  for (std::size_t k = 0; k < 5; ++k) {
    cur = naive_conv(cur, enc.level_weights()[k]);
    for (std::size_t i = 0; i < cur.size(); ++i) ASSERT_NEAR(p[k][i], cur[i], 1e-5);
  }
  const Tensor bottleneck = naive_conv(naive_conv(p[4], enc.oce_weights()[0]), enc.oce_weights()[1]);
  const Tensor got = enc.oce(p[4]);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], bottleneck[i], 1e-5);
}

TEST(Encoder, WeightsRoundTripThroughNpft) {
  test::TempDir dir("encoder");
  const ToyEncoder enc(EncoderSpec{11, {4, 8, 8, 16, 16}, 1});
  enc.save(dir / "enc");
  for (const char* f : {"level1.npft", "level5.npft", "oce1.npft", "oce2.npft"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "enc" / f)) << f;
  }
  const ToyEncoder back = ToyEncoder::load(dir / "enc", 11);
  EXPECT_EQ(back.weights_hash(), enc.weights_hash());
  EXPECT_EQ(back.spec().level_channels, enc.spec().level_channels);
  const Tensor x = test::random_tensor({1, 32, 32}, 5);
  EXPECT_EQ(back.extract(x), enc.extract(x));
}

TEST(Encoder, ImportedWeightsDriveExtraction) {
  // Replacing a stage file on disk changes what the loaded encoder computes.
  test::TempDir dir("encoder_import");
  const ToyEncoder enc(EncoderSpec{1, {4, 8, 8, 16, 16}, 1});
  enc.save(dir / "enc");
  Tensor w = enc.level_weights()[0];
  for (auto& v : w.values()) v = -v;
  npft::write_tensor(dir / "enc/level1.npft", w);
  const ToyEncoder swapped = ToyEncoder::load(dir / "enc", 1);
  EXPECT_EQ(swapped.level_weights()[0], w);
  EXPECT_NE(swapped.weights_hash(), enc.weights_hash());
  npft::write_tensor(dir / "enc/level2.npft", Tensor({8, 5, 3, 3}));
  EXPECT_THROW(ToyEncoder::load(dir / "enc", 1), InvalidArgument);
}

TEST(ExternalFeatures, StoreLoadsAndValidatesPyramids) {
  test::TempDir dir("features");
  const std::string stem = "train/good/000";
  std::filesystem::create_directories(dir / stem);
  const std::vector<Dims> shapes{{8, 32, 32}, {16, 16, 16}, {32, 8, 8}, {64, 4, 4}, {64, 2, 2}};
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    npft::write_tensor(dir / stem / ("level" + std::to_string(k + 1) + ".npft"),
                       test::random_tensor(shapes[k], k));
  }
  const FeatureStore store(dir.path());
  const FeaturePyramid p = store.load(stem);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[1].dims(), shapes[1]);
  EXPECT_EQ(store.load(stem, 3).size(), 3u);

  const EncoderSpec spec = external_encoder_spec(p, 5);
  EXPECT_EQ(spec.level_channels, (std::vector<std::size_t>{8, 16, 32, 64, 64}));

  // Break the halving chain.
  npft::write_tensor(dir / stem / "level3.npft", test::random_tensor({32, 7, 8}, 1));
  EXPECT_THROW(store.load(stem), InvalidArgument);
  EXPECT_THROW(store.load("train/good/001"), IoError);
  EXPECT_THROW(FeatureStore(dir / "absent"), IoError);
}

TEST(ExternalFeatures, PyramidValidation) {
  FeaturePyramid ok{Tensor({4, 8, 8}), Tensor({8, 4, 4})};
  EXPECT_NO_THROW(validate_pyramid(ok));
  FeaturePyramid bad_channels{Tensor({6, 8, 8})};
  EXPECT_THROW(validate_pyramid(bad_channels), InvalidArgument);
  FeaturePyramid bad_rank{Tensor({4, 8})};
  EXPECT_THROW(validate_pyramid(bad_rank), InvalidArgument);
  FeaturePyramid nan{Tensor({4, 2, 2}, std::nanf(""))};
  EXPECT_THROW(validate_pyramid(nan), InvalidArgument);
}

TEST(ExternalFeatures, EmbeddingFile) {
  test::TempDir dir("embedding");
  npft::write_tensor(dir / "e.npft", Tensor({1, 6}, {1, 0, 0, 0, 0, 0}));
  EXPECT_EQ(read_embedding(dir / "e.npft").size(), 6u);
  npft::write_tensor(dir / "bad.npft", Tensor({2}, {1.0f, INFINITY}));
  EXPECT_THROW(read_embedding(dir / "bad.npft"), InvalidArgument);
}

}  // namespace
}  // namespace afe
