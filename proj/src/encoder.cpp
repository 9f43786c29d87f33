#include "afe/encoder.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "afe/npft.hpp"
#include "afe/resample.hpp"
#include "afe/rng.hpp"

namespace afe {
namespace fs = std::filesystem;

namespace {

Tensor draw_conv_weight(Rng& rng, std::size_t cout, std::size_t cin) {
  Tensor w({cout, cin, 3, 3});
  const double scale = 1.0 / std::sqrt(static_cast<double>(cin * 9));
  for (auto& v : w.values()) v = static_cast<float>(rng.normal() * scale);
  return w;
}

}  // namespace

Tensor conv3x3_s2_relu(const Tensor& input, const Tensor& weight) {
  if (input.rank() != 3) {
    throw InvalidArgument("conv input must be CxHxW, got " + dims_to_string(input.dims()));
  }
  if (weight.rank() != 4 || weight.dim(1) != input.channels() || weight.dim(2) != 3 ||
      weight.dim(3) != 3) {
    throw InvalidArgument("conv weight " + dims_to_string(weight.dims()) +
                          " does not match input " + dims_to_string(input.dims()));
  }
  const std::size_t cin = input.channels(), h = input.height(), w = input.width();
  const std::size_t cout = weight.dim(0);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;

  Tensor out({cout, oh, ow});
  // Reflected source coordinates per output row/column and tap.
  std::vector<std::size_t> ys(oh * 3), xs(ow * 3);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::ptrdiff_t k = 0; k < 3; ++k) {
      ys[i * 3 + static_cast<std::size_t>(k)] =
          reflect_index(2 * static_cast<std::ptrdiff_t>(i) + k - 1, h);
    }
  }
  for (std::size_t j = 0; j < ow; ++j) {
    for (std::ptrdiff_t k = 0; k < 3; ++k) {
      xs[j * 3 + static_cast<std::size_t>(k)] =
          reflect_index(2 * static_cast<std::ptrdiff_t>(j) + k - 1, w);
    }
  }
  std::vector<double> acc(oh * ow);
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const float* plane = input.data() + ci * h * w;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wv = weight[((co * cin + ci) * 3 + ky) * 3 + kx];
          for (std::size_t i = 0; i < oh; ++i) {
            const float* src = plane + ys[i * 3 + ky] * w;
            double* dst = acc.data() + i * ow;
            for (std::size_t j = 0; j < ow; ++j) dst[j] += wv * src[xs[j * 3 + kx]];
          }
        }
      }
    }
    float* o = out.data() + co * oh * ow;
    for (std::size_t k = 0; k < oh * ow; ++k) {
      o[k] = acc[k] > 0.0 ? static_cast<float>(acc[k]) : 0.0f;
    }
  }
  return out;
}

ToyEncoder::ToyEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
  if (spec_.level_channels.empty()) throw InvalidArgument("encoder needs at least one level");
  for (auto c : spec_.level_channels) {
    if (c == 0 || c % 4 != 0) {
      throw InvalidArgument("encoder level channels must be positive multiples of 4");
    }
  }
  Rng rng = Rng::derive(spec_.seed, 0xE5C0DE);
  std::size_t cin = spec_.input_channels;
  for (auto c : spec_.level_channels) {
    levels_.push_back(draw_conv_weight(rng, c, cin));
    cin = c;
  }
  for (int i = 0; i < 2; ++i) oce_.push_back(draw_conv_weight(rng, cin, cin));
}

FeaturePyramid ToyEncoder::extract(const Tensor& image, std::size_t max_level) const {
  if (image.rank() != 3 || image.channels() != spec_.input_channels) {
    throw InvalidArgument("encoder expects a " + std::to_string(spec_.input_channels) +
                          "xHxW image, got " + dims_to_string(image.dims()));
  }
  const std::size_t factor = std::size_t{1} << num_levels();
  if (image.height() % factor != 0 || image.width() % factor != 0) {
    throw InvalidArgument("image " + std::to_string(image.height()) + "x" +
                          std::to_string(image.width()) +
                          " is not divisible by " + std::to_string(factor) +
                          "; resize the input to a multiple of " + std::to_string(factor));
  }
  if (max_level == 0 || max_level > num_levels()) max_level = num_levels();
  FeaturePyramid out;
  out.reserve(max_level);
  const Tensor* prev = &image;
  for (std::size_t k = 0; k < max_level; ++k) {
    out.push_back(conv3x3_s2_relu(*prev, levels_[k]));
    prev = &out.back();
  }
  return out;
}

Tensor ToyEncoder::oce(const Tensor& deepest) const {
  const std::size_t c = spec_.level_channels.back();
  if (deepest.rank() != 3 || deepest.channels() != c || deepest.height() % 4 != 0 ||
      deepest.width() % 4 != 0) {
    throw InvalidArgument("oce expects the deepest level (" + std::to_string(c) +
                          " channels, spatial dims divisible by 4), got " +
                          dims_to_string(deepest.dims()));
  }
  return conv3x3_s2_relu(conv3x3_s2_relu(deepest, oce_[0]), oce_[1]);
}

std::uint64_t ToyEncoder::weights_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const Tensor& t) {
    for (float v : t.values()) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ull;
      }
    }
  };
  for (const auto& t : levels_) mix(t);
  for (const auto& t : oce_) mix(t);
  return h;
}

void ToyEncoder::save(const fs::path& dir) const {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    npft::write_tensor(dir / ("level" + std::to_string(k + 1) + ".npft"), levels_[k]);
  }
  for (std::size_t i = 0; i < oce_.size(); ++i) {
    npft::write_tensor(dir / ("oce" + std::to_string(i + 1) + ".npft"), oce_[i]);
  }
}

ToyEncoder ToyEncoder::load(const fs::path& dir, std::uint64_t seed) {
  ToyEncoder enc;
  enc.spec_.seed = seed;
  enc.spec_.level_channels.clear();
  for (std::size_t k = 1; fs::exists(dir / ("level" + std::to_string(k) + ".npft")); ++k) {
    Tensor w = npft::read_tensor(dir / ("level" + std::to_string(k) + ".npft"));
    if (w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3) {
      throw InvalidArgument("encoder stage " + std::to_string(k) + " has dims " +
                            dims_to_string(w.dims()));
    }
    if (k == 1) enc.spec_.input_channels = w.dim(1);
    else if (w.dim(1) != enc.spec_.level_channels.back()) {
      throw InvalidArgument("encoder stage " + std::to_string(k) +
                            " input channels do not chain");
    }
    enc.spec_.level_channels.push_back(w.dim(0));
    enc.levels_.push_back(std::move(w));
  }
  if (enc.levels_.empty()) throw IoError("no encoder stages in " + dir.string());
  for (int i = 1; i <= 2; ++i) {
    Tensor w = npft::read_tensor(dir / ("oce" + std::to_string(i) + ".npft"));
    const std::size_t c = enc.spec_.level_channels.back();
    if (w.dims() != Dims{c, c, 3, 3}) {
      throw InvalidArgument("oce stage " + std::to_string(i) + " has dims " +
                            dims_to_string(w.dims()));
    }
    enc.oce_.push_back(std::move(w));
  }
  return enc;
}

}  // namespace afe
