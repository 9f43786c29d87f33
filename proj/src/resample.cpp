#include "afe/resample.hpp"

namespace afe {

ScoreMap bilinear_upsample(const ScoreMap& src, std::size_t th, std::size_t tw) {
  const Tensor t({1, src.height(), src.width()},
                 std::vector<float>(src.values().begin(), src.values().end()));
  return ScoreMap::from_tensor(bilinear_upsample(t, th, tw));
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double x = static_cast<double>(i);
    const double v = std::exp(-(x * x) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

ScoreMap gaussian_smooth(const ScoreMap& map, double sigma) {
  if (map.empty()) throw InvalidArgument("gaussian_smooth on an empty map");
  const auto kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t h = map.height(), w = map.width();

  std::vector<double> rows(h * w, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const std::size_t x = reflect_index(static_cast<std::ptrdiff_t>(j) + d, w);
        acc += kernel[static_cast<std::size_t>(d + radius)] * map.at(i, x);
      }
      rows[i * w + j] = acc;
    }
  }

  ScoreMap out(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const std::size_t y = reflect_index(static_cast<std::ptrdiff_t>(i) + d, h);
        acc += kernel[static_cast<std::size_t>(d + radius)] * rows[y * w + j];
      }
      out.at(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace afe
