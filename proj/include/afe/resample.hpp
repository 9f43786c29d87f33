#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

// Half-sample symmetric reflection (d c b a | a b c d | d c b a), folded as
// often as needed so any offset maps into [0, n).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

namespace detail {

struct LerpTap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Corner-aligned sampling grid: output i maps to source i*(src-1)/(dst-1).
inline std::vector<LerpTap> corner_aligned_taps(std::size_t src, std::size_t dst) {
  std::vector<LerpTap> taps(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double pos = 0.0;
    if (dst > 1) {
      pos = static_cast<double>(i) * static_cast<double>(src - 1) /
            static_cast<double>(dst - 1);
    }
    auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo > src - 1) lo = src - 1;
    const std::size_t hi = lo + 1 < src ? lo + 1 : lo;
    taps[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

// Bilinear resampling of a C×h×w tensor to C×th×tw with a corner-aligned
// grid. Works in both directions; bilinear_upsample is the checked entry point.
template <typename T>
BasicTensor<T> bilinear_resample(const BasicTensor<T>& src, std::size_t th,
                                 std::size_t tw) {
  if (src.rank() != 3) {
    throw InvalidArgument("bilinear_resample expects a CxHxW tensor, got " +
                          dims_to_string(src.dims()));
  }
  if (th == 0 || tw == 0) throw InvalidArgument("bilinear target must be non-empty");
  const std::size_t c = src.channels(), h = src.height(), w = src.width();
  const auto ty = detail::corner_aligned_taps(h, th);
  const auto tx = detail::corner_aligned_taps(w, tw);
  BasicTensor<T> out({c, th, tw});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < th; ++i) {
      const auto& y = ty[i];
      for (std::size_t j = 0; j < tw; ++j) {
        const auto& x = tx[j];
        const double top = (1.0 - x.frac) * src.at(ch, y.lo, x.lo) +
                           x.frac * src.at(ch, y.lo, x.hi);
        const double bottom = (1.0 - x.frac) * src.at(ch, y.hi, x.lo) +
                              x.frac * src.at(ch, y.hi, x.hi);
        out.at(ch, i, j) = static_cast<T>((1.0 - y.frac) * top + y.frac * bottom);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& src, std::size_t th,
                                 std::size_t tw) {
  if (src.rank() != 3) {
    throw InvalidArgument("bilinear_upsample expects a CxHxW tensor, got " +
                          dims_to_string(src.dims()));
  }
  if (th < src.height() || tw < src.width()) {
    throw InvalidArgument("bilinear_upsample target " + std::to_string(th) + "x" +
                          std::to_string(tw) + " is smaller than source " +
                          std::to_string(src.height()) + "x" +
                          std::to_string(src.width()));
  }
  return bilinear_resample(src, th, tw);
}

// Adjoint of bilinear_resample: scatters an output gradient back onto the
// source grid.
template <typename T>
BasicTensor<T> bilinear_resample_backward(const BasicTensor<T>& grad_out,
                                          std::size_t src_h, std::size_t src_w) {
  const std::size_t c = grad_out.channels(), th = grad_out.height(),
                    tw = grad_out.width();
  const auto ty = detail::corner_aligned_taps(src_h, th);
  const auto tx = detail::corner_aligned_taps(src_w, tw);
  std::vector<double> acc(c * src_h * src_w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = acc.data() + ch * src_h * src_w;
    for (std::size_t i = 0; i < th; ++i) {
      const auto& y = ty[i];
      for (std::size_t j = 0; j < tw; ++j) {
        const auto& x = tx[j];
        const double g = grad_out.at(ch, i, j);
        plane[y.lo * src_w + x.lo] += g * (1.0 - y.frac) * (1.0 - x.frac);
        plane[y.lo * src_w + x.hi] += g * (1.0 - y.frac) * x.frac;
        plane[y.hi * src_w + x.lo] += g * y.frac * (1.0 - x.frac);
        plane[y.hi * src_w + x.hi] += g * y.frac * x.frac;
      }
    }
  }
  BasicTensor<T> out({c, src_h, src_w});
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
  return out;
}

ScoreMap bilinear_upsample(const ScoreMap& src, std::size_t th, std::size_t tw);

// Normalized sampled Gaussian, radius ceil(4·sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian smoothing with reflect padding.
ScoreMap gaussian_smooth(const ScoreMap& map, double sigma);

// Per channel, the mean over the 3×3 neighborhood sampled at the given
// dilation rate, with reflect padding.
template <typename T>
BasicTensor<T> dilated_box_average(const BasicTensor<T>& src, std::size_t rate) {
  const std::size_t c = src.channels(), h = src.height(), w = src.width();
  const auto r = static_cast<std::ptrdiff_t>(rate);
  BasicTensor<T> out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double sum = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
          const std::size_t y = reflect_index(static_cast<std::ptrdiff_t>(i) + dy * r, h);
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            const std::size_t x =
                reflect_index(static_cast<std::ptrdiff_t>(j) + dx * r, w);
            sum += src.at(ch, y, x);
          }
        }
        out.at(ch, i, j) = static_cast<T>(sum / 9.0);
      }
    }
  }
  return out;
}

}  // namespace afe
