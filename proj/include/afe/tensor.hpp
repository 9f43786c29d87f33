#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "afe/errors.hpp"

namespace afe {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string dims_to_string(const Dims& dims);

// Dense row-major array. Spatial feature maps are rank 3, laid out C×H×W.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Dims dims, T fill = T{0}) : dims_(std::move(dims)) {
    validate_dims(dims_);
    data_.assign(dims_product(dims_), fill);
  }

  BasicTensor(Dims dims, std::vector<T> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims(dims_);
    if (data_.size() != dims_product(dims_)) {
      throw InvalidArgument("tensor data length " +
                            std::to_string(data_.size()) +
                            " does not match dims " + dims_to_string(dims_));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  // Views only; calling these on a temporary would dangle.
  std::span<T> values() & noexcept { return data_; }
  std::span<const T> values() const& noexcept { return data_; }
  std::span<const T> values() && = delete;
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors (C×H×W).
  std::size_t channels() const { return dims_.at(0); }
  std::size_t height() const { return dims_.at(1); }
  std::size_t width() const { return dims_.at(2); }

  T& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }

  // Rank-2 accessor (rows×cols).
  T& at(std::size_t r, std::size_t c) noexcept { return data_[r * dims_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const noexcept {
    return data_[r * dims_[1] + c];
  }

  std::span<T> row(std::size_t r) {
    const std::size_t stride = size() / dims_.at(0);
    return std::span<T>(data_).subspan(r * stride, stride);
  }
  std::span<const T> row(std::size_t r) const {
    const std::size_t stride = size() / dims_.at(0);
    return std::span<const T>(data_).subspan(r * stride, stride);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicTensor& other) const = default;

 private:
  static void validate_dims(const Dims& dims) {
    if (dims.empty()) throw InvalidArgument("tensor dims must be non-empty");
    for (auto d : dims) {
      if (d == 0) {
        throw InvalidArgument("tensor extent must be >= 1, got " +
                              dims_to_string(dims));
      }
    }
  }

  Dims dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& src) {
  std::vector<To> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
  return BasicTensor<To>(src.dims(), std::move(out));
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (const T v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Per-pixel anomaly scores, H×W.
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(std::size_t height, std::size_t width, float fill = 0.0f);
  ScoreMap(std::size_t height, std::size_t width, std::vector<float> values);

  // Accepts H×W or 1×H×W tensors.
  static ScoreMap from_tensor(const Tensor& t);
  Tensor to_tensor() const;

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  float& at(std::size_t h, std::size_t w) noexcept { return values_[h * width_ + w]; }
  float at(std::size_t h, std::size_t w) const noexcept {
    return values_[h * width_ + w];
  }
  std::span<float> values() & noexcept { return values_; }
  std::span<const float> values() const& noexcept { return values_; }
  std::span<const float> values() && = delete;

  bool operator==(const ScoreMap& other) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
};

}  // namespace afe
