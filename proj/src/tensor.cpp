#include "afe/tensor.hpp"

namespace afe {

std::string dims_to_string(const Dims& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

ScoreMap::ScoreMap(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), values_(height * width, fill) {
  if (height == 0 || width == 0) throw InvalidArgument("score map must be non-empty");
}

ScoreMap::ScoreMap(std::size_t height, std::size_t width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height == 0 || width == 0) throw InvalidArgument("score map must be non-empty");
  if (values_.size() != height * width) {
    throw InvalidArgument("score map value count does not match " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

ScoreMap ScoreMap::from_tensor(const Tensor& t) {
  if (t.rank() == 2) return ScoreMap(t.dim(0), t.dim(1), t.storage());
  if (t.rank() == 3 && t.dim(0) == 1) return ScoreMap(t.dim(1), t.dim(2), t.storage());
  throw InvalidArgument("score map tensor must be HxW or 1xHxW, got " +
                        dims_to_string(t.dims()));
}

Tensor ScoreMap::to_tensor() const { return Tensor({height_, width_}, values_); }

}  // namespace afe
