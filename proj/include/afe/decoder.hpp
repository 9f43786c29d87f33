#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

// Per-category abstract global context. Without an external embedding the
// context is a learnable vector; with one it is adapter(embedding). Either
// way it never depends on the test image.
template <typename T>
class BasicContextTable {
 public:
  BasicContextTable() = default;
  BasicContextTable(std::size_t context_dim, std::uint64_t seed);

  std::size_t context_dim() const noexcept { return context_dim_; }

  void register_category(const std::string& category);
  bool has_category(const std::string& category) const;
  std::vector<std::string> categories() const;

  // Switches the category to the adapter path. The adapter is created on first
  // use with input width embedding.size().
  void set_embedding(const std::string& category, std::vector<T> embedding);
  const std::vector<T>* embedding(const std::string& category) const;

  // g for the category.
  std::vector<T> resolve(const std::string& category) const;

  // Accumulates d(loss)/dg into the learnable parameters behind g.
  void backward(const std::string& category, const std::vector<T>& grad_g,
                BasicContextTable& grads) const;

  // Zeroed copy with identical shapes, for gradient accumulation.
  BasicContextTable zeros_like() const;

  // Parameters in a fixed order (vectors by category name, then adapter).
  std::vector<BasicTensor<T>*> parameters();
  std::vector<const BasicTensor<T>*> parameters() const;

  BasicTensor<T>& vector_param(const std::string& category);
  const BasicTensor<T>& vector_param(const std::string& category) const;
  bool has_adapter() const noexcept { return !adapter_w_.empty(); }
  BasicTensor<T>& adapter_weight() { return adapter_w_; }
  BasicTensor<T>& adapter_bias() { return adapter_b_; }
  const BasicTensor<T>& adapter_weight() const { return adapter_w_; }
  const BasicTensor<T>& adapter_bias() const { return adapter_b_; }
  void set_adapter(BasicTensor<T> weight, BasicTensor<T> bias);

 private:
  std::size_t context_dim_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::string, BasicTensor<T>> vectors_;
  std::map<std::string, std::vector<T>> embeddings_;
  BasicTensor<T> adapter_w_;  // D_g × D_ext
  BasicTensor<T> adapter_b_;  // D_g
};

// Pointwise two-layer map: concat(prev, g, e) -> hidden (rectified) -> out.
template <typename T>
struct FusionBlock {
  std::size_t prev_channels = 0;
  std::size_t context_channels = 0;
  std::size_t code_channels = 0;
  BasicTensor<T> w1;  // hidden × (prev + context + code)
  BasicTensor<T> b1;  // hidden
  BasicTensor<T> w2;  // out × hidden
  BasicTensor<T> b2;  // out

  std::size_t in_channels() const { return prev_channels + context_channels + code_channels; }
  std::size_t hidden_channels() const { return w1.dim(0); }
  std::size_t out_channels() const { return w2.dim(0); }
};

struct DecoderShape {
  std::vector<std::size_t> level_channels{8, 16, 32, 64, 64};  // C^1..C^5
  std::size_t context_dim = 64;
  std::size_t image_channels = 1;
};

template <typename T>
struct BasicDecoderModel {
  // blocks[k-1] is D^k for k = 1..4.
  std::vector<FusionBlock<T>> blocks;
  BasicTensor<T> head_w;  // image_channels × C^1
  BasicTensor<T> head_b;  // image_channels

  static BasicDecoderModel random(const DecoderShape& shape, std::uint64_t seed);
  static BasicDecoderModel zeros(const DecoderShape& shape);

  std::size_t num_levels() const { return blocks.size(); }
  std::vector<BasicTensor<T>*> parameters();
  std::vector<const BasicTensor<T>*> parameters() const;
  BasicDecoderModel zeros_like() const;
};

template <typename T>
struct DecoderLevelCache {
  BasicTensor<T> prev_up;  // prev × H × W
  BasicTensor<T> hidden;   // hidden × H × W, after rectification
  BasicTensor<T> output;   // f_D^k
};

template <typename T>
struct DecoderForward {
  std::vector<DecoderLevelCache<T>> levels;  // index k-1
  BasicTensor<T> head_low;                   // head applied on the level-1 grid
  BasicTensor<T> image;                      // x′ at image size

  const BasicTensor<T>& feature(std::size_t k) const { return levels.at(k - 1).output; }
};

// Decodes from the bottleneck, context g and quantized maps codes[k-1] = e^k.
// The pixel head is applied on the level-1 grid and then upsampled; both
// maps are linear so this equals applying it after upsampling.
template <typename T>
DecoderForward<T> decode(const BasicDecoderModel<T>& model, const BasicTensor<T>& bottleneck,
                         const std::vector<T>& g, const std::vector<BasicTensor<T>>& codes,
                         std::size_t image_h, std::size_t image_w);

template <typename T>
struct DecoderGrads {
  BasicDecoderModel<T> params;
  std::vector<T> grad_g;
  std::vector<BasicTensor<T>> grad_codes;  // index k-1
};

// Backpropagates d(loss)/d f_D^k (grad_features[k-1], may be empty) and
// d(loss)/dx′ through the decoder.
template <typename T>
DecoderGrads<T> decode_backward(const BasicDecoderModel<T>& model,
                                const DecoderForward<T>& fwd, const std::vector<T>& g,
                                const std::vector<BasicTensor<T>>& codes,
                                const std::vector<BasicTensor<T>>& grad_features,
                                const BasicTensor<T>& grad_image);

// Below this norm a feature vector counts as silent.
inline constexpr double kSilentNorm = 1e-12;

// M(h,w) = 1 − cos(fe(:,h,w), fd(:,h,w)). Two silent vectors score 0, one
// silent vector scores 1.
template <typename T>
BasicTensor<T> cosine_error_map(const BasicTensor<T>& fe, const BasicTensor<T>& fd);

// mean_{h,w} M and its gradient with respect to fd.
template <typename T>
double cosine_loss(const BasicTensor<T>& fe, const BasicTensor<T>& fd,
                   BasicTensor<T>* grad_fd);

// Mean squared error over every pixel and channel, gradient with respect to
// the reconstruction.
template <typename T>
double mse_loss(const BasicTensor<T>& x, const BasicTensor<T>& x_rec,
                BasicTensor<T>* grad_rec);

using ContextTable = BasicContextTable<float>;
using DecoderModel = BasicDecoderModel<float>;

}  // namespace afe
