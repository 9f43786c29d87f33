#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "afe/tensor.hpp"

namespace afe {

inline constexpr std::array<std::size_t, 3> kContextRates{1, 2, 4};

// θ for one level: fixed dilated 3×3 averages at rates {1,2,4} concatenated
// channel-wise (rate-major), then a learnable linear map 3C -> C/4.
template <typename T>
struct BasicContextProjector {
  std::size_t in_channels = 0;
  BasicTensor<T> weight;  // (C/4) × 3C

  std::size_t out_channels() const { return in_channels / 4; }

  // Seeded draws scaled by 1/sqrt(3C).
  static BasicContextProjector random(std::size_t in_channels, std::uint64_t seed);
  // Identity on the first C/4 channels of the rate-1 slice.
  static BasicContextProjector identity(std::size_t in_channels);
};

// d entries of dimension C/4.
template <typename T>
struct BasicCodebookLevel {
  BasicTensor<T> entries;  // d × (C/4)

  std::size_t size() const { return entries.empty() ? 0 : entries.dim(0); }
  std::size_t dim() const { return entries.empty() ? 0 : entries.dim(1); }
};

template <typename T>
struct BasicQuantizedMap {
  BasicTensor<T> e;                     // (C/4) × H × W
  std::vector<std::uint32_t> indices;  // H × W, row-major
};

template <typename T>
struct VqLossResult {
  double loss = 0.0;
  BasicTensor<T> grad_entries;  // d × (C/4)
  BasicTensor<T> grad_z;        // (C/4) × H × W
};

using ContextProjector = BasicContextProjector<float>;
using CodebookLevel = BasicCodebookLevel<float>;
using QuantizedMap = BasicQuantizedMap<float>;

// Parameter-free half of θ: 3C × H × W.
template <typename T>
BasicTensor<T> context_pool(const BasicTensor<T>& f);

// Learnable half of θ applied to pooled contexts.
template <typename T>
BasicTensor<T> project_pooled(const BasicTensor<T>& pooled,
                              const BasicContextProjector<T>& proj);

template <typename T>
BasicTensor<T> context_project(const BasicTensor<T>& f,
                               const BasicContextProjector<T>& proj);

// d(loss)/d(weight) given d(loss)/dz and the pooled input.
template <typename T>
BasicTensor<T> project_weight_grad(const BasicTensor<T>& pooled,
                                   const BasicTensor<T>& grad_z);

// Nearest entry per location by squared Euclidean distance; ties go to the
// lowest index.
template <typename T>
BasicQuantizedMap<T> quantize(const BasicTensor<T>& z, const BasicCodebookLevel<T>& cb);

// mean_p ‖sg[z]−e‖² + ‖z−sg[e]‖². The first term only moves entries, the
// second only moves z.
template <typename T>
VqLossResult<T> vq_loss(const BasicTensor<T>& z, const BasicQuantizedMap<T>& q,
                        const BasicCodebookLevel<T>& cb);

struct CodebookTrainConfig {
  std::size_t entries = 16;
  double lr = 0.1;
  double projection_lr = 0.0;  // 0 freezes θ
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
};

struct CodebookTrainResult {
  CodebookLevel codebook;
  ContextProjector projector;
  std::vector<double> epoch_errors;  // mean ‖z − e‖² per epoch
};

// Seeds d entries from the first map's projected vectors.
CodebookLevel init_codebook(const Tensor& z_first, std::size_t entries, std::uint64_t seed);

// Replaces entries left unassigned for a whole epoch with the worst-quantized
// vectors seen in that epoch. Returns how many were replaced.
struct DeadEntryTracker {
  explicit DeadEntryTracker(std::size_t entries) : hits(entries, 0) {}

  void observe(const Tensor& z, const QuantizedMap& q);
  std::size_t reinit(CodebookLevel& cb);
  void reset();

  std::vector<std::size_t> hits;
  // Highest-error vectors of the epoch, descending by error.
  std::vector<std::pair<double, std::vector<float>>> worst;
};

// Plain gradient descent on the VQ objective over a stream of level
// features, one map per step.
CodebookTrainResult train_codebooks(const std::vector<Tensor>& stream,
                                    const ContextProjector& init_projector,
                                    const CodebookTrainConfig& config);

}  // namespace afe
