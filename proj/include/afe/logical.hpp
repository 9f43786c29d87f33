#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afe/codebook.hpp"
#include "afe/decoder.hpp"
#include "afe/encoder.hpp"
#include "afe/raster.hpp"

namespace afe {

// Number of pyramid levels that feed reconstruction; level 5 only feeds OCE.
inline constexpr std::size_t kReconLevels = 4;

struct LossWeights {
  double cos = 1.0;
  double mse = 1.0;
  double vq = 1.0;
};

struct LossBundle {
  double l_cos = 0.0;
  double l_mse = 0.0;
  double l_vq = 0.0;
  double l_total = 0.0;
};

// Everything the logical branch learns.
template <typename T>
struct BasicLogicalParams {
  std::vector<BasicContextProjector<T>> projectors;  // index k-1
  std::vector<BasicCodebookLevel<T>> codebooks;      // index k-1
  BasicContextTable<T> contexts;
  BasicDecoderModel<T> decoder;
};

// Frozen inputs for one image.
template <typename T>
struct LogicalInputs {
  std::vector<BasicTensor<T>> features;  // f_E^1..f_E^4
  BasicTensor<T> bottleneck;
  BasicTensor<T> image;                  // C×H×W, values in [0,1]
  std::vector<BasicTensor<T>> pooled;    // optional cache of context_pool(f_E^k)
};

template <typename T>
struct LogicalPass {
  std::vector<BasicTensor<T>> z;            // θ(f_E^k)
  std::vector<BasicQuantizedMap<T>> q;
  std::vector<T> g;
  DecoderForward<T> decoded;
};

template <typename T>
struct LogicalGrads {
  std::vector<BasicTensor<T>> projectors;  // d/dθ weight, index k-1
  std::vector<BasicTensor<T>> entries;     // d/d codebook entries, index k-1
  BasicContextTable<T> contexts;
  BasicDecoderModel<T> decoder;
  std::vector<BasicTensor<T>> grad_e;      // downstream d/de^k
  std::vector<BasicTensor<T>> grad_z;      // what reaches z^k
};

// Forward pass, LossBundle and (optionally) every gradient. Quantization is
// crossed straight-through: z receives d/de unchanged, plus λ3 times the
// commitment gradient. Entries only move through the codebook term. With
// theta_joint false θ sees only the commitment gradient.
template <typename T>
LossBundle loss_total(const BasicLogicalParams<T>& params, const std::string& category,
                      const LogicalInputs<T>& in, const LossWeights& lambda, bool theta_joint,
                      LogicalGrads<T>* grads, LogicalPass<T>* pass = nullptr);

struct LogicalConfig {
  std::size_t image_size = 128;
  // Subtracted from pixels before encoding; the reconstruction target stays raw.
  double input_offset = 0.5;
  EncoderSpec encoder{};
  std::size_t codebook_entries = 16;
  double codebook_lr = 0.1;
  std::size_t context_dim = 64;
  LossWeights lambda{};
  std::size_t epochs = 50;
  double lr = 0.1;
  bool theta_joint = true;
  std::uint64_t seed = 1;
};

struct LogicalModel {
  LogicalConfig config;
  std::string category;
  ToyEncoder encoder{EncoderSpec{}};
  BasicLogicalParams<float> params;
  std::optional<std::vector<float>> embedding;
  bool trained = false;
  std::vector<LossBundle> loss_curve;  // mean per epoch; entry 0 is before training

  // Fresh parameters. With external features, `encoder` carries only the
  // bottleneck stages sized for them.
  static LogicalModel init(const LogicalConfig& config, const std::string& category,
                           ToyEncoder encoder,
                           std::optional<std::vector<float>> embedding = std::nullopt);

  // Writes into dir, which must not exist yet or be empty.
  void save(const std::filesystem::path& dir) const;
  static LogicalModel load(const std::filesystem::path& dir);
};

// Feature pyramid plus bottleneck for one image; the image is resized to the
// model's input size first.
LogicalInputs<float> prepare_inputs(const LogicalModel& model, const Image& image,
                                    const std::optional<FeaturePyramid>& external = std::nullopt);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, LogicalModel last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const LogicalModel& last_good() const noexcept { return last_good_; }

 private:
  LogicalModel last_good_;
};

// Batch size 1, fixed image order, plain gradient descent. `inputs` are the
// prepared training images. Throws TrainingError on a non-finite loss.
void train_logical(LogicalModel& model, const std::vector<LogicalInputs<float>>& inputs,
                   const std::function<void(std::size_t, const LossBundle&)>& on_epoch = {});

enum class CodeSource {
  kQuantized,  // e^k from the codebooks
  kRaw,        // θ(f_E^k) straight into the decoder; the leakage baseline
};

struct LogicalScore {
  ScoreMap a_log;
  std::vector<Tensor> level_maps;  // M^k on the level grids
};

// A_log = Σ_k upsample(M^k) at out_h × out_w.
LogicalScore logical_score(const LogicalModel& model, const LogicalInputs<float>& in,
                           std::size_t out_h, std::size_t out_w,
                           CodeSource codes = CodeSource::kQuantized);

}  // namespace afe
