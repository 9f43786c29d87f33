#include "afe/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "afe/resample.hpp"
#include "afe/rng.hpp"

namespace afe {

template <typename T>
BasicContextProjector<T> BasicContextProjector<T>::random(std::size_t in_channels,
                                                          std::uint64_t seed) {
  if (in_channels == 0 || in_channels % 4 != 0) {
    throw InvalidArgument("projector input channels must be a positive multiple of 4");
  }
  BasicContextProjector p;
  p.in_channels = in_channels;
  p.weight = BasicTensor<T>({in_channels / 4, 3 * in_channels});
  Rng rng = Rng::derive(seed, 0x7E7A);
  const double scale = 1.0 / std::sqrt(3.0 * static_cast<double>(in_channels));
  for (auto& v : p.weight.values()) v = static_cast<T>(rng.normal() * scale);
  return p;
}

template <typename T>
BasicContextProjector<T> BasicContextProjector<T>::identity(std::size_t in_channels) {
  if (in_channels == 0 || in_channels % 4 != 0) {
    throw InvalidArgument("projector input channels must be a positive multiple of 4");
  }
  BasicContextProjector p;
  p.in_channels = in_channels;
  p.weight = BasicTensor<T>({in_channels / 4, 3 * in_channels});
  for (std::size_t o = 0; o < in_channels / 4; ++o) p.weight.at(o, o) = T{1};
  return p;
}

template <typename T>
BasicTensor<T> context_pool(const BasicTensor<T>& f) {
  if (f.rank() != 3) {
    throw InvalidArgument("context_pool expects CxHxW, got " + dims_to_string(f.dims()));
  }
  const std::size_t c = f.channels(), plane = f.height() * f.width();
  BasicTensor<T> out({kContextRates.size() * c, f.height(), f.width()});
  for (std::size_t r = 0; r < kContextRates.size(); ++r) {
    const BasicTensor<T> avg = dilated_box_average(f, kContextRates[r]);
    std::copy(avg.values().begin(), avg.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(r * c * plane));
  }
  return out;
}

template <typename T>
BasicTensor<T> project_pooled(const BasicTensor<T>& pooled,
                              const BasicContextProjector<T>& proj) {
  const std::size_t in = proj.weight.dim(1), out_c = proj.weight.dim(0);
  if (pooled.rank() != 3 || pooled.channels() != in) {
    throw InvalidArgument("pooled context " + dims_to_string(pooled.dims()) +
                          " does not match projector input " + std::to_string(in));
  }
  const std::size_t plane = pooled.height() * pooled.width();
  BasicTensor<T> z({out_c, pooled.height(), pooled.width()});
  std::vector<double> acc(plane);
  for (std::size_t o = 0; o < out_c; ++o) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      const double w = proj.weight.at(o, i);
      if (w == 0.0) continue;
      const T* src = pooled.data() + i * plane;
      for (std::size_t p = 0; p < plane; ++p) acc[p] += w * static_cast<double>(src[p]);
    }
    T* dst = z.data() + o * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(acc[p]);
  }
  return z;
}

template <typename T>
BasicTensor<T> context_project(const BasicTensor<T>& f, const BasicContextProjector<T>& proj) {
  if (f.rank() != 3 || f.channels() != proj.in_channels) {
    throw InvalidArgument("context_project: feature map " + dims_to_string(f.dims()) +
                          " does not have " + std::to_string(proj.in_channels) +
                          " channels");
  }
  return project_pooled(context_pool(f), proj);
}

template <typename T>
BasicTensor<T> project_weight_grad(const BasicTensor<T>& pooled,
                                   const BasicTensor<T>& grad_z) {
  const std::size_t in = pooled.channels(), out_c = grad_z.channels();
  const std::size_t plane = pooled.height() * pooled.width();
  BasicTensor<T> g({out_c, in});
  for (std::size_t o = 0; o < out_c; ++o) {
    const T* gz = grad_z.data() + o * plane;
    for (std::size_t i = 0; i < in; ++i) {
      const T* src = pooled.data() + i * plane;
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        acc += static_cast<double>(gz[p]) * static_cast<double>(src[p]);
      }
      g.at(o, i) = static_cast<T>(acc);
    }
  }
  return g;
}

template <typename T>
BasicQuantizedMap<T> quantize(const BasicTensor<T>& z, const BasicCodebookLevel<T>& cb) {
  if (cb.size() == 0) throw InvalidState("quantize: codebook is empty");
  if (z.rank() != 3 || z.channels() != cb.dim()) {
    throw InvalidArgument("quantize: map " + dims_to_string(z.dims()) +
                          " does not match entry dim " + std::to_string(cb.dim()));
  }
  const std::size_t dim = cb.dim(), d = cb.size();
  const std::size_t plane = z.height() * z.width();
  BasicQuantizedMap<T> q;
  q.e = BasicTensor<T>(z.dims());
  q.indices.resize(plane);
  std::vector<double> best(plane, std::numeric_limits<double>::infinity());
  std::vector<double> dist(plane);
  // Entry-major sweep keeps the inner loop contiguous over locations.
  for (std::size_t j = 0; j < d; ++j) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = cb.entries.at(j, c);
      const T* src = z.data() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double diff = static_cast<double>(src[p]) - v;
        dist[p] += diff * diff;
      }
    }
    for (std::size_t p = 0; p < plane; ++p) {
      if (dist[p] < best[p]) {
        best[p] = dist[p];
        q.indices[p] = static_cast<std::uint32_t>(j);
      }
    }
  }
  for (std::size_t c = 0; c < dim; ++c) {
    T* dst = q.e.data() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = cb.entries.at(q.indices[p], c);
  }
  return q;
}

template <typename T>
VqLossResult<T> vq_loss(const BasicTensor<T>& z, const BasicQuantizedMap<T>& q,
                        const BasicCodebookLevel<T>& cb) {
  if (z.dims() != q.e.dims() || q.indices.size() != z.height() * z.width() ||
      z.channels() != cb.dim()) {
    throw InvalidArgument("vq_loss: z " + dims_to_string(z.dims()) +
                          " and quantized map " + dims_to_string(q.e.dims()) +
                          " are not compatible");
  }
  const std::size_t dim = cb.dim(), plane = z.height() * z.width();
  const double n = static_cast<double>(plane);
  VqLossResult<T> r;
  r.grad_z = BasicTensor<T>(z.dims());
  std::vector<double> ge(cb.size() * dim, 0.0);
  double sq = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const T* zs = z.data() + c * plane;
    const T* es = q.e.data() + c * plane;
    T* gz = r.grad_z.data() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const double diff = static_cast<double>(zs[p]) - static_cast<double>(es[p]);
      sq += diff * diff;
      gz[p] = static_cast<T>(2.0 * diff / n);
      ge[q.indices[p] * dim + c] -= 2.0 * diff / n;
    }
  }
  // Both terms have the same value; they differ only in where gradient flows.
  r.loss = 2.0 * sq / n;
  r.grad_entries = BasicTensor<T>({cb.size(), dim});
  for (std::size_t i = 0; i < ge.size(); ++i) r.grad_entries[i] = static_cast<T>(ge[i]);
  return r;
}

// --- training ----------------------------------------------------------------

CodebookLevel init_codebook(const Tensor& z_first, std::size_t entries,
                            std::uint64_t seed) {
  if (entries == 0) throw InvalidArgument("codebook needs at least one entry");
  const std::size_t dim = z_first.channels();
  const std::size_t plane = z_first.height() * z_first.width();
  // Distinct vectors in location order, then a seeded shuffle.
  std::map<std::vector<float>, std::size_t> seen;
  std::vector<std::vector<float>> unique;
  for (std::size_t p = 0; p < plane; ++p) {
    std::vector<float> v(dim);
    for (std::size_t c = 0; c < dim; ++c) v[c] = z_first[c * plane + p];
    if (seen.emplace(v, unique.size()).second) unique.push_back(std::move(v));
  }
  Rng rng = Rng::derive(seed, 0xC0DEB00C);
  for (std::size_t i = unique.size(); i > 1; --i) {
    std::swap(unique[i - 1], unique[rng.below(i)]);
  }
  double rms = 0.0;
  for (const auto& v : unique) {
    for (float x : v) rms += static_cast<double>(x) * x;
  }
  rms = std::sqrt(rms / static_cast<double>(unique.size() * dim));
  const double jitter = 1e-3 * rms + 1e-6;

  CodebookLevel cb{Tensor({entries, dim})};
  for (std::size_t j = 0; j < entries; ++j) {
    const auto& src = unique[j % unique.size()];
    for (std::size_t c = 0; c < dim; ++c) {
      double v = src[c];
      // Repeats of a vector get nudged so no two entries coincide.
      if (j >= unique.size()) v += jitter * rng.normal();
      cb.entries.at(j, c) = static_cast<float>(v);
    }
  }
  return cb;
}

void DeadEntryTracker::observe(const Tensor& z, const QuantizedMap& q) {
  const std::size_t dim = z.channels(), plane = z.height() * z.width();
  const std::size_t keep = hits.size();
  for (std::size_t p = 0; p < plane; ++p) {
    ++hits[q.indices[p]];
    double err = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double d = static_cast<double>(z[c * plane + p]) - q.e[c * plane + p];
      err += d * d;
    }
    if (worst.size() == keep && err <= worst.back().first) continue;
    std::vector<float> v(dim);
    for (std::size_t c = 0; c < dim; ++c) v[c] = z[c * plane + p];
    // Stable insertion keeps earlier vectors ahead on equal error.
    auto it = std::upper_bound(worst.begin(), worst.end(), err,
                               [](double e, const auto& w) { return e > w.first; });
    worst.insert(it, {err, std::move(v)});
    if (worst.size() > keep) worst.pop_back();
  }
}

std::size_t DeadEntryTracker::reinit(CodebookLevel& cb) {
  std::size_t next = 0, replaced = 0;
  for (std::size_t j = 0; j < hits.size(); ++j) {
    if (hits[j] != 0) continue;
    if (next >= worst.size() || worst[next].first <= 0.0) break;
    const auto& v = worst[next++].second;
    for (std::size_t c = 0; c < v.size(); ++c) cb.entries.at(j, c) = v[c];
    ++replaced;
  }
  return replaced;
}

void DeadEntryTracker::reset() {
  std::fill(hits.begin(), hits.end(), 0);
  worst.clear();
}

CodebookTrainResult train_codebooks(const std::vector<Tensor>& stream,
                                    const ContextProjector& init_projector,
                                    const CodebookTrainConfig& config) {
  if (stream.empty()) throw InvalidArgument("train_codebooks: empty feature stream");
  if (!(config.lr >= 0.0) || !(config.projection_lr >= 0.0)) {
    throw InvalidArgument("train_codebooks: learning rates must be >= 0");
  }
  std::vector<Tensor> pooled;
  pooled.reserve(stream.size());
  for (const auto& f : stream) {
    if (f.rank() != 3 || f.channels() != init_projector.in_channels) {
      throw InvalidArgument("train_codebooks: feature map " + dims_to_string(f.dims()) +
                            " does not match projector");
    }
    pooled.push_back(context_pool(f));
  }

  CodebookTrainResult r;
  r.projector = init_projector;
  r.codebook = init_codebook(project_pooled(pooled.front(), r.projector), config.entries,
                             config.seed);
  DeadEntryTracker tracker(config.entries);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    tracker.reset();
    double err_sum = 0.0;
    std::size_t count = 0;
    for (const auto& pc : pooled) {
      const Tensor z = project_pooled(pc, r.projector);
      const QuantizedMap q = quantize(z, r.codebook);
      tracker.observe(z, q);
      const auto vq = vq_loss(z, q, r.codebook);
      const std::size_t plane = z.height() * z.width();
      err_sum += vq.loss / 2.0 * static_cast<double>(plane);
      count += plane;
      for (std::size_t i = 0; i < r.codebook.entries.size(); ++i) {
        r.codebook.entries[i] -= static_cast<float>(config.lr * vq.grad_entries[i]);
      }
      if (config.projection_lr > 0.0) {
        const Tensor gw = project_weight_grad(pc, vq.grad_z);
        for (std::size_t i = 0; i < gw.size(); ++i) {
          r.projector.weight[i] -= static_cast<float>(config.projection_lr * gw[i]);
        }
      }
    }
    r.epoch_errors.push_back(err_sum / static_cast<double>(count));
    if (config.lr > 0.0) tracker.reinit(r.codebook);
  }
  return r;
}

#define AFE_INSTANTIATE_CODEBOOK(T)                                                   \
  template struct BasicContextProjector<T>;                                           \
  template BasicTensor<T> context_pool(const BasicTensor<T>&);                        \
  template BasicTensor<T> project_pooled(const BasicTensor<T>&,                       \
                                         const BasicContextProjector<T>&);            \
  template BasicTensor<T> context_project(const BasicTensor<T>&,                      \
                                          const BasicContextProjector<T>&);           \
  template BasicTensor<T> project_weight_grad(const BasicTensor<T>&,                  \
                                              const BasicTensor<T>&);                 \
  template BasicQuantizedMap<T> quantize(const BasicTensor<T>&,                       \
                                         const BasicCodebookLevel<T>&);               \
  template VqLossResult<T> vq_loss(const BasicTensor<T>&, const BasicQuantizedMap<T>&, \
                                   const BasicCodebookLevel<T>&);

AFE_INSTANTIATE_CODEBOOK(float)
AFE_INSTANTIATE_CODEBOOK(double)

#undef AFE_INSTANTIATE_CODEBOOK

}  // namespace afe
