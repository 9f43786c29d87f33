#include "afe/decoder.hpp"

#include <cmath>

#include "afe/resample.hpp"
#include "afe/rng.hpp"

namespace afe {
namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T>
BasicTensor<T> gaussian_tensor(Dims dims, double scale, Rng& rng) {
  BasicTensor<T> t(std::move(dims));
  for (auto& v : t.values()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

// out[o][p] += Σ_i w[o][col + i] · in[i][p] for a block of input channels.
template <typename T>
void accumulate_pointwise(const BasicTensor<T>& w, std::size_t col, const BasicTensor<T>& in,
                          std::vector<double>& acc, std::size_t o, std::size_t plane) {
  const std::size_t n_in = in.channels();
  for (std::size_t i = 0; i < n_in; ++i) {
    const double wv = w.at(o, col + i);
    if (wv == 0.0) continue;
    const T* src = in.data() + i * plane;
    for (std::size_t p = 0; p < plane; ++p) acc[p] += wv * static_cast<double>(src[p]);
  }
}

template <typename T>
double dot_plane(const T* a, const T* b, std::size_t plane) {
  double acc = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    acc += static_cast<double>(a[p]) * static_cast<double>(b[p]);
  }
  return acc;
}

template <typename T>
double sum_plane(const T* a, std::size_t plane) {
  double acc = 0.0;
  for (std::size_t p = 0; p < plane; ++p) acc += static_cast<double>(a[p]);
  return acc;
}

template <typename T>
DecoderLevelCache<T> block_forward(const FusionBlock<T>& blk, BasicTensor<T> prev_up,
                                   const std::vector<T>& g, const BasicTensor<T>& code) {
  const std::size_t h = code.height(), w = code.width(), plane = h * w;
  const std::size_t hid = blk.hidden_channels(), out_c = blk.out_channels();
  DecoderLevelCache<T> cache;
  cache.hidden = BasicTensor<T>({hid, h, w});
  cache.output = BasicTensor<T>({out_c, h, w});
  std::vector<double> acc(plane);
  for (std::size_t o = 0; o < hid; ++o) {
    // The context is spatially constant, so its contribution is one scalar.
    double base = blk.b1[o];
    for (std::size_t j = 0; j < blk.context_channels; ++j) {
      base += static_cast<double>(blk.w1.at(o, blk.prev_channels + j)) * g[j];
    }
    std::fill(acc.begin(), acc.end(), base);
    accumulate_pointwise(blk.w1, 0, prev_up, acc, o, plane);
    accumulate_pointwise(blk.w1, blk.prev_channels + blk.context_channels, code, acc, o,
                         plane);
    T* dst = cache.hidden.data() + o * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      dst[p] = acc[p] > 0.0 ? static_cast<T>(acc[p]) : T{0};
    }
  }
  for (std::size_t o = 0; o < out_c; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(blk.b2[o]));
    accumulate_pointwise(blk.w2, 0, cache.hidden, acc, o, plane);
    T* dst = cache.output.data() + o * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(acc[p]);
  }
  cache.prev_up = std::move(prev_up);
  return cache;
}

// Returns d(loss)/d(prev_up); accumulates parameter, context and code grads.
template <typename T>
BasicTensor<T> block_backward(const FusionBlock<T>& blk, const DecoderLevelCache<T>& cache,
                              const std::vector<T>& g, const BasicTensor<T>& code,
                              const BasicTensor<T>& grad_out, FusionBlock<T>& gblk,
                              std::vector<T>& grad_g, BasicTensor<T>& grad_code) {
  const std::size_t h = code.height(), w = code.width(), plane = h * w;
  const std::size_t hid = blk.hidden_channels(), out_c = blk.out_channels();

  for (std::size_t o = 0; o < out_c; ++o) {
    const T* go = grad_out.data() + o * plane;
    gblk.b2[o] += static_cast<T>(sum_plane(go, plane));
    for (std::size_t k = 0; k < hid; ++k) {
      gblk.w2.at(o, k) += static_cast<T>(dot_plane(go, cache.hidden.data() + k * plane, plane));
    }
  }

  BasicTensor<T> grad_hidden({hid, h, w});
  std::vector<double> acc(plane);
  for (std::size_t k = 0; k < hid; ++k) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t o = 0; o < out_c; ++o) {
      const double wv = blk.w2.at(o, k);
      if (wv == 0.0) continue;
      const T* go = grad_out.data() + o * plane;
      for (std::size_t p = 0; p < plane; ++p) acc[p] += wv * static_cast<double>(go[p]);
    }
    const T* hv = cache.hidden.data() + k * plane;
    T* gh = grad_hidden.data() + k * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      gh[p] = hv[p] > T{0} ? static_cast<T>(acc[p]) : T{0};
    }
  }

  const std::size_t ctx_col = blk.prev_channels;
  const std::size_t code_col = blk.prev_channels + blk.context_channels;
  for (std::size_t k = 0; k < hid; ++k) {
    const T* gh = grad_hidden.data() + k * plane;
    const double total = sum_plane(gh, plane);
    gblk.b1[k] += static_cast<T>(total);
    for (std::size_t i = 0; i < blk.prev_channels; ++i) {
      gblk.w1.at(k, i) +=
          static_cast<T>(dot_plane(gh, cache.prev_up.data() + i * plane, plane));
    }
    for (std::size_t j = 0; j < blk.context_channels; ++j) {
      gblk.w1.at(k, ctx_col + j) += static_cast<T>(total * static_cast<double>(g[j]));
      grad_g[j] += static_cast<T>(total * static_cast<double>(blk.w1.at(k, ctx_col + j)));
    }
    for (std::size_t i = 0; i < blk.code_channels; ++i) {
      gblk.w1.at(k, code_col + i) += static_cast<T>(dot_plane(gh, code.data() + i * plane, plane));
    }
  }

  auto input_grad = [&](std::size_t col, std::size_t channels, BasicTensor<T>& dst_t) {
    for (std::size_t i = 0; i < channels; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < hid; ++k) {
        const double wv = blk.w1.at(k, col + i);
        if (wv == 0.0) continue;
        const T* gh = grad_hidden.data() + k * plane;
        for (std::size_t p = 0; p < plane; ++p) acc[p] += wv * static_cast<double>(gh[p]);
      }
      T* dst = dst_t.data() + i * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += static_cast<T>(acc[p]);
    }
  };
  BasicTensor<T> grad_prev({blk.prev_channels, h, w});
  input_grad(0, blk.prev_channels, grad_prev);
  input_grad(code_col, blk.code_channels, grad_code);
  return grad_prev;
}

}  // namespace

// --- context table ------------------------------------------------------------

template <typename T>
BasicContextTable<T>::BasicContextTable(std::size_t context_dim, std::uint64_t seed)
    : context_dim_(context_dim), seed_(seed) {
  if (context_dim == 0) throw InvalidArgument("context dimension must be >= 1");
}

template <typename T>
void BasicContextTable<T>::register_category(const std::string& category) {
  if (vectors_.count(category)) return;
  Rng rng = Rng::derive(seed_, name_hash(category));
  vectors_.emplace(category,
                   gaussian_tensor<T>({context_dim_},
                                      1.0 / std::sqrt(static_cast<double>(context_dim_)), rng));
}

template <typename T>
bool BasicContextTable<T>::has_category(const std::string& category) const {
  return vectors_.count(category) != 0;
}

template <typename T>
std::vector<std::string> BasicContextTable<T>::categories() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : vectors_) out.push_back(name);
  return out;
}

template <typename T>
void BasicContextTable<T>::set_embedding(const std::string& category,
                                         std::vector<T> embedding) {
  if (!has_category(category)) {
    throw InvalidArgument("unknown category '" + category + "'");
  }
  if (embedding.empty()) throw InvalidArgument("external embedding is empty");
  if (adapter_w_.empty()) {
    Rng rng = Rng::derive(seed_, 0xADA97E5);
    adapter_w_ = gaussian_tensor<T>({context_dim_, embedding.size()},
                                    1.0 / std::sqrt(static_cast<double>(embedding.size())),
                                    rng);
    adapter_b_ = BasicTensor<T>({context_dim_});
  } else if (adapter_w_.dim(1) != embedding.size()) {
    throw InvalidArgument("external embedding width " + std::to_string(embedding.size()) +
                          " does not match adapter input " +
                          std::to_string(adapter_w_.dim(1)));
  }
  embeddings_[category] = std::move(embedding);
}

template <typename T>
const std::vector<T>* BasicContextTable<T>::embedding(const std::string& category) const {
  auto it = embeddings_.find(category);
  return it == embeddings_.end() ? nullptr : &it->second;
}

template <typename T>
void BasicContextTable<T>::set_adapter(BasicTensor<T> weight, BasicTensor<T> bias) {
  if (weight.rank() != 2 || weight.dim(0) != context_dim_ || bias.dims() != Dims{context_dim_}) {
    throw InvalidArgument("adapter shapes do not match context dimension");
  }
  adapter_w_ = std::move(weight);
  adapter_b_ = std::move(bias);
}

template <typename T>
std::vector<T> BasicContextTable<T>::resolve(const std::string& category) const {
  auto it = vectors_.find(category);
  if (it == vectors_.end()) throw InvalidArgument("unknown category '" + category + "'");
  if (const auto* emb = embedding(category)) {
    std::vector<T> g(context_dim_);
    for (std::size_t o = 0; o < context_dim_; ++o) {
      double acc = adapter_b_[o];
      for (std::size_t i = 0; i < emb->size(); ++i) {
        acc += static_cast<double>(adapter_w_.at(o, i)) * (*emb)[i];
      }
      g[o] = static_cast<T>(acc);
    }
    return g;
  }
  return it->second.storage();
}

template <typename T>
void BasicContextTable<T>::backward(const std::string& category, const std::vector<T>& grad_g,
                                    BasicContextTable& grads) const {
  if (const auto* emb = embedding(category)) {
    for (std::size_t o = 0; o < context_dim_; ++o) {
      grads.adapter_b_[o] += grad_g[o];
      for (std::size_t i = 0; i < emb->size(); ++i) {
        grads.adapter_w_.at(o, i) += static_cast<T>(static_cast<double>(grad_g[o]) * (*emb)[i]);
      }
    }
    return;
  }
  auto& gv = grads.vectors_.at(category);
  for (std::size_t o = 0; o < context_dim_; ++o) gv[o] += grad_g[o];
}

template <typename T>
BasicContextTable<T> BasicContextTable<T>::zeros_like() const {
  BasicContextTable z = *this;
  for (auto& [_, v] : z.vectors_) v.fill(T{0});
  if (!z.adapter_w_.empty()) {
    z.adapter_w_.fill(T{0});
    z.adapter_b_.fill(T{0});
  }
  return z;
}

template <typename T>
std::vector<BasicTensor<T>*> BasicContextTable<T>::parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& [_, v] : vectors_) out.push_back(&v);
  if (!adapter_w_.empty()) {
    out.push_back(&adapter_w_);
    out.push_back(&adapter_b_);
  }
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> BasicContextTable<T>::parameters() const {
  std::vector<const BasicTensor<T>*> out;
  for (const auto& [_, v] : vectors_) out.push_back(&v);
  if (!adapter_w_.empty()) {
    out.push_back(&adapter_w_);
    out.push_back(&adapter_b_);
  }
  return out;
}

template <typename T>
BasicTensor<T>& BasicContextTable<T>::vector_param(const std::string& category) {
  auto it = vectors_.find(category);
  if (it == vectors_.end()) throw InvalidArgument("unknown category '" + category + "'");
  return it->second;
}

template <typename T>
const BasicTensor<T>& BasicContextTable<T>::vector_param(const std::string& category) const {
  auto it = vectors_.find(category);
  if (it == vectors_.end()) throw InvalidArgument("unknown category '" + category + "'");
  return it->second;
}

// --- decoder model -------------------------------------------------------------

template <typename T>
BasicDecoderModel<T> BasicDecoderModel<T>::random(const DecoderShape& shape,
                                                  std::uint64_t seed) {
  BasicDecoderModel m = zeros(shape);
  Rng rng = Rng::derive(seed, 0xDEC0DE);
  auto fill = [&rng](BasicTensor<T>& t) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.dim(1)));
    for (auto& v : t.values()) v = static_cast<T>(rng.normal() * scale);
  };
  for (auto& b : m.blocks) {
    fill(b.w1);
    fill(b.w2);
  }
  fill(m.head_w);
  return m;
}

template <typename T>
BasicDecoderModel<T> BasicDecoderModel<T>::zeros(const DecoderShape& shape) {
  const auto& ch = shape.level_channels;
  if (ch.size() != 5) throw InvalidArgument("decoder expects five encoder levels");
  for (auto c : ch) {
    if (c == 0 || c % 4 != 0) throw InvalidArgument("level channels must be multiples of 4");
  }
  BasicDecoderModel m;
  for (std::size_t k = 1; k <= 4; ++k) {
    FusionBlock<T> b;
    b.prev_channels = ch[k];  // C^{k+1}; for k = 4 the bottleneck carries C^5
    b.context_channels = shape.context_dim;
    b.code_channels = ch[k - 1] / 4;
    const std::size_t hid = 2 * ch[k - 1];
    b.w1 = BasicTensor<T>({hid, b.in_channels()});
    b.b1 = BasicTensor<T>({hid});
    b.w2 = BasicTensor<T>({ch[k - 1], hid});
    b.b2 = BasicTensor<T>({ch[k - 1]});
    m.blocks.push_back(std::move(b));
  }
  m.head_w = BasicTensor<T>({shape.image_channels, ch[0]});
  m.head_b = BasicTensor<T>({shape.image_channels});
  return m;
}

template <typename T>
std::vector<BasicTensor<T>*> BasicDecoderModel<T>::parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& b : blocks) {
    out.insert(out.end(), {&b.w1, &b.b1, &b.w2, &b.b2});
  }
  out.insert(out.end(), {&head_w, &head_b});
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> BasicDecoderModel<T>::parameters() const {
  std::vector<const BasicTensor<T>*> out;
  for (const auto& b : blocks) {
    out.insert(out.end(), {&b.w1, &b.b1, &b.w2, &b.b2});
  }
  out.insert(out.end(), {&head_w, &head_b});
  return out;
}

template <typename T>
BasicDecoderModel<T> BasicDecoderModel<T>::zeros_like() const {
  BasicDecoderModel z = *this;
  for (auto* p : z.parameters()) p->fill(T{0});
  return z;
}

template <typename T>
DecoderForward<T> decode(const BasicDecoderModel<T>& model, const BasicTensor<T>& bottleneck,
                         const std::vector<T>& g, const std::vector<BasicTensor<T>>& codes,
                         std::size_t image_h, std::size_t image_w) {
  const std::size_t levels = model.num_levels();
  if (codes.size() != levels) {
    throw InvalidArgument("decode: expected " + std::to_string(levels) +
                          " quantized levels, got " + std::to_string(codes.size()));
  }
  for (std::size_t k = 0; k < levels; ++k) {
    const auto& b = model.blocks[k];
    if (codes[k].rank() != 3 || codes[k].channels() != b.code_channels) {
      throw InvalidArgument("decode: level " + std::to_string(k + 1) + " codes " +
                            dims_to_string(codes[k].dims()) + " do not match the model");
    }
    if (k + 1 < levels && (codes[k].height() != 2 * codes[k + 1].height() ||
                           codes[k].width() != 2 * codes[k + 1].width())) {
      throw InvalidArgument("decode: level grids do not halve");
    }
  }
  if (g.size() != model.blocks[0].context_channels) {
    throw InvalidArgument("decode: context has " + std::to_string(g.size()) +
                          " channels, model expects " +
                          std::to_string(model.blocks[0].context_channels));
  }
  if (bottleneck.rank() != 3 || bottleneck.channels() != model.blocks[levels - 1].prev_channels) {
    throw InvalidArgument("decode: bottleneck " + dims_to_string(bottleneck.dims()) +
                          " does not match the model");
  }

  DecoderForward<T> fwd;
  fwd.levels.resize(levels);
  const BasicTensor<T>* prev = &bottleneck;
  for (std::size_t k = levels; k-- > 0;) {
    const auto& code = codes[k];
    auto prev_up = bilinear_upsample(*prev, code.height(), code.width());
    fwd.levels[k] = block_forward(model.blocks[k], std::move(prev_up), g, code);
    prev = &fwd.levels[k].output;
  }

  const auto& f1 = fwd.levels[0].output;
  const std::size_t plane = f1.height() * f1.width();
  const std::size_t img_c = model.head_w.dim(0);
  fwd.head_low = BasicTensor<T>({img_c, f1.height(), f1.width()});
  std::vector<double> acc(plane);
  for (std::size_t c = 0; c < img_c; ++c) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(model.head_b[c]));
    accumulate_pointwise(model.head_w, 0, f1, acc, c, plane);
    T* dst = fwd.head_low.data() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(acc[p]);
  }
  fwd.image = bilinear_upsample(fwd.head_low, image_h, image_w);
  return fwd;
}

template <typename T>
DecoderGrads<T> decode_backward(const BasicDecoderModel<T>& model,
                                const DecoderForward<T>& fwd, const std::vector<T>& g,
                                const std::vector<BasicTensor<T>>& codes,
                                const std::vector<BasicTensor<T>>& grad_features,
                                const BasicTensor<T>& grad_image) {
  const std::size_t levels = model.num_levels();
  DecoderGrads<T> out;
  out.params = model.zeros_like();
  out.grad_g.assign(g.size(), T{0});
  for (const auto& c : codes) out.grad_codes.emplace_back(c.dims());

  // Pixel head.
  const auto& f1 = fwd.levels[0].output;
  const std::size_t plane1 = f1.height() * f1.width();
  BasicTensor<T> carry(f1.dims());
  if (!grad_image.empty()) {
    const BasicTensor<T> gh = bilinear_resample_backward(grad_image, f1.height(), f1.width());
    const std::size_t img_c = model.head_w.dim(0);
    for (std::size_t c = 0; c < img_c; ++c) {
      const T* gc = gh.data() + c * plane1;
      out.params.head_b[c] += static_cast<T>(sum_plane(gc, plane1));
      for (std::size_t j = 0; j < f1.channels(); ++j) {
        out.params.head_w.at(c, j) += static_cast<T>(dot_plane(gc, f1.data() + j * plane1, plane1));
        const double wv = model.head_w.at(c, j);
        T* dst = carry.data() + j * plane1;
        for (std::size_t p = 0; p < plane1; ++p) dst[p] += static_cast<T>(wv * gc[p]);
      }
    }
  }

  for (std::size_t k = 0; k < levels; ++k) {
    const auto& cache = fwd.levels[k];
    if (k < grad_features.size() && !grad_features[k].empty()) {
      for (std::size_t i = 0; i < carry.size(); ++i) carry[i] += grad_features[k][i];
    }
    BasicTensor<T> grad_prev = block_backward(model.blocks[k], cache, g, codes[k], carry,
                                              out.params.blocks[k], out.grad_g,
                                              out.grad_codes[k]);
    if (k + 1 < levels) {
      const auto& next = fwd.levels[k + 1].output;
      carry = bilinear_resample_backward(grad_prev, next.height(), next.width());
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> cosine_error_map(const BasicTensor<T>& fe, const BasicTensor<T>& fd) {
  if (fe.dims() != fd.dims() || fe.rank() != 3) {
    throw InvalidArgument("cosine_error_map: " + dims_to_string(fe.dims()) + " vs " +
                          dims_to_string(fd.dims()));
  }
  const std::size_t c = fe.channels(), plane = fe.height() * fe.width();
  BasicTensor<T> m({1, fe.height(), fe.width()});
  for (std::size_t p = 0; p < plane; ++p) {
    double dot = 0.0, ne = 0.0, nd = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double a = fe[ch * plane + p], b = fd[ch * plane + p];
      dot += a * b;
      ne += a * a;
      nd += b * b;
    }
    ne = std::sqrt(ne);
    nd = std::sqrt(nd);
    const bool se = ne < kSilentNorm, sd = nd < kSilentNorm;
    double v;
    if (se || sd) {
      v = (se && sd) ? 0.0 : 1.0;
    } else {
      v = 1.0 - std::clamp(dot / (ne * nd), -1.0, 1.0);
    }
    m[p] = static_cast<T>(v);
  }
  return m;
}

template <typename T>
double cosine_loss(const BasicTensor<T>& fe, const BasicTensor<T>& fd, BasicTensor<T>* grad_fd) {
  if (fe.dims() != fd.dims() || fe.rank() != 3) {
    throw InvalidArgument("cosine_loss: " + dims_to_string(fe.dims()) + " vs " +
                          dims_to_string(fd.dims()));
  }
  const std::size_t c = fe.channels(), plane = fe.height() * fe.width();
  const double n = static_cast<double>(plane);
  if (grad_fd) *grad_fd = BasicTensor<T>(fd.dims());
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    double dot = 0.0, ne2 = 0.0, nd2 = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double a = fe[ch * plane + p], b = fd[ch * plane + p];
      dot += a * b;
      ne2 += a * a;
      nd2 += b * b;
    }
    const double ne = std::sqrt(ne2), nd = std::sqrt(nd2);
    const bool se = ne < kSilentNorm, sd = nd < kSilentNorm;
    if (se || sd) {
      total += (se && sd) ? 0.0 : 1.0;
      continue;
    }
    const double cosv = dot / (ne * nd);
    total += 1.0 - cosv;
    if (grad_fd) {
      // d(1 − cos)/d fd = −(fe / (|fe||fd|) − cos · fd / |fd|²)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = fe[ch * plane + p], b = fd[ch * plane + p];
        (*grad_fd)[ch * plane + p] = static_cast<T>(-(a / (ne * nd) - cosv * b / nd2) / n);
      }
    }
  }
  return total / n;
}

template <typename T>
double mse_loss(const BasicTensor<T>& x, const BasicTensor<T>& x_rec, BasicTensor<T>* grad_rec) {
  if (x.dims() != x_rec.dims()) {
    throw InvalidArgument("mse_loss: " + dims_to_string(x.dims()) + " vs " +
                          dims_to_string(x_rec.dims()));
  }
  const double n = static_cast<double>(x.size());
  if (grad_rec) *grad_rec = BasicTensor<T>(x.dims());
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_rec[i]) - static_cast<double>(x[i]);
    sq += d * d;
    if (grad_rec) (*grad_rec)[i] = static_cast<T>(2.0 * d / n);
  }
  return sq / n;
}

#define AFE_INSTANTIATE_DECODER(T)                                                        \
  template class BasicContextTable<T>;                                                    \
  template struct BasicDecoderModel<T>;                                                   \
  template DecoderForward<T> decode(const BasicDecoderModel<T>&, const BasicTensor<T>&,   \
                                    const std::vector<T>&,                                \
                                    const std::vector<BasicTensor<T>>&, std::size_t,      \
                                    std::size_t);                                         \
  template DecoderGrads<T> decode_backward(                                               \
      const BasicDecoderModel<T>&, const DecoderForward<T>&, const std::vector<T>&,       \
      const std::vector<BasicTensor<T>>&, const std::vector<BasicTensor<T>>&,             \
      const BasicTensor<T>&);                                                             \
  template BasicTensor<T> cosine_error_map(const BasicTensor<T>&, const BasicTensor<T>&); \
  template double cosine_loss(const BasicTensor<T>&, const BasicTensor<T>&,               \
                              BasicTensor<T>*);                                           \
  template double mse_loss(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>*);

AFE_INSTANTIATE_DECODER(float)
AFE_INSTANTIATE_DECODER(double)

#undef AFE_INSTANTIATE_DECODER

}  // namespace afe
