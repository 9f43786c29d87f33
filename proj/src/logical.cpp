#include "afe/logical.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "afe/kv.hpp"
#include "afe/npft.hpp"
#include "afe/resample.hpp"

namespace afe {
namespace fs = std::filesystem;

namespace {

template <typename T>
void require_finite(const BasicTensor<T>& t, const std::string& name) {
  if (!all_finite(t)) throw NumericError(name + " contains NaN or Inf");
}

template <typename T>
void sgd_step(BasicTensor<T>& p, const BasicTensor<T>& g, double lr) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * static_cast<double>(g[i]));
  }
}

bool finite_bundle(const LossBundle& b) {
  return std::isfinite(b.l_cos) && std::isfinite(b.l_mse) && std::isfinite(b.l_vq) &&
         std::isfinite(b.l_total);
}

std::string level_name(const char* stem, std::size_t k) {
  return std::string(stem) + std::to_string(k) + ".npft";
}

}  // namespace

template <typename T>
LossBundle loss_total(const BasicLogicalParams<T>& params, const std::string& category,
                      const LogicalInputs<T>& in, const LossWeights& lambda, bool theta_joint,
                      LogicalGrads<T>* grads, LogicalPass<T>* pass) {
  const std::size_t levels = params.decoder.num_levels();
  if (in.features.size() != levels || params.projectors.size() != levels ||
      params.codebooks.size() != levels) {
    throw InvalidArgument("loss_total: expected " + std::to_string(levels) +
                          " feature levels, projectors and codebooks");
  }
  if (!in.pooled.empty() && in.pooled.size() != levels) {
    throw InvalidArgument("loss_total: pooled cache has the wrong number of levels");
  }
  for (std::size_t k = 0; k < levels; ++k) {
    require_finite(in.features[k], "f_E^" + std::to_string(k + 1));
  }
  require_finite(in.bottleneck, "bottleneck");
  require_finite(in.image, "image");

  std::vector<BasicTensor<T>> pooled_local;
  std::vector<BasicTensor<T>> z(levels), codes(levels);
  std::vector<BasicQuantizedMap<T>> q(levels);
  std::vector<VqLossResult<T>> vq(levels);
  LossBundle out;
  for (std::size_t k = 0; k < levels; ++k) {
    if (in.pooled.empty()) pooled_local.push_back(context_pool(in.features[k]));
    const auto& pooled = in.pooled.empty() ? pooled_local[k] : in.pooled[k];
    z[k] = project_pooled(pooled, params.projectors[k]);
    q[k] = quantize(z[k], params.codebooks[k]);
    vq[k] = vq_loss(z[k], q[k], params.codebooks[k]);
    out.l_vq += vq[k].loss;
    codes[k] = q[k].e;
  }

  const std::vector<T> g = params.contexts.resolve(category);
  DecoderForward<T> fwd = decode(params.decoder, in.bottleneck, g, codes, in.image.height(),
                                 in.image.width());

  std::vector<BasicTensor<T>> grad_fd(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    out.l_cos += cosine_loss(in.features[k], fwd.levels[k].output,
                             grads ? &grad_fd[k] : nullptr);
  }
  BasicTensor<T> grad_img;
  out.l_mse = mse_loss(in.image, fwd.image, grads ? &grad_img : nullptr);
  out.l_total = lambda.cos * out.l_cos + lambda.mse * out.l_mse + lambda.vq * out.l_vq;

  if (grads) {
    for (auto& t : grad_fd) {
      for (auto& v : t.values()) v = static_cast<T>(lambda.cos * v);
    }
    for (auto& v : grad_img.values()) v = static_cast<T>(lambda.mse * v);
    DecoderGrads<T> dec = decode_backward(params.decoder, fwd, g, codes, grad_fd, grad_img);
    grads->decoder = std::move(dec.params);
    grads->contexts = params.contexts.zeros_like();
    params.contexts.backward(category, dec.grad_g, grads->contexts);
    grads->projectors.clear();
    grads->entries.clear();
    grads->grad_e.clear();
    grads->grad_z.clear();
    for (std::size_t k = 0; k < levels; ++k) {
      BasicTensor<T> commit = vq[k].grad_z;
      for (auto& v : commit.values()) v = static_cast<T>(lambda.vq * v);
      // Straight-through: the quantizer is the identity going backward.
      BasicTensor<T> gz = dec.grad_codes[k];
      for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += commit[i];
      const auto& pooled = in.pooled.empty() ? pooled_local[k] : in.pooled[k];
      grads->projectors.push_back(project_weight_grad(pooled, theta_joint ? gz : commit));
      BasicTensor<T> ge = vq[k].grad_entries;
      for (auto& v : ge.values()) v = static_cast<T>(lambda.vq * v);
      grads->entries.push_back(std::move(ge));
      grads->grad_e.push_back(std::move(dec.grad_codes[k]));
      grads->grad_z.push_back(std::move(gz));
    }
  }
  if (pass) {
    pass->z = std::move(z);
    pass->q = std::move(q);
    pass->g = g;
    pass->decoded = std::move(fwd);
  }
  return out;
}

template LossBundle loss_total(const BasicLogicalParams<float>&, const std::string&,
                               const LogicalInputs<float>&, const LossWeights&, bool,
                               LogicalGrads<float>*, LogicalPass<float>*);
template LossBundle loss_total(const BasicLogicalParams<double>&, const std::string&,
                               const LogicalInputs<double>&, const LossWeights&, bool,
                               LogicalGrads<double>*, LogicalPass<double>*);

LogicalModel LogicalModel::init(const LogicalConfig& config, const std::string& category,
                                ToyEncoder encoder, std::optional<std::vector<float>> embedding) {
  if (category.empty()) throw InvalidArgument("category name is empty");
  if (config.codebook_entries == 0) throw InvalidArgument("codebook needs at least one entry");
  if (config.context_dim == 0) throw InvalidArgument("context dimension must be >= 1");
  if (encoder.spec().level_channels.size() != kReconLevels + 1) {
    throw InvalidArgument("the logical branch needs a five-level encoder");
  }
  LogicalModel m;
  m.config = config;
  m.category = category;
  m.encoder = std::move(encoder);
  m.config.encoder = m.encoder.spec();
  const auto& ch = m.encoder.spec().level_channels;
  for (std::size_t k = 0; k < kReconLevels; ++k) {
    m.params.projectors.push_back(
        ContextProjector::random(ch[k], config.seed * 131 + k + 1));
    m.params.codebooks.emplace_back();
  }
  m.params.contexts = ContextTable(config.context_dim, config.seed);
  m.params.contexts.register_category(category);
  if (embedding) m.params.contexts.set_embedding(category, *embedding);
  m.embedding = std::move(embedding);
  DecoderShape shape{ch, config.context_dim, m.encoder.spec().input_channels};
  m.params.decoder = DecoderModel::random(shape, config.seed);
  return m;
}

LogicalInputs<float> prepare_inputs(const LogicalModel& model, const Image& image,
                                    const std::optional<FeaturePyramid>& external) {
  const std::size_t s = model.config.image_size;
  const Image resized =
      (image.height == s && image.width == s) ? image : resize_image(image, s, s);
  LogicalInputs<float> in;
  in.image = resized.to_planar();
  FeaturePyramid levels;
  if (external) {
    levels = *external;
  } else {
    Tensor centered = in.image;
    for (auto& v : centered.values()) {
      v = static_cast<float>(static_cast<double>(v) - model.config.input_offset);
    }
    levels = model.encoder.extract(centered);
  }
  if (levels.size() != kReconLevels + 1) {
    throw InvalidArgument("expected five feature levels, got " + std::to_string(levels.size()));
  }
  in.bottleneck = model.encoder.oce(levels.back());
  levels.pop_back();
  in.features = std::move(levels);
  for (const auto& f : in.features) in.pooled.push_back(context_pool(f));
  return in;
}

void train_logical(LogicalModel& model, const std::vector<LogicalInputs<float>>& inputs,
                   const std::function<void(std::size_t, const LossBundle&)>& on_epoch) {
  if (inputs.empty()) throw InvalidArgument("train_logical: no training images");
  const auto& cfg = model.config;
  if (!(cfg.lr >= 0.0) || !(cfg.codebook_lr >= 0.0)) {
    throw InvalidArgument("train_logical: learning rates must be >= 0");
  }
  auto& p = model.params;
  for (std::size_t k = 0; k < kReconLevels; ++k) {
    if (p.codebooks[k].size() == 0) {
      const Tensor z = project_pooled(inputs.front().pooled[k], p.projectors[k]);
      p.codebooks[k] = init_codebook(z, cfg.codebook_entries, cfg.seed + k);
    }
  }

  auto run_epoch = [&](bool update) {
    LossBundle mean;
    std::vector<DeadEntryTracker> trackers(kReconLevels, DeadEntryTracker(cfg.codebook_entries));
    for (const auto& in : inputs) {
      LogicalGrads<float> grads;
      LogicalPass<float> pass;
      const LossBundle b = loss_total(p, model.category, in, cfg.lambda, cfg.theta_joint,
                                      update ? &grads : nullptr, &pass);
      if (!finite_bundle(b)) return std::optional<LossBundle>{};
      mean.l_cos += b.l_cos;
      mean.l_mse += b.l_mse;
      mean.l_vq += b.l_vq;
      mean.l_total += b.l_total;
      if (!update) continue;
      for (std::size_t k = 0; k < kReconLevels; ++k) trackers[k].observe(pass.z[k], pass.q[k]);
      auto dp = p.decoder.parameters();
      auto dg = grads.decoder.parameters();
      for (std::size_t i = 0; i < dp.size(); ++i) sgd_step(*dp[i], *dg[i], cfg.lr);
      auto cp = p.contexts.parameters();
      auto cg = grads.contexts.parameters();
      for (std::size_t i = 0; i < cp.size(); ++i) sgd_step(*cp[i], *cg[i], cfg.lr);
      for (std::size_t k = 0; k < kReconLevels; ++k) {
        sgd_step(p.projectors[k].weight, grads.projectors[k], cfg.lr);
        sgd_step(p.codebooks[k].entries, grads.entries[k], cfg.codebook_lr);
      }
    }
    if (update && cfg.codebook_lr > 0.0) {
      for (std::size_t k = 0; k < kReconLevels; ++k) trackers[k].reinit(p.codebooks[k]);
    }
    const double n = static_cast<double>(inputs.size());
    mean.l_cos /= n;
    mean.l_mse /= n;
    mean.l_vq /= n;
    mean.l_total /= n;
    return std::optional<LossBundle>{mean};
  };

  model.loss_curve.clear();
  model.trained = false;
  auto initial = run_epoch(false);
  if (!initial) throw TrainingError("non-finite loss at initialization", model);
  model.loss_curve.push_back(*initial);
  if (on_epoch) on_epoch(0, *initial);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    LogicalModel last_good = model;
    auto mean = run_epoch(true);
    bool ok = mean.has_value();
    if (ok) {
      for (const auto* t : std::as_const(p.decoder).parameters()) ok = ok && all_finite(*t);
      for (const auto& cb : p.codebooks) ok = ok && all_finite(cb.entries);
      for (const auto& pr : p.projectors) ok = ok && all_finite(pr.weight);
    }
    if (!ok) {
      last_good.trained = true;
      throw TrainingError("training diverged in epoch " + std::to_string(epoch) +
                              "; lower the learning rate",
                          std::move(last_good));
    }
    model.loss_curve.push_back(*mean);
    if (on_epoch) on_epoch(epoch, *mean);
  }
  model.trained = true;
}

LogicalScore logical_score(const LogicalModel& model, const LogicalInputs<float>& in,
                           std::size_t out_h, std::size_t out_w, CodeSource codes) {
  if (!model.trained) throw InvalidState("logical model is not trained");
  const auto& p = model.params;
  const std::size_t levels = p.decoder.num_levels();
  if (in.features.size() != levels) {
    throw InvalidArgument("logical_score: expected " + std::to_string(levels) + " levels");
  }
  std::vector<Tensor> e(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    Tensor z = in.pooled.size() == levels ? project_pooled(in.pooled[k], p.projectors[k])
                                          : context_project(in.features[k], p.projectors[k]);
    e[k] = codes == CodeSource::kQuantized ? quantize(z, p.codebooks[k]).e : std::move(z);
  }
  const auto g = p.contexts.resolve(model.category);
  const auto fwd = decode(p.decoder, in.bottleneck, g, e, in.image.height(), in.image.width());

  LogicalScore out;
  std::vector<double> acc(out_h * out_w, 0.0);
  for (std::size_t k = 0; k < levels; ++k) {
    out.level_maps.push_back(cosine_error_map(in.features[k], fwd.levels[k].output));
    const Tensor up = bilinear_resample(out.level_maps.back(), out_h, out_w);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += up[i];
  }
  out.a_log = ScoreMap(out_h, out_w);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out.a_log.values()[i] = static_cast<float>(std::max(acc[i], 0.0));
  }
  return out;
}

// --- persistence -------------------------------------------------------------

void LogicalModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  const auto& c = config;
  KeyValues meta;
  meta.set("category", category);
  meta.set("image_size", c.image_size);
  meta.set("input_offset", c.input_offset);
  meta.set("encoder_seed", std::to_string(encoder.spec().seed));
  meta.set("level_channels", join_sizes(encoder.spec().level_channels));
  meta.set("image_channels", encoder.spec().input_channels);
  meta.set("codebook_entries", c.codebook_entries);
  meta.set("codebook_lr", c.codebook_lr);
  meta.set("context_dim", c.context_dim);
  meta.set("lambda_cos", c.lambda.cos);
  meta.set("lambda_mse", c.lambda.mse);
  meta.set("lambda_vq", c.lambda.vq);
  meta.set("epochs", c.epochs);
  meta.set("lr", c.lr);
  meta.set("theta_joint", c.theta_joint);
  meta.set("seed", std::to_string(c.seed));
  meta.set("trained", trained);
  meta.set("external_embedding", embedding.has_value());
  meta.write(dir / "model.meta");

  encoder.save(dir / "encoder");
  const auto& p = params;
  for (std::size_t k = 1; k <= p.codebooks.size(); ++k) {
    if (p.codebooks[k - 1].size() == 0) throw InvalidState("codebooks are not initialized");
    npft::write_tensor(dir / level_name("codebook_k", k), p.codebooks[k - 1].entries);
    npft::write_tensor(dir / level_name("theta_k", k), p.projectors[k - 1].weight);
    const auto& b = p.decoder.blocks[k - 1];
    const std::string pre = "decoder_k" + std::to_string(k) + "_";
    npft::write_tensor(dir / (pre + "w1.npft"), b.w1);
    npft::write_tensor(dir / (pre + "b1.npft"), b.b1);
    npft::write_tensor(dir / (pre + "w2.npft"), b.w2);
    npft::write_tensor(dir / (pre + "b2.npft"), b.b2);
  }
  npft::write_tensor(dir / "head_w.npft", p.decoder.head_w);
  npft::write_tensor(dir / "head_b.npft", p.decoder.head_b);
  npft::write_tensor(dir / "context.npft", p.contexts.vector_param(category));
  if (embedding) {
    npft::write_tensor(dir / "embedding.npft", Tensor({embedding->size()}, *embedding));
    npft::write_tensor(dir / "adapter_w.npft", p.contexts.adapter_weight());
    npft::write_tensor(dir / "adapter_b.npft", p.contexts.adapter_bias());
  }
  std::ofstream curve(dir / "loss_curve.txt", std::ios::binary | std::ios::trunc);
  curve << "# epoch l_cos l_mse l_vq l_total\n";
  for (std::size_t i = 0; i < loss_curve.size(); ++i) {
    const auto& b = loss_curve[i];
    curve << i << " " << format_double(b.l_cos) << " " << format_double(b.l_mse) << " "
          << format_double(b.l_vq) << " " << format_double(b.l_total) << "\n";
  }
  if (!curve) throw IoError("cannot write " + (dir / "loss_curve.txt").string());
}

LogicalModel LogicalModel::load(const fs::path& dir) {
  if (!fs::exists(dir / "model.meta")) {
    throw IoError("no logical model at " + dir.string() + "; run train-logical first");
  }
  const KeyValues meta = KeyValues::read(dir / "model.meta");
  LogicalConfig c;
  c.image_size = meta.get_size("image_size");
  c.input_offset = meta.get_double("input_offset");
  c.codebook_entries = meta.get_size("codebook_entries");
  c.codebook_lr = meta.get_double("codebook_lr");
  c.context_dim = meta.get_size("context_dim");
  c.lambda = {meta.get_double("lambda_cos"), meta.get_double("lambda_mse"),
              meta.get_double("lambda_vq")};
  c.epochs = meta.get_size("epochs");
  c.lr = meta.get_double("lr");
  c.theta_joint = meta.get_bool("theta_joint");
  c.seed = meta.get_u64("seed");

  ToyEncoder enc = ToyEncoder::load(dir / "encoder", meta.get_u64("encoder_seed"));
  if (enc.spec().level_channels != meta.get_sizes("level_channels")) {
    throw InvalidArgument("encoder weights in " + dir.string() + " do not match model.meta");
  }
  std::optional<std::vector<float>> emb;
  if (meta.get_bool("external_embedding")) {
    emb = npft::read_tensor(dir / "embedding.npft").storage();
  }
  LogicalModel m = init(c, meta.get("category"), std::move(enc), emb);
  auto& p = m.params;
  auto load_into = [&dir](BasicTensor<float>& dst, const std::string& name) {
    Tensor t = npft::read_tensor(dir / name);
    if (!dst.empty() && t.dims() != dst.dims()) {
      throw InvalidArgument(name + " has dims " + dims_to_string(t.dims()) + ", expected " +
                            dims_to_string(dst.dims()));
    }
    dst = std::move(t);
  };
  for (std::size_t k = 1; k <= kReconLevels; ++k) {
    load_into(p.codebooks[k - 1].entries, level_name("codebook_k", k));
    if (p.codebooks[k - 1].dim() != p.projectors[k - 1].out_channels()) {
      throw InvalidArgument(level_name("codebook_k", k) + " entry width does not match level");
    }
    load_into(p.projectors[k - 1].weight, level_name("theta_k", k));
    auto& b = p.decoder.blocks[k - 1];
    const std::string pre = "decoder_k" + std::to_string(k) + "_";
    load_into(b.w1, pre + "w1.npft");
    load_into(b.b1, pre + "b1.npft");
    load_into(b.w2, pre + "w2.npft");
    load_into(b.b2, pre + "b2.npft");
  }
  load_into(p.decoder.head_w, "head_w.npft");
  load_into(p.decoder.head_b, "head_b.npft");
  load_into(p.contexts.vector_param(m.category), "context.npft");
  if (emb) {
    Tensor w = npft::read_tensor(dir / "adapter_w.npft");
    Tensor b = npft::read_tensor(dir / "adapter_b.npft");
    if (w.rank() != 2 || w.dim(1) != emb->size()) {
      throw InvalidArgument("adapter weight does not match the stored embedding");
    }
    p.contexts.set_adapter(std::move(w), std::move(b));
  }
  std::ifstream curve(dir / "loss_curve.txt");
  std::string line;
  while (std::getline(curve, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::size_t epoch;
    LossBundle b;
    if (ss >> epoch >> b.l_cos >> b.l_mse >> b.l_vq >> b.l_total) m.loss_curve.push_back(b);
  }
  m.trained = meta.get_bool("trained");
  return m;
}

}  // namespace afe
