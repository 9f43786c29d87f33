#include "afe/memory_bank.hpp"

#include <cmath>
#include <limits>

#include "afe/kv.hpp"
#include "afe/npft.hpp"
#include "afe/resample.hpp"
#include "afe/rng.hpp"

namespace afe {
namespace fs = std::filesystem;

namespace {

// Largest row count whose ids survive the f32 round trip exactly.
constexpr std::size_t kMaxExactId = std::size_t{1} << 24;

double squared_l2(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::kL1 ? "l1" : "l2"; }

Metric metric_from_string(std::string_view s) {
  if (s == "l1" || s == "L1") return Metric::kL1;
  if (s == "l2" || s == "L2") return Metric::kL2;
  throw InvalidArgument("unknown metric '" + std::string(s) + "' (expected l1 or l2)");
}

Tensor aggregate_features(const FeaturePyramid& pyramid, const std::vector<std::size_t>& levels) {
  if (levels.empty()) throw InvalidArgument("aggregate_features: no levels requested");
  for (auto k : levels) {
    if (k == 0 || k > pyramid.size()) {
      throw InvalidArgument("aggregate_features: level " + std::to_string(k) +
                            " is missing (pyramid has " + std::to_string(pyramid.size()) +
                            " levels)");
    }
  }
  const Tensor& target = pyramid[levels.back() - 1];
  const std::size_t th = target.height(), tw = target.width();
  std::size_t channels = 0;
  std::vector<Tensor> parts;
  for (auto k : levels) {
    Tensor smoothed = dilated_box_average(pyramid[k - 1], 1);
    if (smoothed.height() != th || smoothed.width() != tw) {
      smoothed = bilinear_resample(smoothed, th, tw);
    }
    channels += smoothed.channels();
    parts.push_back(std::move(smoothed));
  }
  Tensor out({channels, th, tw});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.data() + offset);
    offset += p.size();
  }
  return out;
}

std::vector<std::size_t> greedy_coreset(const Tensor& vectors, std::size_t first,
                                        std::size_t count) {
  if (vectors.empty() || vectors.rank() != 2) {
    throw InvalidState("coreset selection needs a non-empty N x C bank");
  }
  const std::size_t n = vectors.dim(0), c = vectors.dim(1);
  if (first >= n) throw InvalidArgument("coreset start id out of range");
  count = std::min(count, n);
  std::vector<std::size_t> ids;
  ids.reserve(count);
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t next = first;
  while (ids.size() < count) {
    ids.push_back(next);
    taken[next] = 1;
    if (ids.size() == count) break;
    const float* s = vectors.data() + next * c;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_l2(vectors.data() + i * c, s, c);
      if (d < mind[i]) mind[i] = d;
      if (!taken[i] && mind[i] > best_d) {
        best_d = mind[i];
        best = i;
      }
    }
    next = best;
  }
  return ids;
}

std::vector<std::size_t> coreset_subsample(const Tensor& vectors, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("coreset fraction must be in (0, 1]");
  }
  if (vectors.empty() || vectors.rank() != 2) {
    throw InvalidState("coreset selection needs a non-empty N x C bank");
  }
  const std::size_t n = vectors.dim(0);
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  Rng rng = Rng::derive(seed, 0xC05E7);
  return greedy_coreset(vectors, static_cast<std::size_t>(rng.below(n)), count);
}

MemoryBank MemoryBank::from_maps(const std::vector<Tensor>& aggregated) {
  if (aggregated.empty()) throw InvalidArgument("memory bank needs at least one training map");
  const std::size_t c = aggregated.front().channels();
  std::size_t rows = 0;
  for (const auto& m : aggregated) {
    if (m.rank() != 3 || m.channels() != c) {
      throw InvalidArgument("memory bank maps must share channel count " + std::to_string(c));
    }
    rows += m.height() * m.width();
  }
  MemoryBank bank;
  bank.vectors_ = Tensor({rows, c});
  std::size_t r = 0;
  for (const auto& m : aggregated) {
    const std::size_t plane = m.height() * m.width();
    for (std::size_t p = 0; p < plane; ++p, ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) bank.vectors_.at(r, ch) = m[ch * plane + p];
    }
  }
  return bank;
}

MemoryBank MemoryBank::from_rows(Tensor vectors) {
  if (vectors.rank() != 2) throw InvalidArgument("bank vectors must be N x C");
  MemoryBank bank;
  bank.vectors_ = std::move(vectors);
  return bank;
}

void MemoryBank::select_coreset(double fraction, std::uint64_t seed) {
  set_coreset(coreset_subsample(vectors_, fraction, seed));
}

void MemoryBank::set_coreset(std::vector<std::size_t> ids) {
  if (ids.empty()) throw InvalidArgument("coreset must not be empty");
  std::vector<char> seen(rows(), 0);
  for (auto id : ids) {
    if (id >= rows()) throw InvalidArgument("coreset id " + std::to_string(id) + " out of range");
    if (seen[id]) throw InvalidArgument("coreset id " + std::to_string(id) + " repeated");
    seen[id] = 1;
  }
  const std::size_t c = dim();
  coreset_rows_ = Tensor({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(vectors_.data() + ids[i] * c, c, coreset_rows_.data() + i * c);
  }
  coreset_ = std::move(ids);
}

const Tensor& MemoryBank::coreset_vectors() const {
  if (!built()) throw InvalidState("memory bank has no coreset; build the bank first");
  return coreset_rows_;
}

Tensor MemoryBank::nearest_distance(const Tensor& query, Metric metric) const {
  const Tensor& core = coreset_vectors();
  const std::size_t c = dim();
  if (query.rank() != 3 || query.channels() != c) {
    throw InvalidArgument("query " + dims_to_string(query.dims()) +
                          " does not match bank width " + std::to_string(c));
  }
  const std::size_t plane = query.height() * query.width(), m = core.dim(0);
  Tensor out({1, query.height(), query.width()});
  std::vector<float> q(c);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) q[ch] = query[ch * plane + p];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const float* row = core.data() + r * c;
      double acc = 0.0;
      // Partial sums only grow, so a row can be abandoned once it is worse.
      if (metric == Metric::kL1) {
        for (std::size_t ch = 0; ch < c && acc < best; ++ch) {
          acc += std::abs(static_cast<double>(q[ch]) - static_cast<double>(row[ch]));
        }
      } else {
        for (std::size_t ch = 0; ch < c && acc < best; ++ch) {
          const double d = static_cast<double>(q[ch]) - static_cast<double>(row[ch]);
          acc += d * d;
        }
      }
      if (acc < best) best = acc;
    }
    out[p] = static_cast<float>(metric == Metric::kL2 ? std::sqrt(best) : best);
  }
  return out;
}

FeaturePyramid structural_pyramid(const StructuralModel& model, const Image& image) {
  const std::size_t s = model.config.image_size;
  const Image resized =
      (image.height == s && image.width == s) ? image : resize_image(image, s, s);
  Tensor x = resized.to_planar();
  for (auto& v : x.values()) {
    v = static_cast<float>(static_cast<double>(v) - model.config.input_offset);
  }
  std::size_t deepest = 0;
  for (auto k : model.config.levels) deepest = std::max(deepest, k);
  return model.encoder.extract(x, deepest);
}

StructuralModel build_bank(const BankConfig& config, ToyEncoder encoder,
                           const std::vector<FeaturePyramid>& train_pyramids) {
  if (train_pyramids.empty()) throw InvalidArgument("build_bank: empty training set");
  StructuralModel model{config, std::move(encoder), {}};
  model.config.encoder = model.encoder.spec();
  std::vector<Tensor> maps;
  maps.reserve(train_pyramids.size());
  for (const auto& p : train_pyramids) maps.push_back(aggregate_features(p, config.levels));
  model.bank = MemoryBank::from_maps(maps);
  if (model.bank.rows() >= kMaxExactId) {
    throw InvalidArgument("memory bank has too many rows for f32 coreset ids");
  }
  model.bank.select_coreset(config.fraction, config.seed);
  return model;
}

ScoreMap structural_score(const StructuralModel& model, const FeaturePyramid& pyramid,
                          std::size_t out_h, std::size_t out_w) {
  if (!model.bank.built()) throw InvalidState("memory bank is not built; run build-bank first");
  const Tensor agg = aggregate_features(pyramid, model.config.levels);
  const Tensor ms = model.bank.nearest_distance(agg, model.config.metric);
  ScoreMap out = ScoreMap::from_tensor(bilinear_resample(ms, out_h, out_w));
  for (auto& v : out.values()) v = std::max(v, 0.0f);
  return out;
}

void StructuralModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  if (!bank.built()) throw InvalidState("memory bank is not built");
  npft::write_tensor(dir / "vectors.npft", bank.vectors());
  Tensor ids({bank.coreset().size()});
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<float>(bank.coreset()[i]);
  npft::write_tensor(dir / "coreset.npft", ids);
  KeyValues meta;
  meta.set("fraction", config.fraction);
  meta.set("seed", std::to_string(config.seed));
  meta.set("metric", std::string(to_string(config.metric)));
  meta.set("levels", join_sizes(config.levels));
  meta.set("image_size", config.image_size);
  meta.set("input_offset", config.input_offset);
  meta.set("encoder_seed", std::to_string(encoder.spec().seed));
  meta.set("rows", bank.rows());
  meta.write(dir / "meta");
  encoder.save(dir / "encoder");
}

StructuralModel StructuralModel::load(const fs::path& dir) {
  if (!fs::exists(dir / "meta")) {
    throw IoError("no memory bank at " + dir.string() + "; run build-bank first");
  }
  const KeyValues meta = KeyValues::read(dir / "meta");
  BankConfig c;
  c.fraction = meta.get_double("fraction");
  c.seed = meta.get_u64("seed");
  c.metric = metric_from_string(meta.get("metric"));
  c.levels = meta.get_sizes("levels");
  c.image_size = meta.get_size("image_size");
  c.input_offset = meta.get_double("input_offset");
  ToyEncoder enc = ToyEncoder::load(dir / "encoder", meta.get_u64("encoder_seed"));
  c.encoder = enc.spec();
  StructuralModel m{c, std::move(enc), {}};
  Tensor vectors = npft::read_tensor(dir / "vectors.npft");
  if (vectors.rank() != 2) throw InvalidArgument("bank vectors must be N x C");
  const Tensor ids_t = npft::read_tensor(dir / "coreset.npft");
  std::vector<std::size_t> ids;
  for (float v : ids_t.values()) {
    if (!(v >= 0.0f) || v != std::floor(v)) throw InvalidArgument("coreset ids must be integers");
    ids.push_back(static_cast<std::size_t>(v));
  }
  m.bank = MemoryBank::from_rows(std::move(vectors));
  m.bank.set_coreset(std::move(ids));
  return m;
}

}  // namespace afe
