#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Each one recomputes from scratch what the library
// computes incrementally.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "afe/codebook.hpp"
#include "afe/logical.hpp"
#include "afe/memory_bank.hpp"
#include "afe/metrics.hpp"
#include "afe/rng.hpp"
#include "test_util.hpp"

namespace afe::oracle {

inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

struct SproInstance {
  std::vector<ScoreMap> maps;
  std::vector<Mask> masks;
};

// Few score levels so thresholds tie; masks hold a couple of blobs each.
inline SproInstance random_instance(std::uint64_t seed, std::size_t images, std::size_t side) {
  Rng rng(seed);
  SproInstance inst;
  for (std::size_t i = 0; i < images; ++i) {
    ScoreMap m(side, side);
    for (auto& v : m.values()) v = static_cast<float>(rng.below(12)) / 4.0f;
    Mask mask{side, side, std::vector<std::uint8_t>(side * side, 0)};
    const std::size_t blobs = rng.below(3);
    for (std::size_t b = 0; b < blobs; ++b) {
      const std::size_t y0 = rng.below(side - 2), x0 = rng.below(side - 2);
      const std::size_t h = 1 + rng.below(3), w = 1 + rng.below(3);
      for (std::size_t y = y0; y < std::min(side, y0 + h); ++y) {
        for (std::size_t x = x0; x < std::min(side, x0 + w); ++x) {
          mask.at(y, x) = 1;
          m.at(y, x) += 0.5f * static_cast<float>(rng.below(3));
        }
      }
    }
    inst.maps.push_back(std::move(m));
    inst.masks.push_back(std::move(mask));
  }
  // Guarantee at least one region and one normal pixel overall.
  inst.masks[0].at(0, 0) = 1;
  inst.masks[0].at(side - 1, side - 1) = 0;
  return inst;
}

// Brute-force flood fill with an explicit neighbor list.
inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> oracle_regions(const Mask& m) {
  std::vector<int> seen(m.values.size(), 0);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> regions;
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m.at(y, x) || seen[y * m.width + x]) continue;
      std::vector<std::pair<std::size_t, std::size_t>> region{{y, x}};
      seen[y * m.width + x] = 1;
      for (std::size_t k = 0; k < region.size(); ++k) {
        const auto [cy, cx] = region[k];
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const long ny = static_cast<long>(cy) + dy, nx = static_cast<long>(cx) + dx;
            if (ny < 0 || nx < 0 || ny >= static_cast<long>(m.height) ||
                nx >= static_cast<long>(m.width)) {
              continue;
            }
            const std::size_t p = static_cast<std::size_t>(ny) * m.width + static_cast<std::size_t>(nx);
            if (m.values[p] && !seen[p]) {
              seen[p] = 1;
              region.emplace_back(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx));
            }
          }
        }
      }
      regions.push_back(std::move(region));
    }
  }
  return regions;
}

// Full threshold sweep computed independently at each threshold.
inline std::vector<SProPoint> oracle_curve(const SproInstance& inst, double saturation_scale) {
  std::set<float, std::greater<>> thresholds;
  for (const auto& m : inst.maps) thresholds.insert(m.values().begin(), m.values().end());
  std::vector<SProPoint> pts{{0.0, 0.0}};
  for (float t : thresholds) {
    double fp = 0.0, normal = 0.0, spro = 0.0, regions = 0.0;
    for (std::size_t i = 0; i < inst.maps.size(); ++i) {
      const auto& m = inst.maps[i];
      const auto& mask = inst.masks[i];
      for (std::size_t p = 0; p < mask.values.size(); ++p) {
        if (mask.values[p]) continue;
        normal += 1.0;
        if (m.values()[p] >= t) fp += 1.0;
      }
      for (const auto& region : oracle_regions(mask)) {
        double hit = 0.0;
        for (const auto& [y, x] : region) hit += m.at(y, x) >= t ? 1.0 : 0.0;
        const double sat = std::max(1.0, std::floor(saturation_scale * static_cast<double>(region.size())));
        spro += std::min(hit / sat, 1.0);
        regions += 1.0;
      }
    }
    pts.push_back({fp / normal, spro / regions});
  }
  return pts;
}

inline std::vector<std::uint32_t> scan_nearest(const Tensor& z, const Tensor& entries) {
  const std::size_t plane = z.height() * z.width();
  std::vector<std::uint32_t> idx(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    double best = 0.0;
    for (std::size_t j = 0; j < entries.dim(0); ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < z.channels(); ++c) {
        const double diff = static_cast<double>(z[c * plane + p]) - entries.at(j, c);
        d += diff * diff;
      }
      if (j == 0 || d < best) {
        best = d;
        idx[p] = static_cast<std::uint32_t>(j);
      }
    }
  }
  return idx;
}

// Step-by-step farthest-point selection recomputing every distance from scratch.
inline std::vector<std::size_t> brute_greedy(const Tensor& v, std::size_t first, std::size_t count) {
  const std::size_t n = v.dim(0), c = v.dim(1);
  std::vector<std::size_t> sel{first};
  while (sel.size() < count) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (auto s : sel) {
        double d = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double x = static_cast<double>(v.at(i, ch)) - v.at(s, ch);
          d += x * x;
        }
        mind = std::min(mind, d);
      }
      if (mind > best_d) {
        best_d = mind;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

// Exhaustive minimum distance per location.
inline Tensor scan_min(const Tensor& query, const Tensor& rows, Metric metric) {
  const std::size_t plane = query.height() * query.width(), c = query.channels();
  Tensor out({1, query.height(), query.width()});
  for (std::size_t p = 0; p < plane; ++p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows.dim(0); ++r) {
      double d = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double x = static_cast<double>(query[ch * plane + p]) - rows.at(r, ch);
        d += metric == Metric::kL1 ? std::abs(x) : x * x;
      }
      best = std::min(best, d);
    }
    out[p] = static_cast<float>(metric == Metric::kL2 ? std::sqrt(best) : best);
  }
  return out;
}

using DTensor = BasicTensor<double>;

// Small logical-branch problem for finite differences.
inline const std::vector<std::size_t> kLogicalChannels{4, 4, 8, 8, 8};

struct LogicalProblem {
  BasicLogicalParams<double> params;
  LogicalInputs<double> in;
};

// Level-1 grid 8×8, image 16×16, four entries per codebook.
inline LogicalProblem make_logical_problem(std::uint64_t seed) {
  LogicalProblem p;
  for (std::size_t k = 0; k < 4; ++k) {
    p.params.projectors.push_back(BasicContextProjector<double>::random(kLogicalChannels[k], seed + k));
    p.params.codebooks.push_back(
        {test::random_tensor<double>({4, kLogicalChannels[k] / 4}, seed + 20 + k, 0.5)});
    DTensor f = test::random_tensor<double>({kLogicalChannels[k], 8u >> k, 8u >> k}, seed + 30 + k);
    for (auto& v : f.values()) v = std::max(v, 0.0) + 0.05;  // rectified-looking
    p.in.features.push_back(std::move(f));
  }
  p.params.contexts = BasicContextTable<double>(3, seed);
  p.params.contexts.register_category("pinboard");
  p.params.decoder = BasicDecoderModel<double>::random({kLogicalChannels, 3, 1}, seed);
  p.in.bottleneck = test::random_tensor<double>({8, 1, 1}, seed + 40);
  p.in.image = test::random_tensor<double>({1, 16, 16}, seed + 41, 0.2);
  for (auto& v : p.in.image.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
  return p;
}

// The training objective with assignments frozen: the decoder reads
// z + (e − z) held constant, so d(codes)/dz is the identity, and each vq term
// sees the other side as a constant.
inline double frozen_objective(const LogicalProblem& p, const std::vector<std::vector<std::uint32_t>>& idx,
                 const std::vector<DTensor>& frozen_z, const std::vector<DTensor>& frozen_e,
                 const LossWeights& lambda) {
  std::vector<DTensor> codes;
  double l_vq = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const DTensor z = context_project(p.in.features[k], p.params.projectors[k]);
    DTensor code = z;
    const std::size_t plane = z.height() * z.width();
    for (std::size_t i = 0; i < z.size(); ++i) code[i] += frozen_e[k][i] - frozen_z[k][i];
    double commit = 0.0, book = 0.0;
    for (std::size_t c = 0; c < z.channels(); ++c) {
      for (std::size_t s = 0; s < plane; ++s) {
        const double e = p.params.codebooks[k].entries.at(idx[k][s], c);
        const double zi = z[c * plane + s];
        book += (frozen_z[k][c * plane + s] - e) * (frozen_z[k][c * plane + s] - e);
        commit += (zi - frozen_e[k][c * plane + s]) * (zi - frozen_e[k][c * plane + s]);
      }
    }
    l_vq += (book + commit) / static_cast<double>(plane);
    codes.push_back(std::move(code));
  }
  const auto g = p.params.contexts.resolve("pinboard");
  const auto fwd = decode(p.params.decoder, p.in.bottleneck, g, codes, 16, 16);
  double l_cos = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    l_cos += cosine_loss(p.in.features[k], fwd.levels[k].output, static_cast<DTensor*>(nullptr));
  }
  const double l_mse = mse_loss(p.in.image, fwd.image, static_cast<DTensor*>(nullptr));
  return lambda.cos * l_cos + lambda.mse * l_mse + lambda.vq * l_vq;
}

}  // namespace afe::oracle
