#include "afe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace afe {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument("auroc: " + std::to_string(scores.size()) + " scores but " +
                          std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("auroc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw InvalidArgument("auroc: NaN score");
    pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("auroc needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Count, over positives, the negatives strictly below plus half the ties.
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? p : n) += 1;
      ++j;
    }
    wins += static_cast<double>(p) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(n));
    neg_below += n;
    i = j;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double pixel_auroc(const std::vector<ScoreMap>& maps, const std::vector<Mask>& masks) {
  if (maps.size() != masks.size()) throw InvalidArgument("pixel_auroc: maps and masks differ in count");
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].height() != masks[i].height || maps[i].width() != masks[i].width) {
      throw InvalidArgument("pixel_auroc: map " + std::to_string(i) + " does not match its mask");
    }
    const auto v = maps[i].values();
    for (std::size_t p = 0; p < v.size(); ++p) {
      s.push_back(v[p]);
      l.push_back(masks[i].values[p] ? 1 : 0);
    }
  }
  return auroc(s, l);
}

RegionLabels label_regions(const Mask& mask) {
  RegionLabels r{mask.height, mask.width, std::vector<std::uint32_t>(mask.values.size(), 0), 0, {}};
  const auto h = static_cast<std::ptrdiff_t>(mask.height);
  const auto w = static_cast<std::ptrdiff_t>(mask.width);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.values.size(); ++start) {
    if (!mask.values[start] || r.labels[start]) continue;
    const auto id = static_cast<std::uint32_t>(++r.count);
    std::size_t area = 0;
    stack.push_back(start);
    r.labels[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++area;
      const auto y = static_cast<std::ptrdiff_t>(p) / w, x = static_cast<std::ptrdiff_t>(p) % w;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const auto yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          const auto q = static_cast<std::size_t>(yy * w + xx);
          if (mask.values[q] && !r.labels[q]) {
            r.labels[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    r.areas.push_back(area);
  }
  return r;
}

SProCurve spro_curve(const std::vector<ScoreMap>& maps, const std::vector<Mask>& masks,
                     const SaturationTable& saturation) {
  if (maps.size() != masks.size()) throw InvalidArgument("spro_curve: maps and masks differ in count");
  struct Pixel {
    float score;
    std::uint32_t region;  // global id + 1, 0 = normal
  };
  std::vector<Pixel> pixels;
  std::vector<double> sat;  // per global region
  std::size_t normal = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].height() != masks[i].height || maps[i].width() != masks[i].width) {
      throw InvalidArgument("spro_curve: map " + std::to_string(i) + " does not match its mask");
    }
    const RegionLabels rl = label_regions(masks[i]);
    const auto base = static_cast<std::uint32_t>(sat.size());
    for (std::size_t k = 0; k < rl.count; ++k) {
      double s = static_cast<double>(rl.areas[k]);
      if (auto it = saturation.find({i, static_cast<std::uint32_t>(k + 1)}); it != saturation.end()) {
        if (!(it->second > 0.0)) {
          throw InvalidArgument("saturation for image " + std::to_string(i) + " region " +
                                std::to_string(k + 1) + " must be > 0");
        }
        s = std::min(it->second, s);
      }
      sat.push_back(s);
    }
    const auto v = maps[i].values();
    for (std::size_t p = 0; p < v.size(); ++p) {
      const std::uint32_t id = rl.labels[p] ? base + rl.labels[p] : 0;
      if (!id) ++normal;
      pixels.push_back({v[p], id});
    }
  }
  if (sat.empty()) throw InvalidArgument("spro_curve: ground truth has no anomalous regions");
  if (normal == 0) throw InvalidArgument("spro_curve: ground truth has no normal pixels");

  std::sort(pixels.begin(), pixels.end(),
            [](const Pixel& a, const Pixel& b) { return a.score > b.score; });
  std::vector<std::size_t> overlap(sat.size(), 0);
  double spro_sum = 0.0;
  std::size_t fp = 0;
  SProCurve curve;
  curve.points.push_back({0.0, 0.0});
  const double regions = static_cast<double>(sat.size());
  for (std::size_t i = 0; i < pixels.size();) {
    std::size_t j = i;
    while (j < pixels.size() && pixels[j].score == pixels[i].score) {
      if (const auto id = pixels[j].region; id == 0) {
        ++fp;
      } else {
        const std::size_t r = id - 1;
        const double before = std::min(static_cast<double>(overlap[r]) / sat[r], 1.0);
        ++overlap[r];
        spro_sum += std::min(static_cast<double>(overlap[r]) / sat[r], 1.0) - before;
      }
      ++j;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(normal),
                            std::clamp(spro_sum / regions, 0.0, 1.0)});
    i = j;
  }
  return curve;
}

double spro_auc(const SProCurve& curve, double limit) {
  if (!(limit > 0.0 && limit <= 1.0)) throw InvalidArgument("spro_auc: limit must be in (0, 1]");
  if (curve.points.empty()) throw InvalidArgument("spro_auc: empty curve");
  double area = 0.0;
  const auto& pts = curve.points;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (a.fpr >= limit) break;
    if (b.fpr <= limit) {
      area += (b.fpr - a.fpr) * (a.spro + b.spro) / 2.0;
    } else {
      const double t = (limit - a.fpr) / (b.fpr - a.fpr);
      const double at_limit = a.spro + t * (b.spro - a.spro);
      area += (limit - a.fpr) * (a.spro + at_limit) / 2.0;
    }
  }
  return area / limit;
}

SaturationTable read_saturation_file(const std::filesystem::path& path,
                                     const std::vector<std::string>& image_names) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open saturation file " + path.string());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < image_names.size(); ++i) index.emplace(image_names[i], i);
  SaturationTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string image;
    std::uint32_t region = 0;
    double pixels = 0.0;
    if (!(ss >> image >> region >> pixels)) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) +
                            ": expected <image> <region> <saturation_pixels>");
    }
    if (!(pixels > 0.0)) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) +
                            ": saturation must be > 0");
    }
    auto it = index.find(image);
    if (it == index.end()) continue;
    table[{it->second, region}] = pixels;
  }
  return table;
}

std::string format_report(const MetricsReport& report) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string out = "image_auroc: " + fmt(report.image_auroc) + "\n";
  out += "pixel_auroc: " + fmt(report.pixel_auroc) + "\n";
  for (const auto& [limit, value] : report.spro) {
    char key[32];
    std::snprintf(key, sizeof key, "spro@%g", limit);
    std::string k = key;
    if (k.find('.') == std::string::npos) k += ".0";
    out += k + ": " + fmt(value) + "\n";
  }
  return out;
}

}  // namespace afe
