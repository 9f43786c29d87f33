#include "afe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "afe/rng.hpp"

namespace afe {
namespace fs = std::filesystem;

namespace {

constexpr const char* kLogicalDir = "logical_anomalies";
constexpr const char* kStructuralDir = "structural_anomalies";

std::vector<fs::path> list_rasters(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

fs::path require_dir(const fs::path& root, const fs::path& rel) {
  const fs::path dir = root / rel;
  if (!fs::is_directory(dir)) {
    throw IoError("dataset " + root.string() + " is missing required directory " +
                  rel.string());
  }
  return dir;
}

void load_normals(const fs::path& root, const fs::path& rel, std::vector<Sample>& out) {
  for (const auto& file : list_rasters(require_dir(root, rel))) {
    Sample s;
    s.relpath = (rel / file.filename()).generic_string();
    s.image = read_pnm(file);
    out.push_back(std::move(s));
  }
}

void load_anomalies(const fs::path& root, const char* dirname, AnomalyKind kind,
                    std::vector<Sample>& out) {
  const fs::path rel = fs::path("test") / dirname;
  if (!fs::is_directory(root / rel)) return;
  for (const auto& file : list_rasters(root / rel)) {
    Sample s;
    s.relpath = (rel / file.filename()).generic_string();
    s.image = read_pnm(file);
    s.label = 1;
    s.kind = kind;
    const fs::path mask_path =
        root / "ground_truth" / dirname / (file.stem().string() + ".pgm");
    if (!fs::is_regular_file(mask_path)) {
      throw IoError("missing ground truth mask " + mask_path.string());
    }
    Mask m = read_mask(mask_path);
    if (m.height != s.image.height || m.width != s.image.width) {
      throw IoError("mask " + mask_path.string() + " size does not match image " +
                    s.relpath);
    }
    if (m.count() == 0) throw IoError("empty ground truth mask " + mask_path.string());
    s.mask = std::move(m);
    out.push_back(std::move(s));
  }
}

// --- pinboard rendering ---------------------------------------------------

struct Disc {
  double cy;
  double cx;
};

constexpr int kSuper = 4;

void draw_disc(Image& img, const Disc& d, double radius, double level) {
  const auto y0 = static_cast<std::ptrdiff_t>(std::floor(d.cy - radius - 1));
  const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(d.cy + radius + 1));
  const auto x0 = static_cast<std::ptrdiff_t>(std::floor(d.cx - radius - 1));
  const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(d.cx + radius + 1));
  const double r2 = radius * radius;
  for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(y0, 0);
       y <= std::min<std::ptrdiff_t>(y1, static_cast<std::ptrdiff_t>(img.height) - 1); ++y) {
    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(x0, 0);
         x <= std::min<std::ptrdiff_t>(x1, static_cast<std::ptrdiff_t>(img.width) - 1);
         ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double py = static_cast<double>(y) + (sy + 0.5) / kSuper - d.cy;
          const double px = static_cast<double>(x) + (sx + 0.5) / kSuper - d.cx;
          if (py * py + px * px <= r2) ++inside;
        }
      }
      if (inside == 0) continue;
      const double cover = static_cast<double>(inside) / (kSuper * kSuper);
      for (std::size_t c = 0; c < img.channels; ++c) {
        float& p = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
        p = static_cast<float>((1.0 - cover) * p + cover * level);
      }
    }
  }
}

// Pixels whose centers lie within half_width of the segment.
std::vector<std::pair<std::size_t, std::size_t>> streak_pixels(const Image& img, Disc a,
                                                               Disc b, double half_width) {
  std::vector<std::pair<std::size_t, std::size_t>> px;
  const double vy = b.cy - a.cy, vx = b.cx - a.cx;
  const double len2 = vy * vy + vx * vx;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double py = static_cast<double>(y) + 0.5 - a.cy;
      const double px2 = static_cast<double>(x) + 0.5 - a.cx;
      const double t = std::clamp((py * vy + px2 * vx) / len2, 0.0, 1.0);
      const double dy = py - t * vy, dx = px2 - t * vx;
      if (dy * dy + dx * dx <= half_width * half_width) px.emplace_back(y, x);
    }
  }
  return px;
}

std::string index_name(std::size_t i) {
  std::ostringstream ss;
  ss << std::setw(3) << std::setfill('0') << i;
  return ss.str();
}

}  // namespace

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kNone:
      return "none";
    case AnomalyKind::kLogical:
      return "logical";
    case AnomalyKind::kStructural:
      return "structural";
  }
  return "none";
}

AnomalyKind anomaly_kind_from_string(std::string_view s) {
  if (s == "none" || s == "good") return AnomalyKind::kNone;
  if (s == "logical") return AnomalyKind::kLogical;
  if (s == "structural") return AnomalyKind::kStructural;
  throw InvalidArgument("unknown anomaly kind '" + std::string(s) + "'");
}

std::string Sample::stem_path() const {
  const fs::path p(relpath);
  return (p.parent_path() / p.stem()).generic_string();
}

DatasetSplit read_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " not found");
  DatasetSplit split;
  split.category = root.filename().string();
  if (split.category.empty()) split.category = root.parent_path().filename().string();
  load_normals(root, "train/good", split.train);
  load_normals(root, "validation/good", split.validation);
  load_normals(root, "test/good", split.test);
  require_dir(root, "test");
  load_anomalies(root, kLogicalDir, AnomalyKind::kLogical, split.test);
  load_anomalies(root, kStructuralDir, AnomalyKind::kStructural, split.test);

  if (split.train.empty()) throw IoError("dataset " + root.string() + " has no training images");
  const bool has_normal = std::any_of(split.test.begin(), split.test.end(),
                                      [](const Sample& s) { return s.label == 0; });
  const bool has_anomaly = std::any_of(split.test.begin(), split.test.end(),
                                       [](const Sample& s) { return s.label == 1; });
  if (!has_normal || !has_anomaly) {
    throw IoError("dataset " + root.string() +
                  " test split needs at least one normal and one anomalous image");
  }
  return split;
}

PinboardImage render_pinboard(const PinboardConfig& config, AnomalyKind kind,
                              std::uint64_t seed, std::uint64_t index) {
  if (config.grid < 2) throw InvalidArgument("pinboard grid must be >= 2");
  if (config.image_size < 64) throw InvalidArgument("pinboard image_size must be >= 64");
  if (config.image_size % config.grid != 0) {
    throw InvalidArgument("pinboard image_size must be a multiple of grid");
  }
  const double cell = static_cast<double>(config.image_size / config.grid);
  const double radius = config.disc_radius * cell;
  const double travel = cell / 2.0 - radius - 1.0;
  if (!(radius >= 1.0) || travel < 0.0) {
    throw InvalidArgument("pinboard disc_radius does not fit inside a cell");
  }
  // Two discs on a cell diagonal must not touch.
  if (2.0 * std::numbers::sqrt2 * travel < 2.0 * radius + 1.0) {
    throw InvalidArgument("pinboard disc_radius leaves no room for two discs in a cell");
  }
  const double jitter = config.jitter * travel;

  Rng rng = Rng::derive(seed, index);
  PinboardImage out;
  out.image = Image{config.image_size, config.image_size, 1,
                    std::vector<float>(config.image_size * config.image_size,
                                       static_cast<float>(config.background))};

  const std::size_t cells = config.grid * config.grid;
  std::size_t target_cell = cells;
  if (kind != AnomalyKind::kNone) target_cell = rng.below(cells);

  std::vector<Disc> discs;
  Disc streaked{};
  for (std::size_t c = 0; c < cells; ++c) {
    const double oy = static_cast<double>(c / config.grid) * cell;
    const double ox = static_cast<double>(c % config.grid) * cell;
    const Disc centered{oy + cell / 2.0 + rng.uniform(-jitter, jitter),
                        ox + cell / 2.0 + rng.uniform(-jitter, jitter)};
    if (c != target_cell || kind == AnomalyKind::kStructural) {
      discs.push_back(centered);
      if (c == target_cell) streaked = centered;
      continue;
    }
    // Logical anomaly: this cell holds zero or two discs.
    if (rng.below(2) == 1) {
      // Opposite corners of a randomly chosen diagonal.
      const double sign = rng.below(2) == 1 ? 1.0 : -1.0;
      const double reach = cell / 2.0 - radius - 1.0;
      discs.push_back({oy + cell / 2.0 - reach, ox + cell / 2.0 - sign * reach});
      discs.push_back({oy + cell / 2.0 + reach, ox + cell / 2.0 + sign * reach});
    }
  }
  for (const auto& d : discs) draw_disc(out.image, d, radius, config.foreground);
  out.disc_count = discs.size();

  Mask mask{config.image_size, config.image_size,
            std::vector<std::uint8_t>(config.image_size * config.image_size, 0)};
  if (kind == AnomalyKind::kLogical) {
    const std::size_t oy = (target_cell / config.grid) * (config.image_size / config.grid);
    const std::size_t ox = (target_cell % config.grid) * (config.image_size / config.grid);
    const std::size_t side = config.image_size / config.grid;
    for (std::size_t y = oy; y < oy + side; ++y) {
      for (std::size_t x = ox; x < ox + side; ++x) mask.at(y, x) = 1;
    }
  } else if (kind == AnomalyKind::kStructural) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double half_len = 1.3 * radius;
    const double sy = half_len * std::sin(angle), sx = half_len * std::cos(angle);
    const auto pixels = streak_pixels(out.image, {streaked.cy - sy, streaked.cx - sx},
                                      {streaked.cy + sy, streaked.cx + sx}, 0.9);
    for (const auto& [y, x] : pixels) {
      out.image.at(y, x) = static_cast<float>(config.streak_level);
      // Dilate by one pixel.
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(config.image_size) ||
              xx >= static_cast<std::ptrdiff_t>(config.image_size)) {
            continue;
          }
          mask.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) = 1;
        }
      }
    }
  }

  // Sensor noise, then snap to the 8-bit grid so the in-memory image equals
  // what a reader gets back from disk.
  for (auto& p : out.image.pixels) {
    const float noisy = static_cast<float>(p + config.noise_sigma * rng.normal());
    p = static_cast<float>(to_byte(noisy)) / 255.0f;
  }
  if (kind != AnomalyKind::kNone) out.mask = std::move(mask);
  return out;
}

fs::path generate_pinboard(const PinboardConfig& config, std::uint64_t seed,
                           const fs::path& out_root) {
  const fs::path final_dir = out_root / config.category;
  const fs::path tmp_dir = out_root / ("." + config.category + ".tmp");
  std::error_code ec;
  fs::create_directories(out_root, ec);
  fs::remove_all(tmp_dir, ec);
  try {
    for (const char* d : {"train/good", "validation/good", "test/good",
                          "test/logical_anomalies", "test/structural_anomalies",
                          "ground_truth/logical_anomalies",
                          "ground_truth/structural_anomalies"}) {
      fs::create_directories(tmp_dir / d);
    }
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create dataset tree: ") + e.what());
  }

  std::ostringstream manifest;
  manifest << "# pinboard seed=" << seed << " grid=" << config.grid
           << " image_size=" << config.image_size << " disc_radius=" << config.disc_radius
           << " jitter=" << config.jitter << " streak_level=" << config.streak_level
           << " noise_sigma=" << config.noise_sigma << "\n";

  std::uint64_t offset = 0;
  auto emit = [&](const std::string& dir, AnomalyKind kind, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, ++offset) {
      const PinboardImage img = render_pinboard(config, kind, seed, offset);
      const std::string name = index_name(i);
      const std::string rel = dir + "/" + name + ".pgm";
      write_pnm(tmp_dir / rel, img.image);
      manifest << rel << " " << to_string(kind) << " " << offset << "\n";
      if (img.mask) {
        const std::string sub = kind == AnomalyKind::kLogical ? kLogicalDir : kStructuralDir;
        const std::string mrel = "ground_truth/" + sub + "/" + name + ".pgm";
        write_mask(tmp_dir / mrel, *img.mask);
        manifest << mrel << " " << to_string(kind) << " " << offset << "\n";
      }
    }
  };
  emit("train/good", AnomalyKind::kNone, config.n_train);
  emit("validation/good", AnomalyKind::kNone, config.n_val);
  emit("test/good", AnomalyKind::kNone, config.n_test_normal);
  emit(std::string("test/") + kLogicalDir, AnomalyKind::kLogical, config.n_test_logical);
  emit(std::string("test/") + kStructuralDir, AnomalyKind::kStructural,
       config.n_test_structural);

  {
    std::ofstream f(tmp_dir / "manifest.txt", std::ios::trunc);
    if (!f) throw IoError("cannot write manifest in " + tmp_dir.string());
    f << manifest.str();
  }
  {
    std::ofstream f(tmp_dir / "stage.done", std::ios::trunc);
    f << "generate\n";
  }
  fs::remove_all(final_dir, ec);
  fs::rename(tmp_dir, final_dir, ec);
  if (ec) throw IoError("cannot move dataset into " + final_dir.string() + ": " + ec.message());
  return final_dir;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.relpath >> e.kind >> e.seed_offset)) {
      throw IoError("malformed manifest line: " + line);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace afe
