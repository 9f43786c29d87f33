#include "afe/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "afe/npft.hpp"
#include "afe/resample.hpp"

namespace afe {

namespace fs = std::filesystem;

namespace {

// Static contiguous partition of [0, n) over `threads` workers. The first
// failing index (lowest) wins, so errors do not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(run, n * t / threads, n * (t + 1) / threads);
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Output directory built under a sibling temp name and renamed into place
// together with its stage marker.
class StagedDir {
 public:
  explicit StagedDir(fs::path final_dir)
      : final_(std::move(final_dir)),
        tmp_(final_.parent_path() / ("." + final_.filename().string() + ".tmp")) {
    std::error_code ec;
    fs::remove_all(tmp_, ec);
    fs::create_directories(tmp_, ec);
    if (ec) throw IoError("cannot create " + tmp_.string() + ": " + ec.message());
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& path() const noexcept { return tmp_; }

  void commit(const std::string& stage) {
    {
      std::ofstream f(tmp_ / kStageMarker, std::ios::trunc);
      f << stage << "\n";
      if (!f) throw IoError("cannot write stage marker in " + tmp_.string());
    }
    std::error_code ec;
    fs::remove_all(final_, ec);
    fs::rename(tmp_, final_, ec);
    if (ec) throw IoError("cannot move " + tmp_.string() + " to " + final_.string() + ": " + ec.message());
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

void require_stage(const fs::path& dir, const std::string& command) {
  if (!fs::exists(dir / kStageMarker)) throw MissingStage(dir, command);
}

DatasetSplit load_dataset(const RunConfig& c) {
  const fs::path root = c.category_root();
  if (!fs::is_directory(root)) throw MissingStage(root, "generate");
  return read_dataset(root);
}

std::optional<FeatureStore> feature_store(const RunConfig& c) {
  if (c.features.empty()) return std::nullopt;
  return FeatureStore(c.features);
}

std::size_t deepest_level(const std::vector<std::size_t>& levels) {
  return *std::max_element(levels.begin(), levels.end());
}

struct Models {
  LogicalModel logical;
  StructuralModel structural;
};

Models load_models(const RunConfig& c) {
  const RunPaths p = RunPaths::of(c);
  require_stage(p.logical, "train-logical");
  require_stage(p.structural, "build-bank");
  return {LogicalModel::load(p.logical), StructuralModel::load(p.structural)};
}

ImageMaps branch_maps(const Models& m, const std::optional<FeatureStore>& store,
                      const Sample& s) {
  const std::size_t h = s.image.height, w = s.image.width;
  ImageMaps out;
  if (store) {
    const FeaturePyramid pyr = store->load(s.stem_path(), kReconLevels + 1);
    out.a_log = logical_score(m.logical, prepare_inputs(m.logical, s.image, pyr), h, w).a_log;
    const FeaturePyramid head(pyr.begin(),
                              pyr.begin() + static_cast<std::ptrdiff_t>(
                                                deepest_level(m.structural.config.levels)));
    out.a_str = structural_score(m.structural, head, h, w);
  } else {
    out.a_log = logical_score(m.logical, prepare_inputs(m.logical, s.image), h, w).a_log;
    out.a_str = structural_score(m.structural, structural_pyramid(m.structural, s.image), h, w);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

std::string score_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

RunPaths RunPaths::of(const RunConfig& c) {
  const fs::path model = c.resolved_model_dir();
  return {model / "logical", model / "bank", model / "calibration", c.out / "maps",
          c.out / "report"};
}

void write_effective_config(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw IoError("cannot create " + config.out.string() + ": " + ec.message());
  config.to_kv().write(config.out / "config.effective");
}

void cmd_generate(const RunConfig& c) {
  PinboardConfig p = c.pinboard;
  p.category = c.category;
  const fs::path root = generate_pinboard(p, c.seed, c.data);
  spdlog::info("generated {} (seed {})", root.string(), c.seed);
}

void cmd_train_logical(const RunConfig& c) {
  const DatasetSplit ds = load_dataset(c);
  const auto store = feature_store(c);
  std::optional<std::vector<float>> embedding;
  if (!c.embedding.empty()) embedding = read_embedding(c.embedding);

  std::vector<FeaturePyramid> external;
  EncoderSpec spec = c.logical.encoder;
  if (store) {
    for (const auto& s : ds.train) external.push_back(store->load(s.stem_path(), kReconLevels + 1));
    spec = external_encoder_spec(external.front(), c.logical.encoder.seed);
  }
  LogicalModel model = LogicalModel::init(c.logical, c.category, ToyEncoder(spec), embedding);

  std::vector<LogicalInputs<float>> inputs(ds.train.size());
  parallel_for(ds.train.size(), c.threads, [&](std::size_t i) {
    inputs[i] = store ? prepare_inputs(model, ds.train[i].image, external[i])
                      : prepare_inputs(model, ds.train[i].image);
  });
  spdlog::info("training logical branch on {} images for {} epochs", inputs.size(),
               c.logical.epochs);
  const RunPaths paths = RunPaths::of(c);
  try {
    train_logical(model, inputs, [](std::size_t epoch, const LossBundle& b) {
      spdlog::debug("epoch {} l_total {:.6f} (cos {:.6f} mse {:.6f} vq {:.6f})", epoch, b.l_total,
                    b.l_cos, b.l_mse, b.l_vq);
    });
  } catch (const TrainingError& e) {
    StagedDir dir(paths.logical.parent_path() / "logical.last_good");
    e.last_good().save(dir.path());
    dir.commit("train-logical (last good)");
    spdlog::error("{}; last good model kept in {}", e.what(),
                  (paths.logical.parent_path() / "logical.last_good").string());
    throw;
  }
  const auto& last = model.loss_curve.back();
  spdlog::info("logical branch trained: l_total {:.6f} -> {:.6f}", model.loss_curve.front().l_total,
               last.l_total);
  StagedDir dir(paths.logical);
  model.save(dir.path());
  dir.commit("train-logical");
}

void cmd_build_bank(const RunConfig& c) {
  const DatasetSplit ds = load_dataset(c);
  const auto store = feature_store(c);
  const std::size_t deepest = deepest_level(c.bank.levels);
  std::vector<FeaturePyramid> pyramids(ds.train.size());
  EncoderSpec spec = c.bank.encoder;
  if (store) {
    parallel_for(ds.train.size(), c.threads, [&](std::size_t i) {
      pyramids[i] = store->load(ds.train[i].stem_path(), deepest);
    });
    spec = external_encoder_spec(pyramids.front(), c.bank.encoder.seed);
  } else {
    StructuralModel shell{c.bank, ToyEncoder(spec), {}};
    parallel_for(ds.train.size(), c.threads, [&](std::size_t i) {
      pyramids[i] = structural_pyramid(shell, ds.train[i].image);
    });
  }
  StructuralModel model = build_bank(c.bank, ToyEncoder(spec), pyramids);
  spdlog::info("memory bank: {} vectors, coreset {}", model.bank.rows(),
               model.bank.coreset().size());
  StagedDir dir(RunPaths::of(c).structural);
  model.save(dir.path());
  dir.commit("build-bank");
}

void cmd_calibrate(const RunConfig& c) {
  const DatasetSplit ds = load_dataset(c);
  if (ds.validation.empty()) throw InvalidArgument("calibration needs validation images");
  const Models m = load_models(c);
  const auto store = feature_store(c);
  std::vector<ScoreMap> str(ds.validation.size()), log(ds.validation.size());
  parallel_for(ds.validation.size(), c.threads, [&](std::size_t i) {
    ImageMaps maps = branch_maps(m, store, ds.validation[i]);
    str[i] = std::move(maps.a_str);
    log[i] = std::move(maps.a_log);
  });
  const CalibrationStats stats = calibrate(str, log, c.alpha, c.beta);
  spdlog::info("calibration: str mu {:.6g} sigma {:.6g}, log mu {:.6g} sigma {:.6g}", stats.mu_str,
               stats.sigma_str, stats.mu_log, stats.sigma_log);
  StagedDir dir(RunPaths::of(c).calibration);
  stats.save(dir.path() / "calib.meta");
  dir.commit("calibrate");
}

void cmd_score(const RunConfig& c) {
  const DatasetSplit ds = load_dataset(c);
  const Models m = load_models(c);
  const RunPaths paths = RunPaths::of(c);
  require_stage(paths.calibration, "calibrate");
  CalibrationStats stats = CalibrationStats::load(paths.calibration / "calib.meta");
  // Fusion weights come from the current config; the moments stay as calibrated.
  stats.alpha = c.alpha;
  stats.beta = c.beta;
  const auto store = feature_store(c);

  StagedDir dir(paths.maps);
  std::vector<ScoreRow> rows(ds.test.size());
  parallel_for(ds.test.size(), c.threads, [&](std::size_t i) {
    const Sample& s = ds.test[i];
    const ImageMaps maps = branch_maps(m, store, s);
    const ScoreMap fused = fuse(maps.a_str, maps.a_log, stats);
    const fs::path base = dir.path() / s.stem_path();
    fs::create_directories(base);
    npft::write_tensor(base / "a_str.npft", maps.a_str.to_tensor());
    npft::write_tensor(base / "a_log.npft", maps.a_log.to_tensor());
    npft::write_tensor(base / "a_map.npft", fused.to_tensor());
    write_heat_preview(base / "a_map.pgm", fused);
    rows[i] = {s.stem_path(),
               s.label,
               s.kind,
               image_score(fused),
               image_score(gaussian_smooth(maps.a_log, kFusionSmoothing)),
               image_score(gaussian_smooth(maps.a_str, kFusionSmoothing))};
  });
  std::ostringstream out;
  out << "# image label kind fused logical structural\n";
  for (const auto& r : rows) {
    out << r.stem_path << ' ' << r.label << ' ' << to_string(r.kind) << ' ' << score_text(r.fused)
        << ' ' << score_text(r.logical) << ' ' << score_text(r.structural) << '\n';
  }
  write_text(dir.path() / "scores.txt", out.str());
  dir.commit("score");
  spdlog::info("scored {} test images", rows.size());
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<ScoreRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ScoreRow r;
    std::string kind;
    if (!(ss >> r.stem_path >> r.label >> kind >> r.fused >> r.logical >> r.structural)) {
      throw IoError("malformed scores line: " + line);
    }
    r.kind = anomaly_kind_from_string(kind);
    rows.push_back(std::move(r));
  }
  return rows;
}

SubsetAurocs subset_aurocs(const std::vector<ScoreRow>& rows, AnomalyKind kind) {
  std::vector<double> f, l, s;
  std::vector<int> y;
  for (const auto& r : rows) {
    if (r.kind != AnomalyKind::kNone && r.kind != kind) continue;
    f.push_back(r.fused);
    l.push_back(r.logical);
    s.push_back(r.structural);
    y.push_back(r.label);
  }
  return {auroc(f, y), auroc(l, y), auroc(s, y)};
}

MetricsReport cmd_eval(const RunConfig& c) {
  const DatasetSplit ds = load_dataset(c);
  const RunPaths paths = RunPaths::of(c);
  require_stage(paths.maps, "score");
  const std::vector<ScoreRow> rows = read_scores(paths.maps / "scores.txt");

  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<ScoreMap> maps(ds.test.size());
  std::vector<Mask> masks(ds.test.size());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    const Sample& s = ds.test[i];
    names.push_back(s.stem_path());
    const auto it = std::find_if(rows.begin(), rows.end(),
                                 [&](const ScoreRow& r) { return r.stem_path == s.stem_path(); });
    if (it == rows.end()) throw MissingStage(paths.maps, "score");
    scores.push_back(it->fused);
    labels.push_back(s.label);
  }
  parallel_for(ds.test.size(), c.threads, [&](std::size_t i) {
    const Sample& s = ds.test[i];
    maps[i] = ScoreMap::from_tensor(npft::read_tensor(paths.maps / s.stem_path() / "a_map.npft"));
    masks[i] = s.mask ? *s.mask
                      : Mask{s.image.height, s.image.width,
                             std::vector<std::uint8_t>(s.image.height * s.image.width, 0)};
  });
  SaturationTable saturation;
  if (!c.saturation.empty()) saturation = read_saturation_file(c.saturation, names);

  MetricsReport report;
  report.image_auroc = auroc(scores, labels);
  report.pixel_auroc = pixel_auroc(maps, masks);
  const SProCurve curve = spro_curve(maps, masks, saturation);
  for (double limit : c.spro_limits) report.spro.emplace_back(limit, spro_auc(curve, limit));

  StagedDir dir(paths.report);
  write_text(dir.path() / "report.txt", format_report(report));
  std::ostringstream subsets;
  for (AnomalyKind kind : {AnomalyKind::kLogical, AnomalyKind::kStructural}) {
    const bool present = std::any_of(rows.begin(), rows.end(),
                                     [&](const ScoreRow& r) { return r.kind == kind; });
    if (!present) continue;
    const SubsetAurocs a = subset_aurocs(rows, kind);
    const std::string k(to_string(kind));
    char line[160];
    std::snprintf(line, sizeof line, "%s.fused: %.4f\n%s.logical: %.4f\n%s.structural: %.4f\n",
                  k.c_str(), a.fused, k.c_str(), a.logical, k.c_str(), a.structural);
    subsets << line;
  }
  write_text(dir.path() / "subsets.txt", subsets.str());
  dir.commit("eval");
  return report;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace afe
