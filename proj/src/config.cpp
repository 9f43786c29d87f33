#include "afe/config.hpp"

#include <charconv>
#include <set>

namespace afe {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "category", "data", "out", "model_dir", "features", "embedding", "saturation", "seed",
      "threads",
      "pinboard.grid", "pinboard.image_size", "pinboard.n_train", "pinboard.n_val",
      "pinboard.n_test_normal", "pinboard.n_test_logical", "pinboard.n_test_structural",
      "pinboard.disc_radius", "pinboard.jitter", "pinboard.background", "pinboard.foreground",
      "pinboard.streak_level", "pinboard.noise_sigma",
      "encoder.channels", "encoder.seed_logical", "encoder.seed_structural",
      "logical.image_size", "logical.input_offset",
      "codebook.entries", "codebook.lr",
      "decoder.context_dim", "decoder.lambda_cos", "decoder.lambda_mse", "decoder.lambda_vq",
      "decoder.epochs", "decoder.lr", "decoder.theta_joint",
      "bank.image_size", "bank.input_offset", "bank.levels", "bank.fraction", "bank.metric",
      "fusion.alpha", "fusion.beta", "metrics.limits"};
  return keys;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(pos, end - pos);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || p != item.data() + item.size()) {
      throw InvalidArgument("config key '" + key + "': '" + text + "' is not a number list");
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("config: " + what);
}

}  // namespace

RunConfig RunConfig::from_kv(const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries()) {
    if (!known_keys().count(key)) throw InvalidArgument("config: unknown key '" + key + "'");
  }
  RunConfig c;
  auto str = [&](const char* key, auto& field) {
    if (kv.has(key)) field = kv.get(key);
  };
  auto size = [&](const char* key, std::size_t& field) {
    if (kv.has(key)) field = kv.get_size(key);
  };
  auto real = [&](const char* key, double& field) {
    if (kv.has(key)) field = kv.get_double(key);
  };

  str("category", c.category);
  str("data", c.data);
  str("out", c.out);
  str("model_dir", c.model_dir);
  str("features", c.features);
  str("embedding", c.embedding);
  str("saturation", c.saturation);
  if (kv.has("seed")) c.seed = kv.get_u64("seed");
  size("threads", c.threads);

  auto& p = c.pinboard;
  p.category = c.category;
  size("pinboard.grid", p.grid);
  size("pinboard.image_size", p.image_size);
  size("pinboard.n_train", p.n_train);
  size("pinboard.n_val", p.n_val);
  size("pinboard.n_test_normal", p.n_test_normal);
  size("pinboard.n_test_logical", p.n_test_logical);
  size("pinboard.n_test_structural", p.n_test_structural);
  real("pinboard.disc_radius", p.disc_radius);
  real("pinboard.jitter", p.jitter);
  real("pinboard.background", p.background);
  real("pinboard.foreground", p.foreground);
  real("pinboard.streak_level", p.streak_level);
  real("pinboard.noise_sigma", p.noise_sigma);

  std::vector<std::size_t> channels = EncoderSpec{}.level_channels;
  if (kv.has("encoder.channels")) channels = kv.get_sizes("encoder.channels");
  auto& l = c.logical;
  l.encoder.level_channels = channels;
  l.encoder.seed = kv.has("encoder.seed_logical") ? kv.get_u64("encoder.seed_logical") : c.seed;
  l.seed = c.seed;
  size("logical.image_size", l.image_size);
  real("logical.input_offset", l.input_offset);
  size("codebook.entries", l.codebook_entries);
  real("codebook.lr", l.codebook_lr);
  size("decoder.context_dim", l.context_dim);
  real("decoder.lambda_cos", l.lambda.cos);
  real("decoder.lambda_mse", l.lambda.mse);
  real("decoder.lambda_vq", l.lambda.vq);
  size("decoder.epochs", l.epochs);
  real("decoder.lr", l.lr);
  if (kv.has("decoder.theta_joint")) l.theta_joint = kv.get_bool("decoder.theta_joint");

  auto& b = c.bank;
  b.encoder.level_channels = channels;
  b.encoder.seed =
      kv.has("encoder.seed_structural") ? kv.get_u64("encoder.seed_structural") : c.seed + 1;
  b.seed = c.seed;
  size("bank.image_size", b.image_size);
  real("bank.input_offset", b.input_offset);
  if (kv.has("bank.levels")) b.levels = kv.get_sizes("bank.levels");
  real("bank.fraction", b.fraction);
  if (kv.has("bank.metric")) b.metric = metric_from_string(kv.get("bank.metric"));

  real("fusion.alpha", c.alpha);
  real("fusion.beta", c.beta);
  if (kv.has("metrics.limits")) c.spro_limits = parse_doubles("metrics.limits", kv.get("metrics.limits"));

  require(!c.category.empty(), "category is empty");
  require(c.threads >= 1, "threads must be >= 1");
  require(channels.size() == kReconLevels + 1, "encoder.channels needs five entries");
  require(!(b.fraction <= 0.0 || b.fraction > 1.0), "bank.fraction must be in (0, 1]");
  require(!b.levels.empty(), "bank.levels is empty");
  for (auto k : b.levels) require(k >= 1 && k <= channels.size(), "bank.levels out of range");
  require(l.lr >= 0.0 && l.codebook_lr >= 0.0, "learning rates must be >= 0");
  require(c.alpha >= 0.0 && c.beta >= 0.0, "fusion weights must be >= 0");
  require(!c.spro_limits.empty(), "metrics.limits is empty");
  for (double lim : c.spro_limits) require(lim > 0.0 && lim <= 1.0, "metrics.limits must be in (0, 1]");
  return c;
}

KeyValues RunConfig::to_kv() const {
  KeyValues kv;
  kv.set("category", category);
  kv.set("data", data.generic_string());
  kv.set("out", out.generic_string());
  kv.set("model_dir", model_dir.generic_string());
  kv.set("features", features.generic_string());
  kv.set("embedding", embedding.generic_string());
  kv.set("saturation", saturation.generic_string());
  kv.set("seed", std::to_string(seed));
  kv.set("threads", threads);

  kv.set("pinboard.grid", pinboard.grid);
  kv.set("pinboard.image_size", pinboard.image_size);
  kv.set("pinboard.n_train", pinboard.n_train);
  kv.set("pinboard.n_val", pinboard.n_val);
  kv.set("pinboard.n_test_normal", pinboard.n_test_normal);
  kv.set("pinboard.n_test_logical", pinboard.n_test_logical);
  kv.set("pinboard.n_test_structural", pinboard.n_test_structural);
  kv.set("pinboard.disc_radius", pinboard.disc_radius);
  kv.set("pinboard.jitter", pinboard.jitter);
  kv.set("pinboard.background", pinboard.background);
  kv.set("pinboard.foreground", pinboard.foreground);
  kv.set("pinboard.streak_level", pinboard.streak_level);
  kv.set("pinboard.noise_sigma", pinboard.noise_sigma);

  kv.set("encoder.channels", join_sizes(logical.encoder.level_channels));
  kv.set("encoder.seed_logical", std::to_string(logical.encoder.seed));
  kv.set("encoder.seed_structural", std::to_string(bank.encoder.seed));
  kv.set("logical.image_size", logical.image_size);
  kv.set("logical.input_offset", logical.input_offset);
  kv.set("codebook.entries", logical.codebook_entries);
  kv.set("codebook.lr", logical.codebook_lr);
  kv.set("decoder.context_dim", logical.context_dim);
  kv.set("decoder.lambda_cos", logical.lambda.cos);
  kv.set("decoder.lambda_mse", logical.lambda.mse);
  kv.set("decoder.lambda_vq", logical.lambda.vq);
  kv.set("decoder.epochs", logical.epochs);
  kv.set("decoder.lr", logical.lr);
  kv.set("decoder.theta_joint", logical.theta_joint);

  kv.set("bank.image_size", bank.image_size);
  kv.set("bank.input_offset", bank.input_offset);
  kv.set("bank.levels", join_sizes(bank.levels));
  kv.set("bank.fraction", bank.fraction);
  kv.set("bank.metric", std::string(to_string(bank.metric)));
  kv.set("fusion.alpha", alpha);
  kv.set("fusion.beta", beta);
  kv.set("metrics.limits", join_doubles(spro_limits));
  return kv;
}

}  // namespace afe
