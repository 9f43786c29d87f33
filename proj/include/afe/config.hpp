#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afe/dataset.hpp"
#include "afe/kv.hpp"
#include "afe/logical.hpp"
#include "afe/memory_bank.hpp"

namespace afe {

// Everything one pipeline run needs. Every field has a default; the defaults
// run the synthetic pinboard category end to end.
struct RunConfig {
  std::string category = "pinboard";
  std::filesystem::path data = "data";  // holds <category>/
  std::filesystem::path out = "out";
  std::filesystem::path model_dir;      // empty means <out>/model
  std::filesystem::path features;       // optional precomputed pyramids
  std::filesystem::path embedding;      // optional category text embedding
  std::filesystem::path saturation;     // optional per-region saturation file
  std::uint64_t seed = 7;
  std::size_t threads = 1;

  PinboardConfig pinboard;
  LogicalConfig logical;
  BankConfig bank;
  double alpha = 1.0;
  double beta = 3.0;
  std::vector<double> spro_limits{0.01, 0.05, 0.1, 0.3, 1.0};

  // Unknown keys and malformed values throw InvalidArgument. Encoder seeds
  // default to seed and seed + 1 unless given.
  static RunConfig from_kv(const KeyValues& kv);
  static RunConfig defaults() { return from_kv(KeyValues{}); }
  KeyValues to_kv() const;

  std::filesystem::path category_root() const { return data / category; }
  std::filesystem::path resolved_model_dir() const {
    return model_dir.empty() ? out / "model" : model_dir;
  }
};

}  // namespace afe
