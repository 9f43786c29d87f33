#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afe/config.hpp"
#include "afe/features.hpp"
#include "afe/fusion.hpp"
#include "afe/metrics.hpp"

namespace afe {

// An upstream stage has not run (or did not finish). The message names the
// command that produces the missing artifact.
class MissingStage : public IoError {
 public:
  MissingStage(const std::filesystem::path& dir, const std::string& command)
      : IoError(dir.string() + " is missing or incomplete; run `afe " + command + "` first"),
        command_(command) {}
  const std::string& command() const noexcept { return command_; }

 private:
  std::string command_;
};

// Artifact locations for a run.
struct RunPaths {
  std::filesystem::path logical;      // <model>/logical
  std::filesystem::path structural;   // <model>/bank
  std::filesystem::path calibration;  // <model>/calibration
  std::filesystem::path maps;         // <out>/maps
  std::filesystem::path report;       // <out>/report

  static RunPaths of(const RunConfig& config);
};

inline constexpr const char* kStageMarker = "stage.done";

// Branch maps for one image at its own resolution.
struct ImageMaps {
  ScoreMap a_str;
  ScoreMap a_log;
};

// One line of scores.txt.
struct ScoreRow {
  std::string stem_path;
  int label = 0;
  AnomalyKind kind = AnomalyKind::kNone;
  double fused = 0.0;
  // Single-branch scores: max of the branch map after the same smoothing the
  // fused map gets.
  double logical = 0.0;
  double structural = 0.0;
};

std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

// Per-subset image AUROC for the fused map and each branch alone. A subset is
// the normal test images plus one anomaly kind.
struct SubsetAurocs {
  double fused = 0.0;
  double logical = 0.0;
  double structural = 0.0;
};
SubsetAurocs subset_aurocs(const std::vector<ScoreRow>& rows, AnomalyKind kind);

void cmd_generate(const RunConfig& config);
void cmd_train_logical(const RunConfig& config);
void cmd_build_bank(const RunConfig& config);
void cmd_calibrate(const RunConfig& config);
void cmd_score(const RunConfig& config);
MetricsReport cmd_eval(const RunConfig& config);

// Writes <out>/config.effective.
void write_effective_config(const RunConfig& config);

// Process exit status for an exception escaping a command: 2 for I/O
// problems, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace afe
