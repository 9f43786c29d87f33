// afe: command-line driver for the anomaly detection pipeline.
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "afe/pipeline.hpp"

namespace {

struct SharedFlags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--data", f.data, "directory holding the category tree");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads for per-image work")
      ->check(CLI::PositiveNumber);
}

afe::RunConfig resolve(const SharedFlags& f) {
  afe::KeyValues kv;
  if (!f.config.empty()) kv = afe::KeyValues::read(f.config);
  if (!f.data.empty()) kv.set("data", f.data);
  if (!f.out.empty()) kv.set("out", f.out);
  if (f.seed) kv.set("seed", std::to_string(*f.seed));
  if (f.threads) kv.set("threads", *f.threads);
  return afe::RunConfig::from_kv(kv);
}

void set_log_level() {
  const char* env = std::getenv("AFE_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") spdlog::warn("AFE_LOG={} not recognized, using info", level);
    spdlog::set_level(spdlog::level::info);
  }
  spdlog::set_pattern("[%l] %v");
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level();
  CLI::App app{"Logical and structural anomaly detection on image datasets"};
  app.require_subcommand(1);

  SharedFlags flags;
  using Stage = std::function<void(const afe::RunConfig&)>;
  const std::map<std::string, std::pair<std::string, Stage>> stages{
      {"generate", {"write the synthetic pinboard dataset", afe::cmd_generate}},
      {"train-logical", {"train codebooks and the fusion decoder", afe::cmd_train_logical}},
      {"build-bank", {"build the structural memory bank", afe::cmd_build_bank}},
      {"calibrate", {"estimate per-branch score statistics", afe::cmd_calibrate}},
      {"score", {"write anomaly maps and image scores for the test split", afe::cmd_score}},
      {"eval",
       {"compute the metrics report",
        [](const afe::RunConfig& c) { std::cout << afe::format_report(afe::cmd_eval(c)); }}},
      {"run",
       {"every stage from train-logical to eval",
        [](const afe::RunConfig& c) {
          afe::cmd_train_logical(c);
          afe::cmd_build_bank(c);
          afe::cmd_calibrate(c);
          afe::cmd_score(c);
          std::cout << afe::format_report(afe::cmd_eval(c));
        }}},
  };
  std::map<CLI::App*, Stage> handlers;
  for (const auto& [name, entry] : stages) {
    CLI::App* cmd = app.add_subcommand(name, entry.first);
    add_shared(cmd, flags);
    handlers[cmd] = entry.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const afe::RunConfig config = resolve(flags);
    afe::write_effective_config(config);
    for (const auto& [cmd, run] : handlers) {
      if (cmd->parsed()) run(config);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return afe::exit_code_for(e);
  }
  return 0;
}
