#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtid/data_io.hpp"
#include "gtid/gan.hpp"
#include "gtid/metrics.hpp"
#include "gtid/transformer.hpp"

namespace gtid {

inline constexpr const char* kVersion = "0.1.0";

/// Exit status of a command.
enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_undefined_metric = 2,
  exit_divergence = 3,
};

struct ExperimentPaths {
  std::filesystem::path dataset;    // input CSV
  std::filesystem::path output_dir; // every command writes here
  std::filesystem::path model;      // classifier checkpoint (evaluate)
  std::filesystem::path gan;        // GAN checkpoint (augment)
  std::filesystem::path synthetic;  // second CSV (diagnose)
};

/// Everything a pipeline command can be told. Loaded from `--config`, then
/// overridden by flags, then validated before any file is touched.
struct ExperimentConfig {
  ExperimentPaths paths;
  std::uint64_t seed = 0;
  std::string profile = "default";
  Index n_incident = 1600;
  Index n_non_incident = 7240;
  GanConfig gan;
  TransformerConfig transformer;
  ClassifierHyper classifier;
  BalanceRatio ratio{1, 1};
  double threshold = 0.5;
  FarMode far_mode = FarMode::paper;
  NormalizerMode normalizer = NormalizerMode::zscore;
  double train_fraction = 0.6;

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys at any level are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Hash of every setting except file locations, so the same experiment run
  /// from two directories hashes the same.
  std::string hash() const;
};

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

} // namespace gtid
