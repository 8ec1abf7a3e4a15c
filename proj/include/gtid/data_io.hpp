#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gtid/tensor.hpp"

namespace gtid {

enum class NormalizerMode { minmax, zscore };

std::string to_string(NormalizerMode mode);
NormalizerMode normalizer_mode_from_string(const std::string& name);

/// Per-feature affine scaling fitted on one table and reused on others.
///
/// minmax maps [min, max] onto [-1, 1]; zscore subtracts the mean and divides
/// by the population standard deviation. Constant features map to 0 and
/// invert back to the constant.
struct Normalizer {
  NormalizerMode mode = NormalizerMode::minmax;
  RowVector center; // min (minmax) or mean (zscore)
  RowVector spread; // max - min (minmax) or sd (zscore); 0 marks a degenerate feature

  static Normalizer fit(const Matrix& features, NormalizerMode mode);

  Matrix apply(const Matrix& features) const;
  Matrix invert(const Matrix& normalized) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

/// Labeled tabular dataset. Label 1 marks an incident; synthetic rows are
/// flagged so they can be told apart from (and stripped back to) real data.
struct SampleTable {
  std::vector<std::string> feature_names;
  Matrix features;
  Eigen::VectorXi labels;
  Eigen::VectorXi synthetic;
  std::optional<Normalizer> normalizer;

  Index rows() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  Index count_label(int label) const;
  Index count_synthetic() const;

  /// Throws InputError when row counts disagree or labels/flags are not 0/1.
  void validate() const;

  SampleTable select(std::span<const Index> row_indices) const;
  Matrix features_with_label(int label) const;
  SampleTable without_synthetic() const;
  SampleTable synthetic_only() const;
};

SampleTable make_table(std::vector<std::string> feature_names, Matrix features,
                       Eigen::VectorXi labels);

/// Parses a headed, comma-separated file. A column named "synthetic" is read
/// as the synthetic flag; every other non-label column becomes a feature.
SampleTable load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

/// CSV text with shortest round-trip decimal formatting. The synthetic column
/// is written only when some row is flagged.
std::string format_csv(const SampleTable& table, const std::string& label_column = "label");
void save_csv(const SampleTable& table, const std::filesystem::path& path,
              const std::string& label_column = "label");

struct SplitSpec {
  double train_fraction = 0.6;
  bool stratified = true;
  std::uint64_t seed = 0;
};

/// Shuffles each class (or the whole table) with the seeded generator and
/// sends the first ceil(fraction * n) rows to train. Both halves keep the
/// original row order.
std::pair<SampleTable, SampleTable> split(const SampleTable& table, const SplitSpec& spec);

/// Row indices chosen for train and test by `split`.
std::pair<std::vector<Index>, std::vector<Index>> split_indices(const SampleTable& table,
                                                                const SplitSpec& spec);

struct ClassProfile {
  RowVector mean;
  RowVector sd;
};

/// Independent per-feature Gaussian class-conditional distributions.
struct OracleProfile {
  std::string name;
  std::vector<std::string> feature_names;
  ClassProfile incident;
  ClassProfile non_incident;

  void validate() const;
  nlohmann::json to_json() const;

  /// Seven loop-detector-like features; classes well separated.
  static OracleProfile standard();
  /// Same features with heavy class overlap.
  static OracleProfile overlap();
  /// Every feature's class means 10 SDs apart.
  static OracleProfile separated();
  /// Two features; incidents ~ N([0.3, -0.2], diag([0.5, 0.4]^2)).
  static OracleProfile gaussian2();
  static OracleProfile by_name(const std::string& name);
};

struct OracleDataset {
  SampleTable table;
  OracleProfile profile;
  std::uint64_t seed = 0;

  /// Ground-truth record: profile parameters, counts and seed.
  nlohmann::json truth() const;
};

OracleDataset generate_oracle_dataset(const OracleProfile& profile, Index n_incident,
                                      Index n_non_incident, std::uint64_t seed);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

} // namespace gtid
