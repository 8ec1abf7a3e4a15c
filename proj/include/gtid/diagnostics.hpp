#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtid/tensor.hpp"

namespace gtid {

/// Median, mean and sample (n - 1) standard deviation of one feature. The
/// standard deviation is absent for a single observation.
struct SummaryStats {
  double median = 0.0;
  double mean = 0.0;
  std::optional<double> sd;

  nlohmann::json to_json() const;
};

struct EcdfPoint {
  double value = 0.0;
  double probability = 0.0;
};

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

SummaryStats summary_stats(const VectorRef& values);

/// One point per distinct value: (v, #{x <= v} / n). The last probability is
/// exactly 1.
std::vector<EcdfPoint> ecdf(const VectorRef& values);

/// Linear-interpolation quantile (the "type 7" definition), q in [0, 1].
double quantile(const VectorRef& values, double q);

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is 0
/// and to 1e-6 when both vanish.
double silverman_bandwidth(const VectorRef& values);

/// Gaussian kernel density evaluated on `grid`. A missing bandwidth selects
/// silverman_bandwidth.
Eigen::VectorXd kde(const VectorRef& values, const VectorRef& grid,
                    std::optional<double> bandwidth = std::nullopt);

/// Two-sample Kolmogorov-Smirnov statistic, sup |F_a - F_b|.
double ks_statistic(const VectorRef& a, const VectorRef& b);

struct FeatureComparison {
  std::string name;
  SummaryStats real_stats;
  SummaryStats synthetic_stats;
  std::vector<EcdfPoint> ecdf_real;
  std::vector<EcdfPoint> ecdf_synthetic;
  Eigen::VectorXd kde_grid;
  Eigen::VectorXd kde_real;
  Eigen::VectorXd kde_synthetic;
  double bandwidth_real = 0.0;
  double bandwidth_synthetic = 0.0;
  double ks = 0.0;

  std::string ecdf_csv() const;
  std::string kde_csv() const;
};

/// Real-versus-synthetic comparison: one entry per feature plus summary rows
/// pooling every feature's values.
struct DistributionReport {
  std::vector<FeatureComparison> features;
  SummaryStats pooled_real;
  SummaryStats pooled_synthetic;
  Index n_real = 0;
  Index n_synthetic = 0;

  nlohmann::json to_json() const;
  /// Median / mean / SD rows for real and synthetic data, one line per feature.
  std::string summary_table() const;
};

inline constexpr Index kKdeGridPoints = 512;

DistributionReport compare(const Matrix& real, const Matrix& synthetic,
                           const std::vector<std::string>& feature_names = {});

} // namespace gtid
