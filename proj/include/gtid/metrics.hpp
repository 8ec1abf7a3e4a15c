#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtid/data_io.hpp"
#include "gtid/tensor.hpp"

namespace gtid {

/// Confusion counts at a decision threshold; a sample is predicted positive
/// iff its score >= threshold.
struct ConfusionCounts {
  Index tp = 0;
  Index fp = 0;
  Index tn = 0;
  Index fn = 0;
  double threshold = 0.5;

  Index positives() const { return tp + fn; }
  Index negatives() const { return fp + tn; }
  Index total() const { return tp + fp + tn + fn; }
};

/// paper: false detections over correct detections (fp / tp).
/// conventional: false-positive rate (fp / (fp + tn)).
enum class FarMode { paper, conventional };

std::string to_string(FarMode mode);
FarMode far_mode_from_string(const std::string& name);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

ConfusionCounts confusion(const Eigen::Ref<const Eigen::VectorXd>& scores,
                          const Eigen::Ref<const Eigen::VectorXi>& labels, double threshold);

/// tp / (tp + fn).
double detection_rate(const ConfusionCounts& c);
double false_alarm_rate(const ConfusionCounts& c, FarMode mode);
/// Overall accuracy, (tp + tn) / total.
double classification_rate(const ConfusionCounts& c);

/// ROC over every distinct score (descending, equal scores grouped into one
/// step) with trapezoidal AUC.
RocCurve roc_and_auc(const Eigen::Ref<const Eigen::VectorXd>& scores,
                     const Eigen::Ref<const Eigen::VectorXi>& labels);

/// Maps a batch of feature rows to incident probabilities. Any detector,
/// including future baselines, plugs into evaluation through this.
using Scorer = std::function<Eigen::VectorXd(const Matrix& features)>;

struct EvaluationReport {
  // Empty when the metric's denominator is zero on the evaluated data.
  std::optional<double> dr;
  std::optional<double> far_paper;
  std::optional<double> far_conventional;
  std::optional<double> cr;
  std::optional<double> auc;
  std::vector<RocPoint> roc_points;
  ConfusionCounts counts;
  double eval_wall_clock_seconds = 0.0;

  /// True when a metric other than far_paper is undefined (for example a
  /// single-class test set).
  bool has_undefined_core_metric() const;

  nlohmann::json to_json(bool include_timing = true) const;
  static EvaluationReport from_json(const nlohmann::json& j);
  std::string roc_csv() const;
};

EvaluationReport evaluate(const Scorer& scorer, const SampleTable& test, double threshold = 0.5);

/// Builds a report from precomputed scores; timing is left at zero.
EvaluationReport evaluate_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                 const Eigen::Ref<const Eigen::VectorXi>& labels,
                                 double threshold = 0.5);

} // namespace gtid
