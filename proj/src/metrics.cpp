#include "gtid/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "gtid/error.hpp"

namespace gtid {

namespace {

void check_inputs(const Eigen::Ref<const Eigen::VectorXd>& scores,
                  const Eigen::Ref<const Eigen::VectorXi>& labels) {
  if (scores.size() != labels.size()) {
    throw InputError("metrics: " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (scores.size() == 0) {
    throw InputError("metrics: no samples");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 0 && labels(i) != 1) {
      throw InputError("metrics: label at index " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

template <typename F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  return j.get<double>();
}

} // namespace

std::string to_string(FarMode mode) { return mode == FarMode::paper ? "paper" : "conventional"; }

FarMode far_mode_from_string(const std::string& name) {
  if (name == "paper") {
    return FarMode::paper;
  }
  if (name == "conventional") {
    return FarMode::conventional;
  }
  throw ConfigError("unknown FAR mode '" + name + "' (expected paper or conventional)");
}

ConfusionCounts confusion(const Eigen::Ref<const Eigen::VectorXd>& scores,
                          const Eigen::Ref<const Eigen::VectorXi>& labels, double threshold) {
  check_inputs(scores, labels);
  ConfusionCounts c;
  c.threshold = threshold;
  for (Index i = 0; i < scores.size(); ++i) {
    const bool predicted = scores(i) >= threshold;
    if (labels(i) == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double detection_rate(const ConfusionCounts& c) {
  if (c.positives() == 0) {
    throw UndefinedMetricError("detection rate: no incident samples");
  }
  return static_cast<double>(c.tp) / static_cast<double>(c.positives());
}

double false_alarm_rate(const ConfusionCounts& c, FarMode mode) {
  if (mode == FarMode::paper) {
    if (c.tp == 0) {
      throw UndefinedMetricError("false alarm rate (paper mode): no correctly detected incidents");
    }
    return static_cast<double>(c.fp) / static_cast<double>(c.tp);
  }
  if (c.negatives() == 0) {
    throw UndefinedMetricError("false alarm rate (conventional mode): no non-incident samples");
  }
  return static_cast<double>(c.fp) / static_cast<double>(c.negatives());
}

double classification_rate(const ConfusionCounts& c) {
  if (c.total() == 0) {
    throw InputError("classification rate: no samples");
  }
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

RocCurve roc_and_auc(const Eigen::Ref<const Eigen::VectorXd>& scores,
                     const Eigen::Ref<const Eigen::VectorXi>& labels) {
  check_inputs(scores, labels);
  const Index n = scores.size();
  const Index pos = labels.sum();
  const Index neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError("roc: both classes must be present");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores(a) > scores(b); });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  // Twice the area in units of (1/neg) x (1/pos), accumulated exactly.
  long long doubled_area = 0;
  Index tp = 0;
  Index fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores(order[i]);
    Index group_tp = 0;
    Index group_fp = 0;
    while (i < order.size() && scores(order[i]) == s) {
      (labels(order[i]) == 1 ? group_tp : group_fp) += 1;
      ++i;
    }
    doubled_area += static_cast<long long>(group_fp) * (2 * tp + group_tp);
    tp += group_tp;
    fp += group_fp;
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(neg),
         static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = static_cast<double>(doubled_area) /
              (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

bool EvaluationReport::has_undefined_core_metric() const {
  return !dr || !far_conventional || !cr || !auc;
}

nlohmann::json EvaluationReport::to_json(bool include_timing) const {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : roc_points) {
    roc.push_back({p.fpr, p.tpr});
  }
  nlohmann::json j = {{"dr", optional_json(dr)},
                      {"far_paper", optional_json(far_paper)},
                      {"far_conventional", optional_json(far_conventional)},
                      {"far_primary", "far_paper"},
                      {"cr", optional_json(cr)},
                      {"auc", optional_json(auc)},
                      {"roc_points", std::move(roc)},
                      {"counts",
                       {{"tp", counts.tp},
                        {"fp", counts.fp},
                        {"tn", counts.tn},
                        {"fn", counts.fn},
                        {"threshold", counts.threshold}}}};
  if (include_timing) {
    j["eval_wall_clock_seconds"] = eval_wall_clock_seconds;
  }
  return j;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.dr = optional_from(j.at("dr"));
  r.far_paper = optional_from(j.at("far_paper"));
  r.far_conventional = optional_from(j.at("far_conventional"));
  r.cr = optional_from(j.at("cr"));
  r.auc = optional_from(j.at("auc"));
  for (const auto& p : j.at("roc_points")) {
    r.roc_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  const auto& c = j.at("counts");
  r.counts.tp = c.at("tp").get<Index>();
  r.counts.fp = c.at("fp").get<Index>();
  r.counts.tn = c.at("tn").get<Index>();
  r.counts.fn = c.at("fn").get<Index>();
  r.counts.threshold = c.at("threshold").get<double>();
  r.eval_wall_clock_seconds = j.value("eval_wall_clock_seconds", 0.0);
  return r;
}

std::string EvaluationReport::roc_csv() const {
  std::string out = "fpr,tpr\n";
  for (const auto& p : roc_points) {
    out += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  }
  return out;
}

EvaluationReport evaluate_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                 const Eigen::Ref<const Eigen::VectorXi>& labels,
                                 double threshold) {
  EvaluationReport r;
  r.counts = confusion(scores, labels, threshold);
  r.dr = defined([&] { return detection_rate(r.counts); });
  r.far_paper = defined([&] { return false_alarm_rate(r.counts, FarMode::paper); });
  r.far_conventional = defined([&] { return false_alarm_rate(r.counts, FarMode::conventional); });
  r.cr = classification_rate(r.counts);
  try {
    auto curve = roc_and_auc(scores, labels);
    r.roc_points = std::move(curve.points);
    r.auc = curve.auc;
  } catch (const UndefinedMetricError&) {
    r.auc.reset();
  }
  return r;
}

EvaluationReport evaluate(const Scorer& scorer, const SampleTable& test, double threshold) {
  if (test.rows() == 0) {
    throw InputError("evaluate: empty test table");
  }
  const auto start = std::chrono::steady_clock::now();
  const Eigen::VectorXd scores = scorer(test.features);
  const auto stop = std::chrono::steady_clock::now();
  EvaluationReport r = evaluate_scores(scores, test.labels, threshold);
  r.eval_wall_clock_seconds = std::chrono::duration<double>(stop - start).count();
  return r;
}

} // namespace gtid
