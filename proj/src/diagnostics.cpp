#include "gtid/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gtid/data_io.hpp"
#include "gtid/error.hpp"

namespace gtid {

namespace {

std::vector<double> sorted_copy(const VectorRef& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  return v;
}

double serial_mean(const VectorRef& values) {
  double total = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    total += values(i);
  }
  return total / static_cast<double>(values.size());
}

double sorted_quantile(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

nlohmann::json ecdf_json(const std::vector<EcdfPoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) {
    out.push_back({p.value, p.probability});
  }
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string fmt(const std::optional<double>& v) {
  if (!v) {
    return "NA";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

} // namespace

nlohmann::json SummaryStats::to_json() const {
  return {{"median", median}, {"mean", mean}, {"sd", sd ? nlohmann::json(*sd) : nlohmann::json()}};
}

SummaryStats summary_stats(const VectorRef& values) {
  if (values.size() == 0) {
    throw InputError("summary_stats: empty input");
  }
  const auto v = sorted_copy(values);
  const std::size_t n = v.size();
  SummaryStats s;
  s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.mean = serial_mean(values);
  if (n >= 2) {
    double ss = 0.0;
    for (Index i = 0; i < values.size(); ++i) {
      ss += (values(i) - s.mean) * (values(i) - s.mean);
    }
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

std::vector<EcdfPoint> ecdf(const VectorRef& values) {
  if (values.size() == 0) {
    throw InputError("ecdf: empty input");
  }
  const auto v = sorted_copy(values);
  const double n = static_cast<double>(v.size());
  std::vector<EcdfPoint> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) {
      continue;
    }
    out.push_back({v[i], i + 1 == v.size() ? 1.0 : static_cast<double>(i + 1) / n});
  }
  return out;
}

double quantile(const VectorRef& values, double q) {
  if (values.size() == 0) {
    throw InputError("quantile: empty input");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InputError("quantile: q must lie in [0, 1]");
  }
  return sorted_quantile(sorted_copy(values), q);
}

double silverman_bandwidth(const VectorRef& values) {
  if (values.size() < 2) {
    throw InputError("silverman_bandwidth: need at least 2 values");
  }
  const auto v = sorted_copy(values);
  const double sd = *summary_stats(values).sd;
  const double iqr = sorted_quantile(v, 0.75) - sorted_quantile(v, 0.25);
  double spread = 0.0;
  if (iqr > 0.0) {
    spread = std::min(sd, iqr / 1.34);
  } else {
    spread = sd;
  }
  const double h = 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
  return h > 0.0 ? h : 1e-6;
}

Eigen::VectorXd kde(const VectorRef& values, const VectorRef& grid,
                    std::optional<double> bandwidth) {
  if (values.size() < 2) {
    throw InputError("kde: need at least 2 values");
  }
  if (bandwidth && !(*bandwidth > 0.0)) {
    throw InputError("kde: bandwidth must be positive");
  }
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  Eigen::VectorXd density(grid.size());
  for (Index g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (Index i = 0; i < values.size(); ++i) {
      const double u = (grid(g) - values(i)) / h;
      total += std::exp(-0.5 * u * u);
    }
    density(g) = norm * total;
  }
  return density;
}

double ks_statistic(const VectorRef& a, const VectorRef& b) {
  if (a.size() == 0 || b.size() == 0) {
    throw InputError("ks_statistic: empty sample");
  }
  const auto va = sorted_copy(a);
  const auto vb = sorted_copy(b);
  const auto na = static_cast<long long>(va.size());
  const auto nb = static_cast<long long>(vb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  long long best = 0;
  // Compare counts scaled by the other sample's size to stay in integers.
  while (i < va.size() || j < vb.size()) {
    double v = 0.0;
    if (j >= vb.size() || (i < va.size() && va[i] <= vb[j])) {
      v = va[i];
    } else {
      v = vb[j];
    }
    while (i < va.size() && va[i] == v) {
      ++i;
    }
    while (j < vb.size() && vb[j] == v) {
      ++j;
    }
    const long long gap = static_cast<long long>(i) * nb - static_cast<long long>(j) * na;
    best = std::max(best, gap < 0 ? -gap : gap);
  }
  return static_cast<double>(best) / static_cast<double>(na * nb);
}

std::string FeatureComparison::ecdf_csv() const {
  std::string out = "source,value,probability\n";
  for (const auto& p : ecdf_real) {
    out += "real," + format_double(p.value) + "," + format_double(p.probability) + "\n";
  }
  for (const auto& p : ecdf_synthetic) {
    out += "synthetic," + format_double(p.value) + "," + format_double(p.probability) + "\n";
  }
  return out;
}

std::string FeatureComparison::kde_csv() const {
  std::string out = "grid,density_real,density_synthetic\n";
  for (Index g = 0; g < kde_grid.size(); ++g) {
    out += format_double(kde_grid(g)) + "," + format_double(kde_real(g)) + "," +
           format_double(kde_synthetic(g)) + "\n";
  }
  return out;
}

nlohmann::json DistributionReport::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name},
                     {"real", f.real_stats.to_json()},
                     {"synthetic", f.synthetic_stats.to_json()},
                     {"ks", f.ks},
                     {"bandwidth_real", f.bandwidth_real},
                     {"bandwidth_synthetic", f.bandwidth_synthetic},
                     {"ecdf_real", ecdf_json(f.ecdf_real)},
                     {"ecdf_synthetic", ecdf_json(f.ecdf_synthetic)},
                     {"kde",
                      {{"grid", to_std(f.kde_grid)},
                       {"real", to_std(f.kde_real)},
                       {"synthetic", to_std(f.kde_synthetic)}}}});
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& f : features) {
    table.push_back({{"feature", f.name},
                     {"real", f.real_stats.to_json()},
                     {"synthetic", f.synthetic_stats.to_json()}});
  }
  table.push_back({{"feature", "all_features"},
                   {"real", pooled_real.to_json()},
                   {"synthetic", pooled_synthetic.to_json()}});
  return {{"n_real", n_real},
          {"n_synthetic", n_synthetic},
          {"summary_table", std::move(table)},
          {"features", std::move(feats)}};
}

std::string DistributionReport::summary_table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %12s %12s %12s %12s %8s\n", "feature",
                "real_median", "real_mean", "real_sd", "syn_median", "syn_mean", "syn_sd", "ks");
  out += line;
  auto row = [&](const std::string& name, const SummaryStats& r, const SummaryStats& s,
                 const std::string& ks) {
    std::snprintf(line, sizeof line, "%-16s %12s %12s %12s %12s %12s %12s %8s\n", name.c_str(),
                  fmt(r.median).c_str(), fmt(r.mean).c_str(), fmt(r.sd).c_str(),
                  fmt(s.median).c_str(), fmt(s.mean).c_str(), fmt(s.sd).c_str(), ks.c_str());
    out += line;
  };
  for (const auto& f : features) {
    row(f.name, f.real_stats, f.synthetic_stats, fmt(f.ks));
  }
  row("all_features", pooled_real, pooled_synthetic, "");
  return out;
}

DistributionReport compare(const Matrix& real, const Matrix& synthetic,
                           const std::vector<std::string>& feature_names) {
  if (real.cols() != synthetic.cols()) {
    throw InputError("compare: real data has " + std::to_string(real.cols()) +
                     " features, synthetic has " + std::to_string(synthetic.cols()));
  }
  if (real.rows() < 2 || synthetic.rows() < 2) {
    throw InputError("compare: each side needs at least 2 rows");
  }
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != real.cols()) {
    throw InputError("compare: feature name count does not match feature count");
  }
  DistributionReport report;
  report.n_real = real.rows();
  report.n_synthetic = synthetic.rows();
  for (Index c = 0; c < real.cols(); ++c) {
    const Eigen::VectorXd r = real.col(c);
    const Eigen::VectorXd s = synthetic.col(c);
    FeatureComparison f;
    f.name = feature_names.empty() ? "f" + std::to_string(c) : feature_names[c];
    f.real_stats = summary_stats(r);
    f.synthetic_stats = summary_stats(s);
    f.ecdf_real = ecdf(r);
    f.ecdf_synthetic = ecdf(s);
    f.bandwidth_real = silverman_bandwidth(r);
    f.bandwidth_synthetic = silverman_bandwidth(s);
    const double h = std::max(f.bandwidth_real, f.bandwidth_synthetic);
    const double lo = std::min(r.minCoeff(), s.minCoeff()) - 3.0 * h;
    const double hi = std::max(r.maxCoeff(), s.maxCoeff()) + 3.0 * h;
    f.kde_grid = Eigen::VectorXd::LinSpaced(kKdeGridPoints, lo, hi);
    f.kde_real = kde(r, f.kde_grid, f.bandwidth_real);
    f.kde_synthetic = kde(s, f.kde_grid, f.bandwidth_synthetic);
    f.ks = ks_statistic(r, s);
    report.features.push_back(std::move(f));
  }
  const Eigen::VectorXd pooled_r = real.reshaped<Eigen::RowMajor>();
  const Eigen::VectorXd pooled_s = synthetic.reshaped<Eigen::RowMajor>();
  report.pooled_real = summary_stats(pooled_r);
  report.pooled_synthetic = summary_stats(pooled_s);
  return report;
}

} // namespace gtid
