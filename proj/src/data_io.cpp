#include "gtid/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gtid/error.hpp"
#include "gtid/random.hpp"
#include "gtid/serialization.hpp"

namespace gtid {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') {
    ++begin;
  }
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

RowVector row_of(std::initializer_list<double> values) {
  RowVector r(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) {
    r(i++) = v;
  }
  return r;
}

std::vector<double> to_vector(const RowVector& r) { return {r.data(), r.data() + r.size()}; }

} // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) {
    throw InputError("cannot format double");
  }
  return std::string(buf, ptr);
}

std::string to_string(NormalizerMode mode) {
  return mode == NormalizerMode::minmax ? "minmax" : "zscore";
}

NormalizerMode normalizer_mode_from_string(const std::string& name) {
  if (name == "minmax") {
    return NormalizerMode::minmax;
  }
  if (name == "zscore") {
    return NormalizerMode::zscore;
  }
  throw ConfigError("unknown normalizer mode '" + name + "' (expected minmax or zscore)");
}

Normalizer Normalizer::fit(const Matrix& features, NormalizerMode mode) {
  if (features.rows() == 0) {
    throw PreconditionError("normalizer: cannot fit on an empty table");
  }
  Normalizer n;
  n.mode = mode;
  const Index cols = features.cols();
  n.center.resize(cols);
  n.spread.resize(cols);
  const double count = static_cast<double>(features.rows());
  for (Index c = 0; c < cols; ++c) {
    const auto col = features.col(c);
    if (mode == NormalizerMode::minmax) {
      n.center(c) = col.minCoeff();
      n.spread(c) = col.maxCoeff() - n.center(c);
    } else {
      double mean = 0.0;
      for (Index r = 0; r < col.size(); ++r) {
        mean += col(r);
      }
      mean /= count;
      double ss = 0.0;
      for (Index r = 0; r < col.size(); ++r) {
        ss += (col(r) - mean) * (col(r) - mean);
      }
      n.center(c) = mean;
      n.spread(c) = std::sqrt(ss / count);
    }
  }
  return n;
}

Matrix Normalizer::apply(const Matrix& features) const {
  if (features.cols() != center.size()) {
    throw DimensionError("normalizer: fitted on " + std::to_string(center.size()) +
                         " features, got " + std::to_string(features.cols()));
  }
  Matrix out(features.rows(), features.cols());
  for (Index c = 0; c < features.cols(); ++c) {
    if (spread(c) == 0.0) {
      out.col(c).setZero();
    } else if (mode == NormalizerMode::minmax) {
      out.col(c) = (2.0 * (features.col(c).array() - center(c)) / spread(c) - 1.0).matrix();
    } else {
      out.col(c) = ((features.col(c).array() - center(c)) / spread(c)).matrix();
    }
  }
  return out;
}

Matrix Normalizer::invert(const Matrix& normalized) const {
  if (normalized.cols() != center.size()) {
    throw DimensionError("normalizer: fitted on " + std::to_string(center.size()) +
                         " features, got " + std::to_string(normalized.cols()));
  }
  Matrix out(normalized.rows(), normalized.cols());
  for (Index c = 0; c < normalized.cols(); ++c) {
    if (spread(c) == 0.0) {
      out.col(c).setConstant(center(c));
    } else if (mode == NormalizerMode::minmax) {
      out.col(c) = ((normalized.col(c).array() + 1.0) * 0.5 * spread(c) + center(c)).matrix();
    } else {
      out.col(c) = (normalized.col(c).array() * spread(c) + center(c)).matrix();
    }
  }
  return out;
}

nlohmann::json Normalizer::to_json() const {
  return {{"mode", to_string(mode)}, {"center", to_vector(center)}, {"spread", to_vector(spread)}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  n.mode = normalizer_mode_from_string(j.at("mode").get<std::string>());
  const auto center = j.at("center").get<std::vector<double>>();
  const auto spread = j.at("spread").get<std::vector<double>>();
  if (center.size() != spread.size()) {
    throw InputError("normalizer json: center and spread lengths differ");
  }
  n.center = Eigen::Map<const RowVector>(center.data(), static_cast<Index>(center.size()));
  n.spread = Eigen::Map<const RowVector>(spread.data(), static_cast<Index>(spread.size()));
  return n;
}

Index SampleTable::count_label(int label) const { return (labels.array() == label).count(); }

Index SampleTable::count_synthetic() const { return (synthetic.array() != 0).count(); }

void SampleTable::validate() const {
  if (labels.size() != rows() || synthetic.size() != rows()) {
    throw InputError("table: " + std::to_string(rows()) + " feature rows but " +
                     std::to_string(labels.size()) + " labels and " +
                     std::to_string(synthetic.size()) + " synthetic flags");
  }
  if (static_cast<Index>(feature_names.size()) != n_features()) {
    throw InputError("table: " + std::to_string(feature_names.size()) + " names for " +
                     std::to_string(n_features()) + " features");
  }
  for (Index r = 0; r < rows(); ++r) {
    if (labels(r) != 0 && labels(r) != 1) {
      throw InputError("table: non-binary label at row " + std::to_string(r));
    }
    if (synthetic(r) != 0 && synthetic(r) != 1) {
      throw InputError("table: non-binary synthetic flag at row " + std::to_string(r));
    }
  }
}

SampleTable SampleTable::select(std::span<const Index> row_indices) const {
  SampleTable out;
  out.feature_names = feature_names;
  out.normalizer = normalizer;
  const auto n = static_cast<Index>(row_indices.size());
  out.features.resize(n, n_features());
  out.labels.resize(n);
  out.synthetic.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index r = row_indices[static_cast<std::size_t>(i)];
    out.features.row(i) = features.row(r);
    out.labels(i) = labels(r);
    out.synthetic(i) = synthetic(r);
  }
  return out;
}

Matrix SampleTable::features_with_label(int label) const {
  Matrix out(count_label(label), n_features());
  Index k = 0;
  for (Index r = 0; r < rows(); ++r) {
    if (labels(r) == label) {
      out.row(k++) = features.row(r);
    }
  }
  return out;
}

SampleTable SampleTable::without_synthetic() const {
  std::vector<Index> keep;
  for (Index r = 0; r < rows(); ++r) {
    if (synthetic(r) == 0) {
      keep.push_back(r);
    }
  }
  return select(keep);
}

SampleTable SampleTable::synthetic_only() const {
  std::vector<Index> keep;
  for (Index r = 0; r < rows(); ++r) {
    if (synthetic(r) != 0) {
      keep.push_back(r);
    }
  }
  return select(keep);
}

SampleTable make_table(std::vector<std::string> feature_names, Matrix features,
                       Eigen::VectorXi labels) {
  SampleTable t;
  t.feature_names = std::move(feature_names);
  t.features = std::move(features);
  t.labels = std::move(labels);
  t.synthetic = Eigen::VectorXi::Zero(t.features.rows());
  t.validate();
  return t;
}

SampleTable load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("load_csv: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError("load_csv: " + path.string() + " has no header row");
  }
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) {
    h = trim(h);
  }
  if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF")) {
    header.front().erase(0, 3);
  }
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw InputError("load_csv: label column '" + label_column + "' not found in " +
                     path.string());
  }
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());
  std::optional<std::size_t> synth_idx;
  std::vector<std::size_t> feature_idx;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) {
      continue;
    }
    if (header[c] == "synthetic") {
      synth_idx = c;
      continue;
    }
    feature_idx.push_back(c);
    names.push_back(header[c]);
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<int> flags;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InputError("load_csv: line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < feature_idx.size(); ++k) {
      double v = 0.0;
      const std::string cell = trim(cells[feature_idx[k]]);
      if (!parse_double(cell, v)) {
        throw InputError("load_csv: line " + std::to_string(line_no) + ", column '" + names[k] +
                         "': cannot parse '" + cell + "'");
      }
      values.push_back(v);
    }
    const std::string label = trim(cells[label_idx]);
    if (label != "0" && label != "1") {
      throw InputError("load_csv: line " + std::to_string(line_no) + ": label '" + label +
                       "' is not 0 or 1");
    }
    labels.push_back(label == "1" ? 1 : 0);
    if (synth_idx) {
      const std::string flag = trim(cells[*synth_idx]);
      if (flag != "0" && flag != "1") {
        throw InputError("load_csv: line " + std::to_string(line_no) + ": synthetic flag '" +
                         flag + "' is not 0 or 1");
      }
      flags.push_back(flag == "1" ? 1 : 0);
    } else {
      flags.push_back(0);
    }
  }

  SampleTable t;
  t.feature_names = std::move(names);
  const auto n = static_cast<Index>(labels.size());
  const auto d = static_cast<Index>(feature_idx.size());
  t.features = Eigen::Map<const Matrix>(values.data(), n, d);
  t.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), n);
  t.synthetic = Eigen::Map<const Eigen::VectorXi>(flags.data(), n);
  return t;
}

std::string format_csv(const SampleTable& table, const std::string& label_column) {
  table.validate();
  const bool with_flags = table.count_synthetic() > 0;
  std::string out;
  for (const auto& name : table.feature_names) {
    out += name;
    out += ',';
  }
  out += label_column;
  if (with_flags) {
    out += ",synthetic";
  }
  out += '\n';
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < table.n_features(); ++c) {
      out += format_double(table.features(r, c));
      out += ',';
    }
    out += table.labels(r) ? '1' : '0';
    if (with_flags) {
      out += table.synthetic(r) ? ",1" : ",0";
    }
    out += '\n';
  }
  return out;
}

void save_csv(const SampleTable& table, const std::filesystem::path& path,
              const std::string& label_column) {
  write_file_atomic(path, format_csv(table, label_column));
}

std::pair<std::vector<Index>, std::vector<Index>> split_indices(const SampleTable& table,
                                                                const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("split: train fraction must lie in (0, 1)");
  }
  std::vector<std::vector<Index>> groups;
  if (spec.stratified) {
    if (table.count_label(0) == 0 || table.count_label(1) == 0) {
      throw ConfigError("split: stratified split needs both classes present");
    }
    groups.resize(2);
    for (Index r = 0; r < table.rows(); ++r) {
      groups[static_cast<std::size_t>(table.labels(r))].push_back(r);
    }
  } else {
    groups.emplace_back(static_cast<std::size_t>(table.rows()));
    std::iota(groups[0].begin(), groups[0].end(), Index{0});
  }
  Rng rng(spec.seed);
  std::vector<Index> train;
  std::vector<Index> test;
  for (auto& g : groups) {
    rng.shuffle(g);
    const auto n_train = static_cast<std::size_t>(
        std::ceil(spec.train_fraction * static_cast<double>(g.size())));
    train.insert(train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), g.begin() + static_cast<std::ptrdiff_t>(n_train), g.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<SampleTable, SampleTable> split(const SampleTable& table, const SplitSpec& spec) {
  auto [train, test] = split_indices(table, spec);
  return {table.select(train), table.select(test)};
}

void OracleProfile::validate() const {
  const auto n = static_cast<Index>(feature_names.size());
  for (const ClassProfile* c : {&incident, &non_incident}) {
    if (c->mean.size() != n || c->sd.size() != n) {
      throw ConfigError("oracle profile '" + name + "': parameter lengths do not match " +
                        std::to_string(n) + " features");
    }
    if ((c->sd.array() <= 0.0).any() || !c->mean.allFinite() || !c->sd.allFinite()) {
      throw ConfigError("oracle profile '" + name + "': standard deviations must be positive");
    }
  }
}

nlohmann::json OracleProfile::to_json() const {
  return {{"name", name},
          {"feature_names", feature_names},
          {"incident", {{"mean", to_vector(incident.mean)}, {"sd", to_vector(incident.sd)}}},
          {"non_incident",
           {{"mean", to_vector(non_incident.mean)}, {"sd", to_vector(non_incident.sd)}}}};
}

namespace {

std::vector<std::string> detector_features() {
  return {"speed_up", "speed_down", "flow_up", "flow_down", "occ_up", "occ_down", "speed_gap"};
}

} // namespace

OracleProfile OracleProfile::standard() {
  OracleProfile p;
  p.name = "default";
  p.feature_names = detector_features();
  p.non_incident = {row_of({95, 95, 1800, 1800, 10, 10, 0}), row_of({8, 8, 250, 250, 3, 3, 6})};
  p.incident = {row_of({82, 60, 1600, 1250, 21, 7, 22}), row_of({10, 12, 300, 300, 5, 3, 9})};
  return p;
}

OracleProfile OracleProfile::overlap() {
  OracleProfile p;
  p.name = "overlap";
  p.feature_names = detector_features();
  p.non_incident = {row_of({95, 95, 1800, 1800, 10, 10, 0}), row_of({8, 8, 250, 250, 3, 3, 6})};
  p.incident = {row_of({92, 87, 1760, 1680, 12, 9.5, 4}), row_of({9, 10, 270, 270, 3.5, 3, 7})};
  return p;
}

OracleProfile OracleProfile::separated() {
  OracleProfile p;
  p.name = "separated";
  p.feature_names = detector_features();
  p.non_incident = {row_of({95, 95, 1800, 1800, 10, 10, 0}), row_of({2, 2, 50, 50, 1, 1, 1})};
  p.incident = {row_of({75, 75, 1300, 1300, 20, 20, 10}), row_of({2, 2, 50, 50, 1, 1, 1})};
  return p;
}

OracleProfile OracleProfile::gaussian2() {
  OracleProfile p;
  p.name = "gaussian2";
  p.feature_names = {"x1", "x2"};
  p.incident = {row_of({0.3, -0.2}), row_of({0.5, 0.4})};
  p.non_incident = {row_of({-0.7, 0.6}), row_of({0.5, 0.4})};
  return p;
}

OracleProfile OracleProfile::by_name(const std::string& name) {
  if (name == "default" || name == "standard") {
    return standard();
  }
  if (name == "overlap") {
    return overlap();
  }
  if (name == "separated") {
    return separated();
  }
  if (name == "gaussian2") {
    return gaussian2();
  }
  throw ConfigError("unknown oracle profile '" + name +
                    "' (expected default, overlap, separated, gaussian2)");
}

nlohmann::json OracleDataset::truth() const {
  return {{"profile", profile.to_json()},
          {"n_incident", table.count_label(1)},
          {"n_non_incident", table.count_label(0)},
          {"seed", seed}};
}

OracleDataset generate_oracle_dataset(const OracleProfile& profile, Index n_incident,
                                      Index n_non_incident, std::uint64_t seed) {
  profile.validate();
  if (n_incident <= 0 || n_non_incident <= 0) {
    throw ConfigError("oracle dataset: class counts must be positive");
  }
  Rng rng(seed);
  const Index n = n_incident + n_non_incident;
  const auto d = static_cast<Index>(profile.feature_names.size());
  Matrix x(n, d);
  Eigen::VectorXi y(n);
  for (Index r = 0; r < n; ++r) {
    const bool incident = r >= n_non_incident;
    const ClassProfile& cls = incident ? profile.incident : profile.non_incident;
    for (Index c = 0; c < d; ++c) {
      x(r, c) = rng.normal(cls.mean(c), cls.sd(c));
    }
    y(r) = incident ? 1 : 0;
  }
  const auto order = rng.permutation(n);
  OracleDataset out;
  out.profile = profile;
  out.seed = seed;
  out.table = make_table(profile.feature_names, x, y).select(order);
  return out;
}

} // namespace gtid
