#include "gtid/cli.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "gtid/diagnostics.hpp"
#include "gtid/error.hpp"
#include "gtid/random.hpp"
#include "gtid/serialization.hpp"

namespace gtid {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      ok = ok || key == k;
    }
    if (!ok) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') {
      c = ' ';
    }
  }
  return text;
}

std::string safe_file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    out += keep ? c : '_';
  }
  return out.empty() ? "feature" : out;
}

nlohmann::json parse_json_file(const std::filesystem::path& path, const std::string& what) {
  if (path.empty()) {
    throw ConfigError(what + " path not set");
  }
  if (!std::filesystem::exists(path)) {
    throw InputError(what + " '" + path.string() + "' does not exist");
  }
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Collects a command's outputs in memory and writes them together at the end,
/// followed by the run manifest.
class Run {
public:
  Run(std::string command, const ExperimentConfig& config)
      : command_(std::move(command)), config_(config), hash_(config.hash()) {}

  template <typename F>
  decltype(auto) stage(const std::string& name, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      stages_.push_back({{"name", name}, {"seconds", dt.count()}});
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      f();
      record();
    } else {
      decltype(auto) result = f();
      record();
      return result;
    }
  }

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }
  void add_json(const std::string& name, nlohmann::json j) {
    j["run"] = stamp();
    add(name, j.dump(2) + "\n");
  }

  nlohmann::json stamp() const { return {{"seed", config_.seed}, {"config_hash", hash_}}; }

  void commit() {
    const auto& dir = config_.paths.output_dir;
    std::filesystem::create_directories(dir);
    nlohmann::json inventory = nlohmann::json::array();
    for (const auto& [name, content] : files_) {
      write_file_atomic(dir / name, content);
      inventory.push_back(
          {{"path", name}, {"bytes", content.size()}, {"fnv1a", fnv1a_hex(content)}});
    }
    const nlohmann::json manifest = {
        {"command", command_},
        {"seed", config_.seed},
        {"config_hash", hash_},
        {"config", config_.to_json()},
        {"versions",
         {{"gtid", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}}},
        {"stages", stages_},
        {"files", inventory}};
    write_file_atomic(dir / (command_ + ".manifest.json"), manifest.dump(2) + "\n");
  }

private:
  std::string command_;
  const ExperimentConfig& config_;
  std::string hash_;
  nlohmann::json stages_ = nlohmann::json::array();
  std::vector<std::pair<std::string, std::string>> files_;
};

SampleTable concat_rows(const SampleTable& a, const SampleTable& b) {
  if (a.n_features() != b.n_features()) {
    throw DimensionError("concat_rows: feature counts differ");
  }
  SampleTable t;
  t.feature_names = a.feature_names;
  t.features.resize(a.rows() + b.rows(), a.n_features());
  t.features << a.features, b.features;
  t.labels.resize(t.features.rows());
  t.labels << a.labels, b.labels;
  t.synthetic.resize(t.features.rows());
  t.synthetic << a.synthetic, b.synthetic;
  return t;
}

void require_dataset(const ExperimentConfig& c) {
  if (c.paths.dataset.empty()) {
    throw ConfigError("no dataset given (--data)");
  }
  if (!std::filesystem::exists(c.paths.dataset)) {
    throw InputError("dataset '" + c.paths.dataset.string() + "' does not exist");
  }
}

int cmd_gen_data(const ExperimentConfig& c, std::ostream& out) {
  Run run("gen-data", c);
  const auto profile = OracleProfile::by_name(c.profile);
  const auto data = run.stage("generate", [&] {
    return generate_oracle_dataset(profile, c.n_incident, c.n_non_incident,
                                   derive_seed(c.seed, stage::data));
  });
  run.add("data.csv", format_csv(data.table));
  run.add_json("ground_truth.json", data.truth());
  run.commit();
  out << "gen-data: " << data.table.rows() << " rows (" << c.n_incident << " incident, "
      << c.n_non_incident << " non-incident) -> " << (c.paths.output_dir / "data.csv").string()
      << "\n";
  return exit_ok;
}

int cmd_train_gan(const ExperimentConfig& c, std::ostream& out) {
  require_dataset(c);
  Run run("train-gan", c);
  const auto table = run.stage("load", [&] { return load_csv(c.paths.dataset); });
  // Only incidents that train-clf will place in its training split, so the
  // generator never sees a test row.
  const auto train_part =
      split(table.without_synthetic(),
            {c.train_fraction, true, derive_seed(c.seed, stage::split)}).first;
  const Matrix minority = train_part.features_with_label(1);
  GanConfig cfg = c.gan;
  cfg.seed = derive_seed(c.seed, stage::gan);
  const GanModel model = run.stage("train", [&] { return train_gan(minority, cfg); });
  run.add_json("gan.json", model.to_json());
  run.add("gan_history.csv", model.history_csv());
  run.commit();
  const auto& last = model.history.back();
  out << "train-gan: " << minority.rows() << " incident rows, " << cfg.epochs
      << " epochs, final loss_d " << last.loss_d << " loss_g " << last.loss_g << "\n";
  return exit_ok;
}

int cmd_augment(const ExperimentConfig& c, std::ostream& out) {
  require_dataset(c);
  Run run("augment", c);
  const auto table = run.stage("load", [&] { return load_csv(c.paths.dataset); });
  const GanModel model = GanModel::from_json(parse_json_file(c.paths.gan, "GAN checkpoint"));
  Rng rng(derive_seed(c.seed, stage::augment));
  const auto result =
      run.stage("augment", [&] { return augment_to_ratio(table, model, c.ratio, rng); });
  run.add("augmented.csv", format_csv(result.table));
  run.add_json("augment_report.json", {{"ratio", c.ratio.to_string()},
                                       {"n_incident", table.count_label(1)},
                                       {"n_non_incident", table.count_label(0)},
                                       {"target_incidents", result.target_incidents},
                                       {"appended", result.appended},
                                       {"rows", result.table.rows()}});
  run.commit();
  out << "augment: ratio " << c.ratio.to_string() << ", appended " << result.appended
      << " synthetic rows\n";
  return exit_ok;
}

int cmd_train_clf(const ExperimentConfig& c, std::ostream& out) {
  require_dataset(c);
  Run run("train-clf", c);
  const auto table = run.stage("load", [&] { return load_csv(c.paths.dataset); });
  const std::uint64_t split_seed = derive_seed(c.seed, stage::split);

  // Real rows are split by class; synthetic rows form their own stratum whose
  // train share matches train_fraction and whose remainder is discarded, so the
  // test set holds real rows only.
  const SampleTable real = table.without_synthetic();
  const SampleTable synthetic = table.synthetic_only();
  auto [train_real, test] = split(real, {c.train_fraction, true, split_seed});
  SampleTable train = train_real;
  Index synthetic_train = 0;
  if (synthetic.rows() > 0) {
    Rng rng(derive_seed(split_seed, 1));
    auto order = rng.permutation(synthetic.rows());
    synthetic_train = static_cast<Index>(
        std::ceil(c.train_fraction * static_cast<double>(synthetic.rows())));
    order.resize(static_cast<std::size_t>(synthetic_train));
    std::sort(order.begin(), order.end());
    train = concat_rows(train_real, synthetic.select(order));
  }

  const Normalizer norm = Normalizer::fit(train.features, c.normalizer);
  SampleTable train_norm = train;
  train_norm.features = norm.apply(train.features);

  TransformerConfig tcfg = c.transformer;
  tcfg.n_features = table.n_features();
  ClassifierHyper hyper = c.classifier;
  hyper.seed = derive_seed(c.seed, stage::classifier);
  const auto trained =
      run.stage("train", [&] { return train_classifier(train_norm, tcfg, hyper); });

  nlohmann::json ckpt = trained.model.to_json();
  ckpt["normalizer"] = norm.to_json();
  ckpt["feature_names"] = table.feature_names;
  ckpt["classifier"] = hyper.to_json();
  ckpt["split"] = {{"train_fraction", c.train_fraction},
                   {"train_rows", train.rows()},
                   {"synthetic_train_rows", synthetic_train},
                   {"test_rows", test.rows()}};
  run.add_json("classifier.json", std::move(ckpt));
  std::string history = "epoch,loss\n";
  for (std::size_t e = 0; e < trained.loss_history.size(); ++e) {
    history += std::to_string(e) + "," + format_double(trained.loss_history[e]) + "\n";
  }
  run.add("loss_history.csv", std::move(history));
  run.add("test.csv", format_csv(test));
  run.commit();
  out << "train-clf: " << train.rows() << " train rows (" << synthetic_train
      << " synthetic), " << test.rows() << " test rows, final loss "
      << trained.loss_history.back() << "\n";
  return exit_ok;
}

int cmd_evaluate(const ExperimentConfig& c, bool include_timing, std::ostream& out,
                 std::ostream& err) {
  require_dataset(c);
  Run run("evaluate", c);
  const nlohmann::json ckpt = parse_json_file(c.paths.model, "classifier checkpoint");
  const TransformerModel model = TransformerModel::from_json(ckpt);
  if (!ckpt.contains("normalizer")) {
    throw InputError("classifier checkpoint has no normalizer");
  }
  const Normalizer norm = Normalizer::from_json(ckpt.at("normalizer"));
  const auto test = run.stage("load", [&] { return load_csv(c.paths.dataset); });
  if (test.n_features() != model.config.n_features) {
    throw InputError("test data has " + std::to_string(test.n_features()) +
                     " features, model expects " + std::to_string(model.config.n_features));
  }
  const Scorer scorer = [&](const Matrix& x) { return model.predict(norm.apply(x)); };
  const auto report = run.stage("evaluate", [&] { return evaluate(scorer, test, c.threshold); });

  nlohmann::json j = report.to_json(include_timing);
  j["far_primary"] = "far_" + to_string(c.far_mode);
  run.add_json("report.json", std::move(j));
  run.add("roc.csv", report.roc_csv());
  run.commit();

  auto show = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << *v;
    } else {
      s << "undefined";
    }
    return s.str();
  };
  out << "evaluate: dr " << show(report.dr) << " far_paper " << show(report.far_paper)
      << " far_conventional " << show(report.far_conventional) << " cr " << show(report.cr)
      << " auc " << show(report.auc) << "\n";
  if (report.has_undefined_core_metric()) {
    err << "gtid: undefined metric: test set lacks a class needed by dr, far or auc\n";
    return exit_undefined_metric;
  }
  return exit_ok;
}

int cmd_diagnose(const ExperimentConfig& c, std::ostream& out) {
  require_dataset(c);
  Run run("diagnose", c);
  Matrix real;
  Matrix synthetic;
  std::vector<std::string> names;
  run.stage("load", [&] {
    const auto table = load_csv(c.paths.dataset);
    names = table.feature_names;
    if (!c.paths.synthetic.empty()) {
      const auto other = load_csv(c.paths.synthetic);
      if (other.feature_names != table.feature_names) {
        throw InputError("real and synthetic files have different feature columns");
      }
      real = table.features;
      synthetic = other.features;
    } else {
      real = table.without_synthetic().features_with_label(1);
      synthetic = table.synthetic_only().features;
    }
  });
  if (real.rows() < 2 || synthetic.rows() < 2) {
    throw InputError("diagnose needs at least 2 real and 2 synthetic rows (got " +
                     std::to_string(real.rows()) + " and " + std::to_string(synthetic.rows()) +
                     ")");
  }
  const auto report = run.stage("compare", [&] { return compare(real, synthetic, names); });
  run.add_json("diagnostics.json", report.to_json());
  run.add("summary.txt", report.summary_table());
  for (const auto& f : report.features) {
    const std::string stem = safe_file_stem(f.name);
    run.add("ecdf_" + stem + ".csv", f.ecdf_csv());
    run.add("kde_" + stem + ".csv", f.kde_csv());
  }
  run.commit();
  out << report.summary_table();
  return exit_ok;
}

} // namespace

void ExperimentConfig::validate() const {
  gan.validate();
  transformer.validate();
  classifier.validate();
  OracleProfile::by_name(profile);
  if (n_incident < 1 || n_non_incident < 1) {
    throw ConfigError("class counts must be positive");
  }
  if (ratio.non_incident <= 0 || ratio.incident < 0) {
    throw ConfigError("ratio needs a positive denominator");
  }
  if (!std::isfinite(threshold)) {
    throw ConfigError("threshold must be finite");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json g = gan.to_json();
  g.erase("seed");
  return {{"paths",
           {{"dataset", paths.dataset.string()},
            {"output_dir", paths.output_dir.string()},
            {"model", paths.model.string()},
            {"gan", paths.gan.string()},
            {"synthetic", paths.synthetic.string()}}},
          {"seed", seed},
          {"data",
           {{"profile", profile}, {"n_incident", n_incident}, {"n_non_incident", n_non_incident}}},
          {"gan", std::move(g)},
          {"transformer", transformer.to_json()},
          {"classifier", classifier.to_json()},
          {"ratio", ratio.to_string()},
          {"threshold", threshold},
          {"far_mode", to_string(far_mode)},
          {"normalizer", to_string(normalizer)},
          {"train_fraction", train_fraction}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j,
                   {"paths", "seed", "data", "gan", "transformer", "classifier", "ratio",
                    "threshold", "far_mode", "normalizer", "train_fraction"},
                   "config");
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p, {"dataset", "output_dir", "model", "gan", "synthetic"}, "config.paths");
      c.paths.dataset = p.value("dataset", "");
      c.paths.output_dir = p.value("output_dir", "");
      c.paths.model = p.value("model", "");
      c.paths.gan = p.value("gan", "");
      c.paths.synthetic = p.value("synthetic", "");
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"profile", "n_incident", "n_non_incident"}, "config.data");
      c.profile = d.value("profile", c.profile);
      c.n_incident = d.value("n_incident", c.n_incident);
      c.n_non_incident = d.value("n_non_incident", c.n_non_incident);
    }
    if (j.contains("gan")) {
      if (j["gan"].contains("seed")) {
        throw ConfigError("config.gan: seed is derived from the top-level seed");
      }
      c.gan = GanConfig::from_json(j["gan"]);
    }
    if (j.contains("transformer")) c.transformer = TransformerConfig::from_json(j["transformer"]);
    if (j.contains("classifier")) c.classifier = ClassifierHyper::from_json(j["classifier"]);
    if (j.contains("ratio")) c.ratio = BalanceRatio::parse(j["ratio"].get<std::string>());
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("far_mode")) c.far_mode = far_mode_from_string(j["far_mode"].get<std::string>());
    if (j.contains("normalizer")) {
      c.normalizer = normalizer_mode_from_string(j["normalizer"].get<std::string>());
    }
    if (j.contains("train_fraction")) c.train_fraction = j["train_fraction"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("paths");
  return json_hash(j);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic incident detection pipeline: oracle data, GAN augmentation, "
               "transformer classifier, evaluation and diagnostics.",
               "gtid"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string data, output, model_path, gan_path, synthetic_path;
  std::string profile, loss_mode, ratio, far_mode, normalizer;
  Index n_incident = 0, n_non = 0, gan_batch = 0, clf_batch = 0;
  int gan_epochs = 0, d_steps = 0, clf_epochs = 0;
  double gan_lr = 0, clf_lr = 0, threshold = 0, train_fraction = 0;
  bool include_timing = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config; flags override it");
    sub->add_option("--seed", seed, "Master seed; every stage seed is derived from it");
    sub->add_option("-o,--output", output, "Output directory (created if missing)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a labeled oracle dataset");
  common(gen);
  gen->add_option("--profile", profile, "default, overlap, separated or gaussian2");
  gen->add_option("--n-incident", n_incident, "Incident rows");
  gen->add_option("--n-non", n_non, "Non-incident rows");

  auto* tg = app.add_subcommand("train-gan", "Train the GAN on the incident rows of a dataset");
  common(tg);
  tg->add_option("--data", data, "Dataset CSV");
  tg->add_option("--epochs", gan_epochs, "Training epochs");
  tg->add_option("--batch-size", gan_batch, "Mini-batch size");
  tg->add_option("--d-steps", d_steps, "Discriminator steps per generator step");
  tg->add_option("--lr", gan_lr, "Adam learning rate");
  tg->add_option("--loss-mode", loss_mode, "paper or non_saturating");

  auto* aug = app.add_subcommand("augment", "Append GAN incident rows up to a class ratio");
  common(aug);
  aug->add_option("--data", data, "Dataset CSV");
  aug->add_option("--gan", gan_path, "GAN checkpoint");
  aug->add_option("--ratio", ratio, "Incident:non-incident ratio, e.g. 1:4, 2:3, 1:1");

  auto* tc = app.add_subcommand("train-clf", "Split a dataset and train the transformer");
  common(tc);
  tc->add_option("--data", data, "Dataset CSV (synthetic rows allowed)");
  tc->add_option("--split", train_fraction, "Train fraction");
  tc->add_option("--epochs", clf_epochs, "Training epochs");
  tc->add_option("--batch-size", clf_batch, "Mini-batch size");
  tc->add_option("--lr", clf_lr, "Adam learning rate");
  tc->add_option("--normalizer", normalizer, "zscore or minmax");

  auto* ev = app.add_subcommand("evaluate", "Score a test CSV with a classifier checkpoint");
  common(ev);
  ev->add_option("--data", data, "Test CSV");
  ev->add_option("--model", model_path, "Classifier checkpoint");
  ev->add_option("--threshold", threshold, "Decision threshold");
  ev->add_option("--far-mode", far_mode, "Primary FAR: paper or conventional");
  ev->add_flag("--include-timing", include_timing, "Add wall-clock timing to report.json");

  auto* dg = app.add_subcommand("diagnose", "Compare real and synthetic distributions");
  common(dg);
  dg->add_option("--data", data,
                 "CSV; alone, its real incident rows are compared with its synthetic rows");
  dg->add_option("--synthetic", synthetic_path, "Second CSV compared against --data");

  std::vector<std::string> storage{"gtid"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) {
    argv.push_back(s.data());
  }

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        return app.exit(e, out, err);
      }
      err << "gtid: usage error: " << one_line(e.what()) << " (see --help)\n";
      return exit_usage;
    }
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) != nullptr &&
                                                sub->count(name) > 0; };

    ExperimentConfig c;
    if (!config_path.empty()) {
      c = ExperimentConfig::from_json(parse_json_file(config_path, "config"));
    }
    if (given("--seed")) c.seed = seed;
    if (given("--output")) c.paths.output_dir = output;
    if (given("--data")) c.paths.dataset = data;
    if (given("--model")) c.paths.model = model_path;
    if (given("--gan")) c.paths.gan = gan_path;
    if (given("--synthetic")) c.paths.synthetic = synthetic_path;
    if (given("--profile")) c.profile = profile;
    if (given("--n-incident")) c.n_incident = n_incident;
    if (given("--n-non")) c.n_non_incident = n_non;
    if (given("--ratio")) c.ratio = BalanceRatio::parse(ratio);
    if (given("--split")) c.train_fraction = train_fraction;
    if (given("--normalizer")) c.normalizer = normalizer_mode_from_string(normalizer);
    if (given("--threshold")) c.threshold = threshold;
    if (given("--far-mode")) c.far_mode = far_mode_from_string(far_mode);
    if (sub == tg) {
      if (given("--epochs")) c.gan.epochs = gan_epochs;
      if (given("--batch-size")) c.gan.batch_size = gan_batch;
      if (given("--d-steps")) c.gan.d_steps_per_g_step = d_steps;
      if (given("--lr")) c.gan.lr = gan_lr;
      if (given("--loss-mode")) c.gan.loss_mode = gan_loss_mode_from_string(loss_mode);
    }
    if (sub == tc) {
      if (given("--epochs")) c.classifier.epochs = clf_epochs;
      if (given("--batch-size")) c.classifier.batch_size = clf_batch;
      if (given("--lr")) c.classifier.lr = clf_lr;
    }
    c.validate();
    if (c.paths.output_dir.empty()) {
      throw ConfigError("no output directory given (-o)");
    }

    if (sub == gen) return cmd_gen_data(c, out);
    if (sub == tg) return cmd_train_gan(c, out);
    if (sub == aug) return cmd_augment(c, out);
    if (sub == tc) return cmd_train_clf(c, out);
    if (sub == ev) return cmd_evaluate(c, include_timing, out, err);
    return cmd_diagnose(c, out);
  } catch (const TrainingDivergenceError& e) {
    err << "gtid: training diverged: " << one_line(e.what()) << "\n";
    return exit_divergence;
  } catch (const UndefinedMetricError& e) {
    err << "gtid: undefined metric: " << one_line(e.what()) << "\n";
    return exit_undefined_metric;
  } catch (const std::exception& e) {
    err << "gtid: error: " << one_line(e.what()) << "\n";
    return exit_usage;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

} // namespace gtid
