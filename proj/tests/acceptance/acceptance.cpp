// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "gtid/cli.hpp"
#include "gtid/diagnostics.hpp"
#include "gtid/gan.hpp"
#include "gtid/metrics.hpp"
#include "gtid/ops.hpp"
#include "gtid/serialization.hpp"
#include "gtid/transformer.hpp"
#include "oracles.hpp"

using namespace gtid;
using namespace gtid::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failures; the first few are kept for the report line.
class Tally {
public:
  void require(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) {
      ++failures_;
      if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + " (" + std::to_string(checks_) + " checks)"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) +
                       " checks failed: " + notes_};
  }

private:
  int checks_ = 0;
  int failures_ = 0;
  std::string notes_;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// ---------------------------------------------------------------------------
// 1. Gradients of every primitive and of random composed graphs.

Outcome gradient_suite() {
  Tally t;
  Rng rng(101);
  auto check = [&](const std::string& name, const std::function<Tensor()>& f,
                   const std::vector<Tensor>& params) {
    const auto r = check_gradients(f, params, 1e-4, 1e-7, 1e-6);
    t.require(r.ok, name + ": " + r.detail);
  };
  auto leaf = [&](Index r, Index c, double lo = -1.0, double hi = 1.0) {
    return random_leaf(r, c, rng, lo, hi);
  };

  auto a = leaf(3, 4), b = leaf(4, 2), c = leaf(3, 4), row = leaf(1, 4), up = leaf(3, 4);
  check("matmul", [&] { return sum(tanh(matmul(a, b))); }, {a, b});
  for (auto op : {ElementwiseOp::add, ElementwiseOp::sub, ElementwiseOp::mul}) {
    check("elementwise", [&] { return sum(mul(elementwise(op, a, c), up)); }, {a, c});
    check("broadcast", [&] { return sum(mul(elementwise(op, a, row), up)); }, {a, row});
  }
  auto x = leaf(3, 4, -2, 2);
  for (auto k : {Activation::sigmoid, Activation::tanh, Activation::relu}) {
    check("activation", [&] { return sum(mul(activation(k, x), up)); }, {x});
  }
  check("softmax_rows", [&] { return sum(mul(softmax_rows(x), up)); }, {x});
  check("mean", [&] { return mean(mul(x, x)); }, {x});
  check("sum", [&] { return sum(mul(x, x)); }, {x});
  auto p1 = leaf(3, 1), p2 = leaf(3, 3), w4 = leaf(3, 4);
  check("concat_cols", [&] { return sum(mul(concat_cols({p1, p2}), w4)); }, {p1, p2});
  check("slice_cols", [&] { return sum(tanh(slice_cols(x, 1, 2))); }, {x});
  auto pos = leaf(3, 4, 0.05, 0.95);
  check("log clamped", [&] { return sum(mul(log_op(pos), up)); }, {pos});
  auto big = leaf(3, 4, 0.5, 5.0);
  check("log", [&] { return sum(mul(log_op(big, LogClamp{false}), up)); }, {big});
  auto wt = leaf(4, 3);
  check("transpose", [&] { return sum(mul(transpose(x), wt)); }, {x});
  check("affine", [&] { return sum(mul(affine(x, -1.7, 0.4), up)); }, {x});
  auto g = leaf(1, 4), be = leaf(1, 4);
  check("layer_norm_rows", [&] { return sum(mul(layer_norm_rows(x, g, be), up)); }, {x, g, be});
  auto feats = leaf(2, 3), emb = leaf(3, 4), up6 = leaf(6, 4);
  check("token_embed", [&] { return sum(mul(token_embed(feats, emb), up6)); }, {feats, emb});
  auto q = leaf(6, 4), k = leaf(6, 4), v = leaf(6, 4);
  check("segment_attention", [&] { return sum(mul(segment_attention(q, k, v, 3, 2), up6)); },
        {q, k, v});
  auto up2 = leaf(2, 4);
  check("segment_mean_rows", [&] { return sum(mul(segment_mean_rows(q, 3), up2)); }, {q});

  // Random graphs of depth <= 6.
  for (int graph = 0; graph < 20; ++graph) {
    std::vector<Tensor> params;
    auto param = [&](Index r, Index c) {
      params.push_back(random_leaf(r, c, rng));
      return params.back();
    };
    const Index m = 2 + static_cast<Index>(rng.below(3));
    Tensor h = param(m, 2 + static_cast<Index>(rng.below(3)));
    const int depth = 1 + static_cast<int>(rng.below(6));
    std::vector<std::function<Tensor(const Tensor&)>> steps;
    for (int d = 0; d < depth; ++d) {
      const Index rows = h.rows(), cols = h.cols();
      std::function<Tensor(const Tensor&)> step;
      switch (rng.below(14)) {
      case 0: step = [](const Tensor& z) { return sigmoid(z); }; break;
      case 1: step = [](const Tensor& z) { return tanh(z); }; break;
      case 2: step = [](const Tensor& z) { return relu(z); }; break;
      case 3: step = [](const Tensor& z) { return softmax_rows(z); }; break;
      case 4: {
        auto w = param(cols, 2 + static_cast<Index>(rng.below(3)));
        step = [w](const Tensor& z) { return matmul(z, w); };
        break;
      }
      case 5: {
        auto o = param(rows, cols);
        step = [o](const Tensor& z) { return add(z, o); };
        break;
      }
      case 6: {
        auto o = param(rows, cols);
        step = [o](const Tensor& z) { return mul(z, o); };
        break;
      }
      case 7: {
        auto r = param(1, cols);
        step = [r](const Tensor& z) { return sub(z, r); };
        break;
      }
      case 8: {
        auto o = param(rows, 2);
        step = [o](const Tensor& z) { return concat_cols({z, o}); };
        break;
      }
      case 9:
        if (cols >= 2) {
          step = [cols](const Tensor& z) { return slice_cols(z, 1, cols - 1); };
        } else {
          step = [](const Tensor& z) { return tanh(z); };
        }
        break;
      case 10: step = [](const Tensor& z) { return transpose(z); }; break;
      case 11: {
        auto gg = param(1, cols), bb = param(1, cols);
        if (cols >= 2) {
          step = [gg, bb](const Tensor& z) { return layer_norm_rows(z, gg, bb); };
        } else {
          step = [](const Tensor& z) { return sigmoid(z); };
        }
        break;
      }
      case 12: step = [](const Tensor& z) { return log_op(sigmoid(z)); }; break;
      default: step = [](const Tensor& z) { return affine(z, 0.7, -0.2); }; break;
      }
      // Shapes of later parameters depend on this step's output.
      {
        NoGradGuard guard;
        h = step(h);
      }
      steps.push_back(step);
    }
    const Tensor input = params.front();
    const bool use_mean = rng.below(2) == 0;
    auto f = [&steps, input, use_mean] {
      Tensor z = input;
      for (const auto& s : steps) z = s(z);
      return use_mean ? mean(z) : sum(z);
    };
    check("graph " + std::to_string(graph), f, params);
  }
  return t.outcome("all primitives and 20 random graphs within rel 1e-4 / abs 1e-7");
}

// ---------------------------------------------------------------------------
// 2. Attention invariants.

Outcome attention_invariants() {
  Tally t;
  Rng rng(202);
  double worst_sum = 0.0, worst_oracle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index heads = std::array<Index, 3>{1, 2, 4}[rng.below(3)];
    const Index d_model = heads * (1 + static_cast<Index>(rng.below(16 / heads)));
    const Index L = 1 + static_cast<Index>(rng.below(8));
    TransformerConfig cfg;
    cfg.n_features = L;
    cfg.d_model = d_model;
    cfg.heads = heads;
    cfg.layers = 1;
    const auto model = TransformerModel::init(cfg, rng.next_u64());
    const auto& p = model.layers[0];
    const Matrix x = random_matrix(L, d_model, rng, -3, 3);
    const Tensor xt = Tensor::from(x);
    const Tensor q = matmul(xt, p.wq), k = matmul(xt, p.wk);
    const Index dk = cfg.d_k();
    for (Index j = 0; j < heads; ++j) {
      const Matrix a =
          attention_weights(slice_cols(q, j * dk, dk), slice_cols(k, j * dk, dk)).value();
      t.require((a.array() >= 0.0).all(), "negative attention weight");
      for (Index r = 0; r < L; ++r) worst_sum = std::max(worst_sum, std::abs(a.row(r).sum() - 1.0));
    }
    const Matrix got = multi_head_attention(xt, p, cfg).value();
    const Matrix want =
        naive_attention(x, p.wq.value(), p.wk.value(), p.wv.value(), p.wo.value(), heads);
    worst_oracle = std::max(worst_oracle, (got - want).cwiseAbs().maxCoeff());
  }
  t.require(worst_sum <= 1e-12, "row sum off by " + fmt(worst_sum));
  t.require(worst_oracle <= 1e-12, "oracle gap " + fmt(worst_oracle));
  return t.outcome("100 configs, max |row sum - 1| " + fmt(worst_sum) + ", max oracle gap " +
                   fmt(worst_oracle));
}

// ---------------------------------------------------------------------------
// 3. Positional encoding.

Outcome positional_encoding_values() {
  Tally t;
  for (Index d_model : {2, 4, 8, 32})
    for (Index dim = 0; dim < d_model; ++dim)
      t.require(positional_encoding(0, dim, d_model, 100.0) == (dim % 2 == 0 ? 0.0 : 1.0),
                "pos 0 dim " + std::to_string(dim));
  t.require(std::abs(positional_encoding(1, 0, 4, 100.0) - std::sin(1.0)) <= 1e-12, "sin(1)");
  t.require(std::abs(positional_encoding(1, 0, 4, 100.0) - 0.841471) <= 5e-7, "0.841471");
  t.require(std::abs(positional_encoding(5, 2, 4, 100.0) - std::sin(0.5)) <= 1e-12, "sin(0.5)");
  t.require(std::abs(positional_encoding(5, 2, 4, 100.0) - 0.479426) <= 5e-7, "0.479426");
  const Matrix table = positional_table(200, 32, 100.0);
  t.require((table.array().abs() <= 1.0).all(), "value outside [-1, 1]");
  return t.outcome("spot values exact, 6400 table values in [-1, 1]");
}

// ---------------------------------------------------------------------------
// 4. AUC versus the pairwise statistic.

Outcome auc_oracle() {
  Tally t;
  Rng rng(404);
  double worst = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    const Index n = 2 + static_cast<Index>(rng.below(11));
    Eigen::VectorXd s(n);
    Eigen::VectorXi y(n);
    for (Index i = 0; i < n; ++i) {
      s(i) = static_cast<double>(rng.below(6)) / 5.0; // few levels, so ties are common
      y(i) = static_cast<int>(rng.below(2));
    }
    const auto pos = rng.below(static_cast<std::uint64_t>(n));
    const auto neg = (pos + 1 + rng.below(static_cast<std::uint64_t>(n - 1))) % n;
    y(static_cast<Index>(pos)) = 1;
    y(static_cast<Index>(neg)) = 0;
    worst = std::max(worst, std::abs(roc_and_auc(s, y).auc - mann_whitney(s, y)));
  }
  t.require(worst <= 1e-12, "max gap " + fmt(worst));
  return t.outcome("500 instances, max |auc - pairwise| " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 5. Metric definitions.

Outcome metric_definitions() {
  Tally t;
  ConfusionCounts c;
  c.tp = 8;
  c.fp = 2;
  c.tn = 6;
  c.fn = 2;
  t.require(false_alarm_rate(c, FarMode::paper) == 0.25, "far_paper fp=2 tp=8");
  t.require(false_alarm_rate(c, FarMode::conventional) == 0.25, "far_conventional fp=2 tn=6");
  t.require(detection_rate(c) == 0.8, "dr tp=8 fn=2");
  t.require(classification_rate(c) == 14.0 / 18.0, "cr");
  ConfusionCounts even;
  even.tp = even.fp = even.tn = even.fn = 1;
  t.require(classification_rate(even) == 0.5, "cr even");
  Eigen::VectorXd s(4);
  s << 0.9, 0.4, 0.5, 0.1;
  Eigen::VectorXi y(4);
  y << 1, 1, 0, 0;
  const auto h = confusion(s, y, 0.5);
  t.require(h.tp == 1 && h.fn == 1 && h.fp == 1 && h.tn == 1, "hand tally");
  t.require(roc_and_auc(s, y).auc == 0.75, "auc 0.75");

  Eigen::VectorXi labels(10);
  labels << 1, 0, 0, 1, 0, 0, 0, 1, 0, 0;
  const Eigen::VectorXd perfect = labels.cast<double>();
  const Eigen::VectorXd anti = (1.0 - perfect.array()).matrix();
  const auto good = evaluate_scores(perfect, labels, 0.5);
  t.require(*good.dr == 1.0 && *good.far_paper == 0.0 && *good.far_conventional == 0.0 &&
                *good.cr == 1.0 && *good.auc == 1.0,
            "perfect scorer");
  const auto bad = evaluate_scores(anti, labels, 0.5);
  t.require(*bad.dr == 0.0 && *bad.cr == 0.0 && *bad.auc == 0.0 && *bad.far_conventional == 1.0 &&
                !bad.far_paper.has_value(),
            "anti-perfect scorer");
  return t.outcome("hand-tallied examples and boundary scorers exact");
}

// ---------------------------------------------------------------------------
// 6. GAN recovers a known Gaussian.

Outcome gan_recovery() {
  Tally t;
  const auto profile = OracleProfile::gaussian2();
  const Matrix train = generate_oracle_dataset(profile, 1000, 1, 606).table.features_with_label(1);
  const Matrix fresh = generate_oracle_dataset(profile, 1000, 1, 607).table.features_with_label(1);
  GanConfig cfg;
  cfg.epochs = 500;
  cfg.seed = 608;
  const auto model = train_gan(train, cfg);
  Rng rng(609);
  const Matrix gen = generate(model, 5000, rng);
  std::string summary;
  for (Index f = 0; f < 2; ++f) {
    const Eigen::VectorXd col = gen.col(f);
    const auto st = summary_stats(col);
    const double mean_err = std::abs(st.mean - profile.incident.mean(f));
    const double sd_err = std::abs(*st.sd - profile.incident.sd(f));
    const double ks = ks_statistic(col, Eigen::VectorXd(fresh.col(f)));
    t.require(mean_err <= 0.1, "feature " + std::to_string(f) + " mean error " + fmt(mean_err));
    t.require(sd_err <= 0.15, "feature " + std::to_string(f) + " sd error " + fmt(sd_err));
    t.require(ks <= 0.15, "feature " + std::to_string(f) + " ks " + fmt(ks));
    summary += "f" + std::to_string(f) + " mean err " + fmt(mean_err) + " sd err " + fmt(sd_err) +
               " ks " + fmt(ks) + "; ";
  }
  return t.outcome(summary + "loss mode " + to_string(cfg.loss_mode));
}

// ---------------------------------------------------------------------------
// 7. Balancing arithmetic.

Outcome balancing_arithmetic() {
  Tally t;
  const auto data = generate_oracle_dataset(OracleProfile::standard(), 1600, 7240, 707);
  GanConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 708;
  const auto model = train_gan(data.table.features_with_label(1), cfg);
  const std::vector<std::pair<BalanceRatio, Index>> cases{
      {{1, 4}, 210}, {{2, 3}, 3227}, {{1, 1}, 5640}};
  for (const auto& [ratio, expected] : cases) {
    Rng rng(709);
    const auto res = augment_to_ratio(data.table, model, ratio, rng);
    const std::string r = ratio.to_string();
    t.require(res.appended == expected, r + " appended " + std::to_string(res.appended));
    t.require(res.table.count_synthetic() == expected, r + " flagged count");
    t.require(res.table.rows() == 8840 + expected, r + " rows");
    t.require(res.table.features.topRows(8840) == data.table.features, r + " real features");
    t.require(res.table.labels.head(8840) == data.table.labels, r + " real labels");
    t.require(res.table.synthetic.head(8840).isZero(), r + " real flags");
    t.require((res.table.labels.tail(expected).array() == 1).all(), r + " synthetic labels");
    t.require(res.table.count_label(1) * ratio.non_incident >= 7240 * ratio.incident,
              r + " ratio reached");
  }
  return t.outcome("1:4 / 2:3 / 1:1 append 210 / 3227 / 5640, real rows preserved");
}

// ---------------------------------------------------------------------------
// 8. Classifier competence on the default profile.

struct SplitRun {
  SampleTable train;
  SampleTable test;
};

SplitRun split_and_normalize(const SampleTable& table, std::uint64_t seed) {
  auto [train, test] = split(table, {0.6, true, seed});
  return {train, test};
}

EvaluationReport train_and_score(const SampleTable& train, const SampleTable& test,
                                 std::uint64_t seed) {
  const Normalizer norm = Normalizer::fit(train.features, NormalizerMode::zscore);
  SampleTable scaled = train;
  scaled.features = norm.apply(train.features);
  TransformerConfig cfg;
  cfg.n_features = train.n_features();
  ClassifierHyper hyper;
  hyper.epochs = 30;
  hyper.seed = seed;
  const auto trained = train_classifier(scaled, cfg, hyper);
  return evaluate_scores(trained.model.predict(norm.apply(test.features)), test.labels, 0.5);
}

Outcome classifier_competence() {
  Tally t;
  const auto data = generate_oracle_dataset(OracleProfile::standard(), 1600, 7240, 808);
  const auto s = split_and_normalize(data.table, 809);
  const auto report = train_and_score(s.train, s.test, 810);
  t.require(report.auc.has_value() && *report.auc >= 0.95, "auc " + fmt(report.auc.value_or(-1)));
  t.require(report.dr.has_value() && *report.dr >= 0.9, "dr " + fmt(report.dr.value_or(-1)));
  return t.outcome("test auc " + fmt(*report.auc) + ", dr " + fmt(*report.dr) + " over " +
                   std::to_string(s.test.rows()) + " test rows");
}

// ---------------------------------------------------------------------------
// 9. Detection rate rises as augmentation approaches balance.

Outcome balance_trend() {
  Tally t;
  const std::vector<std::optional<BalanceRatio>> ratios{
      std::nullopt, BalanceRatio{1, 4}, BalanceRatio{2, 3}, BalanceRatio{1, 1}};
  std::vector<double> mean_dr(ratios.size(), 0.0);
  const std::vector<std::uint64_t> seeds{901, 902, 903};
  for (auto seed : seeds) {
    const auto data = generate_oracle_dataset(OracleProfile::overlap(), 400, 3600, seed);
    const auto s = split_and_normalize(data.table, derive_seed(seed, stage::split));
    GanConfig gcfg;
    gcfg.seed = derive_seed(seed, stage::gan);
    const auto gan = train_gan(s.train.features_with_label(1), gcfg);
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      SampleTable train = s.train;
      if (ratios[r]) {
        Rng rng(derive_seed(seed, stage::augment));
        train = augment_to_ratio(s.train, gan, *ratios[r], rng).table;
      }
      const auto report = train_and_score(train, s.test, derive_seed(seed, stage::classifier));
      mean_dr[r] += *report.dr / static_cast<double>(seeds.size());
    }
  }
  std::string summary = "mean dr";
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    summary += " " + (ratios[r] ? ratios[r]->to_string() : std::string("none")) + "=" +
               fmt(mean_dr[r]);
    if (r > 0) t.require(mean_dr[r] >= mean_dr[r - 1], "drop at ratio index " + std::to_string(r));
  }
  const auto out = t.outcome(summary);
  return out.pass ? out : Outcome{false, out.detail + " | " + summary};
}

// ---------------------------------------------------------------------------
// 10. Diagnostics.

Outcome diagnostics_checks() {
  Tally t;
  Rng rng(1001);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(300));
    Eigen::VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = rng.normal(rng.uniform(-10, 10), rng.uniform(0.1, 5));
    const double h = silverman_bandwidth(x);
    const Eigen::VectorXd grid =
        Eigen::VectorXd::LinSpaced(2001, x.minCoeff() - 5 * h, x.maxCoeff() + 5 * h);
    const Eigen::VectorXd d = kde(x, grid);
    double area = 0.0;
    for (Index i = 1; i < grid.size(); ++i) area += 0.5 * (grid(i) - grid(i - 1)) * (d(i) + d(i - 1));
    t.require(std::abs(area - 1.0) <= 0.01, "kde mass " + fmt(area));
    const auto e = ecdf(x);
    t.require(e.back().probability == 1.0, "ecdf end");
    for (std::size_t i = 1; i < e.size(); ++i)
      t.require(e[i].probability >= e[i - 1].probability && e[i].value > e[i - 1].value,
                "ecdf monotone");
  }
  Matrix m(200, 4);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  for (const auto& f : compare(m, m).features) t.require(f.ks == 0.0, "compare(X, X) ks");
  Eigen::VectorXd a(2), b(2);
  a << 1, 2;
  b << 1.5, 2.5;
  t.require(ks_statistic(a, b) == 0.5, "ks([1,2],[1.5,2.5])");
  return t.outcome("kde mass within 0.01, ecdf ends at 1, self-compare ks 0, ks example 0.5");
}

// ---------------------------------------------------------------------------
// 11. Pipeline determinism.

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome pipeline_determinism() {
  Tally t;
  const auto root = fs::temp_directory_path() / "gtid_acceptance_pipeline";
  fs::remove_all(root);
  std::vector<std::string> reports;
  for (const char* run : {"first", "second"}) {
    const auto dir = (root / run).string();
    const std::string seed = "2024";
    bool ok = cli({"gen-data", "--seed", seed, "-o", dir}) == 0;
    ok = ok && cli({"train-gan", "--seed", seed, "--data", dir + "/data.csv", "-o", dir}) == 0;
    ok = ok && cli({"augment", "--seed", seed, "--data", dir + "/data.csv", "--gan",
                    dir + "/gan.json", "--ratio", "1:1", "-o", dir}) == 0;
    ok = ok && cli({"train-clf", "--seed", seed, "--data", dir + "/augmented.csv", "-o", dir}) == 0;
    ok = ok && cli({"evaluate", "--seed", seed, "--data", dir + "/test.csv", "--model",
                    dir + "/classifier.json", "-o", dir}) == 0;
    t.require(ok, std::string(run) + " run failed");
    reports.push_back(ok ? read_file(root / run / "report.json") : std::string());
  }
  t.require(!reports[0].empty() && reports[0] == reports[1], "report.json differs");
  const std::string hash = fnv1a_hex(reports[0]);
  fs::remove_all(root);
  return t.outcome("two runs, identical report.json (fnv1a " + hash + ", " +
                   std::to_string(reports[0].size()) + " bytes)");
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds; // 0 means no runtime limit
  Outcome (*run)();
};

} // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient suite", 10, gradient_suite},
      {2, "attention invariants", 5, attention_invariants},
      {3, "positional encoding", 0, positional_encoding_values},
      {4, "AUC oracle", 5, auc_oracle},
      {5, "metric definitions", 0, metric_definitions},
      {6, "GAN distribution recovery", 180, gan_recovery},
      {7, "balancing arithmetic", 0, balancing_arithmetic},
      {8, "classifier competence", 300, classifier_competence},
      {9, "balance-ratio trend", 900, balance_trend},
      {10, "diagnostics", 0, diagnostics_checks},
      {11, "determinism", 0, pipeline_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += " | runtime " + fmt(secs) + " s exceeds " + fmt(c.budget_seconds) + " s";
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
