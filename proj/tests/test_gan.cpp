#include <doctest.h>

#include <cmath>

#include "gtid/error.hpp"
#include "gtid/gan.hpp"
#include "gtid/serialization.hpp"

using namespace gtid;

namespace {

std::string params_hash(const std::vector<Tensor>& params) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : params) j.push_back(matrix_to_json(p.value()));
  return json_hash(j);
}

Matrix gaussian_rows(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, 2);
  for (Index i = 0; i < n; ++i) {
    m(i, 0) = rng.normal(0.3, 0.5);
    m(i, 1) = rng.normal(-0.2, 0.4);
  }
  return m;
}

GanConfig quick_config(std::uint64_t seed = 1) {
  GanConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = seed;
  return c;
}

} // namespace

TEST_CASE("noise is seeded standard normal") {
  Rng a(5), b(5);
  const auto za = sample_noise(10000, 1, a).value();
  CHECK(za == sample_noise(10000, 1, b).value());
  CHECK(za.rows() == 10000);
  const double mean = za.mean();
  const double var = (za.array() - mean).square().sum() / (za.size() - 1);
  CHECK(std::abs(mean) <= 0.05);
  CHECK(std::abs(var - 1.0) <= 0.05);
  CHECK(sample_noise(3, 16, a).value().cols() == 16);
  CHECK_THROWS_AS(sample_noise(0, 4, a), PreconditionError);
}

TEST_CASE("discriminator loss values") {
  const auto ones = Tensor::from(Matrix::Ones(4, 1));
  const auto zeros = Tensor::from(Matrix::Zero(4, 1));
  const double at_optimum = discriminator_loss(ones, zeros).item();
  CHECK(at_optimum >= 0.0);
  CHECK(at_optimum <= -2.0 * std::log(1.0 - 1e-7) + 1e-15);
  const auto half = Tensor::from(Matrix::Constant(4, 1, 0.5));
  CHECK(std::abs(discriminator_loss(half, half).item() - 2.0 * std::log(2.0)) < 1e-12);
  const auto r = Tensor::matrix({{0.9}, {0.6}, {0.3}});
  const auto f = Tensor::matrix({{0.2}, {0.7}, {0.1}});
  const auto rp = Tensor::matrix({{0.3}, {0.9}, {0.6}});
  const auto fp = Tensor::matrix({{0.1}, {0.2}, {0.7}});
  CHECK(std::abs(discriminator_loss(r, f).item() - discriminator_loss(rp, fp).item()) < 1e-15);
  CHECK_THROWS_AS(discriminator_loss(Tensor::matrix({{1.5}}), f), NumericDomainError);
  CHECK_THROWS_AS(discriminator_loss(r, Tensor::matrix({{-0.1}})), NumericDomainError);
}

TEST_CASE("paper-sign discriminator objective never exceeds zero") {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    Matrix a(5, 1), b(5, 1);
    for (Index i = 0; i < 5; ++i) {
      a(i, 0) = rng.uniform();
      b(i, 0) = rng.uniform();
    }
    CHECK(-discriminator_loss(Tensor::from(a), Tensor::from(b)).item() <= 0.0);
  }
}

TEST_CASE("generator loss values") {
  const auto half = Tensor::from(Matrix::Constant(4, 1, 0.5));
  CHECK(std::abs(generator_loss(half, GanLossMode::paper).item() + std::log(2.0)) < 1e-12);
  CHECK(std::abs(generator_loss(half, GanLossMode::non_saturating).item() - std::log(2.0)) <
        1e-12);
  const auto one = Tensor::from(Matrix::Ones(4, 1));
  CHECK(generator_loss(one, GanLossMode::paper).item() == doctest::Approx(std::log(1e-7)));
  CHECK_THROWS_AS(gan_loss_mode_from_string("wasserstein"), ConfigError);
}

TEST_CASE("config validation") {
  GanConfig c;
  CHECK_NOTHROW(c.validate());
  c.noise_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GanConfig{};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GanConfig{};
  c.gen_hidden = {64, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GanConfig{};
  c.d_steps_per_g_step = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(GanConfig::from_json({{"noise", 3}}), ConfigError);
  const auto j = quick_config().to_json();
  CHECK(GanConfig::from_json(j).to_json() == j);
}

TEST_CASE("network shapes") {
  GanTrainer trainer(gaussian_rows(64, 1), quick_config());
  const auto& m = trainer.model();
  CHECK(m.generator.input_width() == 16);
  CHECK(m.generator.output_width() == 2);
  CHECK(m.generator.layers.size() == 3);
  CHECK(m.generator.layers[0].weight.cols() == 64);
  CHECK(m.generator.layers[1].weight.cols() == 64);
  CHECK(m.discriminator.input_width() == 2);
  CHECK(m.discriminator.output_width() == 1);
  CHECK(m.discriminator.layers[0].weight.cols() == 64);
  CHECK(m.discriminator.layers[1].weight.cols() == 32);
  CHECK(trainer.normalized_data().cwiseAbs().maxCoeff() <= 1.0);
  Rng rng(1);
  const auto d = m.discriminator.forward(Tensor::from(trainer.normalized_data())).value();
  CHECK((d.array() > 0.0).all());
  CHECK((d.array() < 1.0).all());
}

TEST_CASE("each step moves only its own network") {
  GanTrainer trainer(gaussian_rows(64, 2), quick_config());
  const auto& m = trainer.model();
  const std::string g0 = params_hash(m.generator.parameters());
  const std::string d0 = params_hash(m.discriminator.parameters());
  trainer.discriminator_step(trainer.normalized_data().topRows(16));
  const std::string d1 = params_hash(m.discriminator.parameters());
  CHECK(params_hash(m.generator.parameters()) == g0);
  CHECK(d1 != d0);
  trainer.generator_step();
  CHECK(params_hash(m.discriminator.parameters()) == d1);
  CHECK(params_hash(m.generator.parameters()) != g0);
  for (const auto& p : m.generator.parameters()) CHECK(p.requires_grad());
  for (const auto& p : m.discriminator.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("training is deterministic and records one history row per epoch") {
  const Matrix data = gaussian_rows(80, 3);
  const auto a = train_gan(data, quick_config(7));
  const auto b = train_gan(data, quick_config(7));
  CHECK(a.to_json().dump() == b.to_json().dump());
  REQUIRE(a.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.history[e].epoch == static_cast<int>(e));
    CHECK(a.history[e].loss_d <= 0.0);
  }
  const auto c = train_gan(data, quick_config(8));
  CHECK(a.to_json().dump() != c.to_json().dump());
  const std::string csv = a.history_csv();
  CHECK(csv.rfind("epoch,loss_d,loss_g,mean_d_real,mean_d_fake\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("too few rows is a configuration error") {
  CHECK_THROWS_AS(train_gan(gaussian_rows(31, 4), quick_config()), ConfigError);
  CHECK_NOTHROW(GanTrainer(gaussian_rows(32, 4), quick_config()));
}

TEST_CASE("generation") {
  const auto model = train_gan(gaussian_rows(64, 5), quick_config());
  Rng r1(1), r2(2), r1b(1);
  CHECK(generate(model, 0, r1).rows() == 0);
  CHECK(generate(model, 0, r1).cols() == 2);
  const Matrix a = generate(model, 50, r1);
  const Matrix b = generate(model, 50, r2);
  CHECK(a.rows() == 50);
  CHECK(a != b);
  Rng again(1);
  (void)generate(model, 0, again);
  CHECK(generate(model, 50, again) == a);
  // Outputs sit inside the de-normalized tanh range.
  const Matrix back = model.normalizer.apply(a);
  CHECK(back.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  CHECK((model.normalizer.invert(back) - a).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("checkpoint round trip") {
  const auto model = train_gan(gaussian_rows(64, 6), quick_config());
  const std::string text = model.to_json().dump();
  const auto back = GanModel::from_json(nlohmann::json::parse(text));
  CHECK(back.to_json().dump() == text);
  Rng a(3), b(3);
  CHECK(generate(model, 20, a) == generate(back, 20, b));
  auto bad = nlohmann::json::parse(text);
  bad["n_features"] = 3;
  CHECK_THROWS_AS(GanModel::from_json(bad), InputError);
}

TEST_CASE("ratio parsing and row arithmetic") {
  CHECK(BalanceRatio::parse("2:3").incident == 2);
  CHECK(BalanceRatio::parse("2:3").non_incident == 3);
  CHECK(BalanceRatio::parse("1:4").to_string() == "1:4");
  CHECK_THROWS_AS(BalanceRatio::parse("1:0"), ConfigError);
  CHECK_THROWS_AS(BalanceRatio::parse("1/2"), ConfigError);
  CHECK_THROWS_AS(BalanceRatio::parse("a:b"), ConfigError);
  CHECK_THROWS_AS(BalanceRatio::parse("1:2x"), ConfigError);
  CHECK(synthetic_rows_needed(1600, 7240, {1, 1}) == 5640);
  CHECK(synthetic_rows_needed(1600, 7240, {1, 4}) == 210);
  CHECK(synthetic_rows_needed(1600, 7240, {2, 3}) == 3227);
  CHECK(synthetic_rows_needed(500, 100, {1, 1}) == 0);
  // Oracle: smallest k with (n_inc + k) * non >= n_non * inc.
  for (Index inc_n = 1; inc_n < 30; inc_n += 7)
    for (Index non_n = 1; non_n < 60; non_n += 11)
      for (std::int64_t a = 0; a < 4; ++a)
        for (std::int64_t b = 1; b < 5; ++b) {
          Index k = 0;
          while ((inc_n + k) * b < non_n * a) ++k;
          CHECK(synthetic_rows_needed(inc_n, non_n, {a, b}) == k);
        }
}

TEST_CASE("augmentation keeps real rows and flags appended ones") {
  Rng rng(9);
  const Index n_inc = 40, n_non = 100;
  Matrix x(n_inc + n_non, 2);
  Eigen::VectorXi y(n_inc + n_non);
  for (Index i = 0; i < x.rows(); ++i) {
    y(i) = i < n_inc ? 1 : 0;
    x(i, 0) = rng.normal(y(i) ? 0.3 : -1.0, 0.5);
    x(i, 1) = rng.normal(y(i) ? -0.2 : 1.0, 0.4);
  }
  const auto table = make_table({"f1", "f2"}, x, y);
  const auto model = train_gan(table.features_with_label(1), quick_config());
  Rng arng(10);
  const auto res = augment_to_ratio(table, model, {1, 1}, arng);
  CHECK(res.appended == 60);
  CHECK(res.target_incidents == 100);
  CHECK(res.table.rows() == 200);
  CHECK(res.table.count_label(1) == 100);
  CHECK(res.table.count_synthetic() == 60);
  CHECK(res.table.features.topRows(140) == table.features);
  CHECK(res.table.labels.head(140) == table.labels);
  CHECK((res.table.synthetic.tail(60).array() == 1).all());
  CHECK((res.table.labels.tail(60).array() == 1).all());
  const auto stripped = res.table.without_synthetic();
  CHECK(stripped.features == table.features);
  CHECK(stripped.labels == table.labels);
  CHECK(stripped.feature_names == table.feature_names);

  Rng brng(10);
  const auto again = augment_to_ratio(table, model, {1, 1}, brng);
  CHECK(again.table.features == res.table.features);

  Rng crng(11);
  const auto met = augment_to_ratio(res.table, model, {1, 1}, crng);
  CHECK(met.appended == 0);
  CHECK(met.table.features == res.table.features);

  const auto one_class = table.select(std::vector<Index>{0, 1, 2});
  CHECK_THROWS_AS(augment_to_ratio(one_class, model, {1, 1}, crng), ConfigError);
}
