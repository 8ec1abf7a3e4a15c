#include "gtid/gan.hpp"

#include <cmath>
#include <string>

#include "gtid/error.hpp"
#include "gtid/serialization.hpp"

namespace gtid {

namespace {

void check_probabilities(const Tensor& t, const char* what) {
  const auto& v = t.value().array();
  if ((v < 0.0).any() || (v > 1.0).any()) {
    throw NumericDomainError(std::string(what) + ": discriminator outputs must lie in [0, 1]");
  }
}

void set_trainable(const std::vector<Tensor>& params, bool on) {
  for (auto p : params) {
    p.set_requires_grad(on);
  }
}

std::string activation_name(Activation a) {
  switch (a) {
  case Activation::sigmoid: return "sigmoid";
  case Activation::tanh: return "tanh";
  case Activation::relu: return "relu";
  }
  return "relu";
}

double mean_of(const Tensor& t) { return t.value().mean(); }

} // namespace

std::string to_string(GanLossMode mode) {
  return mode == GanLossMode::paper ? "paper" : "non_saturating";
}

GanLossMode gan_loss_mode_from_string(const std::string& name) {
  if (name == "paper") {
    return GanLossMode::paper;
  }
  if (name == "non_saturating") {
    return GanLossMode::non_saturating;
  }
  throw ConfigError("unknown GAN loss mode '" + name + "' (expected paper or non_saturating)");
}

void GanConfig::validate() const {
  if (noise_dim < 1) {
    throw ConfigError("gan: noise_dim must be at least 1");
  }
  if (batch_size < 2) {
    throw ConfigError("gan: batch_size must be at least 2");
  }
  for (const auto* widths : {&gen_hidden, &disc_hidden}) {
    for (Index w : *widths) {
      if (w < 1) {
        throw ConfigError("gan: layer widths must be at least 1");
      }
    }
  }
  if (d_steps_per_g_step < 1) {
    throw ConfigError("gan: d_steps_per_g_step must be at least 1");
  }
  if (epochs < 1) {
    throw ConfigError("gan: epochs must be at least 1");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("gan: lr must be positive");
  }
}

nlohmann::json GanConfig::to_json() const {
  return {{"noise_dim", noise_dim},
          {"gen_hidden", gen_hidden},
          {"disc_hidden", disc_hidden},
          {"batch_size", batch_size},
          {"d_steps_per_g_step", d_steps_per_g_step},
          {"epochs", epochs},
          {"lr", lr},
          {"seed", seed},
          {"loss_mode", to_string(loss_mode)}};
}

GanConfig GanConfig::from_json(const nlohmann::json& j) {
  GanConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "noise_dim") c.noise_dim = value.get<Index>();
    else if (key == "gen_hidden") c.gen_hidden = value.get<std::vector<Index>>();
    else if (key == "disc_hidden") c.disc_hidden = value.get<std::vector<Index>>();
    else if (key == "batch_size") c.batch_size = value.get<Index>();
    else if (key == "d_steps_per_g_step") c.d_steps_per_g_step = value.get<int>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "lr") c.lr = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "loss_mode") c.loss_mode = gan_loss_mode_from_string(value.get<std::string>());
    else throw ConfigError("gan config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

Mlp Mlp::init(const std::vector<Index>& widths, Activation hidden, Activation output, Rng& rng) {
  if (widths.size() < 2) {
    throw ConfigError("mlp: need at least input and output widths");
  }
  Mlp m;
  m.hidden = hidden;
  m.output = output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const Index fan_in = widths[i];
    const Index fan_out = widths[i + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    Matrix b(1, fan_out);
    for (Index k = 0; k < w.size(); ++k) {
      w.data()[k] = rng.uniform(-bound, bound);
    }
    for (Index k = 0; k < b.size(); ++k) {
      b.data()[k] = rng.uniform(-bound, bound);
    }
    m.layers.push_back({Tensor::from(std::move(w), true), Tensor::from(std::move(b), true)});
  }
  return m;
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = add(matmul(h, layers[i].weight), layers[i].bias);
    h = activation(i + 1 == layers.size() ? output : hidden, h);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& l : layers) {
    list.push_back({{"weight", matrix_to_json(l.weight.value())},
                    {"bias", matrix_to_json(l.bias.value())}});
  }
  return {{"hidden_activation", activation_name(hidden)},
          {"output_activation", activation_name(output)},
          {"layers", std::move(list)}};
}

Mlp Mlp::from_json(const nlohmann::json& j, Activation hidden, Activation output) {
  if (j.at("hidden_activation") != activation_name(hidden) ||
      j.at("output_activation") != activation_name(output)) {
    throw InputError("checkpoint: unexpected activations in network");
  }
  Mlp m;
  m.hidden = hidden;
  m.output = output;
  Index prev = -1;
  for (const auto& lj : j.at("layers")) {
    Matrix w = matrix_from_json(lj.at("weight"));
    Matrix b = matrix_from_json(lj.at("bias"));
    if (b.rows() != 1 || b.cols() != w.cols() || (prev >= 0 && w.rows() != prev)) {
      throw InputError("checkpoint: inconsistent layer shapes in network");
    }
    prev = w.cols();
    m.layers.push_back({Tensor::from(std::move(w), true), Tensor::from(std::move(b), true)});
  }
  if (m.layers.empty()) {
    throw InputError("checkpoint: network has no layers");
  }
  return m;
}

nlohmann::json GanModel::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : history) {
    hist.push_back({{"epoch", h.epoch},
                    {"loss_d", h.loss_d},
                    {"loss_g", h.loss_g},
                    {"mean_d_real", h.mean_d_real},
                    {"mean_d_fake", h.mean_d_fake}});
  }
  return {{"kind", "gan"},
          {"config", config.to_json()},
          {"seed", config.seed},
          {"n_features", n_features},
          {"normalizer", normalizer.to_json()},
          {"generator", generator.to_json()},
          {"discriminator", discriminator.to_json()},
          {"history", std::move(hist)}};
}

GanModel GanModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "gan") {
    throw InputError("checkpoint: not a GAN checkpoint");
  }
  GanModel m;
  m.config = GanConfig::from_json(j.at("config"));
  m.n_features = j.at("n_features").get<Index>();
  m.normalizer = Normalizer::from_json(j.at("normalizer"));
  m.generator = Mlp::from_json(j.at("generator"), Activation::relu, Activation::tanh);
  m.discriminator = Mlp::from_json(j.at("discriminator"), Activation::relu, Activation::sigmoid);
  if (m.generator.input_width() != m.config.noise_dim ||
      m.generator.output_width() != m.n_features ||
      m.discriminator.input_width() != m.n_features || m.discriminator.output_width() != 1 ||
      m.normalizer.center.size() != m.n_features) {
    throw InputError("checkpoint: GAN network shapes disagree with its config");
  }
  for (const auto& h : j.value("history", nlohmann::json::array())) {
    m.history.push_back({h.at("epoch").get<int>(), h.at("loss_d").get<double>(),
                         h.at("loss_g").get<double>(), h.at("mean_d_real").get<double>(),
                         h.at("mean_d_fake").get<double>()});
  }
  return m;
}

std::string GanModel::history_csv() const {
  std::string out = "epoch,loss_d,loss_g,mean_d_real,mean_d_fake\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + format_double(h.loss_d) + "," +
           format_double(h.loss_g) + "," + format_double(h.mean_d_real) + "," +
           format_double(h.mean_d_fake) + "\n";
  }
  return out;
}

Tensor sample_noise(Index count, Index noise_dim, Rng& rng) {
  if (count < 1) {
    throw PreconditionError("sample_noise: count must be at least 1");
  }
  Matrix z(count, noise_dim);
  for (Index i = 0; i < z.size(); ++i) {
    z.data()[i] = rng.normal();
  }
  return Tensor::from(std::move(z));
}

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
  check_probabilities(d_real, "discriminator_loss");
  check_probabilities(d_fake, "discriminator_loss");
  const Tensor real_term = mean(log_op(d_real));
  const Tensor fake_term = mean(log_op(affine(d_fake, -1.0, 1.0)));
  return affine(add(real_term, fake_term), -1.0);
}

Tensor generator_loss(const Tensor& d_fake, GanLossMode mode) {
  check_probabilities(d_fake, "generator_loss");
  switch (mode) {
  case GanLossMode::paper:
    return mean(log_op(affine(d_fake, -1.0, 1.0)));
  case GanLossMode::non_saturating:
    return affine(mean(log_op(d_fake)), -1.0);
  }
  throw ConfigError("generator_loss: unknown mode");
}

GanTrainer::GanTrainer(const Matrix& minority, const GanConfig& config)
    : rng_(derive_seed(config.seed, 1)),
      gen_opt_(AdamHyper{.lr = config.lr}),
      disc_opt_(AdamHyper{.lr = config.lr}) {
  config.validate();
  if (minority.rows() < 2 * config.batch_size) {
    throw ConfigError("train_gan: " + std::to_string(minority.rows()) +
                      " minority rows, need at least 2 * batch_size = " +
                      std::to_string(2 * config.batch_size));
  }
  if (minority.cols() < 1) {
    throw ConfigError("train_gan: minority sample has no features");
  }
  model_.config = config;
  model_.n_features = minority.cols();
  model_.normalizer = Normalizer::fit(minority, NormalizerMode::minmax);
  data_ = model_.normalizer.apply(minority);

  Rng init_rng(derive_seed(config.seed, 0));
  std::vector<Index> gen_widths{config.noise_dim};
  gen_widths.insert(gen_widths.end(), config.gen_hidden.begin(), config.gen_hidden.end());
  gen_widths.push_back(model_.n_features);
  std::vector<Index> disc_widths{model_.n_features};
  disc_widths.insert(disc_widths.end(), config.disc_hidden.begin(), config.disc_hidden.end());
  disc_widths.push_back(1);
  model_.generator = Mlp::init(gen_widths, Activation::relu, Activation::tanh, init_rng);
  model_.discriminator = Mlp::init(disc_widths, Activation::relu, Activation::sigmoid, init_rng);
}

GanTrainer::DiscriminatorStep GanTrainer::discriminator_step(const Matrix& real_batch) {
  auto g_params = model_.generator.parameters();
  auto d_params = model_.discriminator.parameters();
  set_trainable(g_params, false);
  DiscriminatorStep out;
  try {
    const Tensor fake =
        model_.generator.forward(sample_noise(real_batch.rows(), model_.config.noise_dim, rng_));
    const Tensor d_real = model_.discriminator.forward(Tensor::from(real_batch));
    const Tensor d_fake = model_.discriminator.forward(fake);
    const Tensor loss = discriminator_loss(d_real, d_fake);
    backward(loss);
    out = {loss.item(), mean_of(d_real), mean_of(d_fake)};
  } catch (...) {
    set_trainable(g_params, true);
    throw;
  }
  set_trainable(g_params, true);
  adam_step(d_params, disc_opt_);
  ++d_steps_since_g_;
  return out;
}

double GanTrainer::generator_step() {
  auto g_params = model_.generator.parameters();
  auto d_params = model_.discriminator.parameters();
  set_trainable(d_params, false);
  double value = 0.0;
  try {
    const Tensor fake = model_.generator.forward(
        sample_noise(model_.config.batch_size, model_.config.noise_dim, rng_));
    const Tensor loss = generator_loss(model_.discriminator.forward(fake), model_.config.loss_mode);
    backward(loss);
    value = loss.item();
  } catch (...) {
    set_trainable(d_params, true);
    throw;
  }
  set_trainable(d_params, true);
  adam_step(g_params, gen_opt_);
  d_steps_since_g_ = 0;
  return value;
}

GanEpochStats GanTrainer::run_epoch() {
  const int epoch = static_cast<int>(model_.history.size());
  const Index batch = model_.config.batch_size;
  const Index n_batches = data_.rows() / batch;
  const auto order = rng_.permutation(data_.rows());
  GanEpochStats stats;
  stats.epoch = epoch;
  int g_steps = 0;
  try {
    for (Index b = 0; b < n_batches; ++b) {
      Matrix real(batch, data_.cols());
      for (Index i = 0; i < batch; ++i) {
        real.row(i) = data_.row(order[static_cast<std::size_t>(b * batch + i)]);
      }
      const auto d = discriminator_step(real);
      stats.loss_d += -d.loss;
      stats.mean_d_real += d.mean_d_real;
      stats.mean_d_fake += d.mean_d_fake;
      if (d_steps_since_g_ >= model_.config.d_steps_per_g_step) {
        stats.loss_g += generator_step();
        ++g_steps;
      }
    }
  } catch (const NumericDomainError& e) {
    throw TrainingDivergenceError(
        "train_gan: diverged in epoch " + std::to_string(epoch) + ": " + e.what(), epoch);
  }
  const auto nb = static_cast<double>(n_batches);
  stats.loss_d /= nb;
  stats.mean_d_real /= nb;
  stats.mean_d_fake /= nb;
  stats.loss_g = g_steps > 0 ? stats.loss_g / g_steps : 0.0;
  if (!std::isfinite(stats.loss_d) || !std::isfinite(stats.loss_g)) {
    throw TrainingDivergenceError("train_gan: non-finite loss in epoch " + std::to_string(epoch),
                                  epoch);
  }
  model_.history.push_back(stats);
  return stats;
}

GanModel train_gan(const Matrix& minority, const GanConfig& config) {
  GanTrainer trainer(minority, config);
  for (int e = 0; e < config.epochs; ++e) {
    trainer.run_epoch();
  }
  return std::move(trainer).take_model();
}

Matrix generate(const GanModel& model, Index count, Rng& rng) {
  if (count < 0) {
    throw PreconditionError("generate: negative count");
  }
  if (count == 0) {
    return Matrix(0, model.n_features);
  }
  NoGradGuard guard;
  const Tensor fake = model.generator.forward(sample_noise(count, model.config.noise_dim, rng));
  return model.normalizer.invert(fake.value());
}

BalanceRatio BalanceRatio::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("ratio '" + text + "' is not of the form a:b");
  }
  BalanceRatio r;
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, colon);
    const std::string b = text.substr(colon + 1);
    r.incident = std::stoll(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    r.non_incident = std::stoll(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
  } catch (const std::logic_error&) {
    throw ConfigError("ratio '" + text + "' is not of the form a:b with integers");
  }
  if (r.incident < 0 || r.non_incident < 0) {
    throw ConfigError("ratio '" + text + "' has a negative term");
  }
  if (r.non_incident == 0) {
    throw ConfigError("ratio '" + text + "' has a zero denominator");
  }
  return r;
}

std::string BalanceRatio::to_string() const {
  return std::to_string(incident) + ":" + std::to_string(non_incident);
}

Index synthetic_rows_needed(Index n_incident, Index n_non_incident, BalanceRatio ratio) {
  if (ratio.non_incident <= 0 || ratio.incident < 0) {
    throw ConfigError("balance ratio needs a positive denominator");
  }
  const std::int64_t target =
      (static_cast<std::int64_t>(n_non_incident) * ratio.incident + ratio.non_incident - 1) /
      ratio.non_incident;
  return std::max<Index>(0, target - n_incident);
}

AugmentResult augment_to_ratio(const SampleTable& dataset, const GanModel& model,
                               BalanceRatio ratio, Rng& rng) {
  dataset.validate();
  if (ratio.non_incident <= 0) {
    throw ConfigError("augment: ratio has a zero denominator");
  }
  const Index n_inc = dataset.count_label(1);
  const Index n_non = dataset.count_label(0);
  if (n_inc == 0 || n_non == 0) {
    throw ConfigError("augment: dataset must contain both classes");
  }
  if (model.n_features != dataset.n_features()) {
    throw DimensionError("augment: generator produces " + std::to_string(model.n_features) +
                         " features, dataset has " + std::to_string(dataset.n_features()));
  }
  AugmentResult result;
  result.appended = synthetic_rows_needed(n_inc, n_non, ratio);
  result.target_incidents = n_inc + result.appended;
  if (result.appended == 0) {
    result.table = dataset;
    return result;
  }
  const Matrix rows = generate(model, result.appended, rng);
  SampleTable& t = result.table;
  t.feature_names = dataset.feature_names;
  t.normalizer = dataset.normalizer;
  t.features.resize(dataset.rows() + result.appended, dataset.n_features());
  t.features.topRows(dataset.rows()) = dataset.features;
  t.features.bottomRows(result.appended) = rows;
  t.labels.resize(t.features.rows());
  t.labels.head(dataset.rows()) = dataset.labels;
  t.labels.tail(result.appended).setOnes();
  t.synthetic.resize(t.features.rows());
  t.synthetic.head(dataset.rows()) = dataset.synthetic;
  t.synthetic.tail(result.appended).setOnes();
  return result;
}

} // namespace gtid
