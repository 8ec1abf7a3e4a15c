#include "gtid/transformer.hpp"

#include <cmath>
#include <string>

#include "gtid/error.hpp"
#include "gtid/ops.hpp"
#include "gtid/optim.hpp"
#include "gtid/serialization.hpp"

namespace gtid {

namespace {

Tensor uniform_param(Index rows, Index cols, double fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
  return Tensor::from(std::move(m), true);
}

Tensor constant_param(Index cols, double value) {
  return Tensor::from(Matrix::Constant(1, cols, value), true);
}

Tensor copy_param(const Tensor& t) { return Tensor::from(t.value(), t.requires_grad()); }

Tensor param_from_json(const nlohmann::json& j, Index rows, Index cols, const char* name) {
  Matrix m = matrix_from_json(j);
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError(std::string("checkpoint: parameter '") + name + "' has shape " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Tensor::from(std::move(m), true);
}

Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) {
    return x;
  }
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->uniform() < rate ? 0.0 : keep;
  }
  return mul(x, Tensor::from(std::move(mask)));
}

Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& p, const TransformerConfig& cfg,
                     Index seq_len, Rng* rng) {
  const Tensor q = matmul(x, p.wq);
  const Tensor k = matmul(x, p.wk);
  const Tensor v = matmul(x, p.wv);
  const Tensor heads = segment_attention(q, k, v, seq_len, cfg.heads);
  const Tensor attended = maybe_dropout(matmul(heads, p.wo), cfg.dropout, rng);
  const Tensor h = layer_norm_rows(add(x, attended), p.norm1_scale, p.norm1_shift);
  const Tensor hidden = relu(add(matmul(h, p.ff_w1), p.ff_b1));
  const Tensor ff = maybe_dropout(add(matmul(hidden, p.ff_w2), p.ff_b2), cfg.dropout, rng);
  return layer_norm_rows(add(h, ff), p.norm2_scale, p.norm2_shift);
}

} // namespace

void TransformerConfig::validate() const {
  if (n_features < 1) {
    throw ConfigError("transformer: n_features must be at least 1");
  }
  if (d_model < 1 || heads < 1 || d_model % heads != 0) {
    throw ConfigError("transformer: d_model (" + std::to_string(d_model) +
                      ") must be a positive multiple of heads (" + std::to_string(heads) + ")");
  }
  if (layers < 0 || d_ff < 1) {
    throw ConfigError("transformer: layers must be >= 0 and d_ff >= 1");
  }
  if (!(pe_base > 1.0)) {
    throw ConfigError("transformer: pe_base must exceed 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("transformer: dropout must lie in [0, 1)");
  }
}

nlohmann::json TransformerConfig::to_json() const {
  return {{"n_features", n_features}, {"d_model", d_model}, {"heads", heads},
          {"layers", layers},         {"d_ff", d_ff},       {"pe_base", pe_base},
          {"dropout", dropout}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_features") c.n_features = value.get<Index>();
    else if (key == "d_model") c.d_model = value.get<Index>();
    else if (key == "heads") c.heads = value.get<Index>();
    else if (key == "layers") c.layers = value.get<Index>();
    else if (key == "d_ff") c.d_ff = value.get<Index>();
    else if (key == "pe_base") c.pe_base = value.get<double>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else throw ConfigError("transformer config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

double positional_encoding(Index pos, Index dim, Index d_model, double base) {
  if (dim < 0 || dim >= d_model) {
    throw IndexError("positional_encoding: dim " + std::to_string(dim) + " outside [0, " +
                     std::to_string(d_model) + ")");
  }
  const Index i = dim / 2;
  const double angle = static_cast<double>(pos) /
                       std::pow(base, static_cast<double>(2 * i) / static_cast<double>(d_model));
  return dim % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

Matrix positional_table(Index length, Index d_model, double base) {
  Matrix table(length, d_model);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index dim = 0; dim < d_model; ++dim) {
      table(pos, dim) = positional_encoding(pos, dim, d_model, base);
    }
  }
  return table;
}

std::vector<Tensor> EncoderLayerParams::parameters() const {
  return {wq, wk, wv, wo, ff_w1, ff_b1, ff_w2, ff_b2,
          norm1_scale, norm1_shift, norm2_scale, norm2_shift};
}

TransformerModel TransformerModel::init(const TransformerConfig& config, std::uint64_t seed) {
  config.validate();
  TransformerModel m;
  m.config = config;
  m.seed = seed;
  Rng rng(seed);
  const Index d = config.d_model;
  const auto fd = static_cast<double>(d);
  m.embedding = uniform_param(config.n_features, d, 1.0, rng);
  m.pe_table = positional_table(config.n_features, d, config.pe_base);
  for (Index l = 0; l < config.layers; ++l) {
    EncoderLayerParams p;
    p.wq = uniform_param(d, d, fd, rng);
    p.wk = uniform_param(d, d, fd, rng);
    p.wv = uniform_param(d, d, fd, rng);
    p.wo = uniform_param(d, d, fd, rng);
    p.ff_w1 = uniform_param(d, config.d_ff, fd, rng);
    p.ff_b1 = uniform_param(1, config.d_ff, fd, rng);
    p.ff_w2 = uniform_param(config.d_ff, d, static_cast<double>(config.d_ff), rng);
    p.ff_b2 = uniform_param(1, d, static_cast<double>(config.d_ff), rng);
    p.norm1_scale = constant_param(d, 1.0);
    p.norm1_shift = constant_param(d, 0.0);
    p.norm2_scale = constant_param(d, 1.0);
    p.norm2_shift = constant_param(d, 0.0);
    m.layers.push_back(std::move(p));
  }
  m.head_w = uniform_param(d, 1, fd, rng);
  m.head_b = uniform_param(1, 1, fd, rng);
  return m;
}

std::vector<Tensor> TransformerModel::parameters() const {
  std::vector<Tensor> out{embedding};
  for (const auto& l : layers) {
    const auto p = l.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

Index TransformerModel::parameter_count() const {
  Index n = 0;
  for (const auto& p : parameters()) {
    n += p.size();
  }
  return n;
}

TransformerModel TransformerModel::clone() const {
  TransformerModel m;
  m.config = config;
  m.seed = seed;
  m.pe_table = pe_table;
  m.embedding = copy_param(embedding);
  for (const auto& l : layers) {
    EncoderLayerParams p;
    p.wq = copy_param(l.wq);
    p.wk = copy_param(l.wk);
    p.wv = copy_param(l.wv);
    p.wo = copy_param(l.wo);
    p.ff_w1 = copy_param(l.ff_w1);
    p.ff_b1 = copy_param(l.ff_b1);
    p.ff_w2 = copy_param(l.ff_w2);
    p.ff_b2 = copy_param(l.ff_b2);
    p.norm1_scale = copy_param(l.norm1_scale);
    p.norm1_shift = copy_param(l.norm1_shift);
    p.norm2_scale = copy_param(l.norm2_scale);
    p.norm2_shift = copy_param(l.norm2_shift);
    m.layers.push_back(std::move(p));
  }
  m.head_w = copy_param(head_w);
  m.head_b = copy_param(head_b);
  return m;
}

Eigen::VectorXd TransformerModel::predict(const Matrix& features) const {
  if (features.cols() != config.n_features) {
    throw DimensionError("predict: model expects " + std::to_string(config.n_features) +
                         " features, got " + std::to_string(features.cols()));
  }
  NoGradGuard guard;
  constexpr Index chunk = 256;
  Eigen::VectorXd out(features.rows());
  for (Index start = 0; start < features.rows(); start += chunk) {
    const Index n = std::min(chunk, features.rows() - start);
    const Tensor probs = classify(Tensor::from(features.middleRows(start, n)), *this);
    out.segment(start, n) = probs.value().col(0);
  }
  return out;
}

nlohmann::json TransformerModel::to_json() const {
  nlohmann::json layer_list = nlohmann::json::array();
  for (const auto& l : layers) {
    layer_list.push_back({{"wq", matrix_to_json(l.wq.value())},
                          {"wk", matrix_to_json(l.wk.value())},
                          {"wv", matrix_to_json(l.wv.value())},
                          {"wo", matrix_to_json(l.wo.value())},
                          {"ff_w1", matrix_to_json(l.ff_w1.value())},
                          {"ff_b1", matrix_to_json(l.ff_b1.value())},
                          {"ff_w2", matrix_to_json(l.ff_w2.value())},
                          {"ff_b2", matrix_to_json(l.ff_b2.value())},
                          {"norm1_scale", matrix_to_json(l.norm1_scale.value())},
                          {"norm1_shift", matrix_to_json(l.norm1_shift.value())},
                          {"norm2_scale", matrix_to_json(l.norm2_scale.value())},
                          {"norm2_shift", matrix_to_json(l.norm2_shift.value())}});
  }
  return {{"kind", "transformer"},
          {"config", config.to_json()},
          {"seed", seed},
          {"parameters",
           {{"embedding", matrix_to_json(embedding.value())},
            {"layers", std::move(layer_list)},
            {"head_w", matrix_to_json(head_w.value())},
            {"head_b", matrix_to_json(head_b.value())}}}};
}

TransformerModel TransformerModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "transformer") {
    throw InputError("checkpoint: not a transformer checkpoint");
  }
  TransformerModel m;
  m.config = TransformerConfig::from_json(j.at("config"));
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& params = j.at("parameters");
  const Index d = m.config.d_model;
  const Index ff = m.config.d_ff;
  m.embedding = param_from_json(params.at("embedding"), m.config.n_features, d, "embedding");
  m.pe_table = positional_table(m.config.n_features, d, m.config.pe_base);
  const auto& layer_list = params.at("layers");
  if (static_cast<Index>(layer_list.size()) != m.config.layers) {
    throw InputError("checkpoint: layer count does not match config");
  }
  for (const auto& lj : layer_list) {
    EncoderLayerParams p;
    p.wq = param_from_json(lj.at("wq"), d, d, "wq");
    p.wk = param_from_json(lj.at("wk"), d, d, "wk");
    p.wv = param_from_json(lj.at("wv"), d, d, "wv");
    p.wo = param_from_json(lj.at("wo"), d, d, "wo");
    p.ff_w1 = param_from_json(lj.at("ff_w1"), d, ff, "ff_w1");
    p.ff_b1 = param_from_json(lj.at("ff_b1"), 1, ff, "ff_b1");
    p.ff_w2 = param_from_json(lj.at("ff_w2"), ff, d, "ff_w2");
    p.ff_b2 = param_from_json(lj.at("ff_b2"), 1, d, "ff_b2");
    p.norm1_scale = param_from_json(lj.at("norm1_scale"), 1, d, "norm1_scale");
    p.norm1_shift = param_from_json(lj.at("norm1_shift"), 1, d, "norm1_shift");
    p.norm2_scale = param_from_json(lj.at("norm2_scale"), 1, d, "norm2_scale");
    p.norm2_shift = param_from_json(lj.at("norm2_shift"), 1, d, "norm2_shift");
    m.layers.push_back(std::move(p));
  }
  m.head_w = param_from_json(params.at("head_w"), d, 1, "head_w");
  m.head_b = param_from_json(params.at("head_b"), 1, 1, "head_b");
  return m;
}

Tensor embed(const Tensor& batch, const TransformerModel& model) {
  const Index n = model.config.n_features;
  if (batch.cols() != n) {
    throw DimensionError("embed: model expects " + std::to_string(n) + " features, got " +
                         batch.shape_string());
  }
  const Tensor tokens = token_embed(batch, model.embedding);
  Matrix pe = model.pe_table.replicate(batch.rows(), 1);
  return add(tokens, Tensor::from(std::move(pe)));
}

Tensor attention_weights(const Tensor& q_head, const Tensor& k_head) {
  if (q_head.cols() != k_head.cols() || q_head.rows() != k_head.rows()) {
    throw DimensionError("attention_weights: query " + q_head.shape_string() + " and key " +
                         k_head.shape_string() + " differ");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q_head.cols()));
  return softmax_rows(affine(matmul(q_head, transpose(k_head)), scale));
}

Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& layer,
                            const TransformerConfig& config) {
  config.validate();
  if (x.cols() != config.d_model) {
    throw DimensionError("multi_head_attention: input " + x.shape_string() +
                         " does not have d_model = " + std::to_string(config.d_model) + " columns");
  }
  const Tensor q = matmul(x, layer.wq);
  const Tensor k = matmul(x, layer.wk);
  const Tensor v = matmul(x, layer.wv);
  const Index d_k = config.d_k();
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(config.heads));
  for (Index j = 0; j < config.heads; ++j) {
    const Tensor weights =
        attention_weights(slice_cols(q, j * d_k, d_k), slice_cols(k, j * d_k, d_k));
    heads.push_back(matmul(weights, slice_cols(v, j * d_k, d_k)));
  }
  return matmul(concat_cols(heads), layer.wo);
}

Tensor encoder_forward(const Tensor& seq, const TransformerModel& model, Index seq_len,
                       Rng* dropout_rng) {
  if (seq.cols() != model.config.d_model) {
    throw DimensionError("encoder_forward: sequence " + seq.shape_string() +
                         " does not have d_model columns");
  }
  const Index length = seq_len == 0 ? seq.rows() : seq_len;
  Tensor x = seq;
  for (const auto& layer : model.layers) {
    x = encoder_layer(x, layer, model.config, length, dropout_rng);
  }
  return x;
}

Tensor classify(const Tensor& batch, const TransformerModel& model, Rng* dropout_rng) {
  const Index n = model.config.n_features;
  const Tensor tokens = embed(batch, model);
  const Tensor encoded = encoder_forward(tokens, model, n, dropout_rng);
  const Tensor pooled = segment_mean_rows(encoded, n);
  return sigmoid(add(matmul(pooled, model.head_w), model.head_b));
}

Tensor bce_loss(const Tensor& probabilities, const Tensor& targets) {
  const Tensor log_p = log_op(probabilities);
  const Tensor log_q = log_op(affine(probabilities, -1.0, 1.0));
  const Tensor not_targets = affine(targets, -1.0, 1.0);
  return affine(mean(add(mul(targets, log_p), mul(not_targets, log_q))), -1.0);
}

void ClassifierHyper::validate() const {
  if (epochs < 1) {
    throw ConfigError("classifier: epochs must be at least 1");
  }
  if (batch_size < 1) {
    throw ConfigError("classifier: batch_size must be at least 1");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("classifier: lr must be positive");
  }
}

nlohmann::json ClassifierHyper::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr}};
}

ClassifierHyper ClassifierHyper::from_json(const nlohmann::json& j) {
  ClassifierHyper h;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") h.epochs = value.get<int>();
    else if (key == "batch_size") h.batch_size = value.get<Index>();
    else if (key == "lr") h.lr = value.get<double>();
    else throw ConfigError("classifier config: unknown key '" + key + "'");
  }
  h.validate();
  return h;
}

TrainedClassifier train_classifier(const SampleTable& train, const TransformerConfig& config,
                                   const ClassifierHyper& hyper) {
  config.validate();
  hyper.validate();
  train.validate();
  if (train.count_label(0) == 0 || train.count_label(1) == 0) {
    throw ConfigError("train_classifier: training set must contain both classes");
  }
  if (train.n_features() != config.n_features) {
    throw ConfigError("train_classifier: config expects " + std::to_string(config.n_features) +
                      " features, table has " + std::to_string(train.n_features()));
  }
  TrainedClassifier result{TransformerModel::init(config, derive_seed(hyper.seed, 0)), {}};
  Rng order_rng(derive_seed(hyper.seed, 1));
  Rng dropout_rng(derive_seed(hyper.seed, 2));
  std::vector<Tensor> params = result.model.parameters();
  AdamState adam(AdamHyper{.lr = hyper.lr});

  const Index n = train.rows();
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto order = order_rng.permutation(n);
    double weighted_loss = 0.0;
    for (Index start = 0; start < n; start += hyper.batch_size) {
      const Index b = std::min(hyper.batch_size, n - start);
      Matrix x(b, train.n_features());
      Matrix y(b, 1);
      for (Index i = 0; i < b; ++i) {
        const Index r = order[static_cast<std::size_t>(start + i)];
        x.row(i) = train.features.row(r);
        y(i, 0) = train.labels(r);
      }
      double value = 0.0;
      try {
        const Tensor probs = classify(Tensor::from(std::move(x)), result.model, &dropout_rng);
        const Tensor loss = bce_loss(probs, Tensor::from(std::move(y)));
        value = loss.item();
        backward(loss);
      } catch (const NumericDomainError& e) {
        throw TrainingDivergenceError(
            "train_classifier: diverged in epoch " + std::to_string(epoch) + ": " + e.what(),
            epoch);
      }
      if (!std::isfinite(value)) {
        throw TrainingDivergenceError(
            "train_classifier: non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      adam_step(params, adam);
      weighted_loss += value * static_cast<double>(b);
    }
    result.loss_history.push_back(weighted_loss / static_cast<double>(n));
  }
  return result;
}

} // namespace gtid
