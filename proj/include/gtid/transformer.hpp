#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "gtid/data_io.hpp"
#include "gtid/random.hpp"
#include "gtid/tensor.hpp"

namespace gtid {

struct TransformerConfig {
  Index n_features = 7;
  Index d_model = 32;
  Index heads = 4;
  Index layers = 2;
  Index d_ff = 64;
  double pe_base = 100.0;
  double dropout = 0.0;

  Index d_k() const { return d_model / heads; }
  void validate() const;
  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
};

/// Sinusoidal position code: sin(pos / base^(2i/d_model)) on even dims 2i,
/// cos(pos / base^(2i/d_model)) on odd dims 2i + 1.
double positional_encoding(Index pos, Index dim, Index d_model, double base);

/// length x d_model table of positional_encoding values.
Matrix positional_table(Index length, Index d_model, double base);

struct EncoderLayerParams {
  Tensor wq, wk, wv; // d_model x d_model; head j owns columns [j*d_k, (j+1)*d_k)
  Tensor wo;         // d_model x d_model
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor norm1_scale, norm1_shift, norm2_scale, norm2_shift;

  std::vector<Tensor> parameters() const;
};

struct TransformerModel {
  TransformerConfig config;
  Tensor embedding; // n_features x d_model, one vector per feature token
  Matrix pe_table;  // n_features x d_model
  std::vector<EncoderLayerParams> layers;
  Tensor head_w; // d_model x 1
  Tensor head_b; // 1 x 1
  std::uint64_t seed = 0;

  /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights from the seeded generator.
  static TransformerModel init(const TransformerConfig& config, std::uint64_t seed);

  /// Every trainable tensor in a fixed order.
  std::vector<Tensor> parameters() const;
  Index parameter_count() const;

  /// Deep copy; the result shares no storage with this model.
  TransformerModel clone() const;

  /// Incident probabilities for raw rows (no gradient recording).
  Eigen::VectorXd predict(const Matrix& features) const;

  nlohmann::json to_json() const;
  static TransformerModel from_json(const nlohmann::json& j);
};

/// Per-feature token embedding plus positional code. Returns the B samples as
/// stacked sequences: row b * n_features + t holds token t of sample b.
Tensor embed(const Tensor& batch, const TransformerModel& model);

/// softmax(q_j k_j^T / sqrt(d_k)) for a single head.
Tensor attention_weights(const Tensor& q_head, const Tensor& k_head);

/// Multi-head self-attention over one L x d_model sequence, assembled from
/// primitive ops: project, split into heads, attend, concatenate, project.
Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& layer,
                            const TransformerConfig& config);

/// Post-norm encoder stack over stacked sequences of length `seq_len`
/// (0 treats `seq` as a single sequence). `dropout_rng` enables dropout when
/// the config rate is positive.
Tensor encoder_forward(const Tensor& seq, const TransformerModel& model, Index seq_len = 0,
                       Rng* dropout_rng = nullptr);

/// B x 1 incident probabilities: embed, encode, mean-pool tokens, linear, sigmoid.
Tensor classify(const Tensor& batch, const TransformerModel& model, Rng* dropout_rng = nullptr);

/// Mean binary cross-entropy of B x 1 probabilities against 0/1 targets.
Tensor bce_loss(const Tensor& probabilities, const Tensor& targets);

struct ClassifierHyper {
  int epochs = 30;
  Index batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ClassifierHyper from_json(const nlohmann::json& j);
};

struct TrainedClassifier {
  TransformerModel model;
  std::vector<double> loss_history; // mean loss per epoch
};

/// Adam on mean BCE over shuffled mini-batches. Features must already be
/// normalized. Deterministic for a given seed.
TrainedClassifier train_classifier(const SampleTable& train, const TransformerConfig& config,
                                   const ClassifierHyper& hyper);

} // namespace gtid
