#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtid/data_io.hpp"
#include "gtid/ops.hpp"
#include "gtid/optim.hpp"
#include "gtid/random.hpp"
#include "gtid/tensor.hpp"

namespace gtid {

/// paper: generator minimizes mean log(1 - D(G(z))).
/// non_saturating: generator minimizes -mean log D(G(z)).
enum class GanLossMode { paper, non_saturating };

std::string to_string(GanLossMode mode);
GanLossMode gan_loss_mode_from_string(const std::string& name);

struct GanConfig {
  Index noise_dim = 16;
  std::vector<Index> gen_hidden{64, 64};
  std::vector<Index> disc_hidden{64, 32};
  Index batch_size = 64;
  int d_steps_per_g_step = 10;
  int epochs = 500;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  GanLossMode loss_mode = GanLossMode::paper;

  void validate() const;
  nlohmann::json to_json() const;
  static GanConfig from_json(const nlohmann::json& j);
};

struct DenseLayer {
  Tensor weight; // fan_in x fan_out
  Tensor bias;   // 1 x fan_out
};

/// Fully connected network: hidden layers share one activation, the last
/// layer has its own.
struct Mlp {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::relu;
  Activation output = Activation::sigmoid;

  static Mlp init(const std::vector<Index>& widths, Activation hidden, Activation output,
                  Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  Index input_width() const { return layers.front().weight.rows(); }
  Index output_width() const { return layers.back().weight.cols(); }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j, Activation hidden, Activation output);
};

struct GanEpochStats {
  int epoch = 0;
  double loss_d = 0.0; // discriminator objective in its maximized sign (<= 0)
  double loss_g = 0.0;
  double mean_d_real = 0.0;
  double mean_d_fake = 0.0;
};

struct GanModel {
  GanConfig config;
  Index n_features = 0;
  Mlp generator;     // noise_dim -> gen_hidden... -> n_features, tanh output
  Mlp discriminator; // n_features -> disc_hidden... -> 1, sigmoid output
  Normalizer normalizer;
  std::vector<GanEpochStats> history;

  nlohmann::json to_json() const;
  static GanModel from_json(const nlohmann::json& j);
  std::string history_csv() const;
};

/// count x noise_dim standard normal draws.
Tensor sample_noise(Index count, Index noise_dim, Rng& rng);

/// Loss the discriminator descends: -(mean log d_real + mean log(1 - d_fake)).
/// Its negation is the maximized objective, 0 at the optimum.
Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake);

Tensor generator_loss(const Tensor& d_fake, GanLossMode mode);

/// Alternating optimizer over one minority-class sample. Exposes single steps
/// so callers can observe that each step only moves its own network.
class GanTrainer {
public:
  /// `minority` is in original units; it is min-max scaled to [-1, 1] here and
  /// the scaling is kept in the model for de-normalization.
  GanTrainer(const Matrix& minority, const GanConfig& config);

  struct DiscriminatorStep {
    double loss = 0.0; // minimized value
    double mean_d_real = 0.0;
    double mean_d_fake = 0.0;
  };

  /// One discriminator update on a normalized real batch and a fresh fake batch.
  DiscriminatorStep discriminator_step(const Matrix& real_batch);
  /// One generator update through the frozen discriminator; returns the loss.
  double generator_step();
  /// A full pass over the shuffled data; appends to the history.
  GanEpochStats run_epoch();

  const GanModel& model() const { return model_; }
  GanModel take_model() && { return std::move(model_); }
  const Matrix& normalized_data() const { return data_; }

private:
  GanModel model_;
  Matrix data_;
  Rng rng_;
  AdamState gen_opt_;
  AdamState disc_opt_;
  int d_steps_since_g_ = 0;
};

GanModel train_gan(const Matrix& minority, const GanConfig& config);

/// count x n_features rows in original feature units.
Matrix generate(const GanModel& model, Index count, Rng& rng);

struct BalanceRatio {
  std::int64_t incident = 1;
  std::int64_t non_incident = 1;

  /// Parses "a:b" with non-negative integers and b > 0.
  static BalanceRatio parse(const std::string& text);
  std::string to_string() const;
};

/// max(0, ceil(n_non * inc / non) - n_inc), in exact integer arithmetic.
Index synthetic_rows_needed(Index n_incident, Index n_non_incident, BalanceRatio ratio);

struct AugmentResult {
  SampleTable table;
  Index appended = 0;
  Index target_incidents = 0;
};

/// Keeps every real row and appends generated incident rows (label 1,
/// synthetic flag 1) until incidents reach ceil(n_non * inc / non).
AugmentResult augment_to_ratio(const SampleTable& dataset, const GanModel& model,
                               BalanceRatio ratio, Rng& rng);

} // namespace gtid
