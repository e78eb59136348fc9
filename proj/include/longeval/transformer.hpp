#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longeval/rng.hpp"

namespace longeval {

struct TransformerConfig {
  int model_dim = 32;  // projection size d' and attention width
  int ffn_dim = 32;
  bool use_ffn = true;
  int window = 1;  // attend to self and the previous window-1 positions
  double attention_dropout = 0.3;
  double output_dropout = 0.1;
  double learning_rate = 1e-3;
  double weight_decay = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  double layer_norm_eps = 1e-5;
};

struct TransformerParam {
  std::string name;
  Eigen::MatrixXd value;
  bool decay = true;  // weight decay applies (matrices only)
};

// Single-layer, single-head encoder over a day sequence with no positional
// embeddings. Position q attends to keys k with q - window < k <= q; all
// other logits are replaced by a sentinel whose exp is exactly zero. The
// prediction is read from the anchor position (last row by default).
class MicroTransformer {
 public:
  MicroTransformer() = default;
  MicroTransformer(int input_dim, const TransformerConfig& config, std::uint64_t seed);

  static constexpr double kMaskedLogit = -1e300;

  const TransformerConfig& config() const noexcept { return config_; }
  int input_dim() const noexcept { return input_dim_; }

  std::vector<TransformerParam>& params() noexcept { return params_; }
  const std::vector<TransformerParam>& params() const noexcept { return params_; }

  // Per-column affine input normalization applied before the projection.
  void set_input_scaling(Eigen::RowVectorXd shift, Eigen::RowVectorXd scale);
  const Eigen::RowVectorXd& input_shift() const noexcept { return shift_; }
  const Eigen::RowVectorXd& input_scale() const noexcept { return scale_; }

  // Eval mode: no dropout, deterministic.
  double predict(const Eigen::MatrixXd& sequence) const;
  double predict_at(const Eigen::MatrixXd& sequence, int anchor) const;

  // Eval-mode attention weights (L x L).
  Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& sequence) const;

  // Mean squared error over the batch (anchors at each sequence's last row)
  // and its gradient with respect to every parameter, in params() order.
  // Dropout is active iff dropout_rng is non-null.
  double loss_and_gradients(std::span<const Eigen::MatrixXd> sequences,
                            std::span<const double> targets,
                            std::vector<Eigen::MatrixXd>& gradients, Rng* dropout_rng) const;

  std::string to_text() const;
  static MicroTransformer from_text(std::string_view text);

 private:
  struct Cache;
  double forward(const Eigen::MatrixXd& sequence, int anchor, Rng* dropout_rng, Cache* cache) const;
  void backward(const Cache& cache, double d_output, std::vector<Eigen::MatrixXd>& gradients) const;

  int input_dim_ = 0;
  TransformerConfig config_;
  std::vector<TransformerParam> params_;
  Eigen::RowVectorXd shift_;
  Eigen::RowVectorXd scale_;
};

struct TransformerFit {
  MicroTransformer model;
  std::vector<double> dev_mae;  // per epoch
  int best_epoch = 0;  // 1-based; dev_mae[best_epoch - 1] is the best score
  int epochs_run = 0;
};

// AdamW with decoupled weight decay, squared-error loss, early stopping on
// dev flattened MAE. Restores the best-epoch parameters.
TransformerFit fit_transformer(std::span<const Eigen::MatrixXd> train_sequences,
                               std::span<const double> train_targets,
                               std::span<const Eigen::MatrixXd> dev_sequences,
                               std::span<const double> dev_targets, const TransformerConfig& config,
                               std::uint64_t seed);

}  // namespace longeval
