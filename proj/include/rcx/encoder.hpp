#pragma once

#include <Eigen/Core>
#include <string>

#include "rcx/neural.hpp"
#include "rcx/types.hpp"

namespace rcx {

enum class InputSet { semantic, semantic_kinematic, all };

const char* to_string(InputSet s);

enum class EncoderHead { continuous_1d, categorical_10d };

const char* to_string(EncoderHead h);

// Single-hidden-layer encoder supervised by the complexity index. The
// post-ReLU hidden activations are the complexity-infused features.
struct EncoderConfig {
  InputSet input_set = InputSet::all;
  int hidden = 32;  // 16 or 32
  EncoderHead head = EncoderHead::continuous_1d;
  ComplexitySource source = ComplexitySource::machine;
  TrainConfig train;  // lr_max <= 0 means "use the default table"

  std::string key() const;  // stable identifier for file names / reports
};

/// Validates the config (hidden in {16,32}; the crowd source only supports
/// the continuous head) and builds input -> hidden (ReLU) -> head.
/// Continuous head: 1 linear unit, rmse loss. Categorical: 10 units, CE.
Network build_encoder(const EncoderConfig& cfg, int input_dim);

/// Default learning rates per input set and head:
/// (semantic, cont) 0.0005; (semantic, cat) 0.005; (sem+kin, cont) 0.0003;
/// (sem+kin, cat) 0.001; (all, cont) 0.0005; (all, cat) 0.001.
double default_lr(InputSet set, EncoderHead head);

/// Default training config: 1000 epochs, momentum 0.9, cosine annealing to
/// 0, loss per head, lr from the table.
TrainConfig default_encoder_train_config(const EncoderConfig& cfg);

/// Maps a 0-10 score onto the 10-class head: clamp(round(score), 1, 10) - 1.
/// Throws OutOfRange outside [0, 10].
int complexity_to_class(double score);

/// Hidden-layer post-ReLU activations in eval mode (one row per input row).
Eigen::MatrixXd extract(const Network& encoder, const Eigen::MatrixXd& X);

struct EncoderMetrics {
  double train_metric = 0.0;  // rmse or cross-entropy, per head
  double test_metric = 0.0;
};

/// Metrics in eval mode over the frozen split. Continuous targets are the
/// raw scores; categorical targets go through complexity_to_class.
EncoderMetrics evaluate_encoder(const Network& encoder,
                                const Eigen::MatrixXd& X_train,
                                const Eigen::VectorXd& scores_train,
                                const Eigen::MatrixXd& X_test,
                                const Eigen::VectorXd& scores_test,
                                EncoderHead head);

}  // namespace rcx
