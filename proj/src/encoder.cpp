#include "rcx/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "rcx/errors.hpp"

namespace rcx {

const char* to_string(InputSet s) {
  switch (s) {
    case InputSet::semantic: return "semantic";
    case InputSet::semantic_kinematic: return "semantic_kinematic";
    case InputSet::all: return "all";
  }
  return "?";
}

const char* to_string(EncoderHead h) {
  return h == EncoderHead::continuous_1d ? "continuous" : "categorical";
}

std::string EncoderConfig::key() const {
  return std::string(to_string(input_set)) + "_h" + std::to_string(hidden) +
         "_" + to_string(head) + "_" + to_string(source);
}

Network build_encoder(const EncoderConfig& cfg, int input_dim) {
  if (cfg.hidden != 16 && cfg.hidden != 32) {
    throw InvalidConfig("encoder hidden size must be 16 or 32, got " +
                        std::to_string(cfg.hidden));
  }
  if (cfg.source == ComplexitySource::crowd &&
      cfg.head == EncoderHead::categorical_10d) {
    throw InvalidConfig(
        "crowd complexity scores are continuous; the categorical head is "
        "not available for them");
  }
  if (input_dim <= 0) {
    throw InvalidConfig("encoder input dim must be positive");
  }
  const int out = cfg.head == EncoderHead::continuous_1d ? 1 : 10;
  const std::vector<LayerSpec> specs = {
      {input_dim, cfg.hidden, Activation::relu, 0.0},
      {cfg.hidden, out, Activation::none, 0.0},
  };
  return init_network(specs, cfg.train.seed);
}

double default_lr(InputSet set, EncoderHead head) {
  const bool cont = head == EncoderHead::continuous_1d;
  switch (set) {
    case InputSet::semantic: return cont ? 0.0005 : 0.005;
    case InputSet::semantic_kinematic: return cont ? 0.0003 : 0.001;
    case InputSet::all: return cont ? 0.0005 : 0.001;
  }
  return 0.0;
}

TrainConfig default_encoder_train_config(const EncoderConfig& cfg) {
  TrainConfig tc = cfg.train;
  if (tc.epochs <= 0) tc.epochs = 1000;
  if (tc.lr_max <= 0.0) tc.lr_max = default_lr(cfg.input_set, cfg.head);
  tc.lr_min = 0.0;
  tc.momentum = 0.9;
  tc.loss = cfg.head == EncoderHead::continuous_1d ? LossKind::rmse
                                                   : LossKind::cross_entropy;
  return tc;
}

int complexity_to_class(double score) {
  if (!(score >= 0.0 && score <= 10.0)) {
    throw OutOfRange("complexity score " + std::to_string(score) +
                     " outside [0,10]");
  }
  const double cls =
      std::clamp(std::round(score), 1.0, 10.0);  // class 1..10
  return static_cast<int>(cls) - 1;
}

Eigen::MatrixXd extract(const Network& encoder, const Eigen::MatrixXd& X) {
  if (encoder.n_layers() < 1) throw ShapeError("encoder has no layers");
  if (X.cols() != encoder.input_dim()) {
    throw ShapeError("extract: input has " + std::to_string(X.cols()) +
                     " columns, encoder expects " +
                     std::to_string(encoder.input_dim()));
  }
  Eigen::MatrixXd z = X * encoder.weights[0].transpose();
  z.rowwise() += encoder.biases[0].transpose();
  return z.cwiseMax(0.0);
}

namespace {

Targets make_targets(const Eigen::VectorXd& scores, EncoderHead head) {
  Targets t;
  if (head == EncoderHead::continuous_1d) {
    t.real = scores;
  } else {
    t.classes.reserve(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      t.classes.push_back(complexity_to_class(scores(i)));
    }
  }
  return t;
}

}  // namespace

EncoderMetrics evaluate_encoder(const Network& encoder,
                                const Eigen::MatrixXd& X_train,
                                const Eigen::VectorXd& scores_train,
                                const Eigen::MatrixXd& X_test,
                                const Eigen::VectorXd& scores_test,
                                EncoderHead head) {
  Network eval_net = encoder;
  eval_net.mode = NetMode::eval;
  const LossKind kind = head == EncoderHead::continuous_1d
                            ? LossKind::rmse
                            : LossKind::cross_entropy;
  EncoderMetrics m;
  m.train_metric = batch_loss(forward_batch(eval_net, X_train),
                              make_targets(scores_train, head), kind);
  m.test_metric = batch_loss(forward_batch(eval_net, X_test),
                             make_targets(scores_test, head), kind);
  return m;
}

}  // namespace rcx
