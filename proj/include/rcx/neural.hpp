#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "rcx/rng.hpp"

namespace rcx {

enum class Activation { relu, none };

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::relu;
  double dropout_after = 0.0;  // inverted dropout, train mode only
};

enum class LossKind { rmse, cross_entropy };

struct TrainConfig {
  int epochs = 1;
  double lr_max = 1e-3;
  double lr_min = 0.0;
  double momentum = 0.9;
  int batch_size = 64;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::rmse;
};

enum class NetMode { train, eval };

// Plain feed-forward chain. Weights are (out x in); activations flow as
// (batch x dim) row-major batches.
struct Network {
  std::vector<LayerSpec> specs;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  NetMode mode = NetMode::eval;

  int n_layers() const { return static_cast<int>(specs.size()); }
  int input_dim() const { return specs.front().in_dim; }
  int output_dim() const { return specs.back().out_dim; }
  std::size_t parameter_count() const;
};

/// Weights ~ uniform(-s, s) with s = sqrt(6 / fan_in); biases zero.
/// Throws DimMismatch when adjacent dims do not chain.
Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // per-layer input batch
  std::vector<Eigen::MatrixXd> pre;     // pre-activation
  std::vector<Eigen::MatrixXd> mask;    // dropout mask (empty when off)
};

/// Batch forward. Train mode draws dropout masks from `dropout_rng`
/// (required then); eval mode is deterministic and dropout-free.
Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& X,
                              SplitMix64* dropout_rng = nullptr,
                              ForwardCache* cache = nullptr);

/// Single-input convenience wrapper.
Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x,
                        SplitMix64* dropout_rng = nullptr);

/// Row-wise softmax (numerically stabilized).
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

struct Targets {
  Eigen::VectorXd real;      // rmse head
  std::vector<int> classes;  // cross-entropy head
};

/// Loss value only (no gradients): rmse = sqrt(mean squared error),
/// cross-entropy = mean -log softmax(logits)[label].
double batch_loss(const Eigen::MatrixXd& out, const Targets& y, LossKind kind);

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

/// Loss and its true parameter gradients by reverse accumulation (the rmse
/// gradient chains through the square root). Throws ShapeError / NaNLoss.
LossGrads loss_and_grads(const Network& net, const Eigen::MatrixXd& X,
                         const Targets& y, LossKind kind,
                         SplitMix64* dropout_rng = nullptr);

/// lr = lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2.
/// Throws BadEpoch outside 0 <= t <= T.
double cosine_lr(int t, int total_epochs, double lr_max, double lr_min = 0.0);

struct Velocity {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  static Velocity zeros_like(const Network& net);
};

/// v <- momentum * v + grad; theta <- theta - lr * v.
void sgd_momentum_step(Network& net, const Gradients& grads, double lr,
                       double momentum, Velocity& velocity);

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch, accumulated over batches
  std::vector<double> test_loss;   // per epoch, eval mode (dropout off)
};

/// Seeded mini-batch SGD with momentum and a per-epoch cosine schedule.
/// Fully reproducible from (data, config). Throws NaNLoss with the failing
/// epoch index.
TrainHistory train_network(Network& net, const Eigen::MatrixXd& X_train,
                           const Targets& y_train,
                           const Eigen::MatrixXd& X_test,
                           const Targets& y_test, const TrainConfig& config);

/// Checkpoint JSON: specs, flattened parameters at 9 significant digits,
/// seed, and training config. load -> save round-trips byte-identically.
nlohmann::json network_to_json(const Network& net, const TrainConfig& config);
Network network_from_json(const nlohmann::json& j,
                          TrainConfig* config_out = nullptr);

void save_network(const Network& net, const std::filesystem::path& path,
                  const TrainConfig& config, const std::string& config_hash = "");
Network load_network(const std::filesystem::path& path,
                     TrainConfig* config_out = nullptr);

}  // namespace rcx
