#pragma once

#include "rcx/neural.hpp"

namespace rcx {

/// The crash-density prediction network: fully connected chain
/// input -> 256 -> 512 -> (dropout 50%) -> 256 -> 128 -> 64 -> 32 -> 3,
/// ReLU on every hidden layer, softmax applied inside the loss.
Network build_prediction_nn(int input_dim, std::uint64_t seed = 0);

/// Training defaults for the prediction network: 2000 epochs, SGD with
/// momentum 0.9, learning rate 0.001 under cosine annealing, cross-entropy.
TrainConfig prediction_nn_train_config(std::uint64_t seed = 0);

}  // namespace rcx
