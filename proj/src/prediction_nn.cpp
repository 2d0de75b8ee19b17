#include "rcx/models/prediction_nn.hpp"

#include "rcx/types.hpp"

namespace rcx {

Network build_prediction_nn(int input_dim, std::uint64_t seed) {
  const std::vector<LayerSpec> specs = {
      {input_dim, 256, Activation::relu, 0.0},
      {256, 512, Activation::relu, 0.5},  // 50% dropout after this layer
      {512, 256, Activation::relu, 0.0},
      {256, 128, Activation::relu, 0.0},
      {128, 64, Activation::relu, 0.0},
      {64, 32, Activation::relu, 0.0},
      {32, kNumClasses, Activation::none, 0.0},
  };
  return init_network(specs, seed);
}

TrainConfig prediction_nn_train_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 2000;
  tc.lr_max = 0.001;
  tc.lr_min = 0.0;
  tc.momentum = 0.9;
  tc.batch_size = 64;
  tc.seed = seed;
  tc.loss = LossKind::cross_entropy;
  return tc;
}

}  // namespace rcx
