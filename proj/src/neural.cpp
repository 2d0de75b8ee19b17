#include "rcx/neural.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"
#include "rcx/geo.hpp"

namespace rcx {

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : specs) {
    n += static_cast<std::size_t>(s.in_dim) *
             static_cast<std::size_t>(s.out_dim) +
         static_cast<std::size_t>(s.out_dim);
  }
  return n;
}

Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw DimMismatch("network needs at least one layer");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].in_dim <= 0 || specs[i].out_dim <= 0) {
      throw DimMismatch("layer " + std::to_string(i) +
                        " has non-positive dims");
    }
    if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim) {
      throw DimMismatch("layer " + std::to_string(i) + " expects " +
                        std::to_string(specs[i].in_dim) + " inputs, got " +
                        std::to_string(specs[i - 1].out_dim));
    }
    if (specs[i].dropout_after < 0.0 || specs[i].dropout_after >= 1.0) {
      throw DimMismatch("dropout probability must be in [0,1)");
    }
  }
  Network net;
  net.specs = specs;
  SplitMix64 rng(seed);
  for (const auto& s : specs) {
    const double scale = std::sqrt(6.0 / static_cast<double>(s.in_dim));
    Eigen::MatrixXd w(s.out_dim, s.in_dim);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = scale * (2.0 * rng.next_double() - 1.0);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(s.out_dim));
  }
  return net;
}

Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& X,
                              SplitMix64* dropout_rng, ForwardCache* cache) {
  if (X.cols() != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(X.cols()) +
                     " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
  if (!X.allFinite()) throw ShapeError("input contains non-finite values");
  const bool training = net.mode == NetMode::train;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->mask.clear();
  }
  Eigen::MatrixXd a = X;
  for (int l = 0; l < net.n_layers(); ++l) {
    const LayerSpec& spec = net.specs[static_cast<std::size_t>(l)];
    if (cache) cache->inputs.push_back(a);
    Eigen::MatrixXd z = a * net.weights[static_cast<std::size_t>(l)].transpose();
    z.rowwise() += net.biases[static_cast<std::size_t>(l)].transpose();
    if (cache) cache->pre.push_back(z);
    if (spec.activation == Activation::relu) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
    if (training && spec.dropout_after > 0.0) {
      if (!dropout_rng) {
        throw ShapeError("train-mode forward needs a dropout generator");
      }
      const double keep = 1.0 - spec.dropout_after;
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          mask(r, c) = dropout_rng->next_double() < keep ? 1.0 / keep : 0.0;
        }
      }
      a = a.cwiseProduct(mask);
      if (cache) cache->mask.push_back(std::move(mask));
    } else if (cache) {
      cache->mask.emplace_back();
    }
  }
  return a;
}

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x,
                        SplitMix64* dropout_rng) {
  return forward_batch(net, x.transpose(), dropout_rng).row(0).transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

double batch_loss(const Eigen::MatrixXd& out, const Targets& y,
                  LossKind kind) {
  if (kind == LossKind::rmse) {
    if (out.cols() != 1 ||
        out.rows() != static_cast<Eigen::Index>(y.real.size())) {
      throw ShapeError("rmse head expects one output per target");
    }
    const Eigen::VectorXd err = out.col(0) - y.real;
    return std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
  }
  if (out.rows() != static_cast<Eigen::Index>(y.classes.size())) {
    throw ShapeError("cross-entropy targets do not match batch size");
  }
  const Eigen::MatrixXd p = softmax_rows(out);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const int cls = y.classes[static_cast<std::size_t>(r)];
    if (cls < 0 || cls >= out.cols()) {
      throw ShapeError("class index " + std::to_string(cls) +
                       " outside the network's " +
                       std::to_string(out.cols()) + " outputs");
    }
    sum -= std::log(p(r, cls));
  }
  return sum / static_cast<double>(out.rows());
}

LossGrads loss_and_grads(const Network& net, const Eigen::MatrixXd& X,
                         const Targets& y, LossKind kind,
                         SplitMix64* dropout_rng) {
  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(net, X, dropout_rng, &cache);
  const Eigen::Index batch = X.rows();

  LossGrads result;
  Eigen::MatrixXd d_out;  // dLoss/d(out)
  if (kind == LossKind::rmse) {
    if (out.cols() != 1 ||
        out.rows() != static_cast<Eigen::Index>(y.real.size())) {
      throw ShapeError("rmse head expects one output per target");
    }
    const Eigen::VectorXd err = out.col(0) - y.real;
    const double rmse =
        std::sqrt(err.squaredNorm() / static_cast<double>(batch));
    result.loss = rmse;
    d_out.resize(batch, 1);
    if (rmse > 0.0) {
      // d/de sqrt(mean(e^2)) = e / (n * rmse)
      d_out.col(0) = err / (static_cast<double>(batch) * rmse);
    } else {
      d_out.setZero();
    }
  } else {
    result.loss = batch_loss(out, y, kind);
    const Eigen::MatrixXd p = softmax_rows(out);
    d_out = p;
    for (Eigen::Index r = 0; r < batch; ++r) {
      d_out(r, y.classes[static_cast<std::size_t>(r)]) -= 1.0;
    }
    d_out /= static_cast<double>(batch);
  }
  if (!std::isfinite(result.loss)) {
    throw NaNLoss("non-finite loss");
  }

  result.grads.w.resize(static_cast<std::size_t>(net.n_layers()));
  result.grads.b.resize(static_cast<std::size_t>(net.n_layers()));
  Eigen::MatrixXd da = std::move(d_out);
  for (int l = net.n_layers() - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    if (cache.mask[li].size() > 0) {
      da = da.cwiseProduct(cache.mask[li]);
    }
    if (net.specs[li].activation == Activation::relu) {
      da = da.cwiseProduct(
          (cache.pre[li].array() > 0.0).cast<double>().matrix());
    }
    result.grads.w[li].noalias() = da.transpose() * cache.inputs[li];
    result.grads.b[li] = da.colwise().sum().transpose();
    if (l > 0) {
      da = da * net.weights[li];
    }
  }
  return result;
}

double cosine_lr(int t, int total_epochs, double lr_max, double lr_min) {
  if (t < 0 || t > total_epochs || total_epochs <= 0) {
    throw BadEpoch("epoch " + std::to_string(t) + " outside [0, " +
                   std::to_string(total_epochs) + "]");
  }
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(kPi * static_cast<double>(t) /
                                      static_cast<double>(total_epochs)));
}

Velocity Velocity::zeros_like(const Network& net) {
  Velocity v;
  for (const auto& w : net.weights) {
    v.w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    v.b.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  return v;
}

void sgd_momentum_step(Network& net, const Gradients& grads, double lr,
                       double momentum, Velocity& velocity) {
  if (grads.w.size() != net.weights.size() ||
      velocity.w.size() != net.weights.size()) {
    throw ShapeError("gradient/velocity shape does not match the network");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grads.w[l].rows() != net.weights[l].rows() ||
        grads.w[l].cols() != net.weights[l].cols()) {
      throw ShapeError("gradient shape mismatch at layer " +
                       std::to_string(l));
    }
    velocity.w[l] = momentum * velocity.w[l] + grads.w[l];
    velocity.b[l] = momentum * velocity.b[l] + grads.b[l];
    net.weights[l] -= lr * velocity.w[l];
    net.biases[l] -= lr * velocity.b[l];
  }
}

namespace {

Targets gather_targets(const Targets& y, const std::vector<int>& idx,
                       int begin, int count, LossKind kind) {
  Targets out;
  if (kind == LossKind::rmse) {
    out.real.resize(count);
    for (int i = 0; i < count; ++i) {
      out.real(i) = y.real(idx[static_cast<std::size_t>(begin + i)]);
    }
  } else {
    out.classes.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      out.classes[static_cast<std::size_t>(i)] =
          y.classes[static_cast<std::size_t>(
              idx[static_cast<std::size_t>(begin + i)])];
    }
  }
  return out;
}

}  // namespace

TrainHistory train_network(Network& net, const Eigen::MatrixXd& X_train,
                           const Targets& y_train,
                           const Eigen::MatrixXd& X_test,
                           const Targets& y_test, const TrainConfig& config) {
  const int n = static_cast<int>(X_train.rows());
  if (n == 0) throw ShapeError("no training rows");
  const int batch_size = std::min(config.batch_size, n);

  SplitMix64 shuffle_rng(config.seed);
  SplitMix64 dropout_rng(config.seed + 0x9e3779b97f4a7c15ull);
  Velocity velocity = Velocity::zeros_like(net);
  TrainHistory history;

  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Eigen::MatrixXd batch_x(batch_size, X_train.cols());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        cosine_lr(epoch, config.epochs, config.lr_max, config.lr_min);
    fisher_yates(idx, shuffle_rng);
    net.mode = NetMode::train;
    double loss_accum = 0.0;  // SSE for rmse, summed -log p for CE
    for (int begin = 0; begin < n; begin += batch_size) {
      const int count = std::min(batch_size, n - begin);
      if (batch_x.rows() != count) batch_x.resize(count, X_train.cols());
      for (int i = 0; i < count; ++i) {
        batch_x.row(i) =
            X_train.row(idx[static_cast<std::size_t>(begin + i)]);
      }
      const Targets batch_y =
          gather_targets(y_train, idx, begin, count, config.loss);
      LossGrads lg;
      try {
        lg = loss_and_grads(net, batch_x, batch_y, config.loss,
                            &dropout_rng);
      } catch (const NaNLoss&) {
        throw NaNLoss("non-finite loss at epoch " + std::to_string(epoch));
      }
      sgd_momentum_step(net, lg.grads, lr, config.momentum, velocity);
      loss_accum += config.loss == LossKind::rmse
                        ? lg.loss * lg.loss * static_cast<double>(count)
                        : lg.loss * static_cast<double>(count);
    }
    history.train_loss.push_back(
        config.loss == LossKind::rmse
            ? std::sqrt(loss_accum / static_cast<double>(n))
            : loss_accum / static_cast<double>(n));

    net.mode = NetMode::eval;
    if (X_test.rows() > 0) {
      const Eigen::MatrixXd out = forward_batch(net, X_test);
      history.test_loss.push_back(batch_loss(out, y_test, config.loss));
    } else {
      history.test_loss.push_back(history.train_loss.back());
    }
  }
  net.mode = NetMode::eval;
  return history;
}

namespace {

const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "none";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "none") return Activation::none;
  throw Error("unknown activation '" + s + "'");
}

const char* to_string(LossKind k) {
  return k == LossKind::rmse ? "rmse" : "cross_entropy";
}

LossKind loss_from_string(const std::string& s) {
  if (s == "rmse") return LossKind::rmse;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw Error("unknown loss '" + s + "'");
}

}  // namespace

nlohmann::json network_to_json(const Network& net, const TrainConfig& config) {
  nlohmann::json j;
  j["specs"] = nlohmann::json::array();
  for (const auto& s : net.specs) {
    j["specs"].push_back({{"in", s.in_dim},
                          {"out", s.out_dim},
                          {"activation", to_string(s.activation)},
                          {"dropout_after", s.dropout_after}});
  }
  // Parameters at 9 significant digits, layer by layer, weights row-major
  // then biases.
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
        params.push_back(fmt_g9(net.weights[l](r, c)));
      }
    }
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
      params.push_back(fmt_g9(net.biases[l](r)));
    }
  }
  j["params"] = std::move(params);
  j["train_config"] = {{"epochs", config.epochs},
                       {"lr_max", config.lr_max},
                       {"lr_min", config.lr_min},
                       {"momentum", config.momentum},
                       {"batch_size", config.batch_size},
                       {"seed", config.seed},
                       {"loss", to_string(config.loss)}};
  return j;
}

Network network_from_json(const nlohmann::json& j, TrainConfig* config_out) {
  std::vector<LayerSpec> specs;
  for (const auto& s : j.at("specs")) {
    specs.push_back({s.at("in").get<int>(), s.at("out").get<int>(),
                     activation_from_string(s.at("activation")),
                     s.at("dropout_after").get<double>()});
  }
  Network net = init_network(specs, 0);
  const auto& params = j.at("params");
  std::size_t k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
        net.weights[l](r, c) =
            std::stod(params.at(k++).get<std::string>());
      }
    }
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
      net.biases[l](r) = std::stod(params.at(k++).get<std::string>());
    }
  }
  if (k != params.size()) {
    throw ShapeError("checkpoint parameter count mismatch");
  }
  if (config_out) {
    const auto& tc = j.at("train_config");
    config_out->epochs = tc.at("epochs").get<int>();
    config_out->lr_max = tc.at("lr_max").get<double>();
    config_out->lr_min = tc.at("lr_min").get<double>();
    config_out->momentum = tc.at("momentum").get<double>();
    config_out->batch_size = tc.at("batch_size").get<int>();
    config_out->seed = tc.at("seed").get<std::uint64_t>();
    config_out->loss = loss_from_string(tc.at("loss").get<std::string>());
  }
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path,
                  const TrainConfig& config, const std::string& config_hash) {
  nlohmann::json j = network_to_json(net, config);
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  auto out = open_output(path);
  out << j.dump(2) << "\n";
}

Network load_network(const std::filesystem::path& path,
                     TrainConfig* config_out) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return network_from_json(j, config_out);
}

}  // namespace rcx
