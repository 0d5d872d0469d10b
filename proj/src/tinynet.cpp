#include "simmia/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simmia/binary_io.hpp"
#include "simmia/errors.hpp"
#include "simmia/rng.hpp"

namespace simmia::tinynet {

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kNone:
      return;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      return;
    case Activation::kSigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      return;
  }
}

// delta *= act'(z), expressed through the activation output y.
void apply_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& y, Activation a) {
  switch (a) {
    case Activation::kNone:
      return;
    case Activation::kTanh:
      delta.array() *= 1.0 - y.array().square();
      return;
    case Activation::kSigmoid:
      delta.array() *= y.array() * (1.0 - y.array());
      return;
  }
}

bool all_finite(const Network& net) {
  for (const auto& layer : net.layers()) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

constexpr std::uint32_t kNetworkMagic = 0x544e4e31;  // "1NNT" little-endian

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kNone:
      return "none";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "none";
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.has_bias() && layer.bias.size() != layer.outputs()) {
      throw ArgumentError("layer " + std::to_string(l) + ": bias length does not match output width");
    }
    if (l > 0 && layer.inputs() != layers_[l - 1].outputs()) {
      throw ArgumentError("layer " + std::to_string(l) + ": expects " + std::to_string(layer.inputs()) +
                          " inputs but previous layer emits " + std::to_string(layers_[l - 1].outputs()));
    }
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return n;
}

Tape Network::forward(const Eigen::MatrixXd& inputs) const {
  if (layers_.empty()) throw ArgumentError("forward on an empty network");
  if (inputs.rows() != input_width()) {
    throw ArgumentError("input width " + std::to_string(inputs.rows()) + " does not match network input " +
                        std::to_string(input_width()));
  }
  Tape tape;
  tape.network = this;
  tape.generation = generation_;
  tape.activations.reserve(layers_.size() + 1);
  tape.activations.push_back(inputs);
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * tape.activations.back();
    if (layer.has_bias()) z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    tape.activations.push_back(std::move(z));
  }
  return tape;
}

Gradients Network::backward(const Tape& tape, const Eigen::MatrixXd& output_grad, Eigen::MatrixXd* input_grad) const {
  if (tape.network != this || tape.generation != generation_ || tape.activations.size() != layers_.size() + 1) {
    throw UsageError("tape does not belong to the current state of this network");
  }
  if (output_grad.rows() != output_width() || output_grad.cols() != tape.output().cols()) {
    throw ArgumentError("output gradient shape does not match the forward pass");
  }
  Gradients grads(layers_.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    apply_derivative(delta, tape.activations[l + 1], layer.activation);
    grads[l].weights.noalias() = delta * tape.activations[l].transpose();
    if (layer.has_bias()) grads[l].bias = delta.rowwise().sum();
    if (l > 0 || input_grad != nullptr) {
      Eigen::MatrixXd prev = layer.weights.transpose() * delta;
      delta = std::move(prev);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return grads;
}

ForwardResult forward(const Network& net, std::span<const double> input) {
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  ForwardResult out;
  out.tape = net.forward(x);
  out.output = out.tape.output().col(0);
  return out;
}

Gradients backward(const Network& net, const Tape& tape, std::span<const double> loss_grad) {
  const Eigen::MatrixXd g =
      Eigen::Map<const Eigen::VectorXd>(loss_grad.data(), static_cast<Eigen::Index>(loss_grad.size()));
  return net.backward(tape, g);
}

Network make_network(Eigen::Index input_width, std::span<const LayerSpec> layers, std::uint64_t seed) {
  if (input_width <= 0) throw ArgumentError("network input width must be positive");
  Rng rng(derive_seed(seed, 0x58415649455253ULL));
  std::vector<DenseLayer> out;
  Eigen::Index fan_in = input_width;
  for (const auto& spec : layers) {
    if (spec.outputs <= 0) throw ArgumentError("layer width must be positive");
    DenseLayer layer;
    layer.activation = spec.activation;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.outputs));
    layer.weights.resize(spec.outputs, fan_in);
    // Row-major fill order pins the draw sequence independent of storage.
    for (Eigen::Index r = 0; r < spec.outputs; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    if (spec.bias) layer.bias = Eigen::VectorXd::Zero(spec.outputs);
    out.push_back(std::move(layer));
    fan_in = spec.outputs;
  }
  return Network(std::move(out));
}

Network make_mlp_classifier(Eigen::Index input_width, std::size_t hidden_width, std::size_t hidden_layers,
                            std::uint64_t seed) {
  std::vector<LayerSpec> specs(hidden_layers, LayerSpec{static_cast<Eigen::Index>(hidden_width), Activation::kTanh, true});
  specs.push_back({1, Activation::kSigmoid, true});
  return make_network(input_width, specs, seed);
}

BceResult bce_loss(double prediction, bool label) {
  const double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
  if (label) return {-std::log(p), -1.0 / p};
  return {-std::log(1.0 - p), 1.0 / (1.0 - p)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (optimizer == OptimizerKind::kAdam && !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw ArgumentError("adam parameters out of range");
  }
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ArgumentError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

Optimizer::Optimizer(const TrainConfig& config, std::span<Network* const> networks)
    : config_(config), networks_(networks.begin(), networks.end()) {
  for (auto* net : networks_) {
    std::vector<Moments> per_layer;
    for (const auto& layer : net->layers()) {
      Moments m;
      if (config_.optimizer == OptimizerKind::kAdam) {
        m.m_w = m.v_w = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
        m.m_b = m.v_b = Eigen::VectorXd::Zero(layer.bias.size());
      }
      per_layer.push_back(std::move(m));
    }
    moments_.push_back(std::move(per_layer));
  }
}

void Optimizer::step(std::span<const Gradients> grads) {
  if (grads.size() != networks_.size()) throw ArgumentError("optimizer: one gradient set per network required");
  ++t_;
  const double lr = config_.learning_rate;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t n = 0; n < networks_.size(); ++n) {
    auto& layers = networks_[n]->mutable_layers();
    if (grads[n].size() != layers.size()) throw ArgumentError("optimizer: gradient layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      const auto& g = grads[n][l];
      if (config_.optimizer == OptimizerKind::kSgd) {
        layer.weights -= lr * g.weights;
        if (layer.has_bias()) layer.bias -= lr * g.bias;
        continue;
      }
      auto& m = moments_[n][l];
      const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
      m.m_w = b1 * m.m_w + (1.0 - b1) * g.weights;
      m.v_w = b2 * m.v_w + (1.0 - b2) * g.weights.cwiseAbs2();
      layer.weights.array() -= lr * (m.m_w.array() / c1) / ((m.v_w.array() / c2).sqrt() + eps);
      if (layer.has_bias()) {
        m.m_b = b1 * m.m_b + (1.0 - b1) * g.bias;
        m.v_b = b2 * m.v_b + (1.0 - b2) * g.bias.cwiseAbs2();
        layer.bias.array() -= lr * (m.m_b.array() / c1) / ((m.v_b.array() / c2).sqrt() + eps);
      }
    }
  }
}

TrainResult train(std::span<Network* const> networks, std::size_t samples, const BatchObjective& objective,
                  const TrainConfig& config) {
  config.validate();
  if (samples == 0) throw PreconditionError("training set is empty");
  Optimizer optimizer(config, networks);
  Rng rng(derive_seed(config.seed, 0x545241494eULL));
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Gradients> grads(networks.size());

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < samples; begin += config.batch_size) {
      const std::size_t end = std::min(samples, begin + config.batch_size);
      const double loss = objective(std::span<const std::size_t>(order).subspan(begin, end - begin), grads);
      if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", epoch);
      optimizer.step(grads);
      total += loss;
      ++batches;
    }
    for (const auto* net : networks) {
      if (!all_finite(*net)) throw TrainingError("non-finite parameters after update", epoch);
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return result;
}

double bce_batch(const Eigen::MatrixXd& predictions, std::span<const std::uint8_t> labels, Eigen::MatrixXd& output_grad) {
  if (predictions.rows() != 1 || static_cast<std::size_t>(predictions.cols()) != labels.size()) {
    throw ArgumentError("bce_batch: predictions must be 1 x batch");
  }
  const double scale = 1.0 / static_cast<double>(labels.size());
  output_grad.resize(1, predictions.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < predictions.cols(); ++i) {
    const auto r = bce_loss(predictions(0, i), labels[static_cast<std::size_t>(i)] != 0);
    loss += r.loss;
    output_grad(0, i) = r.dloss_dpred * scale;
  }
  return loss * scale;
}

TrainResult train(Network& net, const Eigen::MatrixXd& inputs, std::span<const std::uint8_t> labels,
                  const TrainConfig& config) {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) throw ArgumentError("one label per input column required");
  if (inputs.rows() != net.input_width()) throw ArgumentError("training inputs do not match network input width");
  if (net.output_width() != 1) throw ArgumentError("BCE training needs a single-output network");
  for (auto y : labels) {
    if (y > 1) throw ArgumentError("labels must be 0 or 1");
  }
  Network* nets[] = {&net};
  Eigen::MatrixXd batch_inputs, output_grad;
  std::vector<std::uint8_t> batch_labels;
  auto objective = [&](std::span<const std::size_t> batch, std::vector<Gradients>& grads) {
    batch_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(batch.size()));
    batch_labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch_inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(batch[i]));
      batch_labels[i] = labels[batch[i]];
    }
    const Tape tape = net.forward(batch_inputs);
    const double loss = bce_batch(tape.output(), batch_labels, output_grad);
    grads[0] = net.backward(tape, output_grad);
    return loss;
  };
  return train(nets, labels.size(), objective, config);
}

Eigen::VectorXd predict(const Network& net, const Eigen::MatrixXd& inputs) {
  const Tape tape = net.forward(inputs);
  return tape.output().row(0).transpose();
}

void write_network(std::ostream& out, const Network& net) {
  binary::put<std::uint32_t>(out, kNetworkMagic);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.inputs()));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.outputs()));
    binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
    binary::put<std::uint8_t>(out, layer.has_bias() ? 1 : 0);
    for (Eigen::Index r = 0; r < layer.outputs(); ++r) {
      for (Eigen::Index c = 0; c < layer.inputs(); ++c) binary::put<double>(out, layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) binary::put<double>(out, layer.bias(r));
  }
}

Network read_network(std::istream& in) {
  if (binary::get<std::uint32_t>(in) != kNetworkMagic) throw FormatError("checkpoint: bad network block");
  const auto count = binary::get<std::uint32_t>(in);
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto inputs = binary::get<std::uint32_t>(in);
    const auto outputs = binary::get<std::uint32_t>(in);
    const auto activation = binary::get<std::uint8_t>(in);
    const auto has_bias = binary::get<std::uint8_t>(in);
    if (activation > 2 || has_bias > 1 || inputs == 0 || outputs == 0) {
      throw FormatError("checkpoint: bad layer header " + std::to_string(l));
    }
    DenseLayer layer;
    layer.activation = static_cast<Activation>(activation);
    layer.weights.resize(outputs, inputs);
    for (Eigen::Index r = 0; r < layer.outputs(); ++r) {
      for (Eigen::Index c = 0; c < layer.inputs(); ++c) layer.weights(r, c) = binary::get<double>(in);
    }
    if (has_bias) {
      layer.bias.resize(outputs);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = binary::get<double>(in);
    }
    layers.push_back(std::move(layer));
  }
  Network net(std::move(layers));
  if (!all_finite(net)) throw FormatError("checkpoint: non-finite parameters");
  return net;
}

}  // namespace simmia::tinynet
