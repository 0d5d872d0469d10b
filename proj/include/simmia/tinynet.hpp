#ifndef SIMMIA_TINYNET_HPP
#define SIMMIA_TINYNET_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace simmia::tinynet {

enum class Activation : std::uint8_t { kNone = 0, kTanh = 1, kSigmoid = 2 };

std::string_view to_string(Activation a);

// y = act(W x + b). An empty bias means the layer has none (W x only).
struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out, or empty
  Activation activation = Activation::kNone;

  Eigen::Index inputs() const { return weights.cols(); }
  Eigen::Index outputs() const { return weights.rows(); }
  bool has_bias() const { return bias.size() > 0; }
};

struct LayerGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};
using Gradients = std::vector<LayerGradient>;

class Network;

// Activations cached by a forward pass; columns are samples.
struct Tape {
  const Network* network = nullptr;
  std::uint64_t generation = 0;
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, [l+1] = output of layer l

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

class Network {
 public:
  Network() = default;
  // Throws ArgumentError if consecutive shapes disagree.
  explicit Network(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Mutable access invalidates outstanding tapes.
  std::vector<DenseLayer>& mutable_layers() {
    ++generation_;
    return layers_;
  }
  std::uint64_t generation() const { return generation_; }

  bool empty() const { return layers_.empty(); }
  Eigen::Index input_width() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
  Eigen::Index output_width() const { return layers_.empty() ? 0 : layers_.back().outputs(); }
  std::size_t parameter_count() const;

  // inputs: input_width x batch.
  Tape forward(const Eigen::MatrixXd& inputs) const;

  // output_grad: dLoss/dOutput (output_width x batch). Returns gradients
  // summed over the batch columns; writes dLoss/dInput when asked.
  Gradients backward(const Tape& tape, const Eigen::MatrixXd& output_grad,
                     Eigen::MatrixXd* input_grad = nullptr) const;

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

struct ForwardResult {
  Eigen::VectorXd output;
  Tape tape;
};

// Single-sample convenience wrappers.
ForwardResult forward(const Network& net, std::span<const double> input);
Gradients backward(const Network& net, const Tape& tape, std::span<const double> loss_grad);

struct LayerSpec {
  Eigen::Index outputs = 0;
  Activation activation = Activation::kNone;
  bool bias = true;
};

// Xavier-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
Network make_network(Eigen::Index input_width, std::span<const LayerSpec> layers, std::uint64_t seed);

// `hidden_layers` tanh layers of `hidden_width`, then one sigmoid unit.
Network make_mlp_classifier(Eigen::Index input_width, std::size_t hidden_width, std::size_t hidden_layers,
                            std::uint64_t seed);

struct BceResult {
  double loss = 0.0;
  double dloss_dpred = 0.0;
};

inline constexpr double kBceClamp = 1e-12;

// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
BceResult bce_loss(double prediction, bool label);

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

// Adam or plain SGD over a fixed list of networks.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::span<Network* const> networks);
  void step(std::span<const Gradients> grads);

 private:
  struct Moments {
    Eigen::MatrixXd m_w, v_w;
    Eigen::VectorXd m_b, v_b;
  };
  TrainConfig config_;
  std::vector<Network*> networks_;
  std::vector<std::vector<Moments>> moments_;
  std::uint64_t t_ = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Mean loss over `batch` (row indices into the training set); fills one
// Gradients per network with the gradient of that mean.
using BatchObjective = std::function<double(std::span<const std::size_t> batch, std::vector<Gradients>& grads)>;

// Mini-batch loop with a seeded shuffle per epoch. Throws TrainingError on a
// non-finite loss or parameter.
TrainResult train(std::span<Network* const> networks, std::size_t samples, const BatchObjective& objective,
                  const TrainConfig& config);

// BCE training of a single-output classifier. inputs: input_width x samples.
TrainResult train(Network& net, const Eigen::MatrixXd& inputs, std::span<const std::uint8_t> labels,
                  const TrainConfig& config);

// Mean BCE loss and its gradient for a batch of network outputs (1 x batch).
double bce_batch(const Eigen::MatrixXd& predictions, std::span<const std::uint8_t> labels,
                 Eigen::MatrixXd& output_grad);

Eigen::VectorXd predict(const Network& net, const Eigen::MatrixXd& inputs);

void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);

}  // namespace simmia::tinynet

#endif  // SIMMIA_TINYNET_HPP
