#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "simmia/errors.hpp"
#include "simmia/rng.hpp"
#include "simmia/tinynet.hpp"

using namespace simmia;
using namespace simmia::tinynet;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// A loss that touches every output: 0.5 * sum (out - t)^2.
struct QuadLoss {
  Eigen::MatrixXd target;

  double value(const Network& net, const Eigen::MatrixXd& x) const {
    return 0.5 * (net.forward(x).output() - target).squaredNorm();
  }
  Eigen::MatrixXd grad(const Tape& tape) const { return tape.output() - target; }
};

double rel_err(double analytic, double numeric) {
  // Floor keeps near-zero gradients from inflating the ratio.
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Largest relative error between backward and central differences.
double fd_max_error(Network net, const Eigen::MatrixXd& x, const QuadLoss& loss, double h = 1e-5) {
  const auto tape = net.forward(x);
  const auto grads = net.backward(tape, loss.grad(tape));
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss.value(net, x);
      param = saved - h;
      const double down = loss.value(net, x);
      param = saved;
      worst = std::max(worst, rel_err(analytic, (up - down) / (2.0 * h)));
    };
    auto& layer = net.mutable_layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) probe(layer.weights.data()[i], grads[l].weights.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias.data()[i], grads[l].bias.data()[i]);
  }
  return worst;
}

Network three_layer(std::uint64_t seed) {
  const LayerSpec specs[] = {{6, Activation::kTanh}, {5, Activation::kTanh}, {2, Activation::kSigmoid}};
  return make_network(4, specs, seed);
}

struct Toy {
  Eigen::MatrixXd x;
  std::vector<std::uint8_t> y;
};

Toy separable_toy() {
  Toy t{Eigen::MatrixXd(2, 10), {}};
  const double pts[10][2] = {{-2, -1}, {-1.5, -2}, {-1, -1.2}, {-2.5, 0.1}, {-0.8, -2.2},
                             {2, 1},   {1.5, 2},   {1, 1.3},   {2.4, -0.2}, {0.9, 2.1}};
  for (int i = 0; i < 10; ++i) {
    t.x(0, i) = pts[i][0];
    t.x(1, i) = pts[i][1];
    t.y.push_back(i >= 5 ? 1 : 0);
  }
  return t;
}

double training_asr(const Network& net, const Toy& t) {
  const auto p = predict(net, t.x);
  int ok = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) ok += ((p(i) >= 0.5) == (t.y[static_cast<std::size_t>(i)] != 0));
  return ok / static_cast<double>(p.size());
}

double mean_bce(const Network& net, const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& y) {
  Eigen::MatrixXd g;
  return bce_batch(net.forward(x).output(), y, g);
}

}  // namespace

TEST(Forward, IdentityNetwork) {
  Network net({DenseLayer{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::kNone}});
  const std::vector<double> x{1.5, -2.0, 0.25};
  const auto r = forward(net, x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.output(i), x[i]);
}

TEST(Forward, ZeroSigmoidIsHalf) {
  Network net({DenseLayer{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4), Activation::kSigmoid}});
  const auto r = forward(net, std::vector<double>{3.0, -7.0, 1.0});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(r.output(i), 0.5);
}

TEST(Forward, TwoLayerMatchesStraightLine) {
  Rng rng(11);
  const Eigen::MatrixXd w1 = random_matrix(5, 3, rng), w2 = random_matrix(2, 5, rng);
  const Eigen::VectorXd b1 = random_vector(5, rng), b2 = random_vector(2, rng);
  Network net({DenseLayer{w1, b1, Activation::kTanh}, DenseLayer{w2, b2, Activation::kSigmoid}});
  const std::vector<double> x{0.3, -1.1, 0.7};

  double hidden[5], expect[2];
  for (int i = 0; i < 5; ++i) {
    double s = b1(i);
    for (int j = 0; j < 3; ++j) s += w1(i, j) * x[j];
    hidden[i] = std::tanh(s);
  }
  for (int i = 0; i < 2; ++i) {
    double s = b2(i);
    for (int j = 0; j < 5; ++j) s += w2(i, j) * hidden[j];
    expect[i] = sigmoid(s);
  }
  const auto r = forward(net, x);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(r.output(i), expect[i], 1e-12);
}

TEST(Forward, ShapeMismatch) {
  const auto net = three_layer(1);
  EXPECT_THROW(forward(net, std::vector<double>{1, 2, 3}), ArgumentError);
  EXPECT_THROW(Network({DenseLayer{Eigen::MatrixXd::Zero(2, 3), {}, Activation::kNone},
                        DenseLayer{Eigen::MatrixXd::Zero(1, 4), {}, Activation::kNone}}),
               ArgumentError);
}

TEST(Backward, ZeroLossGradGivesZeroGradients) {
  const auto net = three_layer(2);
  const auto r = forward(net, std::vector<double>{0.1, 0.2, -0.3, 0.4});
  const auto g = backward(net, r.tape, std::vector<double>{0.0, 0.0});
  for (const auto& layer : g) {
    EXPECT_EQ(layer.weights.norm(), 0.0);
    EXPECT_EQ(layer.bias.norm(), 0.0);
  }
}

TEST(Backward, LinearSquaredErrorClosedForm) {
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 3, -1, 0.5, 0;
  Network net({DenseLayer{w, Eigen::VectorXd::Zero(2), Activation::kNone}});
  const std::vector<double> x{1.0, -2.0, 0.5};
  const Eigen::Vector2d target(0.25, 1.0);
  const auto r = forward(net, x);
  const Eigen::VectorXd residual = r.output - target;
  const std::vector<double> loss_grad{2.0 * residual(0), 2.0 * residual(1)};
  const auto g = backward(net, r.tape, loss_grad);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g[0].weights(i, j), 2.0 * residual(i) * x[j]);
    EXPECT_DOUBLE_EQ(g[0].bias(i), 2.0 * residual(i));
  }
}

TEST(Backward, FiniteDifferenceThreeLayer) {
  Rng rng(5);
  const auto x = random_matrix(4, 3, rng);
  const QuadLoss loss{random_matrix(2, 3, rng)};
  EXPECT_LT(fd_max_error(three_layer(7), x, loss), 1e-6);
}

TEST(Backward, FiniteDifferenceNoBiasLayers) {
  const LayerSpec specs[] = {{3, Activation::kTanh, false}, {4, Activation::kSigmoid, false}};
  Rng rng(6);
  const auto x = random_matrix(3, 2, rng);
  EXPECT_LT(fd_max_error(make_network(3, specs, 8), x, QuadLoss{random_matrix(4, 2, rng)}), 1e-6);
}

TEST(Backward, InputGradientMatchesDifferences) {
  const auto net = three_layer(9);
  Rng rng(7);
  Eigen::MatrixXd x = random_matrix(4, 1, rng);
  const QuadLoss loss{random_matrix(2, 1, rng)};
  const auto tape = net.forward(x);
  Eigen::MatrixXd dx;
  net.backward(tape, loss.grad(tape), &dx);
  const double h = 1e-5;
  for (int i = 0; i < 4; ++i) {
    const double saved = x(i, 0);
    x(i, 0) = saved + h;
    const double up = loss.value(net, x);
    x(i, 0) = saved - h;
    const double down = loss.value(net, x);
    x(i, 0) = saved;
    EXPECT_LT(rel_err(dx(i, 0), (up - down) / (2 * h)), 1e-6);
  }
}

TEST(Backward, StaleTapeIsUsageError) {
  auto net = three_layer(3);
  const auto r = forward(net, std::vector<double>{0, 0, 0, 0});
  net.mutable_layers()[0].weights(0, 0) += 1.0;
  EXPECT_THROW(backward(net, r.tape, std::vector<double>{1, 1}), UsageError);
  const auto other = three_layer(3);
  EXPECT_THROW(backward(other, r.tape, std::vector<double>{1, 1}), UsageError);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(0.5, true).loss, std::log(2.0), 1e-15);
  EXPECT_LT(bce_loss(1.0 - 1e-13, true).loss, 1e-11);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, true).loss));
  EXPECT_NEAR(bce_loss(0.0, true).loss, -std::log(kBceClamp), 1e-9);
}

TEST(Bce, GradientMatchesDifference) {
  const double h = 1e-6;
  const double numeric = (bce_loss(0.3 + h, false).loss - bce_loss(0.3 - h, false).loss) / (2 * h);
  EXPECT_NEAR(bce_loss(0.3, false).dloss_dpred, numeric, 1e-8);
  EXPECT_NEAR(bce_loss(0.3, false).dloss_dpred, 1.0 / 0.7, 1e-12);
}

TEST(Activations, SigmoidAndTanhStayOpen) {
  Network net({DenseLayer{Eigen::MatrixXd::Constant(2, 1, 1.0), Eigen::VectorXd::Zero(2), Activation::kSigmoid}});
  Network tanh_net({DenseLayer{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::kTanh}});
  for (double x = -30.0; x <= 30.0; x += 0.5) {
    const double s = forward(net, std::vector<double>{x}).output(0);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    const double t = forward(tanh_net, std::vector<double>{x / 20.0}).output(0);
    EXPECT_GT(t, -1.0);
    EXPECT_LT(t, 1.0);
  }
}

TEST(Init, XavierLimitAndZeroBias) {
  const LayerSpec specs[] = {{20, Activation::kTanh}};
  const auto net = make_network(30, specs, 4);
  const double limit = std::sqrt(6.0 / 50.0);
  EXPECT_LE(net.layers()[0].weights.cwiseAbs().maxCoeff(), limit);
  EXPECT_GT(net.layers()[0].weights.cwiseAbs().maxCoeff(), 0.8 * limit);
  EXPECT_EQ(net.layers()[0].bias.norm(), 0.0);
  const auto mlp = make_mlp_classifier(7, 16, 4, 0);
  ASSERT_EQ(mlp.layers().size(), 5u);
  EXPECT_EQ(mlp.layers()[3].activation, Activation::kTanh);
  EXPECT_EQ(mlp.layers()[4].activation, Activation::kSigmoid);
  EXPECT_EQ(mlp.output_width(), 1);
  EXPECT_EQ(mlp.parameter_count(), (7 * 16 + 16) + 3 * (16 * 16 + 16) + 17u);
}

TEST(Train, SeparableToyReachesFullAccuracy) {
  const auto toy = separable_toy();
  auto net = make_mlp_classifier(2, 8, 1, 3);
  const auto result = train(net, toy.x, toy.y, TrainConfig{.learning_rate = 0.05, .epochs = 200, .batch_size = 4});
  EXPECT_EQ(result.epoch_loss.size(), 200u);
  EXPECT_EQ(training_asr(net, toy), 1.0);
}

TEST(Train, RandomLabelsStayNearChanceHeldOut) {
  Rng rng(21);
  const Eigen::MatrixXd x = random_matrix(5, 600, rng);
  std::vector<std::uint8_t> y(600);
  for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(2));
  auto net = make_mlp_classifier(5, 16, 2, 1);
  train(net, x.leftCols(400), std::span(y).first(400), TrainConfig{.epochs = 30, .batch_size = 32});
  const std::vector<std::uint8_t> held(y.begin() + 400, y.end());
  EXPECT_GE(mean_bce(net, x.rightCols(200), held), 0.6);
}

TEST(Train, SameSeedBitwiseIdentical) {
  const auto toy = separable_toy();
  const TrainConfig cfg{.epochs = 20, .batch_size = 3, .seed = 9};
  auto a = make_mlp_classifier(2, 6, 2, 1);
  auto b = make_mlp_classifier(2, 6, 2, 1);
  const auto ra = train(a, toy.x, toy.y, cfg);
  const auto rb = train(b, toy.x, toy.y, cfg);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  std::ostringstream sa, sb;
  write_network(sa, a);
  write_network(sb, b);
  EXPECT_EQ(sa.str(), sb.str());

  auto c = make_mlp_classifier(2, 6, 2, 1);
  train(c, toy.x, toy.y, TrainConfig{.epochs = 20, .batch_size = 3, .seed = 10});
  std::ostringstream sc;
  write_network(sc, c);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Train, SgdSmallStepNonIncreasing) {
  Rng rng(4);
  const Eigen::MatrixXd x = random_matrix(3, 64, rng);
  std::vector<std::uint8_t> y(64);
  for (Eigen::Index i = 0; i < 64; ++i) y[static_cast<std::size_t>(i)] = x(0, i) + 0.5 * x(1, i) > 0;
  auto net = make_mlp_classifier(3, 16, 2, 2);
  const auto r = train(net, x, y,
                       TrainConfig{.learning_rate = 1e-4, .epochs = 5, .batch_size = 64, .optimizer = OptimizerKind::kSgd});
  for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) EXPECT_LE(r.epoch_loss[e], r.epoch_loss[e - 1]);
}

TEST(Train, DivergenceReportsEpoch) {
  Network net({DenseLayer{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::kNone}});
  Network* nets[] = {&net};
  int calls = 0;
  const BatchObjective objective = [&](std::span<const std::size_t>, std::vector<Gradients>& grads) {
    grads.assign(1, Gradients{{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)}});
    return ++calls > 3 ? std::nan("") : 1.0;
  };
  try {
    train(nets, 4, objective, TrainConfig{.epochs = 5, .batch_size = 2});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 2);
    EXPECT_NE(std::string(e.what()).find("epoch 2"), std::string::npos);
  }
}

TEST(Train, HugeStepOverflowsParameters) {
  const auto toy = separable_toy();
  auto net = make_mlp_classifier(2, 4, 1, 0);
  try {
    train(net, toy.x, toy.y, TrainConfig{.learning_rate = 1e308, .epochs = 10, .batch_size = 5});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1);
  }
}

TEST(TrainConfig, Validation) {
  EXPECT_THROW((TrainConfig{.learning_rate = 0.0}).validate(), ArgumentError);
  EXPECT_THROW((TrainConfig{.epochs = 0}).validate(), ArgumentError);
  EXPECT_THROW((TrainConfig{.batch_size = 0}).validate(), ArgumentError);
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(to_string(parse_optimizer("adam")), "adam");
  EXPECT_THROW(parse_optimizer("rmsprop"), ArgumentError);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  const LayerSpec specs[] = {{5, Activation::kTanh, false}, {3, Activation::kSigmoid}};
  const auto net = make_network(4, specs, 12);
  std::stringstream ss;
  write_network(ss, net);
  const auto back = read_network(ss);
  ASSERT_EQ(back.layers().size(), 2u);
  EXPECT_FALSE(back.layers()[0].has_bias());
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(back.layers()[l].weights, net.layers()[l].weights);
    EXPECT_EQ(back.layers()[l].activation, net.layers()[l].activation);
  }
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(forward(back, x).output, forward(net, x).output);
}

TEST(Checkpoint, TruncatedOrBadMagicRejected) {
  std::stringstream ss;
  write_network(ss, three_layer(1));
  const auto bytes = ss.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_network(truncated), Error);
  auto bad = bytes;
  bad[0] ^= 0x5a;
  std::istringstream corrupted(bad);
  EXPECT_THROW(read_network(corrupted), FormatError);
}
