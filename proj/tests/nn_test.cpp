#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "rlattack/nn.hpp"
#include "rlattack/nn_io.hpp"
#include "oracles.hpp"

using namespace rlattack;

namespace {

Network random_net(std::uint64_t seed, std::vector<int> dims) {
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  Network net = init_network(std::span<const int>(dims), std::span<const Activation>(acts), seed);
  // non-zero biases so relu kinks sit away from the origin
  std::mt19937_64 rng(seed + 99);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    for (Eigen::Index r = 0; r < net.bias(i).size(); ++r) net.bias(i)(r) = u(rng);
  }
  return net;
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST(InitNetwork, SameSeedSameBytes) {
  const std::vector<int> dims{4, 3, 2};
  const std::vector<Activation> acts{Activation::relu, Activation::identity};
  Network a = init_network(std::span<const int>(dims), std::span<const Activation>(acts), 7);
  Network b = init_network(std::span<const int>(dims), std::span<const Activation>(acts), 7);
  EXPECT_EQ(serialize_network(a), serialize_network(b));
  Network c = init_network(std::span<const int>(dims), std::span<const Activation>(acts), 8);
  EXPECT_NE(serialize_network(a), serialize_network(c));
}

TEST(InitNetwork, RejectsBadShapes) {
  const std::vector<int> one{4};
  const std::vector<Activation> none;
  EXPECT_THROW(init_network(std::span<const int>(one), std::span<const Activation>(none), 1),
               std::invalid_argument);
  const std::vector<int> dims{4, 3, 2};
  const std::vector<Activation> acts{Activation::relu};
  EXPECT_THROW(init_network(std::span<const int>(dims), std::span<const Activation>(acts), 1),
               std::invalid_argument);
}

TEST(InitNetwork, WeightsWithinGlorotBound) {
  Network net = random_net(3, {10, 6, 3});
  for (const auto& l : net.layers()) {
    const double s = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
    EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), s);
  }
}

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  DenseLayer<double> l{Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), Activation::identity};
  Network net({l});
  EXPECT_EQ(forward(net, Eigen::VectorXd::Ones(2).eval()), Eigen::VectorXd::Zero(2));
}

TEST(Forward, IdentityAndRelu) {
  DenseLayer<double> id{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), Activation::identity};
  Network ident({id});
  Eigen::VectorXd x(2);
  x << 0.3, 0.7;
  EXPECT_EQ(forward(ident, x), x);

  DenseLayer<double> neg{-Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), Activation::relu};
  Network clamp({neg});
  x << 1, 2;
  EXPECT_EQ(forward(clamp, x), Eigen::VectorXd::Zero(2));
}

TEST(Forward, LengthMismatchThrows) {
  Network net = random_net(1, {3, 2});
  EXPECT_THROW(forward(net, Eigen::VectorXd::Zero(4).eval()), std::invalid_argument);
}

TEST(Forward, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Network net = random_net(100 + trial, {7, 5, 4, 3});
    Eigen::VectorXd x = random_vec(rng, 7);
    Eigen::VectorXd got = forward(net, x);
    std::vector<double> want = testing_oracles::loop_forward(net, x);
    ASSERT_EQ(got.size(), static_cast<Eigen::Index>(want.size()));
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got(i), want[i], 1e-12);
  }
}

TEST(Forward, BatchColumnsMatchSingle) {
  std::mt19937_64 rng(5);
  Network net = random_net(5, {6, 4, 2});
  Eigen::MatrixXd xs(6, 3);
  for (int c = 0; c < 3; ++c) xs.col(c) = random_vec(rng, 6);
  Eigen::MatrixXd ys = forward_batch(net, xs);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT((ys.col(c) - forward(net, Eigen::VectorXd(xs.col(c)))).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Forward, Deterministic) {
  std::mt19937_64 rng(5);
  Network net = random_net(5, {6, 4, 2});
  Eigen::VectorXd x = random_vec(rng, 6);
  EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(Backward, ZeroCotangentGivesZeroGradients) {
  std::mt19937_64 rng(2);
  Network net = random_net(2, {5, 4, 3});
  GradientBundle<double> g = backward(net, random_vec(rng, 5), Eigen::VectorXd::Zero(3).eval());
  EXPECT_EQ(g.input_grad, Eigen::VectorXd::Zero(5));
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    EXPECT_TRUE(g.params.weight[i].isZero(0));
    EXPECT_TRUE(g.params.bias[i].isZero(0));
  }
}

TEST(Backward, LinearLayerInputGradIsTransposedWeight) {
  Network net = random_net(4, {4, 3});
  std::mt19937_64 rng(4);
  Eigen::VectorXd x = random_vec(rng, 4);
  Eigen::VectorXd g = random_vec(rng, 3);
  GradientBundle<double> b = backward(net, x, g);
  EXPECT_LT((b.input_grad - net.layer(0).weight.transpose() * g).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((b.params.weight[0] - g * x.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, ShapeMismatchThrows) {
  Network net = random_net(4, {4, 3});
  EXPECT_THROW(backward(net, Eigen::VectorXd::Zero(4).eval(), Eigen::VectorXd::Zero(2).eval()),
               std::invalid_argument);
}

// 100 random (net, x, cotangent) triples against central differences.
TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Network net = random_net(500 + trial, {6, 5, 4, 3});
    Eigen::VectorXd x = random_vec(rng, 6);
    Eigen::VectorXd cot = random_vec(rng, 3);
    GradientBundle<double> g = backward(net, x, cot);
    testing_oracles::FdReport rep = testing_oracles::check_gradients(net, x, cot, g, 1e-5, 1e-4, 1e-7);
    EXPECT_EQ(rep.failures, 0) << "trial " << trial << " worst rel " << rep.worst_relative;
    checked += rep.entries;
  }
  EXPECT_GT(checked, 0);
}

TEST(SgdStep, ZeroLearningRateLeavesParameters) {
  Network net = random_net(9, {3, 2});
  Network before = net;
  ParamGrads<double> g = ParamGrads<double>::zeros_like(net);
  g.weight[0].setConstant(1.0);
  sgd_step(net, g, 0.0);
  EXPECT_EQ(net, before);
}

TEST(SgdStep, Arithmetic) {
  DenseLayer<double> l{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::identity};
  Network net({l});
  ParamGrads<double> g = ParamGrads<double>::zeros_like(net);
  g.weight[0](0, 0) = 0.5;
  sgd_step(net, g, 0.1);
  EXPECT_DOUBLE_EQ(net.layer(0).weight(0, 0), 0.95);
}

TEST(SgdStep, NonFiniteGradientThrows) {
  Network net = random_net(9, {3, 2});
  ParamGrads<double> g = ParamGrads<double>::zeros_like(net);
  g.bias[0](0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sgd_step(net, g, 0.1), std::runtime_error);
}

// Loss 0.5 * (w*1 + b - 3)^2 has its minimum on w + b = 3; starting at 0 and
// stepping on both parameters identically converges to w = b = 1.5.
TEST(SgdStep, ConvergesOnQuadratic) {
  DenseLayer<double> l{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), Activation::identity};
  Network net({l});
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  for (int i = 0; i < 500; ++i) {
    const double y = forward(net, x)(0);
    GradientBundle<double> g = backward(net, x, Eigen::VectorXd::Constant(1, y - 3.0).eval());
    sgd_step(net, g.params, 0.1);
  }
  EXPECT_NEAR(net.layer(0).weight(0, 0), 1.5, 1e-6);
  EXPECT_NEAR(net.layer(0).bias(0), 1.5, 1e-6);
}

TEST(Softmax, EqualLogitsUniform) {
  Eigen::VectorXd p = softmax(Eigen::VectorXd::Zero(3).eval(), 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, HandEvaluatedPair) {
  Eigen::VectorXd q(2);
  q << std::log(2.0), 0.0;
  Eigen::VectorXd p = softmax(q, 1.0);
  EXPECT_NEAR(p(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p(1), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(softmax(Eigen::VectorXd::Zero(2).eval(), 0.0), std::invalid_argument);
  EXPECT_THROW(softmax(Eigen::VectorXd::Zero(2).eval(), -1.0), std::invalid_argument);
}

TEST(Softmax, SimplexShiftInvarianceAndArgmax) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::uniform_real_distribution<double> temp(0.05, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd q(5);
    for (int i = 0; i < 5; ++i) q(i) = u(rng);
    const double t = temp(rng);
    Eigen::VectorXd p = softmax(q, t);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GT(p.minCoeff(), 0.0);
    Eigen::VectorXd shifted = (q.array() + u(rng)).matrix();
    EXPECT_LT((softmax(shifted, t) - p).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(argmax_index(p), argmax_index(q));
  }
}

TEST(Persistence, RoundTripThroughFile) {
  Network net = random_net(31, {8, 5, 3});
  const auto path = std::filesystem::temp_directory_path() / "rlattack_nn_test.net";
  save_network(net, path);
  EXPECT_EQ(load_network(path), net);
  std::filesystem::remove(path);
}

TEST(Persistence, HeaderLayout) {
  Network net = random_net(31, {2, 1});
  const std::string bytes = serialize_network(net);
  ASSERT_GE(bytes.size(), 9u + 8u);
  EXPECT_EQ(bytes.substr(0, 9), std::string("RLAL-NET\0", 9));
  EXPECT_EQ(bytes.size(), 9u + 4 + 4 + (4 + 4 + 1 + 2 * 8 + 8));
}

TEST(Persistence, RejectsUnknownVersionAndTruncation) {
  Network net = random_net(31, {2, 1});
  std::string bytes = serialize_network(net);
  std::string bad = bytes;
  bad[9] = 7;
  EXPECT_THROW(deserialize_network(bad), std::runtime_error);
  EXPECT_THROW(deserialize_network(bytes.substr(0, bytes.size() - 3)), std::runtime_error);
  EXPECT_EQ(deserialize_network(bytes), net);
}
