#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "sqil/network.hpp"

using namespace sqil;

namespace {

Eigen::MatrixXd random_inputs(RandomStream& rng, int rows, int cols) {
  Eigen::MatrixXd x(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) x(r, c) = rng.uniform(-1.0, 1.0);
  return x;
}

// Mean squared deviation of all outputs from fixed targets.
BatchLossFn squared_targets_loss(Eigen::MatrixXd targets) {
  return [targets = std::move(targets)](const Eigen::MatrixXd& out) {
    BatchLoss loss;
    const Eigen::MatrixXd diff = out - targets;
    loss.value = diff.array().square().sum() / diff.cols();
    loss.output_grads = 2.0 * diff / diff.cols();
    return loss;
  };
}

BatchLossFn sum_of_outputs_loss() {
  return [](const Eigen::MatrixXd& out) {
    return BatchLoss{out.sum(), Eigen::MatrixXd::Ones(out.rows(), out.cols())};
  };
}

}  // namespace

TEST_CASE("zero network maps everything to zero") {
  const Network net = Network::zeros({4, 8, 3});
  const Eigen::VectorXd out = net.forward(Eigen::Vector4d(1.0, -2.0, 3.0, 0.5));
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer with identity weights is the identity") {
  Network net = Network::zeros({3, 3});
  net.weights(0) = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d x(0.25, -1.5, 2.0);
  CHECK((net.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward rejects shape mismatches") {
  const Network net = Network::zeros({3, 2});
  CHECK_THROWS_AS(net.forward(Eigen::Vector2d(1.0, 2.0)), ContractError);
  CHECK_THROWS_AS(Network::zeros({3}), ConfigError);
  CHECK_THROWS_AS(Network::zeros({3, 0, 2}), ConfigError);
}

TEST_CASE("seeded init is deterministic and within the fan-in bound") {
  const Network a({5, 7, 2}, 42);
  const Network b({5, 7, 2}, 42);
  CHECK(a.flatten() == b.flatten());
  const Network c({5, 7, 2}, 43);
  CHECK(a.flatten() != c.flatten());
  CHECK(a.weights(0).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
  CHECK(a.weights(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(7.0));
}

TEST_CASE("flatten round-trips") {
  RandomStream rng(7);
  const Network net({4, 6, 5, 3}, rng.bits());
  Network other = Network::zeros({4, 6, 5, 3});
  other.set_parameters(net.flatten());
  CHECK(other.flatten() == net.flatten());
  const Eigen::MatrixXd x = random_inputs(rng, 4, 3);
  CHECK((other.forward_batch(x) - net.forward_batch(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(other.set_parameters(Eigen::VectorXd::Zero(3)), ContractError);
}

TEST_CASE("constant loss has zero gradient") {
  const Network net({3, 4, 2}, 11);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
  const BatchLossFn constant = [](const Eigen::MatrixXd& out) {
    return BatchLoss{7.5, Eigen::MatrixXd::Zero(out.rows(), out.cols())};
  };
  CHECK(loss_gradient(net, x, constant).cwiseAbs().maxCoeff() == 0.0);
  CHECK(finite_diff_check(net, x, constant) == 0.0);
}

TEST_CASE("linear layer gradient of sum-of-outputs equals the input") {
  Network net = Network::zeros({3, 1});
  Eigen::MatrixXd x(3, 1);
  x << 0.5, -2.0, 1.25;
  const Eigen::VectorXd grad = loss_gradient(net, x, sum_of_outputs_loss());
  // Canonical order: the three weights, then the bias.
  CHECK(grad[0] == 0.5);
  CHECK(grad[1] == -2.0);
  CHECK(grad[2] == 1.25);
  CHECK(grad[3] == 1.0);
}

TEST_CASE("central differences are near-exact on a quadratic") {
  Network net = Network::zeros({1, 1});
  net.weights(0)(0, 0) = 0.7;
  net.biases(0)(0) = -0.2;
  Eigen::MatrixXd x(1, 1);
  x << 1.5;
  Eigen::MatrixXd target(1, 1);
  target << 2.0;
  CHECK(finite_diff_check(net, x, squared_targets_loss(target)) <= 1e-8);
}

TEST_CASE("gradient check on random networks and batches") {
  RandomStream rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int in = 2 + static_cast<int>(rng.index(4));
    const int hidden = 2 + static_cast<int>(rng.index(6));
    const int out = 1 + static_cast<int>(rng.index(4));
    const int batch = 1 + static_cast<int>(rng.index(6));
    const Network net({in, hidden, out}, rng.bits());
    const Eigen::MatrixXd x = random_inputs(rng, in, batch);
    const Eigen::MatrixXd targets = random_inputs(rng, out, batch);
    CHECK(finite_diff_check(net, x, squared_targets_loss(targets)) <= 1e-4);
  }
}

TEST_CASE("non-finite propagation raises a numerical error") {
  const Network net({2, 2}, 5);
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 1.0;
  const BatchLossFn poison = [](const Eigen::MatrixXd& out) {
    return BatchLoss{std::numeric_limits<double>::quiet_NaN(),
                     Eigen::MatrixXd::Constant(out.rows(), out.cols(),
                                               std::numeric_limits<double>::quiet_NaN())};
  };
  CHECK_THROWS_AS(loss_gradient(net, x, poison), NumericalError);
}

TEST_CASE("adam step behavior") {
  AdamState state;
  state.learning_rate = 1e-3;

  Eigen::VectorXd params = Eigen::VectorXd::Constant(4, 1.0);
  adam_step(state, params, Eigen::VectorXd::Zero(4));
  CHECK((params.array() == 1.0).all());

  // First bias-corrected step has magnitude ~lr regardless of gradient scale.
  AdamState fresh;
  fresh.learning_rate = 1e-3;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 1e-4, 3.0, -2000.0;
  adam_step(fresh, p, g);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(p[i]) <= 1e-3);
    CHECK(std::abs(p[i]) >= 0.99e-3);
    CHECK((p[i] < 0.0) == (g[i] > 0.0));
  }
  CHECK(fresh.step_count == 1);

  AdamState idle;
  idle.learning_rate = 0.0;
  Eigen::VectorXd q = Eigen::VectorXd::Constant(2, 3.0);
  adam_step(idle, q, Eigen::VectorXd::Constant(2, 5.0));
  CHECK((q.array() == 3.0).all());

  AdamState bad;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd nan_grad = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(adam_step(bad, r, nan_grad), NumericalError);
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    RandomStream rng(77);
    Network net({3, 5, 2}, rng.bits());
    AdamState adam;
    const Eigen::MatrixXd x = random_inputs(rng, 3, 4);
    const Eigen::MatrixXd targets = random_inputs(rng, 2, 4);
    const BatchLossFn loss = squared_targets_loss(targets);
    for (int i = 0; i < 50; ++i) adam_step(adam, net, loss_gradient(net, x, loss));
    return net.flatten();
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoints round-trip exactly") {
  RandomStream rng(13);
  const Network net({4, 6, 3}, rng.bits());
  std::stringstream io;
  save_network(net, io);
  const Network back = load_network(io);
  CHECK(back.layer_sizes() == net.layer_sizes());
  CHECK(back.flatten() == net.flatten());

  std::stringstream bad("sqil-net v9\nlayers 1 1\n0\n0\n");
  CHECK_THROWS_AS(load_network(bad), ConfigError);
}
