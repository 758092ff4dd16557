#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sqil/common.hpp"

namespace sqil {

// Feedforward net with tanh hidden layers and a linear output layer.
// Parameters flatten in a canonical order: for each layer, the weight matrix
// in Eigen's column-major storage order, then the bias vector.
class Network {
 public:
  // layer_sizes = {input, hidden..., output}; weights drawn from
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with the given seed.
  Network(std::vector<int> layer_sizes, std::uint64_t seed);

  static Network zeros(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(weights_.size()); }

  const Eigen::MatrixXd& weights(int layer) const { return weights_[layer]; }
  const Eigen::VectorXd& biases(int layer) const { return biases_[layer]; }
  Eigen::MatrixXd& weights(int layer) { return weights_[layer]; }
  Eigen::VectorXd& biases(int layer) { return biases_[layer]; }

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& input) const;

  // Inputs as columns; returns outputs as columns.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  int parameter_count() const;
  Eigen::VectorXd flatten() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params);

 private:
  explicit Network(std::vector<int> layer_sizes);

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Batch loss over network outputs: the scalar value plus d(value)/d(output)
// for every batch column.
struct BatchLoss {
  double value = 0.0;
  Eigen::MatrixXd output_grads;  // output_size x batch
};
using BatchLossFn = std::function<BatchLoss(const Eigen::MatrixXd& outputs)>;

double batch_loss_value(const Network& net, const Eigen::MatrixXd& inputs,
                        const BatchLossFn& loss_fn);

// Analytic gradient of the batch loss w.r.t. all parameters, flattened in the
// canonical order. Errors on non-finite intermediates. If loss_value is given
// it receives the loss of the same forward pass.
Eigen::VectorXd loss_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                              const BatchLossFn& loss_fn, double* loss_value = nullptr);

// Max over parameters of |analytic - central difference| / max(1, |analytic|).
double finite_diff_check(const Network& net, const Eigen::MatrixXd& inputs,
                         const BatchLossFn& loss_fn, double epsilon = 1e-5);

// Central-difference gradient of the loss value; the oracle side of the check.
Eigen::VectorXd finite_diff_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                                     const BatchLossFn& loss_fn, double epsilon = 1e-5);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m;  // sized on first step
  Eigen::VectorXd v;
  long step_count = 0;
};

// In-place Adam update with bias correction. Errors on non-finite gradients.
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::Ref<const Eigen::VectorXd>& grad);
void adam_step(AdamState& state, Network& net, const Eigen::Ref<const Eigen::VectorXd>& grad);

// Versioned text checkpoint: layer sizes plus flattened parameters.
void save_network(const Network& net, std::ostream& out);
void save_network(const Network& net, const std::string& path);
Network load_network(std::istream& in);
Network load_network(const std::string& path);

}  // namespace sqil
