#include "sqil/network.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sqil {
namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ConfigError("network needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  }
}

}  // namespace

Network::Network(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  check_sizes(sizes_);
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]));
    biases_.emplace_back(Eigen::VectorXd::Zero(sizes_[i + 1]));
  }
}

Network::Network(std::vector<int> layer_sizes, std::uint64_t seed)
    : Network(std::move(layer_sizes)) {
  RandomStream rng(seed);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[i]));
    for (Eigen::Index c = 0; c < weights_[i].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[i].rows(); ++r)
        weights_[i](r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < biases_[i].size(); ++r)
      biases_[i][r] = rng.uniform(-bound, bound);
  }
}

Network Network::zeros(std::vector<int> layer_sizes) { return Network(std::move(layer_sizes)); }

Eigen::VectorXd Network::forward(const Eigen::Ref<const Eigen::VectorXd>& input) const {
  if (input.size() != input_size())
    throw ContractError("forward: input size " + std::to_string(input.size()) +
                        ", expected " + std::to_string(input_size()));
  Eigen::VectorXd a = input;
  for (int l = 0; l < layer_count(); ++l) {
    a = (weights_[l] * a + biases_[l]).eval();
    if (l + 1 < layer_count()) a = a.array().tanh().matrix();
  }
  return a;
}

Eigen::MatrixXd Network::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_size())
    throw ContractError("forward_batch: input rows " + std::to_string(inputs.rows()) +
                        ", expected " + std::to_string(input_size()));
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    a = ((weights_[l] * a).colwise() + biases_[l]).eval();
    if (l + 1 < layer_count()) a = a.array().tanh().matrix();
  }
  return a;
}

int Network::parameter_count() const {
  int n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Network::flatten() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index at = 0;
  for (int l = 0; l < layer_count(); ++l) {
    out.segment(at, weights_[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
    at += weights_[l].size();
    out.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return out;
}

void Network::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != parameter_count())
    throw ContractError("set_parameters: expected " + std::to_string(parameter_count()) +
                        " parameters, got " + std::to_string(params.size()));
  Eigen::Index at = 0;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) =
        params.segment(at, weights_[l].size());
    at += weights_[l].size();
    biases_[l] = params.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

double batch_loss_value(const Network& net, const Eigen::MatrixXd& inputs,
                        const BatchLossFn& loss_fn) {
  return loss_fn(net.forward_batch(inputs)).value;
}

Eigen::VectorXd loss_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                              const BatchLossFn& loss_fn, double* loss_value) {
  const int layers = net.layer_count();

  // Forward pass keeping each layer's activations.
  std::vector<Eigen::MatrixXd> acts(layers + 1);
  acts[0] = inputs;
  for (int l = 0; l < layers; ++l) {
    acts[l + 1] = ((net.weights(l) * acts[l]).colwise() + net.biases(l)).eval();
    if (l + 1 < layers) acts[l + 1] = acts[l + 1].array().tanh().matrix();
  }

  BatchLoss loss = loss_fn(acts[layers]);
  if (loss.output_grads.rows() != net.output_size() || loss.output_grads.cols() != inputs.cols())
    throw ContractError("loss_gradient: output_grads shape mismatch");
  if (loss_value) *loss_value = loss.value;

  Eigen::VectorXd grad(net.parameter_count());
  Eigen::Index tail = grad.size();
  Eigen::MatrixXd delta = loss.output_grads;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd dw = delta * acts[l].transpose();
    const Eigen::VectorXd db = delta.rowwise().sum();
    tail -= db.size();
    grad.segment(tail, db.size()) = db;
    tail -= dw.size();
    grad.segment(tail, dw.size()) = Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size());
    if (l > 0) {
      // acts[l] are tanh outputs for hidden layers; d tanh = 1 - tanh^2.
      delta = ((net.weights(l).transpose() * delta).array() *
               (1.0 - acts[l].array().square()))
                  .matrix();
    }
  }
  if (!std::isfinite(loss.value) || !grad.allFinite())
    throw NumericalError("loss_gradient: non-finite value in backward pass");
  return grad;
}

Eigen::VectorXd finite_diff_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                                     const BatchLossFn& loss_fn, double epsilon) {
  if (epsilon <= 0.0) throw ContractError("finite_diff_gradient: epsilon must be positive");
  Network probe = net;
  Eigen::VectorXd params = net.flatten();
  Eigen::VectorXd grad(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    probe.set_parameters(params);
    const double up = batch_loss_value(probe, inputs, loss_fn);
    params[i] = saved - epsilon;
    probe.set_parameters(params);
    const double down = batch_loss_value(probe, inputs, loss_fn);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

double finite_diff_check(const Network& net, const Eigen::MatrixXd& inputs,
                         const BatchLossFn& loss_fn, double epsilon) {
  const Eigen::VectorXd analytic = loss_gradient(net, inputs, loss_fn);
  const Eigen::VectorXd numeric = finite_diff_gradient(net, inputs, loss_fn, epsilon);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double rel = std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::Ref<const Eigen::VectorXd>& grad) {
  if (grad.size() != params.size())
    throw ContractError("adam_step: gradient/parameter length mismatch");
  if (!grad.allFinite()) throw NumericalError("adam_step: non-finite gradient");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step_count = 0;
  }
  ++state.step_count;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.array().square().matrix();
  const double mc = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double vc = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params -= (state.learning_rate * (state.m / mc).array() /
             ((state.v / vc).array().sqrt() + state.epsilon))
                .matrix();
}

void adam_step(AdamState& state, Network& net, const Eigen::Ref<const Eigen::VectorXd>& grad) {
  Eigen::VectorXd params = net.flatten();
  adam_step(state, params, grad);
  net.set_parameters(params);
}

void save_network(const Network& net, std::ostream& out) {
  out << "sqil-net v1\n";
  out << "layers";
  for (int s : net.layer_sizes()) out << ' ' << s;
  out << '\n';
  const Eigen::VectorXd params = net.flatten();
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < params.size(); ++i) out << params[i] << '\n';
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  save_network(net, out);
}

Network load_network(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "sqil-net" || version != "v1")
    throw ConfigError("unrecognized checkpoint header");
  std::string tag;
  in >> tag;
  if (tag != "layers") throw ConfigError("malformed checkpoint: missing layer sizes");
  std::string line;
  std::getline(in, line);
  std::istringstream sizes_in(line);
  std::vector<int> sizes;
  int s;
  while (sizes_in >> s) sizes.push_back(s);
  Network net = Network::zeros(sizes);
  Eigen::VectorXd params(net.parameter_count());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (!(in >> params[i])) throw ConfigError("truncated checkpoint");
  }
  net.set_parameters(params);
  return net;
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  return load_network(in);
}

}  // namespace sqil
