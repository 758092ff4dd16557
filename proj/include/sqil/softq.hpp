#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sqil/common.hpp"
#include "sqil/gridnav.hpp"
#include "sqil/network.hpp"

namespace sqil {

// Soft value of one Q row: log sum_a exp(q_a), max-shifted so large entries do
// not overflow. Satisfies max(q) <= soft_value(q) <= max(q) + log(|A|).
template <typename Derived>
double soft_value(const Eigen::MatrixBase<Derived>& q_row) {
  if (q_row.size() == 0) throw ContractError("soft_value: empty Q row");
  const double shift = q_row.maxCoeff();
  return shift + std::log((q_row.array() - shift).exp().sum());
}

// Boltzmann distribution exp(q_a - soft_value(q)); invariant under adding a
// constant to every entry.
template <typename Derived>
ActionDistribution boltzmann_policy(const Eigen::MatrixBase<Derived>& q_row) {
  const double v = soft_value(q_row);
  ActionDistribution probs = (q_row.array() - v).exp().matrix();
  probs /= probs.sum();
  return probs;
}

// Soft Q function: either a dense table indexed (state, action) or a handle to
// a feedforward approximator over observations.
class SoftQFunction {
 public:
  static SoftQFunction tabular(Eigen::MatrixXd table);
  static SoftQFunction approx(Network net);

  bool is_tabular() const { return std::holds_alternative<Eigen::MatrixXd>(impl_); }
  int action_count() const;

  // Q(s, .) for one state; tabular mode reads by state id, approx mode runs
  // the network on the observation.
  Eigen::VectorXd values(const Observation& obs, int state_id) const;
  Eigen::VectorXd values_at(const Transition& t) const { return values(t.obs, t.state); }
  Eigen::VectorXd values_next(const Transition& t) const {
    return values(t.next_obs, t.next_state);
  }

  const Eigen::MatrixXd& table() const;
  const Network& network() const;

 private:
  explicit SoftQFunction(std::variant<Eigen::MatrixXd, Network> impl)
      : impl_(std::move(impl)) {}
  std::variant<Eigen::MatrixXd, Network> impl_;
};

enum class Norm { Mean, Sum };

// Squared soft Bellman error delta^2(batch, r): deviation of Q(s,a) from the
// one-step target r + gamma * soft_value(Q(s',.)), with the soft value
// replaced by zero on absorbing transitions. The reward r is one constant for
// the whole batch.
double squared_soft_bellman_error(const SoftQFunction& q, std::span<const Transition> batch,
                                  double reward, double gamma, Norm norm = Norm::Mean);

// Reward implied by a candidate Q on one observed transition,
// Q(s,a) - gamma * soft_value(Q(s',.)). Diagnostic only.
double implied_reward(const SoftQFunction& q, const Transition& t, double gamma);

// Exact tabular solver: iterates Q <- R + gamma * P * v(Q) to the soft Bellman
// fixed point, where v is zero at absorbing states. Residual is the sup-norm
// change per sweep and contracts at rate <= gamma. Throws NumericalError if
// the tolerance is not reached within max_sweeps.
SoftQFunction soft_value_iteration(const TabularMdp& mdp, double gamma, double tol = 1e-10,
                                   int max_sweeps = 100000,
                                   std::vector<double>* residuals = nullptr);
SoftQFunction soft_value_iteration(const GridNav& env, double gamma, double tol = 1e-10,
                                   int max_sweeps = 100000,
                                   std::vector<double>* residuals = nullptr);

// CSV export of a tabular Q (state rows, one column per action).
void write_q_csv(const Eigen::MatrixXd& table, std::ostream& out);
void write_q_csv(const Eigen::MatrixXd& table, const std::string& path);
Eigen::MatrixXd read_q_csv(std::istream& in);
Eigen::MatrixXd read_q_csv(const std::string& path);

}  // namespace sqil
