#include "sqil/softq.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sqil {

SoftQFunction SoftQFunction::tabular(Eigen::MatrixXd table) {
  if (table.size() == 0 || !table.allFinite())
    throw ConfigError("tabular Q must be nonempty and finite");
  return SoftQFunction(std::variant<Eigen::MatrixXd, Network>(std::move(table)));
}

SoftQFunction SoftQFunction::approx(Network net) {
  return SoftQFunction(std::variant<Eigen::MatrixXd, Network>(std::move(net)));
}

int SoftQFunction::action_count() const {
  if (is_tabular()) return static_cast<int>(std::get<Eigen::MatrixXd>(impl_).cols());
  return std::get<Network>(impl_).output_size();
}

Eigen::VectorXd SoftQFunction::values(const Observation& obs, int state_id) const {
  if (is_tabular()) {
    const Eigen::MatrixXd& q = std::get<Eigen::MatrixXd>(impl_);
    if (state_id < 0 || state_id >= q.rows())
      throw ContractError("SoftQFunction: state id " + std::to_string(state_id) +
                          " outside table");
    return q.row(state_id).transpose();
  }
  return std::get<Network>(impl_).forward(obs);
}

const Eigen::MatrixXd& SoftQFunction::table() const {
  if (!is_tabular()) throw ContractError("SoftQFunction: not tabular");
  return std::get<Eigen::MatrixXd>(impl_);
}

const Network& SoftQFunction::network() const {
  if (is_tabular()) throw ContractError("SoftQFunction: not an approximator");
  return std::get<Network>(impl_);
}

double squared_soft_bellman_error(const SoftQFunction& q, std::span<const Transition> batch,
                                  double reward, double gamma, Norm norm) {
  if (batch.empty()) throw ContractError("squared_soft_bellman_error: empty batch");
  if (gamma < 0.0 || gamma > 1.0)
    throw ContractError("squared_soft_bellman_error: gamma outside [0, 1]");
  double total = 0.0;
  for (const Transition& t : batch) {
    const double next_v = t.absorbing ? 0.0 : soft_value(q.values_next(t));
    const double err = q.values_at(t)[t.action] - (reward + gamma * next_v);
    total += err * err;
  }
  return norm == Norm::Mean ? total / static_cast<double>(batch.size()) : total;
}

double implied_reward(const SoftQFunction& q, const Transition& t, double gamma) {
  const double next_v = t.absorbing ? 0.0 : soft_value(q.values_next(t));
  return q.values_at(t)[t.action] - gamma * next_v;
}

SoftQFunction soft_value_iteration(const TabularMdp& mdp, double gamma, double tol,
                                   int max_sweeps, std::vector<double>* residuals) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ContractError("soft_value_iteration: gamma must lie in [0, 1)");
  const int states = mdp.state_count();
  const int actions = mdp.action_count();
  if (states == 0 || actions == 0) throw ContractError("soft_value_iteration: empty MDP");

  Eigen::MatrixXd q = mdp.rewards;
  Eigen::VectorXd v(states);
  if (residuals) residuals->clear();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int s = 0; s < states; ++s)
      v[s] = mdp.absorbing[s] ? 0.0 : soft_value(q.row(s));
    Eigen::MatrixXd next(states, actions);
    for (int a = 0; a < actions; ++a)
      next.col(a) = mdp.rewards.col(a) + gamma * (mdp.kernels[a] * v);
    const double residual = (next - q).cwiseAbs().maxCoeff();
    if (residuals) residuals->push_back(residual);
    q = std::move(next);
    if (residual <= tol) return SoftQFunction::tabular(std::move(q));
  }
  const double last = residuals && !residuals->empty() ? residuals->back() : -1.0;
  throw NumericalError("soft_value_iteration: residual " + std::to_string(last) +
                       " above tolerance after " + std::to_string(max_sweeps) + " sweeps");
}

SoftQFunction soft_value_iteration(const GridNav& env, double gamma, double tol, int max_sweeps,
                                   std::vector<double>* residuals) {
  return soft_value_iteration(env.tabular_mdp(), gamma, tol, max_sweeps, residuals);
}

void write_q_csv(const Eigen::MatrixXd& table, std::ostream& out) {
  out << "state";
  for (Eigen::Index a = 0; a < table.cols(); ++a) out << ",q" << a;
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index s = 0; s < table.rows(); ++s) {
    out << s;
    for (Eigen::Index a = 0; a < table.cols(); ++a) out << ',' << table(s, a);
    out << '\n';
  }
}

void write_q_csv(const Eigen::MatrixXd& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open Q table for writing: " + path);
  write_q_csv(table, out);
}

Eigen::MatrixXd read_q_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("state", 0) != 0)
    throw ConfigError("malformed Q table: missing header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ls, field, ',')) {
      if (first) {
        first = false;  // state index column
        continue;
      }
      row.push_back(std::stod(field));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("malformed Q table: no rows");
  Eigen::MatrixXd table(rows.size(), rows[0].size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != rows[0].size()) throw ConfigError("malformed Q table: ragged rows");
    for (std::size_t a = 0; a < rows[s].size(); ++a)
      table(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = rows[s][a];
  }
  return table;
}

Eigen::MatrixXd read_q_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open Q table: " + path);
  return read_q_csv(in);
}

}  // namespace sqil
