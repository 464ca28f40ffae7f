#include "edgeform/plant.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace edgeform {

AgentState::AgentState(int num_agents, int order, int dims)
    : x(static_cast<std::size_t>(order), Eigen::MatrixXd::Zero(num_agents, dims)) {}

bool AgentState::finite() const {
  for (const auto& block : x) {
    if (!block.allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd FrictionModel::axis_regressor(const Eigen::VectorXd& velocity) const {
  if (kind == Kind::None) {
    return Eigen::VectorXd::Zero(velocity.size());
  }
  return velocity.unaryExpr([this](double v) { return std::tanh(k1 * v) - std::tanh(k2 * v); });
}

Eigen::MatrixXd friction_regressor(const Eigen::VectorXd& velocity, double k1, double k2) {
  const FrictionModel model{FrictionModel::Kind::TanhPair, k1, k2};
  return model.axis_regressor(velocity).asDiagonal();
}

AgentState plant_rate(const AgentState& state, const Eigen::MatrixXd& u, const TrueParams& params,
                      const FrictionModel& friction) {
  const int n = state.order();
  const int d = state.dims();
  if (u.rows() != state.num_agents() || u.cols() != d || static_cast<int>(params.theta.size()) != d) {
    throw std::invalid_argument("plant_rate: control or parameter shape does not match the state");
  }
  AgentState rate;
  rate.x.reserve(static_cast<std::size_t>(n));
  for (int q = 0; q + 1 < n; ++q) {
    rate.x.push_back(state.x[static_cast<std::size_t>(q + 1)]);
  }
  Eigen::MatrixXd top = u;
  for (int a = 0; a < d; ++a) {
    const Eigen::VectorXd velocity =
        n >= 2 ? Eigen::VectorXd(state.x[1].col(a)) : Eigen::VectorXd::Zero(state.num_agents());
    top.col(a) += friction.axis_regressor(velocity).cwiseProduct(params.theta[static_cast<std::size_t>(a)]);
  }
  rate.x.push_back(std::move(top));
  return rate;
}

Eigen::MatrixXd FormationTarget::edge_offsets(const GraphModel& graph) const {
  if (positions.size() > 0) {
    if (positions.rows() != graph.topology.num_nodes()) {
      throw std::invalid_argument("formation positions must have one row per agent");
    }
    return graph.E.transpose() * positions;
  }
  if (offsets.rows() != graph.topology.num_edges()) {
    throw std::invalid_argument("formation offsets must have one row per edge");
  }
  if (admissibility_residual(graph, offsets) > 1e-10) {
    throw std::invalid_argument("formation offsets are not admissible: they do not close around every cycle");
  }
  return offsets;
}

Eigen::MatrixXd regular_polygon(int num_agents) {
  Eigen::MatrixXd p(num_agents, 2);
  for (int i = 0; i < num_agents; ++i) {
    const double angle = 2.0 * i * std::numbers::pi / num_agents;
    p(i, 0) = std::cos(angle);
    p(i, 1) = std::sin(angle);
  }
  return p;
}

FormationTarget pentagon_targets() { return FormationTarget{regular_polygon(5), {}}; }

double admissibility_residual(const GraphModel& graph, const Eigen::MatrixXd& offsets) {
  // Admissible offsets are E^T p for some p; they are fixed by their tree part
  // through e = R^T e_tree.
  Eigen::MatrixXd tree_offsets(graph.tree.tree_edges.size(), offsets.cols());
  for (std::size_t j = 0; j < graph.tree.tree_edges.size(); ++j) {
    tree_offsets.row(static_cast<Eigen::Index>(j)) = offsets.row(graph.tree.tree_edges[j]);
  }
  const Eigen::MatrixXd implied = graph.R_input.transpose() * tree_offsets;
  return offsets.size() == 0 ? 0.0 : (implied - offsets).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd edge_errors(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& offsets,
                            const Eigen::MatrixXd& incidence) {
  return incidence.transpose() * positions - offsets;
}

}  // namespace edgeform
