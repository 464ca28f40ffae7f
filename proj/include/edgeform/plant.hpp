#pragma once

// Chain-of-integrator agents with a matched, linearly parameterised
// uncertainty:  x_{i,q}' = x_{i,q+1},  x_{i,n}' = u_i + phi_i^T theta_i,
// applied independently on each spatial axis.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgeform/graph.hpp"

namespace edgeform {

/// x[q] holds the order-(q+1) states of all agents as an N x d matrix
/// (x[0] positions, x[1] velocities, ...).
struct AgentState {
  std::vector<Eigen::MatrixXd> x;

  AgentState() = default;
  AgentState(int num_agents, int order, int dims);

  int num_agents() const { return x.empty() ? 0 : static_cast<int>(x.front().rows()); }
  int order() const { return static_cast<int>(x.size()); }
  int dims() const { return x.empty() ? 0 : static_cast<int>(x.front().cols()); }
  bool finite() const;
};

/// Friction regressor phi(v) = tanh(k1 v) - tanh(k2 v) per axis, or none.
struct FrictionModel {
  enum class Kind { None, TanhPair };
  Kind kind = Kind::TanhPair;
  double k1 = 10.0;
  double k2 = 100.0;

  /// Regressor column for one axis: one entry per agent, from that axis'
  /// velocities.
  Eigen::VectorXd axis_regressor(const Eigen::VectorXd& velocity) const;

  friend bool operator==(const FrictionModel&, const FrictionModel&) = default;
};

/// Per-agent regressor matrix diag(tanh(k1 v_a) - tanh(k2 v_a)) over axes a.
Eigen::MatrixXd friction_regressor(const Eigen::VectorXd& velocity, double k1 = 10.0, double k2 = 100.0);

/// True parameters, one N-vector per axis. Visible to the plant and to
/// diagnostics, never to the controller.
struct TrueParams {
  std::vector<Eigen::VectorXd> theta;
};

/// Rate of the agent state under control u (N x d). For order one the
/// regressor is evaluated at zero velocity.
AgentState plant_rate(const AgentState& state, const Eigen::MatrixXd& u, const TrueParams& params,
                      const FrictionModel& friction);

/// Desired geometry: either target positions (offsets derived per edge) or
/// explicit per-edge offsets in the tail-minus-head convention.
struct FormationTarget {
  Eigen::MatrixXd positions;  // N x d, empty when offsets are given directly
  Eigen::MatrixXd offsets;    // m x d, empty when positions are given

  /// Offsets in edge order. Throws std::invalid_argument when explicit offsets
  /// are not admissible (do not close around every cycle within 1e-10).
  Eigen::MatrixXd edge_offsets(const GraphModel& graph) const;
};

/// Regular polygon on the unit circle, p_i = (cos(2 (i-1) pi / N), sin(...)).
Eigen::MatrixXd regular_polygon(int num_agents);

/// The five-agent pentagon used in the reference experiments.
FormationTarget pentagon_targets();

/// Largest cycle-closure residual of a set of offsets.
double admissibility_residual(const GraphModel& graph, const Eigen::MatrixXd& offsets);

/// e~_k = (E^T x_1)_k - e^d_k, per axis (m x d).
Eigen::MatrixXd edge_errors(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& offsets,
                            const Eigen::MatrixXd& incidence);

}  // namespace edgeform
