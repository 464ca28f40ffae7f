#pragma once

// Edge-Laplacian adaptive backstepping controller for one spatial axis.
//
// Coordinates: z_1 = S (transformed edge errors, length m), z_q = x_q - alpha_{q-1}
// (length N). The first virtual control feeds W z_1 back through the
// in-incidence matrix (directed graphs) or the incidence matrix (undirected),
// so agent i only uses edges it can sense.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "edgeform/graph.hpp"
#include "edgeform/performance.hpp"

namespace edgeform {

struct ControllerGains {
  std::vector<double> c;      // c_1 .. c_n
  std::vector<double> gamma;  // adaptation gain per agent

  int order() const { return static_cast<int>(c.size()); }
  /// Throws std::invalid_argument on non-positive gains or a gamma size mismatch.
  void validate(int num_agents) const;

  friend bool operator==(const ControllerGains&, const ControllerGains&) = default;
};

/// Analysis-only constants for the gain conditions. They never enter u.
struct DiagnosticParams {
  std::optional<double> vartheta;  // default: half of the c_1 budget
  double epsilon = 1e-3;

  friend bool operator==(const DiagnosticParams&, const DiagnosticParams&) = default;
};

struct TransformedState {
  Eigen::VectorXd S;      // z_1
  Eigen::VectorXd W;      // diagonal of W
  Eigen::VectorXd J;      // diagonal of J
  Eigen::VectorXd D;
  Eigen::VectorXd zeta;
  Eigen::VectorXd S_dot;  // W E^T x_2 + D
};

/// Stacks per-edge mapped errors and Jacobians into S, W, D and S'.
TransformedState assemble_transformed(const GraphModel& graph, std::span<const MappedError> mapped,
                                      std::span<const MappingJacobians> jacobians, const Eigen::VectorXd& x2);

/// Maps every edge error and assembles the transformed state. A
/// FunnelViolation carries the offending edge index.
TransformedState transform_edges(const GraphModel& graph, std::span<const PerformanceSpec> specs,
                                 const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& x2, double t);

/// alpha_1 = -c_1 E_in W z_1 (directed) or -c_1 E W z_1 (undirected).
Eigen::VectorXd alpha1(const GraphModel& graph, const Eigen::VectorXd& W, const Eigen::VectorXd& z1, double c1);

/// Exact time derivative of alpha_1 along x_1' = x_2:
/// alpha_1' = -c_1 M (W' z_1 + W S').
Eigen::VectorXd alpha1_dot(const GraphModel& graph, std::span<const PerformanceSpec> specs,
                           const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& x2, double t, double c1);

/// alpha_2 = -c_2 z_2 + alpha_1'. There is no -z_1 term: z_1 lives on edges.
Eigen::VectorXd alpha2(const Eigen::VectorXd& z2, const Eigen::VectorXd& alpha1_dot, double c2);

/// alpha_q = -c_q z_q - z_{q-1} + alpha_{q-1}', for 3 <= q <= n-1.
Eigen::VectorXd alpha_q(const Eigen::VectorXd& z_q, const Eigen::VectorXd& z_prev,
                        const Eigen::VectorXd& alpha_prev_dot, double c_q);

/// u = -c_n z_n - z_{n-1} + alpha_{n-1}' - phi^T theta_hat.
/// phi is N x nu (row i is phi_i^T), theta_hat is N x nu.
Eigen::VectorXd control_u(const Eigen::VectorXd& z_n, const Eigen::VectorXd& z_prev,
                          const Eigen::VectorXd& alpha_prev_dot, const Eigen::MatrixXd& phi,
                          const Eigen::MatrixXd& theta_hat, double c_n);

/// Relative degree two: u = -c_2 z_2 + alpha_1' - phi^T theta_hat.
Eigen::VectorXd control_u(const Eigen::VectorXd& z_n, const Eigen::VectorXd& alpha_prev_dot,
                          const Eigen::MatrixXd& phi, const Eigen::MatrixXd& theta_hat, double c_n);

/// theta_hat' = Gamma phi z_n, per agent.
Eigen::MatrixXd adaptive_rate(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& phi, const Eigen::VectorXd& z_n);

struct GainDiagnostics {
  double vartheta = 0.0;
  double epsilon = 0.0;
  double c1_prime = 0.0;
  double c1_dprime = 0.0;
  std::optional<double> c2_prime;  // absent for first-order agents
  double lam_min_Les = 0.0;        // lambda_min(L_e_sym) or lambda_min(E_t^T E_t)
  double lam_max_EtEt = 0.0;
  double lam_min_W2 = 0.0;         // lambda_min(W^2) or lambda_min((R W R^T)^2)
  double lam_max_J2 = 0.0;         // lambda_max(J^2) or lambda_max(R J^2 R^T)
  bool pass = false;
};

/// Default vartheta. With c_2 given and a non-empty window in which both c_1'
/// and c_2' are positive, the midpoint of that window; otherwise half of the
/// c_1 budget.
double default_vartheta(const GraphModel& graph, double c1, std::optional<double> c2 = std::nullopt);

GainDiagnostics gain_diagnostics(const GraphModel& graph, const Eigen::VectorXd& W, const Eigen::VectorXd& J,
                                 double c1, std::optional<double> c2, double vartheta, double epsilon);

/// V = 1/2 sum_q |z_q|^2 + 1/2 theta_tilde^T Gamma^-1 theta_tilde.
double lyapunov_sample(const Eigen::VectorXd& z1, std::span<const Eigen::VectorXd> higher,
                       const Eigen::MatrixXd& theta_tilde, const Eigen::VectorXd& gamma);

/// Full control evaluation for one axis.
struct AxisControl {
  TransformedState transformed;
  Eigen::VectorXd alpha1;
  Eigen::VectorXd alpha1_dot;  // empty for first-order agents
  Eigen::VectorXd z2;          // empty for first-order agents
  Eigen::VectorXd u;
  Eigen::MatrixXd theta_hat_rate;
};

/// Evaluates the closed-form law for relative degree one or two. The
/// controller sees edge errors, velocities and the regressor only.
class AxisController {
 public:
  /// Throws std::invalid_argument for unsupported orders or mismatched specs.
  AxisController(const GraphModel& graph, std::vector<PerformanceSpec> edge_specs, ControllerGains gains);

  /// `velocity` is ignored for first-order agents. Throws FunnelViolation.
  AxisControl evaluate(double t, const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& velocity,
                       const Eigen::MatrixXd& phi, const Eigen::MatrixXd& theta_hat) const;

  const std::vector<PerformanceSpec>& edge_specs() const { return specs_; }
  const ControllerGains& gains() const { return gains_; }

 private:
  const GraphModel* graph_;
  std::vector<PerformanceSpec> specs_;
  ControllerGains gains_;
  Eigen::VectorXd gamma_;
};

}  // namespace edgeform
