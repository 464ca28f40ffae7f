#pragma once

// Closed-loop simulation: plant + adaptive estimates integrated together with
// fixed-step RK4, funnel monitoring and trajectory logging.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgeform/controller.hpp"
#include "edgeform/graph.hpp"
#include "edgeform/performance.hpp"
#include "edgeform/plant.hpp"

namespace edgeform {

/// Partial performance spec applied on top of the shared one. Unset fields
/// keep the shared value. Matching precedence: edge+axis, edge, axis.
struct PerformanceOverride {
  std::optional<int> edge;  // zero-based
  std::optional<int> axis;  // zero-based
  std::optional<double> delta_lo;
  std::optional<double> delta_hi;
  std::optional<double> beta0;
  std::optional<double> betaf;
  std::optional<double> lambda;
  std::optional<PerformanceFamily> family;

  friend bool operator==(const PerformanceOverride&, const PerformanceOverride&) = default;
};

struct PerformanceSettings {
  PerformanceSpec shared;
  std::vector<PerformanceOverride> overrides;

  /// Spec governing (edge, axis); edge = -1 asks for the axis-wide spec.
  PerformanceSpec resolve(int edge, int axis) const;
  std::vector<PerformanceSpec> axis_specs(int axis, int num_edges) const;

  friend bool operator==(const PerformanceSettings&, const PerformanceSettings&) = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Topology topology{2, {{0, 1}}, Directedness::Directed};
  PerformanceSettings performance;
  ControllerGains gains{{1.0, 5.0}, {1.0, 1.0}};
  DiagnosticParams diagnostics;
  FrictionModel friction;
  Eigen::MatrixXd theta;  // N x d, plant convention x_n' = u + phi theta
  AgentState initial;
  FormationTarget target;
  double dt = 1e-3;
  double horizon = 15.0;
  std::uint64_t seed = 0;
  int log_stride = 1;
  double settle_tol = 0.02;

  int order() const { return initial.order(); }
  int dims() const { return initial.dims(); }
  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

struct ViolationEvent {
  int edge = 0;  // zero-based
  int axis = 0;
  double time = 0.0;
  double e_tilde = 0.0;
  double zeta = 0.0;
};

struct InitialCheck {
  std::vector<ViolationEvent> violations;
  bool pass() const { return violations.empty(); }
};

/// Evaluates zeta_k(0) on every edge and axis. Global specs always pass.
InitialCheck check_initial(const ScenarioConfig& config);

/// Stride-sampled trajectory. Column names follow the CSV schema.
struct TrajectoryLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws std::out_of_range for unknown names.
  int column(const std::string& name) const;
  std::vector<double> series(const std::string& name) const;
};

/// Column names for N agents, m edges, d axes.
std::vector<std::string> csv_columns(int num_agents, int num_edges, int dims);

struct Metrics {
  double max_abs_error_final_window = 0.0;  // last 10% of the horizon
  double final_max_abs_error = 0.0;
  int violation_count = 0;
  std::optional<double> settling_time;
  double sup_theta_hat_norm = 0.0;
  int gain_check_failures = 0;
  double min_c1_dprime = 0.0;
  double end_time = 0.0;
  long steps = 0;
  double runtime_seconds = 0.0;
};

enum class RunStatus { Completed, InitialConstraintViolation, FunnelViolation };

std::string to_string(RunStatus status);

struct RunResult {
  RunStatus status = RunStatus::Completed;
  bool initial_check_performed = false;
  std::vector<ViolationEvent> violations;  // initial or runtime
  TrajectoryLog log;
  Metrics metrics;
};

/// Validates, checks the initial constraint (skipped when every spec is
/// Global) and integrates to the horizon. Throws std::invalid_argument on an
/// invalid config; constraint violations are reported in the result.
RunResult run_scenario(const ScenarioConfig& config);

/// Flattened closed loop: per axis [x_1 .. x_n, theta_hat] blocks of length N.
class ClosedLoop {
 public:
  explicit ClosedLoop(const ScenarioConfig& config);
  ClosedLoop(const ClosedLoop&) = delete;
  ClosedLoop& operator=(const ClosedLoop&) = delete;

  /// Initial agent state with theta_hat(0) = 0.
  Eigen::VectorXd initial_state(const ScenarioConfig& config) const;
  /// Throws FunnelViolation (with edge set) if any edge leaves its funnel.
  Eigen::VectorXd rate(double t, const Eigen::VectorXd& y) const;

  const GraphModel& graph() const { return graph_; }
  const Eigen::MatrixXd& offsets() const { return offsets_; }
  const AxisController& controller(int axis) const { return controllers_[static_cast<std::size_t>(axis)]; }
  int num_agents() const { return num_agents_; }
  int order() const { return order_; }
  int dims() const { return dims_; }

  AgentState unpack_state(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd unpack_theta_hat(const Eigen::VectorXd& y) const;  // N x d
  Eigen::VectorXd pack(const AgentState& state, const Eigen::MatrixXd& theta_hat) const;

 private:
  GraphModel graph_;
  FrictionModel friction_;
  Eigen::MatrixXd offsets_;
  std::vector<AxisController> controllers_;
  TrueParams params_;
  int num_agents_;
  int order_;
  int dims_;
};

/// Upper bound on V(t1) - V(t0) from the integrated Lyapunov inequality:
/// rho / (2 eps^2) * integral of max_k beta_k'^2 over [t0, t1].
double lyapunov_budget(const ScenarioConfig& config, double t0, double t1);

}  // namespace edgeform
