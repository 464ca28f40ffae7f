#include "edgeform/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "edgeform/rk4.hpp"

namespace edgeform {

namespace {

const char* const kAxisNames[] = {"x", "y", "z"};

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

PerformanceSpec apply(PerformanceSpec spec, const PerformanceOverride& o) {
  if (o.delta_lo) spec.delta_lo = *o.delta_lo;
  if (o.delta_hi) spec.delta_hi = *o.delta_hi;
  if (o.beta0) spec.beta0 = *o.beta0;
  if (o.betaf) spec.betaf = *o.betaf;
  if (o.lambda) spec.lambda = *o.lambda;
  if (o.family) spec.upf = UnifiedPerformanceFunction(*o.family);
  return spec;
}

bool all_global(const ScenarioConfig& config) {
  const int m = config.topology.num_edges();
  for (int a = 0; a < config.dims(); ++a) {
    for (const auto& spec : config.performance.axis_specs(a, m)) {
      if (classify_mode(spec).kind != ConstraintKind::Global) return false;
    }
  }
  return true;
}

struct Sample {
  std::vector<double> row;
  double max_abs_error = 0.0;
  double theta_hat_norm = 0.0;
  double c1_dprime = 0.0;
  bool gains_pass = true;
};

Sample take_sample(const ClosedLoop& loop, const ScenarioConfig& config, double t, const Eigen::VectorXd& y) {
  const int N = loop.num_agents();
  const int m = loop.graph().topology.num_edges();
  const int d = loop.dims();
  const AgentState state = loop.unpack_state(y);
  const Eigen::MatrixXd theta_hat = loop.unpack_theta_hat(y);
  const Eigen::MatrixXd errors = edge_errors(state.x[0], loop.offsets(), loop.graph().E);
  const Eigen::VectorXd gamma =
      Eigen::Map<const Eigen::VectorXd>(config.gains.gamma.data(), static_cast<Eigen::Index>(N));

  Eigen::MatrixXd u(N, d);
  Eigen::MatrixXd velocity(N, d);
  Eigen::MatrixXd s(m, d);
  double V = 0.0;
  Sample sample;
  sample.c1_dprime = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) {
    const Eigen::VectorXd vel = loop.order() >= 2 ? Eigen::VectorXd(state.x[1].col(a)) : Eigen::VectorXd::Zero(N);
    const Eigen::MatrixXd phi = config.friction.axis_regressor(vel);
    AxisControl ctrl;
    try {
      ctrl = loop.controller(a).evaluate(t, errors.col(a), vel, phi, theta_hat.col(a));
    } catch (FunnelViolation& v) {
      v.set_axis(a);
      throw;
    }
    u.col(a) = ctrl.u;
    velocity.col(a) = loop.order() >= 2 ? vel : Eigen::VectorXd(ctrl.u + phi.cwiseProduct(config.theta.col(a)));
    s.col(a) = ctrl.transformed.S;
    const Eigen::MatrixXd theta_tilde = config.theta.col(a) - theta_hat.col(a);
    std::vector<Eigen::VectorXd> higher;
    if (loop.order() >= 2) higher.push_back(ctrl.z2);
    V += lyapunov_sample(ctrl.transformed.S, higher, loop.order() >= 2 ? theta_tilde : Eigen::MatrixXd(), gamma);

    const double c1 = config.gains.c[0];
    const std::optional<double> c2 =
        config.gains.order() >= 2 ? std::optional<double>(config.gains.c[1]) : std::nullopt;
    const double vartheta = config.diagnostics.vartheta.value_or(default_vartheta(loop.graph(), c1, c2));
    const GainDiagnostics diag = gain_diagnostics(loop.graph(), ctrl.transformed.W, ctrl.transformed.J, c1, c2,
                                                  vartheta, config.diagnostics.epsilon);
    sample.c1_dprime = std::min(sample.c1_dprime, diag.c1_dprime);
    sample.gains_pass = sample.gains_pass && diag.pass;
  }

  auto& row = sample.row;
  row.reserve(static_cast<std::size_t>(1 + 2 * N * d + 2 * m * d + 2 * d + 2 * N * d + 2));
  row.push_back(t);
  for (int i = 0; i < N; ++i) {
    for (int a = 0; a < d; ++a) row.push_back(state.x[0](i, a));
    for (int a = 0; a < d; ++a) row.push_back(velocity(i, a));
  }
  for (int k = 0; k < m; ++k) {
    for (int a = 0; a < d; ++a) row.push_back(errors(k, a));
  }
  for (int a = 0; a < d; ++a) {
    const auto [lo, hi] = bounds_at(config.performance.resolve(-1, a), t);
    row.push_back(lo);
    row.push_back(hi);
  }
  for (int k = 0; k < m; ++k) {
    for (int a = 0; a < d; ++a) row.push_back(s(k, a));
  }
  for (int i = 0; i < N; ++i) {
    for (int a = 0; a < d; ++a) row.push_back(u(i, a));
  }
  for (int i = 0; i < N; ++i) {
    for (int a = 0; a < d; ++a) row.push_back(theta_hat(i, a));
  }
  row.push_back(V);
  row.push_back(sample.c1_dprime);

  sample.max_abs_error = errors.size() > 0 ? errors.cwiseAbs().maxCoeff() : 0.0;
  sample.theta_hat_norm = theta_hat.norm();
  return sample;
}

ViolationEvent to_event(const FunnelViolation& v, double t) {
  return ViolationEvent{std::max(v.edge(), 0), std::max(v.axis(), 0), t, v.e_tilde(), v.zeta()};
}

}  // namespace

PerformanceSpec PerformanceSettings::resolve(int edge, int axis) const {
  // overrides stack by specificity: global, axis-wide, edge-wide, edge+axis
  PerformanceSpec spec = shared;
  for (int rank = 0; rank <= 3; ++rank) {
    for (const auto& o : overrides) {
      if ((o.edge ? 2 : 0) + (o.axis ? 1 : 0) != rank) continue;
      const bool edge_ok = !o.edge || (edge >= 0 && *o.edge == edge);
      const bool axis_ok = !o.axis || *o.axis == axis;
      if (edge_ok && axis_ok) spec = apply(spec, o);
    }
  }
  return spec;
}

std::vector<PerformanceSpec> PerformanceSettings::axis_specs(int axis, int num_edges) const {
  std::vector<PerformanceSpec> specs;
  specs.reserve(static_cast<std::size_t>(num_edges));
  for (int k = 0; k < num_edges; ++k) specs.push_back(resolve(k, axis));
  return specs;
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (log_stride < 1) throw std::invalid_argument("log_stride must be at least 1");
  if (!(settle_tol > 0.0)) throw std::invalid_argument("settle_tol must be positive");

  const int N = topology.num_nodes();
  const int m = topology.num_edges();
  if (classify_topology(topology) == TopologyClass::Unsupported) {
    throw std::invalid_argument(
        "topology must be a directed spanning tree, a directed cycle or a connected undirected graph");
  }
  if (initial.order() < 1 || initial.order() > 2) {
    throw std::invalid_argument("plant order must be 1 or 2 for closed-loop simulation");
  }
  if (initial.dims() < 1 || initial.dims() > 3) throw std::invalid_argument("dims must be 1, 2 or 3");
  if (initial.num_agents() != N) throw std::invalid_argument("initial state must have one row per agent");
  if (!initial.finite()) throw std::invalid_argument("initial state must be finite");
  if (gains.order() != initial.order()) {
    throw std::invalid_argument("number of backstepping gains must equal the plant order");
  }
  gains.validate(N);
  if (!(diagnostics.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (diagnostics.vartheta && !(*diagnostics.vartheta > 0.0)) {
    throw std::invalid_argument("vartheta must be positive");
  }
  if (theta.rows() != N || theta.cols() != dims() || !theta.allFinite()) {
    throw std::invalid_argument("theta must be a finite N x d matrix");
  }
  if (order() == 1 && friction.kind != FrictionModel::Kind::None) {
    throw std::invalid_argument("first-order agents require friction model 'none'");
  }
  for (const auto& o : performance.overrides) {
    if (o.edge && (*o.edge < 0 || *o.edge >= m)) throw std::invalid_argument("performance override edge out of range");
    if (o.axis && (*o.axis < 0 || *o.axis >= dims())) {
      throw std::invalid_argument("performance override axis out of range");
    }
  }
  performance.shared.validate();
  for (int a = 0; a < dims(); ++a) {
    performance.resolve(-1, a).validate();
    for (const auto& spec : performance.axis_specs(a, m)) spec.validate();
  }
  const Eigen::MatrixXd& shape = target.positions.size() > 0 ? target.positions : target.offsets;
  if (shape.cols() != dims()) throw std::invalid_argument("formation target must have one column per axis");
  target.edge_offsets(GraphModel::build(topology));
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.initial.order() != b.initial.order()) return false;
  for (int q = 0; q < a.initial.order(); ++q) {
    if (!same_matrix(a.initial.x[static_cast<std::size_t>(q)], b.initial.x[static_cast<std::size_t>(q)])) return false;
  }
  return a.name == b.name && a.topology == b.topology && a.performance == b.performance && a.gains == b.gains &&
         a.diagnostics == b.diagnostics && a.friction == b.friction && same_matrix(a.theta, b.theta) &&
         same_matrix(a.target.positions, b.target.positions) && same_matrix(a.target.offsets, b.target.offsets) &&
         a.dt == b.dt && a.horizon == b.horizon && a.seed == b.seed && a.log_stride == b.log_stride &&
         a.settle_tol == b.settle_tol;
}

InitialCheck check_initial(const ScenarioConfig& config) {
  const GraphModel graph = GraphModel::build(config.topology);
  const Eigen::MatrixXd errors = edge_errors(config.initial.x[0], config.target.edge_offsets(graph), graph.E);
  InitialCheck check;
  for (int a = 0; a < config.dims(); ++a) {
    for (int k = 0; k < graph.topology.num_edges(); ++k) {
      try {
        map_error(config.performance.resolve(k, a), errors(k, a), 0.0);
      } catch (const FunnelViolation& v) {
        check.violations.push_back(ViolationEvent{k, a, 0.0, v.e_tilde(), v.zeta()});
      }
    }
  }
  return check;
}

int TrajectoryLog::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no trajectory column named " + name);
  return static_cast<int>(it - columns.begin());
}

std::vector<double> TrajectoryLog::series(const std::string& name) const {
  const auto c = static_cast<std::size_t>(column(name));
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::vector<std::string> csv_columns(int num_agents, int num_edges, int dims) {
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= num_agents; ++i) {
    for (int a = 0; a < dims; ++a) cols.push_back("agent" + std::to_string(i) + "_" + kAxisNames[a]);
    for (int a = 0; a < dims; ++a) cols.push_back("agent" + std::to_string(i) + "_v" + kAxisNames[a]);
  }
  for (int k = 1; k <= num_edges; ++k) {
    for (int a = 0; a < dims; ++a) cols.push_back("edge" + std::to_string(k) + "_e" + kAxisNames[a]);
  }
  for (int a = 0; a < dims; ++a) {
    cols.push_back(std::string("bound_lo_") + kAxisNames[a]);
    cols.push_back(std::string("bound_hi_") + kAxisNames[a]);
  }
  for (int k = 1; k <= num_edges; ++k) {
    for (int a = 0; a < dims; ++a) cols.push_back("edge" + std::to_string(k) + "_s" + kAxisNames[a]);
  }
  for (int i = 1; i <= num_agents; ++i) {
    for (int a = 0; a < dims; ++a) cols.push_back("u" + std::to_string(i) + "_" + kAxisNames[a]);
  }
  for (int i = 1; i <= num_agents; ++i) {
    for (int a = 0; a < dims; ++a) cols.push_back("thetahat" + std::to_string(i) + "_" + std::to_string(a + 1));
  }
  cols.emplace_back("V");
  cols.emplace_back("c1dp");
  return cols;
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::InitialConstraintViolation: return "initial_constraint_violation";
    case RunStatus::FunnelViolation: return "funnel_violation";
  }
  return "completed";
}

ClosedLoop::ClosedLoop(const ScenarioConfig& config)
    : graph_(GraphModel::build(config.topology)),
      friction_(config.friction),
      num_agents_(config.topology.num_nodes()),
      order_(config.order()),
      dims_(config.dims()) {
  offsets_ = config.target.edge_offsets(graph_);
  for (int a = 0; a < dims_; ++a) {
    controllers_.emplace_back(graph_, config.performance.axis_specs(a, graph_.topology.num_edges()), config.gains);
    params_.theta.emplace_back(config.theta.col(a));
  }
}

Eigen::VectorXd ClosedLoop::initial_state(const ScenarioConfig& config) const {
  return pack(config.initial, Eigen::MatrixXd::Zero(num_agents_, dims_));
}

AgentState ClosedLoop::unpack_state(const Eigen::VectorXd& y) const {
  AgentState state(num_agents_, order_, dims_);
  const int block = num_agents_ * (order_ + 1);
  for (int a = 0; a < dims_; ++a) {
    for (int q = 0; q < order_; ++q) {
      state.x[static_cast<std::size_t>(q)].col(a) = y.segment(a * block + q * num_agents_, num_agents_);
    }
  }
  return state;
}

Eigen::MatrixXd ClosedLoop::unpack_theta_hat(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd theta_hat(num_agents_, dims_);
  const int block = num_agents_ * (order_ + 1);
  for (int a = 0; a < dims_; ++a) {
    theta_hat.col(a) = y.segment(a * block + order_ * num_agents_, num_agents_);
  }
  return theta_hat;
}

Eigen::VectorXd ClosedLoop::pack(const AgentState& state, const Eigen::MatrixXd& theta_hat) const {
  const int block = num_agents_ * (order_ + 1);
  Eigen::VectorXd y(block * dims_);
  for (int a = 0; a < dims_; ++a) {
    for (int q = 0; q < order_; ++q) {
      y.segment(a * block + q * num_agents_, num_agents_) = state.x[static_cast<std::size_t>(q)].col(a);
    }
    y.segment(a * block + order_ * num_agents_, num_agents_) = theta_hat.col(a);
  }
  return y;
}

Eigen::VectorXd ClosedLoop::rate(double t, const Eigen::VectorXd& y) const {
  const AgentState state = unpack_state(y);
  const Eigen::MatrixXd theta_hat = unpack_theta_hat(y);
  const Eigen::MatrixXd errors = edge_errors(state.x[0], offsets_, graph_.E);
  Eigen::MatrixXd u(num_agents_, dims_);
  Eigen::MatrixXd theta_hat_rate(num_agents_, dims_);
  for (int a = 0; a < dims_; ++a) {
    const Eigen::VectorXd vel = order_ >= 2 ? Eigen::VectorXd(state.x[1].col(a)) : Eigen::VectorXd::Zero(num_agents_);
    const Eigen::MatrixXd phi = friction_.axis_regressor(vel);
    try {
      const AxisControl ctrl = controllers_[static_cast<std::size_t>(a)].evaluate(t, errors.col(a), vel, phi,
                                                                                    theta_hat.col(a));
      u.col(a) = ctrl.u;
      theta_hat_rate.col(a) = ctrl.theta_hat_rate;
    } catch (FunnelViolation& v) {
      v.set_axis(a);
      throw;
    }
  }
  return pack(plant_rate(state, u, params_, friction_), theta_hat_rate);
}

double lyapunov_budget(const ScenarioConfig& config, double t0, double t1) {
  const int m = config.topology.num_edges();
  double rho = 0.0;
  double integral = 0.0;
  for (int a = 0; a < config.dims(); ++a) {
    for (const auto& spec : config.performance.axis_specs(a, m)) {
      rho += std::max(spec.delta_lo * spec.delta_lo, spec.delta_hi * spec.delta_hi);
      const double gap = spec.beta0 - spec.betaf;
      // closed form of the integral of beta'(t)^2 = lambda^2 gap^2 exp(-2 lambda t)
      const double value = 0.5 * spec.lambda * gap * gap *
                           (std::exp(-2.0 * spec.lambda * t0) - std::exp(-2.0 * spec.lambda * t1));
      integral = std::max(integral, value);
    }
  }
  const double eps = config.diagnostics.epsilon;
  return rho / (2.0 * eps * eps) * integral;
}

RunResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  ClosedLoop loop(config);
  result.log.columns = csv_columns(loop.num_agents(), loop.graph().topology.num_edges(), loop.dims());

  if (!all_global(config)) {
    result.initial_check_performed = true;
    const InitialCheck check = check_initial(config);
    if (!check.pass()) {
      result.status = RunStatus::InitialConstraintViolation;
      result.violations = check.violations;
      result.metrics.violation_count = static_cast<int>(check.violations.size());
      return result;
    }
  }

  Metrics& metrics = result.metrics;
  metrics.min_c1_dprime = std::numeric_limits<double>::infinity();
  std::optional<double> last_unsettled;
  double first_time = 0.0;
  auto record = [&](double t, const Eigen::VectorXd& y) {
    Sample sample = take_sample(loop, config, t, y);
    if (result.log.rows.empty()) first_time = t;
    if (sample.max_abs_error >= config.settle_tol) last_unsettled = t;
    if (t >= 0.9 * config.horizon - 1e-12) {
      metrics.max_abs_error_final_window = std::max(metrics.max_abs_error_final_window, sample.max_abs_error);
    }
    metrics.final_max_abs_error = sample.max_abs_error;
    metrics.sup_theta_hat_norm = std::max(metrics.sup_theta_hat_norm, sample.theta_hat_norm);
    metrics.min_c1_dprime = std::min(metrics.min_c1_dprime, sample.c1_dprime);
    if (!sample.gains_pass) ++metrics.gain_check_failures;
    metrics.end_time = t;
    result.log.rows.push_back(std::move(sample.row));
  };

  Eigen::VectorXd y = loop.initial_state(config);
  const long steps = std::lround(config.horizon / config.dt);
  double stage_time = 0.0;
  auto rate = [&](double t, const Eigen::VectorXd& state) {
    stage_time = t;
    return loop.rate(t, state);
  };

  bool last_logged = true;
  try {
    record(0.0, y);
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * config.dt;
      y = rk4_step(rate, t, y, config.dt);
      metrics.steps = k + 1;
      stage_time = static_cast<double>(k + 1) * config.dt;
      last_logged = (k + 1) % config.log_stride == 0 || k + 1 == steps;
      if (last_logged) record(stage_time, y);
    }
  } catch (const FunnelViolation& v) {
    result.status = RunStatus::FunnelViolation;
    result.violations.push_back(to_event(v, stage_time));
    metrics.violation_count = 1;
    // the partial log ends at the last completed step
    if (!last_logged) record(static_cast<double>(metrics.steps) * config.dt, y);
  }

  if (result.status == RunStatus::Completed) {
    if (!last_unsettled) {
      metrics.settling_time = first_time;
    } else if (*last_unsettled < metrics.end_time) {
      // first logged sample after the last unsettled one
      const auto times = result.log.series("t");
      const auto it = std::upper_bound(times.begin(), times.end(), *last_unsettled);
      if (it != times.end()) metrics.settling_time = *it;
    }
  }
  metrics.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace edgeform
