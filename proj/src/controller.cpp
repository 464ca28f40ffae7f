#include "edgeform/controller.hpp"

#include <stdexcept>

namespace edgeform {

void ControllerGains::validate(int num_agents) const {
  if (c.empty()) throw std::invalid_argument("at least one backstepping gain c_1 is required");
  for (double ci : c) {
    if (!(ci > 0.0)) throw std::invalid_argument("backstepping gains c_q must be positive");
  }
  if (static_cast<int>(gamma.size()) != num_agents) {
    throw std::invalid_argument("gamma must list one adaptation gain per agent");
  }
  for (double g : gamma) {
    if (!(g > 0.0)) throw std::invalid_argument("adaptation gains gamma_i must be positive");
  }
}

TransformedState assemble_transformed(const GraphModel& graph, std::span<const MappedError> mapped,
                                      std::span<const MappingJacobians> jacobians, const Eigen::VectorXd& x2) {
  const int m = graph.topology.num_edges();
  if (static_cast<int>(mapped.size()) != m || static_cast<int>(jacobians.size()) != m) {
    throw std::invalid_argument("assemble_transformed: one mapped error and Jacobian per edge required");
  }
  TransformedState ts;
  ts.S.resize(m);
  ts.W.resize(m);
  ts.J.resize(m);
  ts.D.resize(m);
  ts.zeta.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    ts.S(k) = mapped[ku].s;
    ts.zeta(k) = mapped[ku].zeta;
    ts.W(k) = jacobians[ku].W;
    ts.J(k) = jacobians[ku].J;
    ts.D(k) = jacobians[ku].D;
  }
  ts.S_dot = ts.W.cwiseProduct(graph.E.transpose() * x2) + ts.D;
  return ts;
}

TransformedState transform_edges(const GraphModel& graph, std::span<const PerformanceSpec> specs,
                                 const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& x2, double t) {
  const int m = graph.topology.num_edges();
  std::vector<MappedError> mapped(static_cast<std::size_t>(m));
  std::vector<MappingJacobians> jac(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    try {
      mapped[ku] = map_error(specs[ku], e_tilde(k), t);
      jac[ku] = map_jacobians(specs[ku], e_tilde(k), t);
    } catch (FunnelViolation& v) {
      v.set_edge(k);
      throw;
    }
  }
  return assemble_transformed(graph, mapped, jac, x2);
}

Eigen::VectorXd alpha1(const GraphModel& graph, const Eigen::VectorXd& W, const Eigen::VectorXd& z1, double c1) {
  if (graph.topology_class == TopologyClass::Unsupported) {
    throw std::invalid_argument("alpha1: unsupported topology");
  }
  return -c1 * (graph.feedback_incidence() * W.cwiseProduct(z1));
}

Eigen::VectorXd alpha1_dot(const GraphModel& graph, std::span<const PerformanceSpec> specs,
                           const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& x2, double t, double c1) {
  const int m = graph.topology.num_edges();
  const Eigen::VectorXd e_dot = graph.E.transpose() * x2;
  Eigen::VectorXd S(m);
  Eigen::VectorXd W(m);
  Eigen::VectorXd W_dot(m);
  Eigen::VectorXd S_dot(m);
  for (int k = 0; k < m; ++k) {
    const PerformanceSpec& spec = specs[static_cast<std::size_t>(k)];
    MappedError me;
    MappingJacobians jac;
    try {
      me = map_error(spec, e_tilde(k), t);
      jac = map_jacobians(spec, e_tilde(k), t);
    } catch (FunnelViolation& v) {
      v.set_edge(k);
      throw;
    }
    const double zeta_dot = (jac.xi * e_dot(k) - jac.beta_dot * me.zeta) / jac.beta;
    const double xi_dot = spec.upf.inverse_second_derivative(e_tilde(k)) * e_dot(k);
    const double mu_dot = transform_slope_derivative(spec, me.zeta) * zeta_dot;
    const double J_dot = (mu_dot * jac.beta - jac.mu * jac.beta_dot) / (jac.beta * jac.beta);
    S(k) = me.s;
    W(k) = jac.W;
    W_dot(k) = J_dot * jac.xi + jac.J * xi_dot;
    S_dot(k) = jac.W * e_dot(k) + jac.D;
  }
  return -c1 * (graph.feedback_incidence() * (W_dot.cwiseProduct(S) + W.cwiseProduct(S_dot)));
}

Eigen::VectorXd alpha2(const Eigen::VectorXd& z2, const Eigen::VectorXd& alpha1_dot, double c2) {
  return -c2 * z2 + alpha1_dot;
}

Eigen::VectorXd alpha_q(const Eigen::VectorXd& z_q, const Eigen::VectorXd& z_prev,
                        const Eigen::VectorXd& alpha_prev_dot, double c_q) {
  return -c_q * z_q - z_prev + alpha_prev_dot;
}

Eigen::VectorXd control_u(const Eigen::VectorXd& z_n, const Eigen::VectorXd& z_prev,
                          const Eigen::VectorXd& alpha_prev_dot, const Eigen::MatrixXd& phi,
                          const Eigen::MatrixXd& theta_hat, double c_n) {
  return control_u(z_n, alpha_prev_dot, phi, theta_hat, c_n) - z_prev;
}

Eigen::VectorXd control_u(const Eigen::VectorXd& z_n, const Eigen::VectorXd& alpha_prev_dot,
                          const Eigen::MatrixXd& phi, const Eigen::MatrixXd& theta_hat, double c_n) {
  return -c_n * z_n + alpha_prev_dot - phi.cwiseProduct(theta_hat).rowwise().sum();
}

Eigen::MatrixXd adaptive_rate(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& phi, const Eigen::VectorXd& z_n) {
  return gamma.cwiseProduct(z_n).asDiagonal() * phi;
}

double default_vartheta(const GraphModel& graph, double c1, std::optional<double> c2) {
  const Eigen::MatrixXd gram = graph.tree.E_t.transpose() * graph.tree.E_t;
  const auto [gram_min, gram_max] = symmetric_extreme_eigenvalues(gram);
  // largest vartheta that keeps c1' positive
  double upper = 0.0;
  switch (graph.topology_class) {
    case TopologyClass::DirectedSpanningTree:
      upper = 2.0 * c1 * symmetric_extreme_eigenvalues(graph.laplacians.edge_laplacian_sym).first / gram_max;
      break;
    case TopologyClass::DirectedCycle:
      upper = c1 * gram_min / gram_max;
      break;
    case TopologyClass::ConnectedUndirected:
      upper = 2.0 * c1 * gram_min / gram_max;
      break;
    case TopologyClass::Unsupported:
      throw std::invalid_argument("default_vartheta: unsupported topology");
  }
  if (upper <= 0.0) return c2 ? 1.0 / *c2 : 1.0;
  if (c2) {
    const double lower = 0.5 / *c2;  // smallest vartheta that keeps c2' positive
    if (lower < upper) return 0.5 * (lower + upper);
  }
  return 0.5 * upper;
}

GainDiagnostics gain_diagnostics(const GraphModel& graph, const Eigen::VectorXd& W, const Eigen::VectorXd& J,
                                 double c1, std::optional<double> c2, double vartheta, double epsilon) {
  GainDiagnostics diag;
  diag.vartheta = vartheta;
  diag.epsilon = epsilon;
  const Eigen::MatrixXd gram = graph.tree.E_t.transpose() * graph.tree.E_t;
  const auto [gram_min, gram_max] = symmetric_extreme_eigenvalues(gram);
  diag.lam_max_EtEt = gram_max;

  switch (graph.topology_class) {
    case TopologyClass::DirectedSpanningTree: {
      diag.lam_min_Les = symmetric_extreme_eigenvalues(graph.laplacians.edge_laplacian_sym).first;
      diag.lam_min_W2 = W.cwiseAbs2().minCoeff();
      diag.lam_max_J2 = J.cwiseAbs2().maxCoeff();
      diag.c1_prime = (c1 * diag.lam_min_Les - 0.5 * vartheta * gram_max) * diag.lam_min_W2;
      break;
    }
    case TopologyClass::DirectedCycle:
    case TopologyClass::ConnectedUndirected: {
      const Eigen::MatrixXd& R = graph.R_input;
      const Eigen::MatrixXd rwr = R * W.asDiagonal() * R.transpose();
      const Eigen::MatrixXd rj2r = R * J.cwiseAbs2().asDiagonal() * R.transpose();
      diag.lam_min_Les = gram_min;
      diag.lam_min_W2 = symmetric_extreme_eigenvalues(rwr * rwr).first;
      diag.lam_max_J2 = symmetric_extreme_eigenvalues(rj2r).second;
      const double budget = graph.topology_class == TopologyClass::DirectedCycle
                                ? 0.5 * (c1 * gram_min - vartheta * gram_max)
                                : c1 * gram_min - 0.5 * vartheta * gram_max;
      diag.c1_prime = budget * diag.lam_min_W2;
      break;
    }
    case TopologyClass::Unsupported:
      throw std::invalid_argument("gain_diagnostics: unsupported topology");
  }
  diag.c1_dprime = diag.c1_prime - 0.5 * epsilon * diag.lam_max_J2;
  if (c2) {
    diag.c2_prime = *c2 - 1.0 / (2.0 * vartheta);
  }
  diag.pass = diag.c1_dprime > 0.0 && (!diag.c2_prime || *diag.c2_prime > 0.0);
  return diag;
}

double lyapunov_sample(const Eigen::VectorXd& z1, std::span<const Eigen::VectorXd> higher,
                       const Eigen::MatrixXd& theta_tilde, const Eigen::VectorXd& gamma) {
  double v = 0.5 * z1.squaredNorm();
  for (const auto& z : higher) {
    v += 0.5 * z.squaredNorm();
  }
  if (theta_tilde.size() > 0) {
    v += 0.5 * (theta_tilde.cwiseAbs2().rowwise().sum().array() / gamma.array()).sum();
  }
  return v;
}

AxisController::AxisController(const GraphModel& graph, std::vector<PerformanceSpec> edge_specs,
                               ControllerGains gains)
    : graph_(&graph), specs_(std::move(edge_specs)), gains_(std::move(gains)) {
  if (static_cast<int>(specs_.size()) != graph.topology.num_edges()) {
    throw std::invalid_argument("one performance spec per edge is required");
  }
  if (gains_.order() < 1 || gains_.order() > 2) {
    throw std::invalid_argument("closed-loop evaluation supports relative degree 1 or 2 only");
  }
  gains_.validate(graph.topology.num_nodes());
  gamma_ = Eigen::Map<const Eigen::VectorXd>(gains_.gamma.data(), static_cast<Eigen::Index>(gains_.gamma.size()));
}

AxisControl AxisController::evaluate(double t, const Eigen::VectorXd& e_tilde, const Eigen::VectorXd& velocity,
                                     const Eigen::MatrixXd& phi, const Eigen::MatrixXd& theta_hat) const {
  const GraphModel& graph = *graph_;
  const double c1 = gains_.c[0];
  AxisControl out;
  if (gains_.order() == 1) {
    // x_1' = u: the first virtual control is the input itself
    out.transformed = transform_edges(graph, specs_, e_tilde, Eigen::VectorXd::Zero(graph.topology.num_nodes()), t);
    out.alpha1 = alpha1(graph, out.transformed.W, out.transformed.S, c1);
    out.transformed.S_dot = out.transformed.W.cwiseProduct(graph.E.transpose() * out.alpha1) + out.transformed.D;
    out.u = out.alpha1 - phi.cwiseProduct(theta_hat).rowwise().sum();
    out.theta_hat_rate = Eigen::MatrixXd::Zero(theta_hat.rows(), theta_hat.cols());
    return out;
  }
  out.transformed = transform_edges(graph, specs_, e_tilde, velocity, t);
  out.alpha1 = alpha1(graph, out.transformed.W, out.transformed.S, c1);
  out.alpha1_dot = alpha1_dot(graph, specs_, e_tilde, velocity, t, c1);
  out.z2 = velocity - out.alpha1;
  out.u = control_u(out.z2, out.alpha1_dot, phi, theta_hat, gains_.c[1]);
  out.theta_hat_rate = adaptive_rate(gamma_, phi, out.z2);
  return out;
}

}  // namespace edgeform
