#include <gtest/gtest.h>

#include <random>

#include "edgeform/controller.hpp"
#include "test_support.hpp"

using namespace edgeform;
using namespace edgeform::testing;

namespace {

std::vector<PerformanceSpec> specs_for(const GraphModel& g, const PerformanceSpec& s) {
  return std::vector<PerformanceSpec>(static_cast<std::size_t>(g.topology.num_edges()), s);
}

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// alpha_1 re-evaluated at shifted (e~, t); x_1 moves with x_2 so e~ moves
// with E^T x_2.
Eigen::VectorXd alpha1_at(const GraphModel& g, const std::vector<PerformanceSpec>& specs,
                          const Eigen::VectorXd& e, double t, double c1) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(g.topology.num_nodes());
  const TransformedState ts = transform_edges(g, specs, e, zero, t);
  return alpha1(g, ts.W, ts.S, c1);
}

double max_relative(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Transform, EquilibriumIsZero) {
  const GraphModel g = GraphModel::build(pentagon_cycle());
  const TransformedState ts =
      transform_edges(g, specs_for(g, asymmetric_spec()), Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5), 0.5);
  EXPECT_EQ(ts.S.norm(), 0.0);
  EXPECT_EQ(ts.D.norm(), 0.0);
  EXPECT_EQ(ts.S_dot.norm(), 0.0);
}

TEST(Transform, SingleEdgeRate) {
  const GraphModel g = GraphModel::build(Topology(2, {{0, 1}}, Directedness::Directed));
  const TransformedState ts = transform_edges(g, specs_for(g, asymmetric_spec()), vec({0.0}), vec({1.0, 0.0}), 0.0);
  EXPECT_NEAR(ts.S_dot(0), 5.20833, 1e-5);
}

TEST(Transform, ViolationCarriesEdge) {
  const GraphModel g = GraphModel::build(path3());
  try {
    transform_edges(g, specs_for(g, asymmetric_spec()), vec({0.0, 2.0}), Eigen::VectorXd::Zero(3), 0.0);
    FAIL();
  } catch (const FunnelViolation& v) {
    EXPECT_EQ(v.edge(), 1);
  }
}

TEST(Alpha1, Examples) {
  const GraphModel path = GraphModel::build(path3());
  EXPECT_EQ(alpha1(path, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2), 1.0).norm(), 0.0);
  EXPECT_TRUE(alpha1(path, Eigen::VectorXd::Ones(2), vec({1, 1}), 1.0).isApprox(vec({0, 1, 1})));

  const GraphModel single = GraphModel::build(Topology(2, {{0, 1}}, Directedness::Undirected));
  EXPECT_TRUE(alpha1(single, vec({1}), vec({1}), 2.0).isApprox(vec({-2, 2})));
}

TEST(Alpha1Dot, VanishesAtRestWithConstantEnvelope) {
  const GraphModel g = GraphModel::build(pentagon_tree());
  PerformanceSpec s = asymmetric_spec();
  s.betaf = s.beta0;
  const Eigen::VectorXd a = alpha1_dot(g, specs_for(g, s), Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(5), 1.0, 1.0);
  EXPECT_EQ(a.norm(), 0.0);
}

TEST(Alpha1Dot, SingleEdgeMatchesFiniteDifference) {
  const GraphModel g = GraphModel::build(Topology(2, {{0, 1}}, Directedness::Directed));
  const auto specs = specs_for(g, asymmetric_spec());
  const Eigen::VectorXd x2 = vec({1.0, 0.0});
  const Eigen::VectorXd analytic = alpha1_dot(g, specs, vec({0.0}), x2, 0.0, 1.0);
  // e~' = 1, zeta' = xi e~' / beta = 1.25 at the origin
  const MappingJacobians j = map_jacobians(specs[0], 0.0, 0.0);
  EXPECT_NEAR(j.xi * 1.0 / j.beta, 1.25, 1e-12);
  const double h = 1e-6;
  const Eigen::VectorXd fd =
      (alpha1_at(g, specs, vec({h}), h, 1.0) - alpha1_at(g, specs, vec({-h}), -h, 1.0)) / (2 * h);
  EXPECT_LT(max_relative(analytic, fd), 1e-6);
}

TEST(Alpha1Dot, RandomStatesMatchFiniteDifference) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> err(-0.15, 0.4), vel(-1.0, 1.0), time(0.0, 4.0);
  for (const Topology& t : {pentagon_tree(), pentagon_cycle(), pentagon_cycle(Directedness::Undirected)}) {
    const GraphModel g = GraphModel::build(t);
    const auto specs = specs_for(g, asymmetric_spec());
    for (int trial = 0; trial < 20; ++trial) {
      const double t0 = time(rng);
      const double beta = envelope(specs[0], t0).beta;
      Eigen::VectorXd e(t.num_edges());
      for (auto& x : e) x = err(rng) * beta;  // stays inside the funnel
      Eigen::VectorXd x2(5);
      for (auto& x : x2) x = vel(rng);
      const Eigen::VectorXd de = g.E.transpose() * x2;
      const double h = 1e-6;
      const Eigen::VectorXd fd =
          (alpha1_at(g, specs, e + h * de, t0 + h, 1.0) - alpha1_at(g, specs, e - h * de, t0 - h, 1.0)) / (2 * h);
      EXPECT_LT(max_relative(alpha1_dot(g, specs, e, x2, t0, 1.0), fd), 1e-5) << to_string(g.topology_class);
    }
  }
}

TEST(VirtualControls, LinearForms) {
  EXPECT_EQ(alpha2(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5), 5.0).norm(), 0.0);
  EXPECT_TRUE(alpha2(vec({1, -1, 0, 0, 0}), Eigen::VectorXd::Zero(5), 5.0).isApprox(vec({-5, 5, 0, 0, 0})));
  EXPECT_TRUE(alpha2(vec({1, 0, 0}), vec({2, 0, 0}), 5.0).isApprox(vec({-3, 0, 0})));
  EXPECT_EQ(alpha_q(vec({0}), vec({0}), vec({0}), 1.0)(0), 0.0);
  EXPECT_EQ(alpha_q(vec({1}), vec({1}), vec({0}), 2.0)(0), -3.0);
  EXPECT_EQ(alpha_q(vec({0}), vec({-1}), vec({4}), 1.0)(0), 5.0);
}

TEST(ControlLaw, Examples) {
  const Eigen::MatrixXd zero_phi = Eigen::MatrixXd::Zero(3, 1);
  const Eigen::MatrixXd zero_theta = Eigen::MatrixXd::Zero(3, 1);
  EXPECT_EQ(control_u(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), zero_phi, zero_theta, 5.0).norm(), 0.0);
  EXPECT_TRUE(control_u(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), zero_phi,
                        zero_theta, 5.0)
                  .isApprox(Eigen::VectorXd::Constant(3, -5.0)));

  // estimates equal to the truth cancel friction exactly
  Eigen::MatrixXd phi(3, 1), theta(3, 1);
  phi << -0.5, 0.2, 0.1;
  theta << -0.25, -0.25, -0.25;
  const Eigen::VectorXd u = control_u(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), phi, theta, 5.0);
  EXPECT_TRUE(u.isApprox(-(phi * theta.transpose()).diagonal()));
}

TEST(AdaptiveLaw, Examples) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.5, 0.3;
  EXPECT_EQ(adaptive_rate(Eigen::VectorXd::Ones(2), phi, Eigen::VectorXd::Zero(2)).norm(), 0.0);
  EXPECT_EQ(adaptive_rate(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(2, 1), vec({1, 2})).norm(), 0.0);
  EXPECT_DOUBLE_EQ(adaptive_rate(Eigen::VectorXd::Ones(2), phi, vec({2, 0}))(0, 0), 1.0);
}

TEST(GainDiagnostics, PathTree) {
  const GraphModel g = GraphModel::build(path3());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);

  const GainDiagnostics bad = gain_diagnostics(g, ones, ones, 1.0, 5.0, 0.1, 0.01);
  EXPECT_NEAR(bad.c1_prime, 0.35, 1e-12);
  EXPECT_NEAR(bad.c1_dprime, 0.345, 1e-12);
  ASSERT_TRUE(bad.c2_prime.has_value());
  EXPECT_NEAR(*bad.c2_prime, 0.0, 1e-12);
  EXPECT_FALSE(bad.pass);

  const GainDiagnostics good = gain_diagnostics(g, ones, ones, 1.0, 5.0, 0.2, 0.01);
  EXPECT_NEAR(good.c1_prime, 0.2, 1e-12);
  EXPECT_NEAR(*good.c2_prime, 2.5, 1e-12);
  EXPECT_TRUE(good.pass);
}

TEST(GainDiagnostics, DefaultVarthetaPassesOnReferenceGraphs) {
  for (const Topology& t : {pentagon_tree(), pentagon_cycle(), pentagon_cycle(Directedness::Undirected)}) {
    const GraphModel g = GraphModel::build(t);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(t.num_edges(), 5.0);
    const GainDiagnostics d = gain_diagnostics(g, w, w, 1.0, 5.0, default_vartheta(g, 1.0, 5.0), 1e-3);
    EXPECT_GT(d.c1_prime, 0.0) << to_string(g.topology_class);
    EXPECT_TRUE(d.pass) << to_string(g.topology_class);
  }
}

TEST(Lyapunov, Examples) {
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 4.0);
  EXPECT_EQ(lyapunov_sample(vec({0}), {}, Eigen::MatrixXd::Zero(1, 1), gamma), 0.0);
  EXPECT_EQ(lyapunov_sample(vec({1}), {}, Eigen::MatrixXd::Zero(1, 1), gamma), 0.5);
  EXPECT_EQ(lyapunov_sample(vec({0}), {}, Eigen::MatrixXd::Constant(1, 1, 2.0), gamma), 0.5);
}

TEST(AxisController, RejectsUnsupportedOrders) {
  const GraphModel g = GraphModel::build(path3());
  EXPECT_THROW(AxisController(g, specs_for(g, asymmetric_spec()), ControllerGains{{1, 2, 3}, {1, 1, 1}}),
               std::invalid_argument);
  EXPECT_THROW(AxisController(g, {asymmetric_spec()}, ControllerGains{{1, 2}, {1, 1, 1}}), std::invalid_argument);
}

TEST(AxisController, SecondOrderLawComposition) {
  const GraphModel g = GraphModel::build(pentagon_cycle());
  const auto specs = specs_for(g, asymmetric_spec());
  const AxisController ctl(g, specs, ControllerGains{{1.0, 5.0}, std::vector<double>(5, 1.0)});
  const Eigen::VectorXd e = vec({0.05, -0.02, 0.1, 0.0, -0.04});
  const Eigen::VectorXd v = vec({0.1, -0.2, 0.05, 0.0, 0.3});
  Eigen::MatrixXd phi = Eigen::MatrixXd::Random(5, 1);
  Eigen::MatrixXd th = Eigen::MatrixXd::Random(5, 1);
  const AxisControl out = ctl.evaluate(0.3, e, v, phi, th);
  EXPECT_TRUE(out.z2.isApprox(v - out.alpha1));
  EXPECT_TRUE(out.u.isApprox(-5.0 * out.z2 + out.alpha1_dot - (phi * th.transpose()).diagonal()));
  EXPECT_TRUE(out.theta_hat_rate.isApprox(Eigen::MatrixXd(phi.array().colwise() * out.z2.array())));
}
