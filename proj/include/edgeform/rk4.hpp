#pragma once

#include <Eigen/Dense>

namespace edgeform {

/// Classic four-stage Runge-Kutta step for y' = rate(t, y). Exceptions thrown
/// by the rate function at any stage propagate and the step is abandoned.
template <typename Rate>
Eigen::VectorXd rk4_step(Rate&& rate, double t, const Eigen::VectorXd& y, double dt) {
  const Eigen::VectorXd k1 = rate(t, y);
  const Eigen::VectorXd k2 = rate(t + 0.5 * dt, Eigen::VectorXd(y + 0.5 * dt * k1));
  const Eigen::VectorXd k3 = rate(t + 0.5 * dt, Eigen::VectorXd(y + 0.5 * dt * k2));
  const Eigen::VectorXd k4 = rate(t + dt, Eigen::VectorXd(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace edgeform
