#pragma once

// Unified performance functions, the decaying funnel envelope and the
// error transformation  e~ -> eta -> zeta -> s  together with the derivative
// factors used by the controller.

#include <stdexcept>
#include <string>
#include <utility>

namespace edgeform {

enum class PerformanceFamily { Rational, Tangent };

std::string to_string(PerformanceFamily family);
PerformanceFamily performance_family_from_string(const std::string& name);

/// Odd, strictly increasing bijection P: (-iota, iota) -> R.
///   Rational: P(y) = y / sqrt(1 - y^2), iota = 1
///   Tangent:  P(y) = tan(y),            iota = pi/2
class UnifiedPerformanceFunction {
 public:
  explicit UnifiedPerformanceFunction(PerformanceFamily family = PerformanceFamily::Rational) : family_(family) {}

  PerformanceFamily family() const { return family_; }
  double iota() const;

  /// Throws std::domain_error when |y| >= iota.
  double eval(double y) const;
  /// Like eval, but returns +-infinity at (and beyond) the domain boundary.
  double eval_extended(double y) const;
  double inverse(double e) const;
  /// d(P^-1)/de, the factor xi.
  double inverse_derivative(double e) const;
  /// d^2(P^-1)/de^2, used for the time derivative of xi.
  double inverse_second_derivative(double e) const;

  friend bool operator==(const UnifiedPerformanceFunction&, const UnifiedPerformanceFunction&) = default;

 private:
  PerformanceFamily family_;
};

struct PerformanceSpec {
  double delta_lo = 1.0;
  double delta_hi = 1.0;
  double beta0 = 1.0;
  double betaf = 0.1;
  double lambda = 1.0;
  UnifiedPerformanceFunction upf{};

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  friend bool operator==(const PerformanceSpec&, const PerformanceSpec&) = default;
};

/// The envelope beta(t) and its time derivative.
struct Envelope {
  double beta = 0.0;
  double beta_dot = 0.0;
};

Envelope envelope(const PerformanceSpec& spec, double t);

enum class ConstraintKind { Global, LowerOneSided, UpperOneSided, Asymmetric };

std::string to_string(ConstraintKind kind);

/// Constraint mode plus the initial bounds on e~(0); infinite sides are
/// reported as +-infinity.
struct ConstraintMode {
  ConstraintKind kind = ConstraintKind::Global;
  double initial_lower = 0.0;
  double initial_upper = 0.0;
};

ConstraintMode classify_mode(const PerformanceSpec& spec);

/// Raised when the modulated error leaves (-delta_lo, delta_hi).
class FunnelViolation : public std::runtime_error {
 public:
  FunnelViolation(double e_tilde, double zeta, double delta_lo, double delta_hi);

  double e_tilde() const { return e_tilde_; }
  double zeta() const { return zeta_; }
  /// Edge index when raised for a specific edge, otherwise -1.
  int edge() const { return edge_; }
  void set_edge(int edge) { edge_ = edge; }
  /// Spatial axis when raised by a multi-axis simulation, otherwise -1.
  int axis() const { return axis_; }
  void set_axis(int axis) { axis_ = axis; }

 private:
  double e_tilde_;
  double zeta_;
  int edge_ = -1;
  int axis_ = -1;
};

struct MappedError {
  double e_tilde = 0.0;
  double eta = 0.0;
  double zeta = 0.0;
  double s = 0.0;
};

struct MappingJacobians {
  double xi = 0.0;    // d eta / d e~
  double mu = 0.0;    // d s / d zeta
  double J = 0.0;     // mu / beta
  double W = 0.0;     // J * xi
  double D = 0.0;     // -J * beta_dot * zeta
  double beta = 0.0;
  double beta_dot = 0.0;
};

/// s as a function of zeta. Throws FunnelViolation outside (-delta_lo, delta_hi).
double transform_zeta(const PerformanceSpec& spec, double zeta);

/// d s / d zeta.
double transform_slope(const PerformanceSpec& spec, double zeta);

/// d mu / d zeta, closed form of the quotient rule applied to mu(zeta).
double transform_slope_derivative(const PerformanceSpec& spec, double zeta);

MappedError map_error(const PerformanceSpec& spec, double e_tilde, double t);

MappingJacobians map_jacobians(const PerformanceSpec& spec, double e_tilde, double t);

/// Funnel bounds on e~ at time t: (P(-delta_lo beta), P(delta_hi beta)),
/// with +-infinity where delta * beta reaches iota.
std::pair<double, double> bounds_at(const PerformanceSpec& spec, double t);

}  // namespace edgeform
