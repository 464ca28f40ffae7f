#include "edgeform/performance.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace edgeform {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// relative tolerance when deciding whether delta * beta0 sits on iota
bool at_iota(double value, double iota) { return std::abs(value - iota) <= 1e-12 * iota; }

std::string violation_message(double e_tilde, double zeta, double lo, double hi) {
  std::ostringstream os;
  os << "funnel violation: e~=" << e_tilde << " gives zeta=" << zeta << " outside (" << -lo << ", " << hi << ")";
  return os.str();
}

}  // namespace

std::string to_string(PerformanceFamily family) {
  return family == PerformanceFamily::Rational ? "rational" : "tangent";
}

PerformanceFamily performance_family_from_string(const std::string& name) {
  if (name == "rational") return PerformanceFamily::Rational;
  if (name == "tangent") return PerformanceFamily::Tangent;
  throw std::invalid_argument("unknown performance family '" + name + "' (expected rational or tangent)");
}

double UnifiedPerformanceFunction::iota() const {
  return family_ == PerformanceFamily::Rational ? 1.0 : std::numbers::pi / 2.0;
}

double UnifiedPerformanceFunction::eval(double y) const {
  if (!(std::abs(y) < iota())) {
    throw std::domain_error("performance function argument outside (-iota, iota)");
  }
  if (family_ == PerformanceFamily::Rational) {
    return y / std::sqrt((1.0 - y) * (1.0 + y));
  }
  return std::tan(y);
}

double UnifiedPerformanceFunction::eval_extended(double y) const {
  if (std::abs(y) >= iota() || at_iota(std::abs(y), iota())) {
    return y > 0 ? kInf : -kInf;
  }
  return eval(y);
}

double UnifiedPerformanceFunction::inverse(double e) const {
  if (family_ == PerformanceFamily::Rational) {
    return e / std::sqrt(1.0 + e * e);
  }
  return std::atan(e);
}

double UnifiedPerformanceFunction::inverse_derivative(double e) const {
  const double q = 1.0 + e * e;
  if (family_ == PerformanceFamily::Rational) {
    return 1.0 / (q * std::sqrt(q));
  }
  return 1.0 / q;
}

double UnifiedPerformanceFunction::inverse_second_derivative(double e) const {
  const double q = 1.0 + e * e;
  if (family_ == PerformanceFamily::Rational) {
    return -3.0 * e / (q * q * std::sqrt(q));
  }
  return -2.0 * e / (q * q);
}

void PerformanceSpec::validate() const {
  if (!(delta_lo > 0.0 && delta_lo <= 1.0)) throw std::invalid_argument("delta_lo must lie in (0, 1]");
  if (!(delta_hi > 0.0 && delta_hi <= 1.0)) throw std::invalid_argument("delta_hi must lie in (0, 1]");
  if (!(betaf > 0.0)) throw std::invalid_argument("betaf must be positive");
  if (!(beta0 > betaf)) throw std::invalid_argument("beta0 must exceed betaf");
  if (!(beta0 <= upf.iota() || at_iota(beta0, upf.iota()))) {
    throw std::invalid_argument("beta0 must not exceed iota of the performance function");
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
}

Envelope envelope(const PerformanceSpec& spec, double t) {
  const double decay = std::exp(-spec.lambda * t);
  return {(spec.beta0 - spec.betaf) * decay + spec.betaf, -spec.lambda * (spec.beta0 - spec.betaf) * decay};
}

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Global: return "global";
    case ConstraintKind::LowerOneSided: return "lower_one_sided";
    case ConstraintKind::UpperOneSided: return "upper_one_sided";
    case ConstraintKind::Asymmetric: return "asymmetric";
  }
  return "asymmetric";
}

ConstraintMode classify_mode(const PerformanceSpec& spec) {
  const double iota = spec.upf.iota();
  const bool lower_open = at_iota(spec.delta_lo * spec.beta0, iota);
  const bool upper_open = at_iota(spec.delta_hi * spec.beta0, iota);
  ConstraintMode mode;
  mode.initial_lower = lower_open ? -kInf : spec.upf.eval(-spec.delta_lo * spec.beta0);
  mode.initial_upper = upper_open ? kInf : spec.upf.eval(spec.delta_hi * spec.beta0);
  if (lower_open && upper_open) {
    mode.kind = ConstraintKind::Global;
  } else if (upper_open) {
    mode.kind = ConstraintKind::LowerOneSided;
  } else if (lower_open) {
    mode.kind = ConstraintKind::UpperOneSided;
  } else {
    mode.kind = ConstraintKind::Asymmetric;
  }
  return mode;
}

FunnelViolation::FunnelViolation(double e_tilde, double zeta, double delta_lo, double delta_hi)
    : std::runtime_error(violation_message(e_tilde, zeta, delta_lo, delta_hi)), e_tilde_(e_tilde), zeta_(zeta) {}

double transform_zeta(const PerformanceSpec& spec, double zeta) {
  if (!(zeta > -spec.delta_lo && zeta < spec.delta_hi)) {
    throw FunnelViolation(std::numeric_limits<double>::quiet_NaN(), zeta, spec.delta_lo, spec.delta_hi);
  }
  return zeta / ((spec.delta_lo + zeta) * (spec.delta_hi - zeta));
}

double transform_slope(const PerformanceSpec& spec, double zeta) {
  const double a = spec.delta_lo + zeta;
  const double b = spec.delta_hi - zeta;
  return (spec.delta_lo * spec.delta_hi + zeta * zeta) / (a * a * b * b);
}

double transform_slope_derivative(const PerformanceSpec& spec, double zeta) {
  // mu = n / (a^2 b^2), n = lo*hi + zeta^2, a = lo + zeta, b = hi - zeta
  // mu' = [2 zeta a b - 2 n (b - a)] / (a^3 b^3)
  const double a = spec.delta_lo + zeta;
  const double b = spec.delta_hi - zeta;
  const double n = spec.delta_lo * spec.delta_hi + zeta * zeta;
  return (2.0 * zeta * a * b - 2.0 * n * (b - a)) / (a * a * a * b * b * b);
}

MappedError map_error(const PerformanceSpec& spec, double e_tilde, double t) {
  MappedError out;
  out.e_tilde = e_tilde;
  out.eta = spec.upf.inverse(e_tilde);
  out.zeta = out.eta / envelope(spec, t).beta;
  if (!(out.zeta > -spec.delta_lo && out.zeta < spec.delta_hi)) {
    throw FunnelViolation(e_tilde, out.zeta, spec.delta_lo, spec.delta_hi);
  }
  out.s = out.zeta / ((spec.delta_lo + out.zeta) * (spec.delta_hi - out.zeta));
  return out;
}

MappingJacobians map_jacobians(const PerformanceSpec& spec, double e_tilde, double t) {
  const MappedError mapped = map_error(spec, e_tilde, t);
  const Envelope env = envelope(spec, t);
  MappingJacobians jac;
  jac.beta = env.beta;
  jac.beta_dot = env.beta_dot;
  jac.xi = spec.upf.inverse_derivative(e_tilde);
  jac.mu = transform_slope(spec, mapped.zeta);
  jac.J = jac.mu / env.beta;
  jac.W = jac.J * jac.xi;
  jac.D = -jac.J * env.beta_dot * mapped.zeta;
  return jac;
}

std::pair<double, double> bounds_at(const PerformanceSpec& spec, double t) {
  const double beta = envelope(spec, t).beta;
  return {spec.upf.eval_extended(-spec.delta_lo * beta), spec.upf.eval_extended(spec.delta_hi * beta)};
}

}  // namespace edgeform
