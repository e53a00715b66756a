#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vnhc/constraints.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

/// Diagonal gain matrix K = diag(rates); every rate must be positive so that
/// each constraint component contracts at its own exponential rate.
struct GainMatrix {
  Eigen::VectorXd rates;
};

inline GainMatrix uniform_gains(int m, double k = 1.0) {
  return {Eigen::VectorXd::Constant(m, k)};
}

inline GainMatrix gains_from(const std::vector<double>& rates) {
  return {Eigen::Map<const Eigen::VectorXd>(
      rates.data(), static_cast<Eigen::Index>(rates.size()))};
}

namespace detail {

inline void check_gains(const GainMatrix& k, int m, const char* where) {
  if (k.rates.size() != m)
    throw ValidationError(std::string(where) + ": gain matrix has " +
                          std::to_string(k.rates.size()) + " rates, expected " +
                          std::to_string(m));
  if (!(k.rates.array() > 0.0).all())
    throw ValidationError(std::string(where) + ": gains must be positive");
}

}  // namespace detail

/// Control input with the time it was computed for.
struct ControlSignal {
  Eigen::VectorXd u;
  double t = 0.0;
};

/// Feedback that renders the constraint manifold exponentially stable:
///   u*_a = C_ab (-K Phi - G(Phi))^b,
/// where C_ab inverts the input-constraint coupling. Along the closed loop
/// each component obeys d phi^b / dt = -k^b phi^b.
inline ControlSignal stabilizing_control(const MechanicalSystem& sys,
                                         const ConstraintSet& c,
                                         const GainMatrix& k, const State& s) {
  detail::check_gains(k, c.m, "stabilizing_control");
  const CouplingMatrix cm = coupling_matrix(sys, c, s);
  const Eigen::VectorXd phi = evaluate(c, s);
  const Eigen::VectorXd w =
      -(k.rates.asDiagonal() * phi) - drift_derivative(sys, c, s);
  // The closed-loop rate of phi^b is G(phi^b) + sum_a u_a c(a, b), so u must
  // solve c^T u = w.
  return {Eigen::VectorXd(cm.c_inv.transpose() * w), s.t};
}

/// Feedback that keeps a trajectory already on the manifold on it: the
/// stabilizing law with the vanishing -K Phi term dropped. Raises when the
/// state is farther than `tol` from the manifold.
inline ControlSignal invariance_control(const MechanicalSystem& sys,
                                        const ConstraintSet& c, const State& s,
                                        double tol = 1e-9) {
  const Eigen::VectorXd phi = evaluate(c, s);
  const double off = phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0;
  if (off > tol)
    throw PreconditionError(
        "invariance_control: state is off the constraint manifold "
        "(|Phi|_inf = " + std::to_string(off) + ", tolerance " +
        std::to_string(tol) + ")");
  const CouplingMatrix cm = coupling_matrix(sys, c, s);
  const Eigen::VectorXd w = -drift_derivative(sys, c, s);
  return {Eigen::VectorXd(cm.c_inv.transpose() * w), s.t};
}

/// Position-level variant: for a holonomic constraint the feedback
///   u_a = C_ab (-K1 phi - K2 phi_dot - G(phi_dot))^b
/// (with the coupling built from the velocity level) closes the loop into
/// phi_ddot = -K1 phi - K2 phi_dot componentwise.
inline ControlSignal holonomic_control(const MechanicalSystem& sys,
                                       const HolonomicConstraint& hc,
                                       const GainMatrix& k1,
                                       const GainMatrix& k2, const State& s) {
  detail::check_gains(k1, hc.position.m, "holonomic_control");
  detail::check_gains(k2, hc.velocity.m, "holonomic_control");
  const CouplingMatrix cm = coupling_matrix(sys, hc.velocity, s);
  const Eigen::VectorXd level = evaluate(hc.position, s);
  const Eigen::VectorXd rate = evaluate(hc.velocity, s);
  const Eigen::VectorXd w = -(k1.rates.asDiagonal() * level) -
                            (k2.rates.asDiagonal() * rate) -
                            drift_derivative(sys, hc.velocity, s);
  return {Eigen::VectorXd(cm.c_inv.transpose() * w), s.t};
}

}  // namespace vnhc
