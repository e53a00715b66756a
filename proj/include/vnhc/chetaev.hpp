#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vnhc/constraints.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/integrate.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

/// |Phi| bound past which a constrained run is aborted.
inline constexpr double kConstraintDriftLimit = 1e-6;

/// Acceleration and multiplier of the constrained (reaction-force) dynamics:
///   G a = f_drift + A^T lambda,   dPhi/dq . v + A a = 0,
/// with A the velocity Jacobian of Phi. Solved by eliminating a, which
/// reduces the multiplier to the m x m system (A G^{-1} A^T) lambda = -G(Phi).
struct ConstrainedAcceleration {
  Eigen::VectorXd acceleration;
  Eigen::VectorXd multiplier;
};

inline ConstrainedAcceleration chetaev_acceleration(const MechanicalSystem& sys,
                                                    const ConstraintSet& c,
                                                    const State& s) {
  detail::check_dims(sys, s, "chetaev_acceleration");
  const MetricFactor mf = metric_at(sys, s.q);
  const Eigen::MatrixXd a_jac = constraint_jac_v(c, s);
  if (a_jac.rows() != c.m || a_jac.cols() != sys.n)
    throw DimensionError("chetaev_acceleration: velocity Jacobian must be "
                         "m x n");
  const Eigen::VectorXd drift = drift_acceleration(sys, s);
  const Eigen::MatrixXd minv_at = mf.ldlt.solve(a_jac.transpose());
  const Eigen::MatrixXd reduced = a_jac * minv_at;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(reduced);
  const Eigen::VectorXd rhs =
      -(constraint_jac_q(c, s) * s.v + a_jac * drift);
  const Eigen::VectorXd lambda = lu.solve(rhs);
  if (!lambda.allFinite() ||
      lu.rcond() < 1e3 * std::numeric_limits<double>::epsilon())
    throw ChetaevError("reduced multiplier system is singular at t = " +
                       std::to_string(s.t));
  return {Eigen::VectorXd(drift + minv_at * lambda), lambda};
}

/// Trajectory of the constrained dynamics with the multiplier recorded at
/// every sample.
struct ChetaevSolution {
  TrajectoryRecord trajectory;
  std::vector<Eigen::VectorXd> multipliers;
};

/// Integrates the constrained dynamics from an on-manifold state. No control
/// is applied (the control columns record zeros); a constraint drift beyond
/// 1e-6 aborts with a diagnostic.
inline ChetaevSolution simulate_constrained(const MechanicalSystem& sys,
                                            const ConstraintSet& c,
                                            const State& s0, double dt,
                                            double t_final) {
  detail::check_dims(sys, s0, "simulate_constrained");
  if (!state_finite(s0))
    throw ValidationError("simulate_constrained: initial state has non-finite "
                          "entries");
  const int64_t steps = detail::step_count(dt, t_final);
  AccelerationFn accel = [&](const State& s) {
    return chetaev_acceleration(sys, c, s).acceleration;
  };

  ChetaevSolution out;
  TrajectoryRecord& tr = out.trajectory;
  tr.dt = dt;
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(sys.m);
  State s = s0;
  s.t = 0.0;
  for (int64_t i = 0;; ++i) {
    const Eigen::VectorXd phi = evaluate(c, s);
    if (phi.size() && phi.cwiseAbs().maxCoeff() > kConstraintDriftLimit)
      throw IntegrationError(
          "constrained dynamics drifted off the manifold at t = " +
              std::to_string(s.t) + " (|Phi|_inf = " +
              std::to_string(phi.cwiseAbs().maxCoeff()) + ")",
          s.t);
    tr.times.push_back(s.t);
    tr.states.push_back(s);
    tr.controls.push_back(zero_u);
    tr.constraint_values.push_back(phi);
    tr.energies.push_back(energy(sys, s));
    out.multipliers.push_back(chetaev_acceleration(sys, c, s).multiplier);
    if (i == steps) break;
    s = rk4_step(accel, s, dt);
    s.t = static_cast<double>(i + 1) * dt;
    detail::check_blowup(s);
  }
  return out;
}

/// Orthogonality residual of the intrinsic form of the constrained equations:
/// the covariant acceleration plus the potential gradient, minus the raised
/// external force, must be metric-orthogonal to the kernel of the velocity
/// Jacobian. Returns the largest pairing against a metric-orthonormal kernel
/// basis.
inline double riemannian_form_residual(const MechanicalSystem& sys,
                                       const ConstraintSet& c, const State& s) {
  detail::check_dims(sys, s, "riemannian_form_residual");
  const MetricFactor mf = metric_at(sys, s.q);
  const Eigen::MatrixXd a_jac = constraint_jac_v(c, s);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a_jac);
  if (lu.rank() != c.m)
    throw RegularityError(
        "riemannian_form_residual: velocity Jacobian has rank " +
        std::to_string(lu.rank()) + ", expected " + std::to_string(c.m));
  Eigen::MatrixXd kernel = lu.kernel();  // n x (n - m)

  // Metric-orthonormal basis of the kernel (modified Gram-Schmidt).
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i)
      kernel.col(j) -=
          kernel.col(i) * (kernel.col(i).dot(mf.g * kernel.col(j)));
    const double norm = std::sqrt(kernel.col(j).dot(mf.g * kernel.col(j)));
    if (!(norm > 0.0))
      throw RegularityError("riemannian_form_residual: degenerate kernel "
                            "basis");
    kernel.col(j) /= norm;
  }

  const ConstrainedAcceleration ca = chetaev_acceleration(sys, c, s);
  const Eigen::VectorXd covariant_accel =
      ca.acceleration +
      detail::christoffel_with_factor(sys, s.q, mf).quadratic(s.v);
  Eigen::VectorXd covector = potential_differential(sys, s.q);
  if (sys.external_force) covector -= sys.external_force(s.q, s.v);
  const Eigen::VectorXd r = covariant_accel + mf.ldlt.solve(covector);
  double residual = 0.0;
  const Eigen::VectorXd lowered = mf.g * r;
  for (Eigen::Index j = 0; j < kernel.cols(); ++j)
    residual = std::max(residual, std::abs(kernel.col(j).dot(lowered)));
  return residual;
}

/// Minimum-norm damped Newton projection of the velocity onto the constraint
/// manifold; the configuration is left untouched.
inline State project_to_constraint(const ConstraintSet& c, const State& s,
                                   double tol = 1e-12, int max_iter = 50) {
  State out = s;
  double best = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd phi = evaluate(c, out);
    const double off = phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0;
    if (off <= tol) return out;
    best = std::min(best, off);
    const Eigen::MatrixXd a_jac = constraint_jac_v(c, out);
    Eigen::LDLT<Eigen::MatrixXd> gram((a_jac * a_jac.transpose()).eval());
    if (gram.info() != Eigen::Success || gram.vectorD().minCoeff() <= 0.0)
      throw RegularityError("project_to_constraint: velocity Jacobian is rank "
                            "deficient");
    const Eigen::VectorXd step = a_jac.transpose() * gram.solve(phi);
    double alpha = 1.0;
    State trial = out;
    for (int halvings = 0; halvings < 30; ++halvings) {
      trial.v = out.v - alpha * step;
      if (evaluate(c, trial).cwiseAbs().maxCoeff() < off) break;
      alpha *= 0.5;
    }
    out = trial;
  }
  throw ConvergenceError(
      "project_to_constraint: no convergence after " +
      std::to_string(max_iter) + " iterations (best |Phi|_inf = " +
      std::to_string(best) + ")");
}

}  // namespace vnhc
