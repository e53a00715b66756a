#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vnhc/errors.hpp"
#include "vnhc/finite_diff.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

using ConstraintValueFn = std::function<Eigen::VectorXd(
    const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using ConstraintJacobianFn = std::function<Eigen::MatrixXd(
    const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Velocity-dependent constraint Phi : TQ -> R^m whose zero set is the
/// manifold the controller stabilizes. Analytic Jacobians are optional;
/// central finite differences of `value` fill in for missing ones.
struct ConstraintSet {
  int m = 0;
  ConstraintValueFn value;
  ConstraintJacobianFn jac_q;  ///< optional, m x n
  ConstraintJacobianFn jac_v;  ///< optional, m x n
};

inline Eigen::VectorXd evaluate(const ConstraintSet& c, const State& s) {
  Eigen::VectorXd phi = c.value(s.q, s.v);
  if (phi.size() != c.m)
    throw DimensionError("constraint value has size " +
                         std::to_string(phi.size()) + ", expected " +
                         std::to_string(c.m));
  return phi;
}

inline Eigen::MatrixXd constraint_jac_q(const ConstraintSet& c,
                                        const State& s) {
  if (c.jac_q) return c.jac_q(s.q, s.v);
  const Eigen::VectorXd& v = s.v;
  return fd_jacobian(
      [&](const Eigen::VectorXd& q) { return c.value(q, v); }, s.q, c.m);
}

inline Eigen::MatrixXd constraint_jac_v(const ConstraintSet& c,
                                        const State& s) {
  if (c.jac_v) return c.jac_v(s.q, s.v);
  const Eigen::VectorXd& q = s.q;
  return fd_jacobian(
      [&](const Eigen::VectorXd& v) { return c.value(q, v); }, s.v, c.m);
}

namespace detail {

inline double operator_inf_norm(const Eigen::MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace detail

/// Pairing of the control fields with the constraint's vertical derivative:
///   c(a, b) = dPhi^b/dv . Y^a.
/// The transversality condition is that this matrix is invertible; a
/// condition estimate above 1e8 (or a non-finite inverse) raises.
struct CouplingMatrix {
  Eigen::MatrixXd c;      ///< m x m, row a, column b
  Eigen::MatrixXd c_inv;  ///< inverse of c
  double condition = 0.0; ///< infinity-norm condition estimate
};

inline CouplingMatrix coupling_matrix(const MechanicalSystem& sys,
                                      const ConstraintSet& c, const State& s) {
  detail::check_dims(sys, s, "coupling_matrix");
  const Eigen::MatrixXd jv = constraint_jac_v(c, s);
  if (jv.rows() != c.m || jv.cols() != sys.n)
    throw DimensionError("coupling_matrix: velocity Jacobian must be m x n");
  const Eigen::MatrixXd y = control_fields(sys, s.q);
  CouplingMatrix out;
  out.c = (jv * y).transpose();
  if (!out.c.allFinite())
    throw TransversalityError(
        "coupling matrix has non-finite entries at t = " + std::to_string(s.t),
        std::numeric_limits<double>::infinity());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(out.c);
  out.c_inv = lu.inverse();
  out.condition = detail::operator_inf_norm(out.c) *
                  detail::operator_inf_norm(out.c_inv);
  if (!out.c_inv.allFinite() || !std::isfinite(out.condition) ||
      out.condition > 1e8)
    throw TransversalityError(
        "constraint is not transversal to the control distribution at t = " +
            std::to_string(s.t) + " (coupling condition estimate " +
            std::to_string(out.condition) + ")",
        out.condition);
  return out;
}

/// Derivative of Phi along the unactuated dynamics:
///   G(Phi) = dPhi/dq . v + dPhi/dv . drift_acceleration.
inline Eigen::VectorXd drift_derivative(const MechanicalSystem& sys,
                                        const ConstraintSet& c,
                                        const State& s) {
  detail::check_dims(sys, s, "drift_derivative");
  return constraint_jac_q(c, s) * s.v +
         constraint_jac_v(c, s) * drift_acceleration(sys, s);
}

/// Affine constraint data: the manifold is the set of velocities with
/// S(q) (v - X(q)) = 0, i.e. v lies in X(q) plus the kernel of S(q).
struct AffineConstraintData {
  int m = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> coefficient;  ///< S(q), m x n
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> base_velocity; ///< X(q); optional (zero)
  /// optional analytic derivatives; both are needed for an analytic jac_q
  std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)>
      coefficient_derivative;  ///< entry i is dS/dq_i
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> base_jacobian; ///< dX/dq, n x n
};

inline ConstraintSet from_affine(const AffineConstraintData& data, int n) {
  if (data.m <= 0 || n <= 0 || !data.coefficient)
    throw ValidationError("from_affine: need m > 0, n > 0 and a coefficient "
                          "function");
  const int m = data.m;
  auto coeff = data.coefficient;
  auto base = data.base_velocity;
  auto coeff_at = [coeff, m, n](const Eigen::VectorXd& q) {
    Eigen::MatrixXd s = coeff(q);
    if (s.rows() != m || s.cols() != n)
      throw DimensionError("affine constraint coefficient must be m x n");
    return s;
  };
  auto shifted = [base, n](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
    if (!base) return v;
    Eigen::VectorXd x = base(q);
    if (x.size() != n)
      throw DimensionError("affine constraint base velocity must have size n");
    return Eigen::VectorXd(v - x);
  };

  ConstraintSet out;
  out.m = m;
  out.value = [coeff_at, shifted](const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& v) {
    return Eigen::VectorXd(coeff_at(q) * shifted(q, v));
  };
  out.jac_v = [coeff_at, m](const Eigen::VectorXd& q, const Eigen::VectorXd&) {
    Eigen::MatrixXd s = coeff_at(q);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.transpose());
    if (qr.rank() < m)
      throw RegularityError("affine constraint coefficient is rank deficient "
                            "(rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(m) + ")");
    return s;
  };
  if (data.coefficient_derivative && (data.base_jacobian || !data.base_velocity)) {
    auto dcoeff = data.coefficient_derivative;
    auto dbase = data.base_jacobian;
    out.jac_q = [coeff_at, shifted, dcoeff, dbase, m, n](
                    const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      const std::vector<Eigen::MatrixXd> ds = dcoeff(q);
      if (ds.size() != static_cast<size_t>(n))
        throw DimensionError("affine coefficient derivative needs one slice "
                             "per coordinate");
      const Eigen::VectorXd w = shifted(q, v);
      Eigen::MatrixXd jq(m, n);
      for (int i = 0; i < n; ++i)
        jq.col(i) = ds[static_cast<size_t>(i)] * w;
      if (dbase) jq -= coeff_at(q) * dbase(q);
      return jq;
    };
  }
  return out;
}

/// Position-level constraint lifted to the velocity level. `position` holds
/// the level function itself (zero velocity Jacobian); `velocity` holds its
/// total time derivative, which is the set the generic machinery operates on.
struct HolonomicConstraint {
  ConstraintSet position;
  ConstraintSet velocity;
};

inline HolonomicConstraint from_holonomic(
    int n, int m,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> level,
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> gradient = nullptr) {
  if (n <= 0 || m <= 0 || !level)
    throw ValidationError("from_holonomic: need n > 0, m > 0 and a level "
                          "function");
  auto grad_at = [level, gradient, n, m](const Eigen::VectorXd& q) {
    Eigen::MatrixXd g = gradient ? gradient(q) : fd_jacobian(level, q, m);
    if (g.rows() != m || g.cols() != n)
      throw DimensionError("holonomic gradient must be m x n");
    return g;
  };
  // Reject level functions that are degenerate everywhere (e.g. constants):
  // the gradient must reach full rank at at least one probe point.
  {
    std::mt19937 rng(0x9e3779b9u);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    bool ok = false;
    for (int probe = 0; probe < 8 && !ok; ++probe) {
      Eigen::VectorXd q(n);
      for (int i = 0; i < n; ++i) q[i] = dist(rng);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(grad_at(q));
      ok = qr.rank() == m;
    }
    if (!ok)
      throw RegularityError("holonomic level function has a rank-deficient "
                            "gradient at every probe point");
  }

  HolonomicConstraint out;
  out.position.m = m;
  out.position.value = [level, m](const Eigen::VectorXd& q,
                                  const Eigen::VectorXd&) {
    Eigen::VectorXd phi = level(q);
    if (phi.size() != m)
      throw DimensionError("holonomic level function must have size m");
    return phi;
  };
  out.position.jac_q = [grad_at](const Eigen::VectorXd& q,
                                 const Eigen::VectorXd&) { return grad_at(q); };
  out.position.jac_v = [n, m](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(m, n).eval();
  };
  out.velocity.m = m;
  out.velocity.value = [grad_at](const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v) {
    return Eigen::VectorXd(grad_at(q) * v);
  };
  out.velocity.jac_v = [grad_at](const Eigen::VectorXd& q,
                                 const Eigen::VectorXd&) { return grad_at(q); };
  // jac_q of the velocity level involves second derivatives of the level
  // function; left to the finite-difference fallback.
  return out;
}

/// Constraint with the opposite sign, defining the same zero set.
inline ConstraintSet negated(const ConstraintSet& c) {
  ConstraintSet out;
  out.m = c.m;
  auto value = c.value;
  out.value = [value](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
    return Eigen::VectorXd(-value(q, v));
  };
  if (c.jac_q) {
    auto jq = c.jac_q;
    out.jac_q = [jq](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      return Eigen::MatrixXd(-jq(q, v));
    };
  }
  if (c.jac_v) {
    auto jv = c.jac_v;
    out.jac_v = [jv](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      return Eigen::MatrixXd(-jv(q, v));
    };
  }
  return out;
}

}  // namespace vnhc
