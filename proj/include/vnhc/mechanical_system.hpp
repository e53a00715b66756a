#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vnhc/errors.hpp"
#include "vnhc/finite_diff.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

using MetricFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using MetricDerivativeFn =
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)>;
using PotentialFn = std::function<double(const Eigen::VectorXd&)>;
using PotentialGradientFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ExternalForceFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                      const Eigen::VectorXd&)>;
using ControlCovectorsFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Forced mechanical system on Q = R^n with a kinetic-energy metric, a
/// potential, an external force co-vector and m control co-vector fields.
///
/// Only `mass_metric` and `control_covectors` are required. Optional analytic
/// callbacks (metric derivative, potential gradient) replace the central
/// finite-difference fallbacks when supplied. `constant_metric` declares that
/// the metric does not depend on q, which makes the connection coefficients
/// identically zero.
struct MechanicalSystem {
  int n = 0;  ///< configuration dimension
  int m = 0;  ///< number of control inputs, 0 < m <= n
  MetricFn mass_metric;
  MetricDerivativeFn metric_derivative;  ///< optional; entry i is dG/dq_i
  bool constant_metric = false;
  PotentialFn potential;                  ///< optional; zero when absent
  PotentialGradientFn potential_gradient; ///< optional; FD of potential
  ExternalForceFn external_force;         ///< optional co-vector F0(q, v)
  ControlCovectorsFn control_covectors;   ///< n x m, column a is f^a
};

namespace detail {

inline void check_dims(const MechanicalSystem& sys, const State& s,
                       const char* where) {
  if (sys.n <= 0 || sys.m <= 0 || sys.m > sys.n)
    throw ValidationError(std::string(where) +
                          ": system dimensions must satisfy 0 < m <= n");
  if (s.q.size() != sys.n || s.v.size() != sys.n)
    throw DimensionError(std::string(where) + ": state has q size " +
                         std::to_string(s.q.size()) + ", v size " +
                         std::to_string(s.v.size()) + ", expected " +
                         std::to_string(sys.n));
}

}  // namespace detail

/// Mass metric at q, symmetrized, with a factorization that certifies
/// positive definiteness. All metric solves go through this factor.
struct MetricFactor {
  Eigen::MatrixXd g;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
};

inline MetricFactor metric_at(const MechanicalSystem& sys,
                              const Eigen::VectorXd& q) {
  if (q.size() != sys.n)
    throw DimensionError("metric_at: configuration has size " +
                         std::to_string(q.size()) + ", expected " +
                         std::to_string(sys.n));
  Eigen::MatrixXd g = sys.mass_metric(q);
  if (g.rows() != sys.n || g.cols() != sys.n)
    throw DimensionError("metric_at: mass_metric returned a " +
                         std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + " matrix");
  g = (0.5 * (g + g.transpose())).eval();
  if (!g.allFinite())
    throw MetricError("mass metric has non-finite entries at the evaluated "
                      "configuration");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw MetricError(
        "mass metric is not positive definite at the evaluated configuration");
  return {std::move(g), std::move(ldlt)};
}

/// Connection coefficients of the metric at a fixed configuration.
/// `upper[j](i, k)` is the symbol with upper index j and lower indices i, k.
struct ChristoffelSymbols {
  std::vector<Eigen::MatrixXd> upper;
  bool zero = false;  ///< true when every symbol vanishes exactly

  /// Gamma(v, v), the quadratic form appearing in the geodesic equation.
  Eigen::VectorXd quadratic(const Eigen::VectorXd& v) const {
    const Eigen::Index n = static_cast<Eigen::Index>(upper.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (zero) return out;
    for (Eigen::Index j = 0; j < n; ++j)
      out[j] = v.dot(upper[static_cast<size_t>(j)] * v);
    return out;
  }
};

namespace detail {

inline ChristoffelSymbols christoffel_with_factor(const MechanicalSystem& sys,
                                                  const Eigen::VectorXd& q,
                                                  const MetricFactor& mf) {
  const int n = sys.n;
  ChristoffelSymbols out;
  out.upper.assign(static_cast<size_t>(n), Eigen::MatrixXd::Zero(n, n));
  if (sys.constant_metric) {
    out.zero = true;
    return out;
  }
  std::vector<Eigen::MatrixXd> dg =
      sys.metric_derivative ? sys.metric_derivative(q)
                            : fd_matrix_derivative(sys.mass_metric, q);
  if (dg.size() != static_cast<size_t>(n))
    throw DimensionError("christoffel: metric derivative must have one slice "
                         "per coordinate");
  double magnitude = 0.0;
  for (auto& d : dg) {
    if (d.rows() != n || d.cols() != n)
      throw DimensionError("christoffel: metric derivative slice has wrong "
                           "shape");
    d = (0.5 * (d + d.transpose())).eval();
    magnitude += d.cwiseAbs().maxCoeff();
  }
  if (magnitude == 0.0) {
    out.zero = true;
    return out;
  }
  // Lowered symbols [i k, l] = (dG_lk/dq_i + dG_li/dq_k - dG_ik/dq_l) / 2,
  // raised by a metric solve, exploiting symmetry in (i, k).
  Eigen::VectorXd lowered(n);
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      for (int l = 0; l < n; ++l)
        lowered[l] = 0.5 * (dg[static_cast<size_t>(i)](l, k) +
                            dg[static_cast<size_t>(k)](l, i) -
                            dg[static_cast<size_t>(l)](i, k));
      const Eigen::VectorXd raised = mf.ldlt.solve(lowered);
      for (int j = 0; j < n; ++j) {
        out.upper[static_cast<size_t>(j)](i, k) = raised[j];
        out.upper[static_cast<size_t>(j)](k, i) = raised[j];
      }
    }
  }
  return out;
}

}  // namespace detail

inline ChristoffelSymbols christoffel(const MechanicalSystem& sys,
                                      const Eigen::VectorXd& q) {
  return detail::christoffel_with_factor(sys, q, metric_at(sys, q));
}

/// Differential of the potential, analytic when available.
inline Eigen::VectorXd potential_differential(const MechanicalSystem& sys,
                                              const Eigen::VectorXd& q) {
  if (sys.potential_gradient) return sys.potential_gradient(q);
  if (!sys.potential) return Eigen::VectorXd::Zero(sys.n);
  return fd_gradient(sys.potential, q);
}

/// Acceleration of the unactuated system:
///   a = -Gamma(v, v) - grad V + G^{-1} F0.
inline Eigen::VectorXd drift_acceleration(const MechanicalSystem& sys,
                                          const State& s) {
  detail::check_dims(sys, s, "drift_acceleration");
  const MetricFactor mf = metric_at(sys, s.q);
  Eigen::VectorXd covector = -potential_differential(sys, s.q);
  if (sys.external_force) {
    const Eigen::VectorXd f0 = sys.external_force(s.q, s.v);
    if (f0.size() != sys.n)
      throw DimensionError("drift_acceleration: external force has size " +
                           std::to_string(f0.size()));
    covector += f0;
  }
  Eigen::VectorXd a = mf.ldlt.solve(covector);
  if (!sys.constant_metric)
    a -= detail::christoffel_with_factor(sys, s.q, mf).quadratic(s.v);
  return a;
}

/// Control vector fields Y^a = G^{-1} f^a, stacked as the columns of an
/// n x m matrix. Raises when the inputs are linearly dependent at q.
inline Eigen::MatrixXd control_fields(const MechanicalSystem& sys,
                                      const Eigen::VectorXd& q) {
  const MetricFactor mf = metric_at(sys, q);
  Eigen::MatrixXd f = sys.control_covectors(q);
  if (f.rows() != sys.n || f.cols() != sys.m)
    throw DimensionError("control_fields: control co-vectors must be n x m");
  Eigen::MatrixXd y = mf.ldlt.solve(f);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(y);
  if (qr.rank() < sys.m)
    throw DependentInputsError(
        "control co-vectors are linearly dependent at the evaluated "
        "configuration (rank " +
        std::to_string(qr.rank()) + " < " + std::to_string(sys.m) + ")");
  return y;
}

/// Acceleration under the control input u: drift plus u_a Y^a.
inline Eigen::VectorXd controlled_acceleration(const MechanicalSystem& sys,
                                               const State& s,
                                               const Eigen::VectorXd& u) {
  detail::check_dims(sys, s, "controlled_acceleration");
  if (u.size() != sys.m)
    throw DimensionError("controlled_acceleration: control input has size " +
                         std::to_string(u.size()) + ", expected " +
                         std::to_string(sys.m));
  return drift_acceleration(sys, s) + control_fields(sys, s.q) * u;
}

/// Total mechanical energy, kinetic plus potential.
inline double energy(const MechanicalSystem& sys, const State& s) {
  detail::check_dims(sys, s, "energy");
  const MetricFactor mf = metric_at(sys, s.q);
  const double kinetic = 0.5 * s.v.dot(mf.g * s.v);
  return kinetic + (sys.potential ? sys.potential(s.q) : 0.0);
}

}  // namespace vnhc
