#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "vnhc/constraints.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/finite_diff.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

/// Ready-to-simulate case study: system, constraint, initial state and the
/// run lengths the study is normally exercised at.
struct ScenarioBundle {
  std::string name;
  MechanicalSystem system;
  ConstraintSet constraint;
  State initial;
  double default_dt = 0.01;
  double default_t_final = 100.0;
};

// ---------------------------------------------------------------------------
// Flocking: four planar particles under gravity. Particles 1..3 are actuated
// along (1, 1); particle 4 is free. The constraint aligns each actuated
// particle's velocity with particle 4's:
//   phi^b = xdot_4 * zdot_b - xdot_b * zdot_4,  b = 1..3.
// Coordinates are ordered (x1, z1, x2, z2, x3, z3, x4, z4).
// ---------------------------------------------------------------------------

struct FlockingParams {
  std::array<double, 4> masses{2.0, 2.0, 2.0, 2.0};
  double gravity = 10.0;
  Eigen::VectorXd q0;
  Eigen::VectorXd v0;

  FlockingParams() {
    q0.resize(8);
    q0 << 10, 56, 30, 100, 50, 100, 10, 90;
    v0.resize(8);
    v0 << 0.5, 1, 1, 1, -1, -1, 0.6, 0;
  }
};

inline ScenarioBundle build_flocking(const FlockingParams& p = {}) {
  for (double m : p.masses)
    if (!(m > 0.0))
      throw ValidationError("flocking: particle masses must be positive");
  if (p.q0.size() != 8 || p.v0.size() != 8)
    throw DimensionError("flocking: q0 and v0 must have size 8");
  if (p.v0[6] == p.v0[7])
    throw ValidationError("flocking: the initial state needs xdot_4 != "
                          "zdot_4, otherwise the coupling matrix is singular "
                          "from the start");

  Eigen::VectorXd diag(8);
  for (int i = 0; i < 4; ++i) diag[2 * i] = diag[2 * i + 1] = p.masses[i];
  const Eigen::MatrixXd metric = diag.asDiagonal();
  const double g = p.gravity;
  Eigen::VectorXd dv = Eigen::VectorXd::Zero(8);
  for (int i = 0; i < 4; ++i) dv[2 * i + 1] = p.masses[i] * g;
  Eigen::MatrixXd covectors = Eigen::MatrixXd::Zero(8, 3);
  for (int a = 0; a < 3; ++a) {
    covectors(2 * a, a) = 1.0;      // dx_a
    covectors(2 * a + 1, a) = 1.0;  // dz_a
  }

  MechanicalSystem sys;
  sys.n = 8;
  sys.m = 3;
  sys.mass_metric = [metric](const Eigen::VectorXd&) { return metric; };
  sys.constant_metric = true;
  auto masses = p.masses;
  sys.potential = [masses, g](const Eigen::VectorXd& q) {
    double V = 0.0;
    for (int i = 0; i < 4; ++i) V += masses[static_cast<size_t>(i)] * g * q[2 * i + 1];
    return V;
  };
  sys.potential_gradient = [dv](const Eigen::VectorXd&) { return dv; };
  sys.control_covectors = [covectors](const Eigen::VectorXd&) {
    return covectors;
  };

  ConstraintSet c;
  c.m = 3;
  c.value = [](const Eigen::VectorXd&, const Eigen::VectorXd& v) {
    Eigen::VectorXd phi(3);
    for (int b = 0; b < 3; ++b)
      phi[b] = v[6] * v[2 * b + 1] - v[2 * b] * v[7];
    return phi;
  };
  c.jac_q = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(3, 8).eval();
  };
  c.jac_v = [](const Eigen::VectorXd&, const Eigen::VectorXd& v) {
    Eigen::MatrixXd jv = Eigen::MatrixXd::Zero(3, 8);
    for (int b = 0; b < 3; ++b) {
      jv(b, 2 * b) = -v[7];      // d/d xdot_b
      jv(b, 2 * b + 1) = v[6];   // d/d zdot_b
      jv(b, 6) = v[2 * b + 1];   // d/d xdot_4
      jv(b, 7) = -v[2 * b];      // d/d zdot_4
    }
    return jv.eval();
  };

  ScenarioBundle bundle;
  bundle.name = "flocking";
  bundle.system = std::move(sys);
  bundle.constraint = std::move(c);
  bundle.initial = {p.q0, p.v0, 0.0};
  bundle.default_dt = 0.01;
  bundle.default_t_final = 500.0;
  return bundle;
}

// ---------------------------------------------------------------------------
// Surface vessel in a planar stream. Configuration (x, y, theta), mass m and
// yaw inertia I; one input combining surge force and yaw torque through the
// co-vector sin(theta) dx - cos(theta) dy + dtheta. The stream C(x, y) enters
// twice: as the external force that makes the stream-following kinematics
// natural for the unactuated vessel, and as the offset of the affine
// constraint
//   phi = sin(theta) xdot - cos(theta) ydot + sin(theta) C1 - cos(theta) C2.
// ---------------------------------------------------------------------------

struct CurrentField {
  std::function<Eigen::Vector2d(double, double)> value;
  /// entries (i, j) = d C_i / d coordinate_j; optional, FD when absent
  std::function<Eigen::Matrix2d(double, double)> jacobian;
};

inline CurrentField constant_current(double c1, double c2) {
  return {[c1, c2](double, double) { return Eigen::Vector2d(c1, c2); },
          [](double, double) { return Eigen::Matrix2d::Zero().eval(); }};
}

/// Rotational stream (y, -x + y) used by the anticyclone preset.
inline CurrentField anticyclone_current() {
  return {[](double x, double y) { return Eigen::Vector2d(y, -x + y); },
          [](double, double) {
            Eigen::Matrix2d j;
            j << 0, 1, -1, 1;
            return j;
          }};
}

struct UsvParams {
  double mass = 10.0;
  double inertia = 1.5;
  CurrentField current = constant_current(1.0, 1.0);
  Eigen::Vector3d q0{1.0, 1.0, std::numbers::pi / 2};
  Eigen::Vector3d v0{0.8, 0.5, 0.0};
};

inline UsvParams usv_northeast_params() { return UsvParams{}; }

inline UsvParams usv_anticyclone_params() {
  UsvParams p;
  p.mass = 20.0;
  p.inertia = 4.0;
  p.current = anticyclone_current();
  p.v0 = Eigen::Vector3d(1.0, 1.0, 0.0);
  return p;
}

namespace detail {

inline CurrentField with_jacobian(const CurrentField& c) {
  if (c.jacobian) return c;
  CurrentField out = c;
  auto value = c.value;
  out.jacobian = [value](double x, double y) {
    Eigen::VectorXd p(2);
    p << x, y;
    Eigen::MatrixXd j = fd_jacobian(
        [value](const Eigen::VectorXd& q) {
          return Eigen::VectorXd(value(q[0], q[1]));
        },
        p, 2);
    return Eigen::Matrix2d(j);
  };
  return out;
}

/// Velocity of a vessel that follows the stream component transverse to its
/// heading: (sin^2 C1 - sin cos C2, -sin cos C1 + cos^2 C2).
inline Eigen::Vector2d stream_following_velocity(const CurrentField& cur,
                                                 const Eigen::Vector3d& q) {
  const double s = std::sin(q[2]), c = std::cos(q[2]);
  const Eigen::Vector2d C = cur.value(q[0], q[1]);
  return {s * s * C[0] - s * c * C[1], -s * c * C[0] + c * c * C[1]};
}

}  // namespace detail

inline ScenarioBundle build_usv(const UsvParams& params,
                                const std::string& name = "usv") {
  if (!(params.mass > 0.0) || !(params.inertia > 0.0))
    throw ValidationError("usv: mass and inertia must be positive");
  if (!params.current.value)
    throw ValidationError("usv: current field needs a value function");
  const UsvParams p = [&] {
    UsvParams q = params;
    q.current = detail::with_jacobian(params.current);
    return q;
  }();
  {
    // The analytic stream Jacobian must be consistent with the stream itself.
    const CurrentField fd = detail::with_jacobian({p.current.value, nullptr});
    const Eigen::Matrix2d ja = p.current.jacobian(p.q0[0], p.q0[1]);
    const Eigen::Matrix2d jn = fd.jacobian(p.q0[0], p.q0[1]);
    if (((ja - jn).cwiseAbs().maxCoeff()) >
        1e-6 * (1.0 + ja.cwiseAbs().maxCoeff()))
      throw ValidationError("usv: current jacobian disagrees with finite "
                            "differences of the current value");
  }

  const double m = p.mass, inertia = p.inertia;
  const CurrentField cur = p.current;

  MechanicalSystem sys;
  sys.n = 3;
  sys.m = 1;
  Eigen::Matrix3d metric = Eigen::Vector3d(m, m, inertia).asDiagonal();
  sys.mass_metric = [metric](const Eigen::VectorXd&) {
    return Eigen::MatrixXd(metric);
  };
  sys.constant_metric = true;
  // Stream reaction forces: m times the total derivative of the
  // stream-following velocity along (xdot, ydot, thetadot).
  sys.external_force = [cur, m](const Eigen::VectorXd& q,
                                const Eigen::VectorXd& v) {
    const double s = std::sin(q[2]), c = std::cos(q[2]);
    const Eigen::Vector2d C = cur.value(q[0], q[1]);
    const Eigen::Matrix2d dC = cur.jacobian(q[0], q[1]);
    const double planar1 = dC(0, 0) * v[0] + dC(0, 1) * v[1];
    const double planar2 = dC(1, 0) * v[0] + dC(1, 1) * v[1];
    const double w1 = m * (s * s * planar1 - s * c * planar2 +
                           (2 * s * c * C[0] - (c * c - s * s) * C[1]) * v[2]);
    const double w2 = m * (-s * c * planar1 + c * c * planar2 +
                           (-(c * c - s * s) * C[0] - 2 * s * c * C[1]) * v[2]);
    Eigen::VectorXd f(3);
    f << w1, w2, 0.0;
    return f;
  };
  sys.control_covectors = [](const Eigen::VectorXd& q) {
    Eigen::MatrixXd f(3, 1);
    f << std::sin(q[2]), -std::cos(q[2]), 1.0;
    return f;
  };

  AffineConstraintData affine;
  affine.m = 1;
  affine.coefficient = [](const Eigen::VectorXd& q) {
    Eigen::MatrixXd s(1, 3);
    s << std::sin(q[2]), -std::cos(q[2]), 0.0;
    return s;
  };
  // Offset is the negated stream, so the constraint reads
  // phi = sin xdot - cos ydot + sin C1 - cos C2.
  affine.base_velocity = [cur](const Eigen::VectorXd& q) {
    const Eigen::Vector2d C = cur.value(q[0], q[1]);
    Eigen::VectorXd x(3);
    x << -C[0], -C[1], 0.0;
    return x;
  };
  affine.coefficient_derivative = [](const Eigen::VectorXd& q) {
    std::vector<Eigen::MatrixXd> ds(3, Eigen::MatrixXd::Zero(1, 3));
    ds[2](0, 0) = std::cos(q[2]);
    ds[2](0, 1) = std::sin(q[2]);
    return ds;
  };
  affine.base_jacobian = [cur](const Eigen::VectorXd& q) {
    const Eigen::Matrix2d dC = cur.jacobian(q[0], q[1]);
    Eigen::MatrixXd jx = Eigen::MatrixXd::Zero(3, 3);
    jx.topLeftCorner<2, 2>() = -dC;
    return jx;
  };

  ScenarioBundle bundle;
  bundle.name = name;
  bundle.system = std::move(sys);
  bundle.constraint = from_affine(affine, 3);
  bundle.initial = {p.q0, p.v0, 0.0};
  bundle.default_dt = 0.01;
  bundle.default_t_final = 100.0;
  return bundle;
}

/// Residual of the stream-following kinematics (xdot, ydot) relative to the
/// current; zero along unactuated trajectories started at the
/// stream-following velocity.
inline Eigen::Vector2d kinematic_check(const UsvParams& p, const State& s) {
  const CurrentField cur = detail::with_jacobian(p.current);
  const Eigen::Vector2d kin =
      detail::stream_following_velocity(cur, Eigen::Vector3d(s.q));
  return {s.v[0] - kin[0], s.v[1] - kin[1]};
}

/// Stream-following initial velocity for the unactuated vessel (thetadot 0).
inline Eigen::Vector3d kinematic_velocity(const UsvParams& p,
                                          const Eigen::Vector3d& q) {
  const CurrentField cur = detail::with_jacobian(p.current);
  const Eigen::Vector2d kin = detail::stream_following_velocity(cur, q);
  return {kin[0], kin[1], 0.0};
}

// ---------------------------------------------------------------------------
// Presets addressable by name (CLI and config files use these).
// ---------------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
  return {"flocking", "usv-northeast", "usv-anticyclone"};
}

inline ScenarioBundle build_preset(const std::string& name) {
  if (name == "flocking") return build_flocking();
  if (name == "usv-northeast")
    return build_usv(usv_northeast_params(), "usv-northeast");
  if (name == "usv-anticyclone")
    return build_usv(usv_anticyclone_params(), "usv-anticyclone");
  throw ValidationError("unknown scenario '" + name +
                        "' (expected flocking, usv-northeast or "
                        "usv-anticyclone)");
}

}  // namespace vnhc
