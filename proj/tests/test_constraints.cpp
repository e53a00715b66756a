#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "oracle_helpers.hpp"
#include "vnhc/constraints.hpp"
#include "vnhc/scenarios.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;
using vnhc::State;

TEST_CASE("flocking alignment constraint at the canonical start",
          "[constraints]") {
  const auto bundle = vnhc::build_flocking();
  const VectorXd phi = vnhc::evaluate(bundle.constraint, bundle.initial);
  REQUIRE(phi.size() == 3);
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(0.6, 1e-15));
  CHECK_THAT(phi[1], Catch::Matchers::WithinAbs(0.6, 1e-15));
  CHECK_THAT(phi[2], Catch::Matchers::WithinAbs(-0.6, 1e-15));

  // Velocities proportional to particle 4's lie on the manifold.
  State aligned = bundle.initial;
  for (int b = 0; b < 3; ++b) {
    aligned.v[2 * b] = 0.5 * (b + 1) * aligned.v[6];
    aligned.v[2 * b + 1] = 0.5 * (b + 1) * aligned.v[7];
  }
  CHECK(vnhc::evaluate(bundle.constraint, aligned).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("vessel constraint at the canonical start", "[constraints]") {
  const auto bundle = vnhc::build_usv(vnhc::usv_northeast_params(),
                                      "usv-northeast");
  const VectorXd phi = vnhc::evaluate(bundle.constraint, bundle.initial);
  REQUIRE(phi.size() == 1);
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(1.8, 1e-12));
}

TEST_CASE("affine constraint value, base velocity conventions",
          "[constraints]") {
  // Same coefficient S = (sin t, -cos t, 0) but with the stream itself as
  // the base velocity: phi = sin t (xdot - C1) - cos t (ydot - C2).
  vnhc::AffineConstraintData affine;
  affine.m = 1;
  affine.coefficient = [](const VectorXd& q) {
    MatrixXd s(1, 3);
    s << std::sin(q[2]), -std::cos(q[2]), 0.0;
    return s;
  };
  affine.base_velocity = [](const VectorXd&) {
    VectorXd x(3);
    x << 1.0, 1.0, 0.0;
    return x;
  };
  const auto c = vnhc::from_affine(affine, 3);
  State s;
  s.q = Vector3d(1.0, 1.0, std::numbers::pi / 2);
  s.v = Vector3d(0.8, 0.5, 0.0);
  CHECK_THAT(vnhc::evaluate(c, s)[0],
             Catch::Matchers::WithinAbs(-0.2, 1e-12));

  // A velocity equal to the base velocity is on the manifold exactly.
  s.v = Vector3d(1.0, 1.0, -2.0);
  CHECK(vnhc::evaluate(c, s)[0] == 0.0);

  // Without a base velocity the constraint is linear in v.
  vnhc::AffineConstraintData linear = affine;
  linear.base_velocity = nullptr;
  const auto cl = vnhc::from_affine(linear, 3);
  s.v = Vector3d(0.8, 0.5, 0.0);
  CHECK_THAT(vnhc::evaluate(cl, s)[0], Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("coupling matrix of the flocking pair", "[constraints]") {
  const auto bundle = vnhc::build_flocking();
  const auto cm =
      vnhc::coupling_matrix(bundle.system, bundle.constraint, bundle.initial);
  REQUIRE(cm.c.rows() == 3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      CHECK_THAT(cm.c(a, b),
                 Catch::Matchers::WithinAbs(a == b ? 0.3 : 0.0, 1e-15));
  CHECK_THAT(cm.condition, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK((cm.c_inv * cm.c - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-10);

  // Against the closed form at random states.
  auto rng = oracle::make_rng(424242u);
  const std::array<double, 4> masses{2.0, 2.0, 2.0, 2.0};
  for (int trial = 0; trial < 500; ++trial) {
    auto [q, v] = oracle::random_flocking_state(rng);
    State s{q, v, 0.0};
    const auto got = vnhc::coupling_matrix(bundle.system, bundle.constraint, s);
    const Eigen::Matrix3d want = oracle::flocking::coupling(masses, v);
    CHECK((got.c - want).cwiseAbs().maxCoeff() <
          1e-14 * (1.0 + want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("coupling matrix of the vessel is the reciprocal mass",
          "[constraints]") {
  const auto bundle = vnhc::build_usv(vnhc::usv_northeast_params(),
                                      "usv-northeast");
  auto rng = oracle::make_rng(7u);
  for (int trial = 0; trial < 500; ++trial) {
    auto [q, v] = oracle::random_vessel_state(rng);
    State s{q, v, 0.0};
    const auto cm = vnhc::coupling_matrix(bundle.system, bundle.constraint, s);
    CHECK_THAT(cm.c(0, 0), Catch::Matchers::WithinAbs(0.1, 1e-15));
    CHECK_THAT(cm.condition, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("identity coupling for a unit toy system", "[constraints]") {
  vnhc::MechanicalSystem sys;
  sys.n = 2;
  sys.m = 1;
  sys.mass_metric = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(2, 2));
  };
  sys.constant_metric = true;
  sys.control_covectors = [](const VectorXd&) {
    MatrixXd f(2, 1);
    f << 1.0, 0.0;
    return f;
  };
  vnhc::ConstraintSet c;
  c.m = 1;
  c.value = [](const VectorXd&, const VectorXd& v) {
    return VectorXd(v.head(1));
  };
  State s{VectorXd::Zero(2), VectorXd::Zero(2), 0.0};
  const auto cm = vnhc::coupling_matrix(sys, c, s);
  CHECK(cm.c(0, 0) == 1.0);
  CHECK(cm.c_inv(0, 0) == 1.0);
  CHECK(cm.condition == 1.0);
}

TEST_CASE("ill-conditioned coupling raises with the estimate attached",
          "[constraints]") {
  vnhc::MechanicalSystem sys;
  sys.n = 2;
  sys.m = 2;
  sys.mass_metric = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(2, 2));
  };
  sys.constant_metric = true;
  sys.control_covectors = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(2, 2));
  };
  vnhc::ConstraintSet c;
  c.m = 2;
  const double eps = 1e-12;
  c.value = [eps](const VectorXd&, const VectorXd& v) {
    Vector2d phi(v[0], v[0] + eps * v[1]);
    return VectorXd(phi);
  };
  c.jac_v = [eps](const VectorXd&, const VectorXd&) {
    MatrixXd jv(2, 2);
    jv << 1.0, 0.0, 1.0, eps;
    return jv;
  };
  State s{VectorXd::Zero(2), VectorXd::Zero(2), 0.0};
  try {
    vnhc::coupling_matrix(sys, c, s);
    FAIL("expected a transversality failure");
  } catch (const vnhc::TransversalityError& e) {
    CHECK(e.kind() == vnhc::ErrorKind::transversality);
    CHECK(e.condition() > 1e8);
  }

  // An exactly singular coupling is caught as well.
  c.jac_v = [](const VectorXd&, const VectorXd&) {
    MatrixXd jv(2, 2);
    jv << 1.0, 0.0, 1.0, 0.0;
    return jv;
  };
  REQUIRE_THROWS_AS(vnhc::coupling_matrix(sys, c, s),
                    vnhc::TransversalityError);
}

TEST_CASE("constraint rate along the unactuated flow", "[constraints]") {
  const auto bundle = vnhc::build_flocking();
  const VectorXd g0 =
      vnhc::drift_derivative(bundle.system, bundle.constraint, bundle.initial);
  CHECK_THAT(g0[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  CHECK_THAT(g0[1], Catch::Matchers::WithinAbs(4.0, 1e-12));
  CHECK_THAT(g0[2], Catch::Matchers::WithinAbs(-16.0, 1e-12));

  auto rng = oracle::make_rng(2222u);
  for (int trial = 0; trial < 200; ++trial) {
    auto [q, v] = oracle::random_flocking_state(rng);
    State s{q, v, 0.0};
    const VectorXd got =
        vnhc::drift_derivative(bundle.system, bundle.constraint, s);
    const Vector3d want = oracle::flocking::drift_rate(10.0, v);
    CHECK(oracle::gap(got, VectorXd(want)) < 1e-12);

    // Independent cross-check: differentiate phi along a reference flow.
    const VectorXd fd = oracle::flow_derivative(
        [&](const VectorXd&, const VectorXd& vv) {
          return VectorXd(oracle::flocking::phi(vv));
        },
        [&](const VectorXd& qq, const VectorXd& vv) {
          return oracle::flocking::drift_accel(10.0, qq, vv);
        },
        q, v);
    CHECK(oracle::gap(got, fd) < 1e-7);
  }
}

TEST_CASE("vessel constraint rate along the unactuated flow",
          "[constraints]") {
  const auto bundle = vnhc::build_usv(vnhc::usv_northeast_params(),
                                      "usv-northeast");
  const VectorXd g0 =
      vnhc::drift_derivative(bundle.system, bundle.constraint, bundle.initial);
  CHECK_THAT(g0[0], Catch::Matchers::WithinAbs(0.0, 1e-15));

  oracle::vessel::Stream cur = [](double, double) {
    return Vector2d(1.0, 1.0);
  };
  oracle::vessel::StreamJacobian dc = [](double, double) {
    return Eigen::Matrix2d::Zero().eval();
  };
  auto rng = oracle::make_rng(33u);
  for (int trial = 0; trial < 200; ++trial) {
    auto [q, v] = oracle::random_vessel_state(rng);
    State s{q, v, 0.0};
    const VectorXd got =
        vnhc::drift_derivative(bundle.system, bundle.constraint, s);
    const VectorXd fd = oracle::flow_derivative(
        [&](const VectorXd& qq, const VectorXd& vv) {
          VectorXd out(1);
          out[0] = oracle::vessel::phi(cur, Vector3d(qq), Vector3d(vv));
          return out;
        },
        [&](const VectorXd& qq, const VectorXd& vv) {
          return oracle::vessel::drift_accel(10.0, cur, dc, qq, vv);
        },
        q, v);
    CHECK(oracle::gap(got, fd) < 1e-7);
  }
}

TEST_CASE("analytic constraint Jacobians agree with finite differences",
          "[constraints]") {
  auto check_bundle = [](const vnhc::ScenarioBundle& bundle, auto make_state,
                         int trials) {
    auto rng = oracle::make_rng(607u);
    vnhc::ConstraintSet numeric;
    numeric.m = bundle.constraint.m;
    numeric.value = bundle.constraint.value;
    for (int trial = 0; trial < trials; ++trial) {
      State s = make_state(rng);
      const MatrixXd jq = vnhc::constraint_jac_q(bundle.constraint, s);
      const MatrixXd jv = vnhc::constraint_jac_v(bundle.constraint, s);
      const MatrixXd jq_fd = vnhc::constraint_jac_q(numeric, s);
      const MatrixXd jv_fd = vnhc::constraint_jac_v(numeric, s);
      CHECK((jq - jq_fd).cwiseAbs().maxCoeff() <
            1e-6 * (1.0 + jq_fd.cwiseAbs().maxCoeff()));
      CHECK((jv - jv_fd).cwiseAbs().maxCoeff() <
            1e-6 * (1.0 + jv_fd.cwiseAbs().maxCoeff()));
    }
  };
  check_bundle(vnhc::build_flocking(),
               [](std::mt19937& rng) {
                 auto [q, v] = oracle::random_flocking_state(rng);
                 return State{q, v, 0.0};
               },
               200);
  check_bundle(vnhc::build_usv(vnhc::usv_anticyclone_params(),
                               "usv-anticyclone"),
               [](std::mt19937& rng) {
                 auto [q, v] = oracle::random_vessel_state(rng);
                 return State{q, v, 0.0};
               },
               200);
}

TEST_CASE("affine constraint configuration Jacobian, synthetic fields",
          "[constraints]") {
  vnhc::AffineConstraintData affine;
  affine.m = 2;
  affine.coefficient = [](const VectorXd& q) {
    MatrixXd s(2, 2);
    s << 1.0, q[0], 0.0, 1.0 + q[1] * q[1];
    return s;
  };
  affine.base_velocity = [](const VectorXd& q) {
    return VectorXd(Vector2d(std::sin(q[1]), q[0]));
  };
  affine.coefficient_derivative = [](const VectorXd& q) {
    std::vector<MatrixXd> ds(2, MatrixXd::Zero(2, 2));
    ds[0](0, 1) = 1.0;
    ds[1](1, 1) = 2.0 * q[1];
    return ds;
  };
  affine.base_jacobian = [](const VectorXd& q) {
    MatrixXd jx(2, 2);
    jx << 0.0, std::cos(q[1]), 1.0, 0.0;
    return jx;
  };
  const auto c = vnhc::from_affine(affine, 2);
  REQUIRE(static_cast<bool>(c.jac_q));

  vnhc::AffineConstraintData no_analytic = affine;
  no_analytic.coefficient_derivative = nullptr;
  const auto c_fd = vnhc::from_affine(no_analytic, 2);
  REQUIRE_FALSE(static_cast<bool>(c_fd.jac_q));

  auto rng = oracle::make_rng(11u);
  for (int trial = 0; trial < 100; ++trial) {
    State s{oracle::uniform_vector(rng, 2, -2.0, 2.0),
            oracle::uniform_vector(rng, 2, -2.0, 2.0), 0.0};
    const MatrixXd analytic = vnhc::constraint_jac_q(c, s);
    const MatrixXd numeric = vnhc::constraint_jac_q(c_fd, s);
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() <
          1e-6 * (1.0 + numeric.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("rank-deficient affine coefficient is rejected", "[constraints]") {
  vnhc::AffineConstraintData affine;
  affine.m = 2;
  affine.coefficient = [](const VectorXd&) {
    MatrixXd s(2, 2);
    s << 1.0, 1.0, 2.0, 2.0;
    return s;
  };
  const auto c = vnhc::from_affine(affine, 2);
  State s{VectorXd::Zero(2), VectorXd::Zero(2), 0.0};
  REQUIRE_THROWS_AS(vnhc::constraint_jac_v(c, s), vnhc::RegularityError);

  REQUIRE_THROWS_AS(vnhc::from_affine(vnhc::AffineConstraintData{}, 2),
                    vnhc::ValidationError);
}

TEST_CASE("holonomic constraint lifts to the velocity level",
          "[constraints]") {
  const auto hc = vnhc::from_holonomic(2, 1, [](const VectorXd& q) {
    VectorXd out(1);
    out[0] = q[0] * q[0] + q[1] * q[1] - 1.0;
    return out;
  });
  State s{Vector2d(1.0, 0.0), Vector2d(0.0, 2.0), 0.0};
  CHECK_THAT(vnhc::evaluate(hc.position, s)[0],
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(vnhc::evaluate(hc.velocity, s)[0],
             Catch::Matchers::WithinAbs(0.0, 1e-9));
  // Off the circle, and with a non-tangent velocity.
  State off{Vector2d(2.0, 0.0), Vector2d(3.0, 0.0), 0.0};
  CHECK_THAT(vnhc::evaluate(hc.position, off)[0],
             Catch::Matchers::WithinAbs(3.0, 1e-12));
  CHECK_THAT(vnhc::evaluate(hc.velocity, off)[0],
             Catch::Matchers::WithinAbs(12.0, 1e-6));
  // The position level does not depend on velocity at all.
  CHECK(vnhc::constraint_jac_v(hc.position, off).isZero(0.0));

  REQUIRE_THROWS_AS(vnhc::from_holonomic(2, 1,
                                         [](const VectorXd&) {
                                           VectorXd out(1);
                                           out[0] = 4.0;
                                           return out;
                                         }),
                    vnhc::RegularityError);
}

TEST_CASE("negated constraint has the same zero set", "[constraints]") {
  const auto bundle = vnhc::build_flocking();
  const auto neg = vnhc::negated(bundle.constraint);
  auto rng = oracle::make_rng(88u);
  for (int trial = 0; trial < 50; ++trial) {
    auto [q, v] = oracle::random_flocking_state(rng);
    State s{q, v, 0.0};
    CHECK((vnhc::evaluate(neg, s) + vnhc::evaluate(bundle.constraint, s))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((vnhc::constraint_jac_v(neg, s) +
           vnhc::constraint_jac_v(bundle.constraint, s))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("constraint size mismatches are reported", "[constraints]") {
  vnhc::ConstraintSet c;
  c.m = 2;
  c.value = [](const VectorXd&, const VectorXd& v) {
    return VectorXd(v.head(1));
  };
  State s{VectorXd::Zero(2), VectorXd::Zero(2), 0.0};
  REQUIRE_THROWS_AS(vnhc::evaluate(c, s), vnhc::DimensionError);
}
