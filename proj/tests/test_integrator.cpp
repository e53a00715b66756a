#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "oracle_helpers.hpp"
#include "vnhc/integrate.hpp"
#include "vnhc/scenarios.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using vnhc::State;

namespace {

vnhc::MechanicalSystem unit_mass_line(
    vnhc::ExternalForceFn force = nullptr) {
  vnhc::MechanicalSystem sys;
  sys.n = 1;
  sys.m = 1;
  sys.mass_metric = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(1, 1));
  };
  sys.constant_metric = true;
  sys.external_force = std::move(force);
  sys.control_covectors = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(1, 1));
  };
  return sys;
}

State line_state(double q, double v) {
  return {VectorXd::Constant(1, q), VectorXd::Constant(1, v), 0.0};
}

}  // namespace

TEST_CASE("free particle steps are linear in time", "[integrator]") {
  vnhc::AccelerationFn accel = [](const State& s) {
    return VectorXd(VectorXd::Zero(s.q.size()));
  };
  const State s0 = line_state(2.0, -3.0);
  const State s1 = vnhc::rk4_step(accel, s0, 0.25);
  CHECK_THAT(s1.q[0], Catch::Matchers::WithinAbs(2.0 - 3.0 * 0.25, 1e-14));
  CHECK(s1.v[0] == -3.0);
  CHECK(s1.t == 0.25);
}

TEST_CASE("viscous decay after one step", "[integrator]") {
  // vdot = -v integrated over dt = 0.1: the classical fourth-order value.
  const auto sys = unit_mass_line([](const VectorXd&, const VectorXd& v) {
    return VectorXd(-v);
  });
  vnhc::AccelerationFn accel = [&](const State& s) {
    return vnhc::drift_acceleration(sys, s);
  };
  const State s1 = vnhc::rk4_step(accel, line_state(0.0, 1.0), 0.1);
  CHECK_THAT(s1.v[0], Catch::Matchers::WithinAbs(0.904837418, 1e-7));
}

TEST_CASE("step size must be positive", "[integrator]") {
  vnhc::AccelerationFn accel = [](const State& s) {
    return VectorXd(VectorXd::Zero(s.q.size()));
  };
  REQUIRE_THROWS_AS(vnhc::rk4_step(accel, line_state(0.0, 0.0), 0.0),
                    vnhc::ValidationError);
  REQUIRE_THROWS_AS(vnhc::rk4_step(accel, line_state(0.0, 0.0), -0.1),
                    vnhc::ValidationError);
}

TEST_CASE("non-finite accelerations abort the step", "[integrator]") {
  vnhc::AccelerationFn accel = [](const State& s) {
    return VectorXd(VectorXd::Constant(
        s.q.size(), std::numeric_limits<double>::quiet_NaN()));
  };
  try {
    vnhc::rk4_step(accel, line_state(0.0, 0.0), 0.1);
    FAIL("expected an integration failure");
  } catch (const vnhc::IntegrationError& e) {
    CHECK(e.kind() == vnhc::ErrorKind::blowup);
    CHECK(std::isfinite(e.time()));
  }
}

TEST_CASE("stepper arithmetic matches a stacked reference", "[integrator]") {
  // Same vector field on both sides; only the stepper differs.
  auto accel_closed = [](const VectorXd& q, const VectorXd& v) {
    VectorXd a(2);
    a[0] = q[0] * v[1] * v[1];
    a[1] = -2.0 * v[0] * v[1] / q[0];
    return a;
  };
  vnhc::AccelerationFn accel = [&](const State& s) {
    return accel_closed(s.q, s.v);
  };
  oracle::FlatOde ode = [&](double, const VectorXd& y) {
    VectorXd dy(4);
    dy.head(2) = y.tail(2);
    dy.tail(2) = accel_closed(y.head(2), y.tail(2));
    return dy;
  };
  auto rng = oracle::make_rng(4242u);
  for (int trial = 0; trial < 100; ++trial) {
    State s;
    s.q = oracle::uniform_vector(rng, 2, 0.5, 3.0);
    s.v = oracle::uniform_vector(rng, 2, -2.0, 2.0);
    VectorXd y0(4);
    y0 << s.q, s.v;
    const State got = vnhc::rk4_step(accel, s, 0.05);
    const VectorXd want = oracle::rk4_flat_step(ode, 0.0, y0, 0.05);
    VectorXd packed(4);
    packed << got.q, got.v;
    CHECK((packed - want).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("closed-loop step error shrinks at fourth order",
          "[integrator]") {
  const auto bundle = vnhc::build_flocking();
  const auto k = vnhc::uniform_gains(3);
  const double horizon = 0.01;
  const auto gap_to_reference = [&](double dt) {
    const auto run = vnhc::simulate(bundle.system, bundle.constraint, k,
                                    bundle.initial, dt, horizon);
    const auto ref = vnhc::simulate(bundle.system, bundle.constraint, k,
                                    bundle.initial, 1e-5, horizon);
    const State& a = run.states.back();
    const State& b = ref.states.back();
    return std::max((a.q - b.q).cwiseAbs().maxCoeff(),
                    (a.v - b.v).cwiseAbs().maxCoeff());
  };
  const double e1 = gap_to_reference(0.01);
  const double e2 = gap_to_reference(0.005);
  CHECK(e1 < 1e-5);
  CHECK(e1 / e2 > 10.0);
  CHECK(e1 / e2 < 30.0);
}

TEST_CASE("sampling grid and record shapes", "[integrator]") {
  const auto bundle = vnhc::build_flocking();
  const auto tr = vnhc::simulate(bundle.system, bundle.constraint,
                                 vnhc::uniform_gains(3), bundle.initial, 0.01,
                                 5.0);
  REQUIRE(tr.samples() == 501);
  REQUIRE(tr.times.size() == 501);
  REQUIRE(tr.controls.size() == 501);
  REQUIRE(tr.constraint_values.size() == 501);
  REQUIRE(tr.energies.size() == 501);
  for (size_t i = 0; i < tr.samples(); ++i) {
    CHECK(tr.times[i] == static_cast<double>(i) * 0.01);
    CHECK(tr.states[i].t == tr.times[i]);
    CHECK(tr.constraint_values[i].size() == 3);
    CHECK(tr.controls[i].size() == 3);
  }
  // The first control sample is the feedback at the initial state.
  CHECK_THAT(tr.controls[0][0],
             Catch::Matchers::WithinRel(2.0 / 0.6 * 0.4, 1e-12));

  // Unactuated run: zero controls, no constraint values.
  const auto drift = vnhc::simulate_with_law(bundle.system, nullptr, nullptr,
                                             bundle.initial, 0.01, 0.1);
  for (const auto& u : drift.controls) CHECK(u.isZero(0.0));
  for (const auto& phi : drift.constraint_values) CHECK(phi.size() == 0);

  const auto single = vnhc::simulate_with_law(bundle.system, nullptr, nullptr,
                                              bundle.initial, 0.01, 0.0);
  CHECK(single.samples() == 1);
}

TEST_CASE("horizon must be a multiple of the step", "[integrator]") {
  const auto bundle = vnhc::build_flocking();
  REQUIRE_THROWS_AS(
      vnhc::simulate(bundle.system, bundle.constraint, vnhc::uniform_gains(3),
                     bundle.initial, 0.3, 1.0),
      vnhc::ValidationError);
  REQUIRE_THROWS_AS(
      vnhc::simulate(bundle.system, bundle.constraint, vnhc::uniform_gains(3),
                     bundle.initial, 0.01, -1.0),
      vnhc::ValidationError);
}

TEST_CASE("divergent runs hit the blow-up guard", "[integrator]") {
  // vdot = +v doubles every 0.7 time units; past ~28 time units the state
  // exceeds 1e12.
  const auto sys = unit_mass_line([](const VectorXd&, const VectorXd& v) {
    return VectorXd(v);
  });
  try {
    vnhc::simulate_with_law(sys, nullptr, nullptr, line_state(0.0, 1.0), 0.5,
                            100.0);
    FAIL("expected the blow-up guard to fire");
  } catch (const vnhc::IntegrationError& e) {
    CHECK(e.kind() == vnhc::ErrorKind::blowup);
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 100.0);
  }
}

TEST_CASE("decay fit recovers a synthetic rate", "[integrator]") {
  vnhc::TrajectoryRecord tr;
  tr.dt = 0.1;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    tr.times.push_back(t);
    tr.states.push_back(line_state(0.0, 0.0));
    tr.controls.push_back(VectorXd::Zero(1));
    VectorXd phi(2);
    phi << 2.0 * std::exp(-3.0 * t), -0.5 * std::exp(-0.25 * t);
    tr.constraint_values.push_back(phi);
    tr.energies.push_back(0.0);
  }
  CHECK_THAT(vnhc::decay_rate(tr, 0), Catch::Matchers::WithinAbs(3.0, 1e-12));
  CHECK_THAT(vnhc::decay_rate(tr, 1),
             Catch::Matchers::WithinAbs(0.25, 1e-12));
  // Negative component: the fit works on |phi|.
  CHECK_THAT(vnhc::decay_rate(tr, 1, vnhc::FitWindow{2.0, 8.0}),
             Catch::Matchers::WithinAbs(0.25, 1e-12));

  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 2), vnhc::FitWindowError);
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, -1), vnhc::FitWindowError);
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 0, vnhc::FitWindow{5.0, 5.0}),
                    vnhc::FitWindowError);
  // Only the final sample lies inside this window.
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 1, vnhc::FitWindow{9.95, 10.0}),
                    vnhc::FitWindowError);
  // The fast component has sunk below the noise floor by t = 9.9.
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 0, vnhc::FitWindow{9.9, 10.0}),
                    vnhc::FitWindowError);
}

TEST_CASE("decay fit truncates at the noise floor", "[integrator]") {
  vnhc::TrajectoryRecord tr;
  tr.dt = 0.1;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    tr.times.push_back(t);
    tr.states.push_back(line_state(0.0, 0.0));
    tr.controls.push_back(VectorXd::Zero(1));
    VectorXd phi(1);
    phi << std::exp(-30.0 * t);
    tr.constraint_values.push_back(phi);
    tr.energies.push_back(0.0);
  }
  // Past t ~ 0.9 the samples sit below 1e-12 (1 + phi(0)); the default
  // window must stop there instead of fitting noise.
  CHECK_THAT(vnhc::decay_rate(tr, 0), Catch::Matchers::WithinRel(30.0, 1e-9));
  // An explicit window reaching into the floor refuses instead.
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 0, vnhc::FitWindow{0.0, 5.0}),
                    vnhc::FitWindowError);
}

TEST_CASE("decay fit rejects sign changes", "[integrator]") {
  vnhc::TrajectoryRecord tr;
  tr.dt = 0.1;
  for (int i = 0; i <= 50; ++i) {
    const double t = 0.1 * i;
    tr.times.push_back(t);
    tr.states.push_back(line_state(0.0, 0.0));
    tr.controls.push_back(VectorXd::Zero(1));
    VectorXd phi(1);
    phi << std::cos(t) * std::exp(-t);
    tr.constraint_values.push_back(phi);
    tr.energies.push_back(0.0);
  }
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 0), vnhc::FitWindowError);
  REQUIRE_THROWS_AS(vnhc::decay_rate(tr, 0, vnhc::FitWindow{0.0, 3.0}),
                    vnhc::FitWindowError);
  // A window before the zero crossing is fine.
  CHECK(vnhc::decay_rate(tr, 0, vnhc::FitWindow{0.0, 1.0}) > 0.0);
}

TEST_CASE("closed-loop flocking contracts at the commanded rate",
          "[integrator]") {
  const auto bundle = vnhc::build_flocking();
  const auto tr = vnhc::simulate(bundle.system, bundle.constraint,
                                 vnhc::uniform_gains(3), bundle.initial, 0.01,
                                 20.0);
  for (int b = 0; b < 3; ++b) {
    CHECK_THAT(vnhc::decay_rate(tr, b),
               Catch::Matchers::WithinAbs(1.0, 0.02));
    // Envelope: no component ever exceeds its initial magnitude times the
    // commanded exponential, with 1% slack and the fit floor.
    const double phi0 = std::abs(tr.constraint_values.front()[b]);
    const double floor = 1e-12 * (1.0 + phi0);
    for (size_t i = 0; i < tr.samples(); ++i) {
      const double bound = phi0 * std::exp(-tr.times[i]) * 1.01 + floor;
      CHECK(std::abs(tr.constraint_values[i][b]) <= bound);
    }
  }
}
