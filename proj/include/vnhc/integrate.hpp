#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vnhc/control.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/state.hpp"

namespace vnhc {

/// Absolute state bound beyond which a run is declared divergent.
inline constexpr double kBlowupLimit = 1e12;

/// Uniformly sampled trajectory. Entry i of every field belongs to time
/// times[i] = i * dt; records are plain values and safe to copy around.
struct TrajectoryRecord {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Eigen::VectorXd> controls;
  std::vector<Eigen::VectorXd> constraint_values;  ///< empty vectors when no constraint
  std::vector<double> energies;

  size_t samples() const { return states.size(); }
};

using AccelerationFn = std::function<Eigen::VectorXd(const State&)>;
using ControlLaw = std::function<Eigen::VectorXd(const State&)>;

/// One classical fourth-order Runge-Kutta step of the second-order system
/// q' = v, v' = accel(q, v). The acceleration (and through it any feedback
/// law) is re-evaluated at every stage.
inline State rk4_step(const AccelerationFn& accel, const State& s, double dt) {
  if (!(dt > 0.0))
    throw ValidationError("rk4_step: dt must be positive");
  auto eval = [&](const State& stage) {
    Eigen::VectorXd a = accel(stage);
    if (!a.allFinite())
      throw IntegrationError(
          "non-finite acceleration at t = " + std::to_string(stage.t), stage.t);
    return a;
  };
  const Eigen::VectorXd k1q = s.v;
  const Eigen::VectorXd k1v = eval(s);
  State s2{s.q + 0.5 * dt * k1q, s.v + 0.5 * dt * k1v, s.t + 0.5 * dt};
  const Eigen::VectorXd k2q = s2.v;
  const Eigen::VectorXd k2v = eval(s2);
  State s3{s.q + 0.5 * dt * k2q, s.v + 0.5 * dt * k2v, s.t + 0.5 * dt};
  const Eigen::VectorXd k3q = s3.v;
  const Eigen::VectorXd k3v = eval(s3);
  State s4{s.q + dt * k3q, s.v + dt * k3v, s.t + dt};
  const Eigen::VectorXd k4q = s4.v;
  const Eigen::VectorXd k4v = eval(s4);
  State out;
  out.q = s.q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.v = s.v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.t = s.t + dt;
  return out;
}

namespace detail {

inline int64_t step_count(double dt, double t_final) {
  if (!(dt > 0.0)) throw ValidationError("simulate: dt must be positive");
  if (!(t_final >= 0.0))
    throw ValidationError("simulate: t_final must be non-negative");
  const int64_t n = std::llround(t_final / dt);
  if (std::abs(static_cast<double>(n) * dt - t_final) >
      1e-9 * std::max(1.0, std::abs(t_final)))
    throw ValidationError("simulate: t_final must be an integer multiple of "
                          "dt");
  return n;
}

inline void check_blowup(const State& s) {
  const double peak =
      std::max(s.q.cwiseAbs().maxCoeff(), s.v.cwiseAbs().maxCoeff());
  if (!state_finite(s) || peak > kBlowupLimit)
    throw IntegrationError(
        "state exceeded the blow-up guard at t = " + std::to_string(s.t),
        s.t);
}

}  // namespace detail

/// Fixed-step integration with an arbitrary feedback law (pass nullptr for
/// the unactuated system). Every sample, including t = 0, records state,
/// control, constraint value (when a constraint is given) and energy.
inline TrajectoryRecord simulate_with_law(const MechanicalSystem& sys,
                                          const ConstraintSet* c,
                                          const ControlLaw& law,
                                          const State& s0, double dt,
                                          double t_final) {
  detail::check_dims(sys, s0, "simulate");
  if (!state_finite(s0))
    throw ValidationError("simulate: initial state has non-finite entries");
  const int64_t steps = detail::step_count(dt, t_final);
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(sys.m);
  AccelerationFn accel = [&](const State& s) {
    return controlled_acceleration(sys, s, law ? law(s) : zero_u);
  };

  TrajectoryRecord tr;
  tr.dt = dt;
  tr.times.reserve(static_cast<size_t>(steps) + 1);
  tr.states.reserve(static_cast<size_t>(steps) + 1);
  tr.controls.reserve(static_cast<size_t>(steps) + 1);
  tr.constraint_values.reserve(static_cast<size_t>(steps) + 1);
  tr.energies.reserve(static_cast<size_t>(steps) + 1);

  State s = s0;
  s.t = 0.0;
  for (int64_t i = 0;; ++i) {
    tr.times.push_back(s.t);
    tr.states.push_back(s);
    tr.controls.push_back(law ? law(s) : zero_u);
    tr.constraint_values.push_back(c ? evaluate(*c, s)
                                     : Eigen::VectorXd());
    tr.energies.push_back(energy(sys, s));
    if (i == steps) break;
    s = rk4_step(accel, s, dt);
    s.t = static_cast<double>(i + 1) * dt;
    detail::check_blowup(s);
  }
  return tr;
}

/// Closed-loop simulation under the stabilizing feedback.
inline TrajectoryRecord simulate(const MechanicalSystem& sys,
                                 const ConstraintSet& c, const GainMatrix& k,
                                 const State& s0, double dt, double t_final) {
  ControlLaw law = [&sys, &c, &k](const State& s) {
    return stabilizing_control(sys, c, k, s).u;
  };
  return simulate_with_law(sys, &c, law, s0, dt, t_final);
}

/// Time window for the decay fit.
struct FitWindow {
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Exponential decay rate of constraint component b, estimated as minus the
/// least-squares slope of ln |phi^b(t)|. Without an explicit window the fit
/// uses [0, min(10, t_final)], truncated at the first sample that falls
/// below the noise floor 1e-12 * (1 + |phi^b(0)|). An explicit window whose
/// samples change sign or dip below the floor raises.
inline double decay_rate(const TrajectoryRecord& tr, int b,
                         std::optional<FitWindow> window = std::nullopt) {
  if (tr.samples() < 2)
    throw FitWindowError("decay_rate: trajectory needs at least two samples");
  if (tr.constraint_values.empty() ||
      b < 0 || b >= tr.constraint_values.front().size())
    throw FitWindowError("decay_rate: no constraint component " +
                         std::to_string(b));
  const double phi0 = tr.constraint_values.front()[b];
  const double floor = 1e-12 * (1.0 + std::abs(phi0));

  double t0 = 0.0;
  double t1 = std::min(10.0, tr.times.back());
  bool truncate_at_floor = true;
  if (window) {
    t0 = window->t0;
    t1 = window->t1;
    truncate_at_floor = false;
    if (!(t0 < t1))
      throw FitWindowError("decay_rate: window must satisfy t0 < t1");
  }

  std::vector<double> ts, ys;
  double sign = 0.0;
  for (size_t i = 0; i < tr.samples(); ++i) {
    const double t = tr.times[i];
    if (t < t0 - 1e-12 || t > t1 + 1e-12) continue;
    const double phi = tr.constraint_values[i][b];
    if (std::abs(phi) < floor) {
      if (truncate_at_floor) break;
      throw FitWindowError(
          "decay_rate: sample at t = " + std::to_string(t) +
          " is below the noise floor; shrink the window");
    }
    if (sign == 0.0) sign = phi > 0.0 ? 1.0 : -1.0;
    if (phi * sign < 0.0)
      throw FitWindowError("decay_rate: constraint component changes sign "
                           "inside the window at t = " + std::to_string(t));
    ts.push_back(t);
    ys.push_back(std::log(std::abs(phi)));
  }
  if (ts.size() < 2)
    throw FitWindowError("decay_rate: window contains fewer than two usable "
                         "samples");

  // Centered least squares for the slope of ln|phi| versus t.
  const double n = static_cast<double>(ts.size());
  double tm = 0.0, ym = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    tm += ts[i];
    ym += ys[i];
  }
  tm /= n;
  ym /= n;
  double stt = 0.0, sty = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    const double dtc = ts[i] - tm;
    stt += dtc * dtc;
    sty += dtc * (ys[i] - ym);
  }
  if (stt == 0.0)
    throw FitWindowError("decay_rate: window has no time spread");
  return -sty / stt;
}

}  // namespace vnhc
