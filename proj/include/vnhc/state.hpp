#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace vnhc {

/// Point of the phase space (configuration and velocity) plus simulation time.
struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd v;
  double t = 0.0;
};

inline bool state_finite(const State& s) {
  return s.q.allFinite() && s.v.allFinite() && std::isfinite(s.t);
}

}  // namespace vnhc
