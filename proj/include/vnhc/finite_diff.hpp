#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace vnhc {

/// Central-difference step, scaled to the magnitude of the coordinate.
inline double fd_step(double x) {
  static const double root_eps =
      std::sqrt(std::numeric_limits<double>::epsilon());
  return root_eps * (1.0 + std::abs(x));
}

/// Gradient of a scalar function by central differences.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& q) {
  Eigen::VectorXd grad(q.size());
  Eigen::VectorXd probe = q;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double h = fd_step(q[i]);
    probe[i] = q[i] + h;
    const double fp = f(probe);
    probe[i] = q[i] - h;
    const double fm = f(probe);
    probe[i] = q[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

/// Jacobian of a vector-valued function by central differences.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, Eigen::Index rows) {
  Eigen::MatrixXd jac(rows, x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i]);
    probe[i] = x[i] + h;
    const Eigen::VectorXd fp = f(probe);
    probe[i] = x[i] - h;
    const Eigen::VectorXd fm = f(probe);
    probe[i] = x[i];
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

/// Coordinate derivatives of a matrix-valued function; entry i of the result
/// is the derivative with respect to q[i].
inline std::vector<Eigen::MatrixXd> fd_matrix_derivative(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& q) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<size_t>(q.size()));
  Eigen::VectorXd probe = q;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double h = fd_step(q[i]);
    probe[i] = q[i] + h;
    const Eigen::MatrixXd fp = f(probe);
    probe[i] = q[i] - h;
    const Eigen::MatrixXd fm = f(probe);
    probe[i] = q[i];
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

}  // namespace vnhc
