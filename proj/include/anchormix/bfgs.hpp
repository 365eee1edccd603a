#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace anchormix {

struct BfgsOptions {
  double tol = 1e-10;        // relative decrease threshold, optim-style
  double grad_tol = 1e-8;    // sup-norm gradient threshold
  int max_iter = 500;
  double fd_step = 1e-6;     // relative central-difference step
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

inline Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    double fp = f(xp);
    xp[i] = x[i] - h;
    double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Quasi-Newton minimization with finite-difference gradients and an Armijo
// backtracking line search. The inverse Hessian update is skipped whenever
// the curvature condition fails.
inline BfgsResult minimize_bfgs(const ScalarFn& f, const Eigen::VectorXd& x0,
                                const BfgsOptions& opts = {}) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = x0;
  res.f = f(x0);
  Eigen::VectorXd g = fd_gradient(f, res.x, opts.fd_step);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  const double c1 = 1e-4;

  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // not a descent direction: reset
      h_inv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0.0)) break;
    }
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.f + c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd g_new = fd_gradient(f, x_new, opts.fd_step);
    Eigen::VectorXd s = x_new - res.x;
    Eigen::VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      double rho = 1.0 / sy;
      Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd left = eye - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    double decrease = res.f - f_new;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    if (decrease <= opts.tol * (std::abs(res.f) + opts.tol)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace anchormix
