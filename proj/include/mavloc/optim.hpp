// SPDX-License-Identifier: Apache-2.0
//
// Dense L-BFGS with Armijo backtracking, written against callbacks of the
// form f(x, grad_out) -> value. Keeps and returns the best iterate seen, so
// a capped run is still usable.

#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>

#include "mavloc/core.hpp"

namespace mavloc {

struct LbfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // on the max-norm of the gradient
  int memory = 8;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, const LbfgsOptions& opts = {}) {
  const auto n = x0.size();
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad(n), grad_new(n);
  double fx = f(x, grad);
  if (!std::isfinite(fx)) throw NumericError("lbfgs_minimize: objective is not finite at x0");

  LbfgsResult best;
  best.x = x;
  best.value = fx;
  best.gradient_norm = grad.lpNorm<Eigen::Infinity>();

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.gradient_tolerance) {
      best.converged = true;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;

    double dg = dir.dot(grad);
    if (dg >= 0.0) {  // not a descent direction; fall back to steepest descent
      dir = -grad;
      dg = -grad.squaredNorm();
    }

    // Armijo backtracking.
    double step = s_hist.empty() ? 1.0 / std::max(1.0, grad.norm()) : 1.0;
    const double c1 = 1e-4;
    double fx_new = fx;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      fx_new = f(x_new, grad_new);
      if (std::isfinite(fx_new) && fx_new <= fx + c1 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search exhausted; best iterate already kept

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    x = std::move(x_new);
    grad = grad_new;
    fx = fx_new;
    if (fx < best.value) {
      best.x = x;
      best.value = fx;
      best.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    }
  }

  if (!best.converged) best.converged = grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance;
  best.iterations = it;
  return best;
}

}  // namespace mavloc
