#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/error.hpp"

namespace latentplan {

struct AscentOptions {
  int iterations = 100;
  int memory = 10;
  int max_backtracks = 30;
  double armijo = 1e-4;
  double shrink = 0.5;
  double gradient_tolerance = 1e-9;
};

struct AscentReport {
  std::vector<double> history;  // objective after each accepted step, history[0] is the start
  int iterations = 0;
  bool converged = false;
};

// Evaluates the objective and writes its gradient. Throwing latentplan::Error marks the
// point as infeasible and makes the line search backtrack.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
// Maps a trial point back into the feasible box in place.
using ProjectFn = std::function<void(Eigen::VectorXd&)>;

// Maximizes f with L-BFGS directions and a backtracking Armijo line search. Every accepted
// step satisfies f(new) >= f(old), so report.history is non-decreasing.
inline AscentReport maximize(const ObjectiveFn& f, Eigen::VectorXd& theta, const ProjectFn& project,
                             const AscentOptions& opt = {}) {
  AscentReport report;
  Eigen::VectorXd grad(theta.size());
  if (project) project(theta);
  double value = f(theta, grad);
  if (!std::isfinite(value) || !grad.allFinite())
    throw Error(ErrorKind::NonFiniteObjective, "objective is not finite at the initial point");
  report.history.push_back(value);

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  Eigen::VectorXd trial(theta.size());
  Eigen::VectorXd trial_grad(theta.size());

  for (int it = 0; it < opt.iterations; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      report.converged = true;
      break;
    }
    // Two-loop recursion on the minimization problem -f.
    Eigen::VectorXd q = -grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
      alpha[i] = rho * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
      const double beta = rho * y_hist[i].dot(q);
      q += s_hist[i] * (alpha[i] - beta);
    }
    Eigen::VectorXd dir = -q;  // ascent direction for f
    double slope = grad.dot(dir);
    bool quasi_newton = !s_hist.empty();
    if (!(slope > 0.0) || !dir.allFinite()) {
      dir = grad;
      slope = grad.squaredNorm();
      quasi_newton = false;
      s_hist.clear();
      y_hist.clear();
    }
    double step = quasi_newton ? 1.0 : 1.0 / std::max(1.0, dir.lpNorm<Eigen::Infinity>());

    bool accepted = false;
    double trial_value = -std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      trial = theta + step * dir;
      if (project) project(trial);
      try {
        trial_value = f(trial, trial_grad);
      } catch (const Error&) {
        trial_value = -std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(trial_value) && trial_grad.allFinite() &&
          trial_value >= value + opt.armijo * grad.dot(trial - theta) && trial_value >= value) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      if (quasi_newton) {
        s_hist.clear();
        y_hist.clear();
        continue;
      }
      report.converged = true;
      break;
    }
    Eigen::VectorXd s = trial - theta;
    Eigen::VectorXd y = grad - trial_grad;  // gradient change of -f
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    theta = trial;
    grad = trial_grad;
    value = trial_value;
    report.history.push_back(value);
    ++report.iterations;
  }
  return report;
}

}  // namespace latentplan
