#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/error.hpp"

namespace latentplan {

// Effective sample size 1 / sum w_i^2 of normalized weights.
inline double ess(const Eigen::VectorXd& w) { return 1.0 / w.squaredNorm(); }

// Systematic resampling with a single offset u in [0, 1/n): index i is drawn floor or ceil of
// n * w_i times. n defaults to the number of weights.
inline std::vector<int> systematic_resample(const Eigen::VectorXd& w, double offset, Eigen::Index n = -1) {
  if (n < 0) n = w.size();
  const Eigen::Index last = w.size() - 1;
  std::vector<int> out(static_cast<size_t>(n));
  const double step = 1.0 / static_cast<double>(n);
  double cumulative = w(0);
  Eigen::Index i = 0;
  for (Eigen::Index m = 0; m < n; ++m) {
    const double u = offset + static_cast<double>(m) * step;
    while (u >= cumulative && i < last) cumulative += w(++i);
    out[static_cast<size_t>(m)] = static_cast<int>(i);
  }
  return out;
}

template <class Rng>
std::vector<int> systematic_resample(const Eigen::VectorXd& w, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0 / static_cast<double>(w.size()));
  return systematic_resample(w, uniform(rng));
}

// Normalizes log-weights in place to a probability vector. Returns false when every weight
// is zero.
inline bool normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& w) {
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) return false;
  w = log_w.unaryExpr([top](double v) { return std::exp(v - top); });
  w /= w.sum();
  return true;
}

}  // namespace latentplan
