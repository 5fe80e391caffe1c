#pragma once

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dynamics.hpp"

namespace testing_support {

using latentplan::Index;
using latentplan::Moments;
using latentplan::VelocityChannels;

// Linear-Gaussian latent system x' = A x + sqrt(var) w with pose y = C x + c.
struct LinearSystem {
  Eigen::MatrixXd a;
  double variance = 0.01;
  Eigen::MatrixXd c;
  Eigen::VectorXd offset;
  double pose_variance = 0.0;
  double h = 0.1;
  std::vector<bool> det;
  std::optional<VelocityChannels> channels;

  Index latent_dim() const { return a.rows(); }
  Index pose_dim() const { return c.rows(); }
  Moments latent_moments(const Eigen::VectorXd& x) const { return {a * x, variance}; }
  Moments pose_moments(const Eigen::VectorXd& x) const { return {c * x + offset, pose_variance}; }
  const std::vector<bool>& deterministic_dims() const { return det; }
  std::optional<VelocityChannels> velocity_channels() const { return channels; }
  double step_seconds() const { return h; }

  static LinearSystem scalar(double a, double variance, double h) {
    LinearSystem s;
    s.a = Eigen::MatrixXd::Constant(1, 1, a);
    s.variance = variance;
    s.c = Eigen::MatrixXd::Identity(1, 1);
    s.offset = Eigen::VectorXd::Zero(1);
    s.h = h;
    s.det = {false};
    return s;
  }

  // 2-D latent with a 3-channel pose read as (forward, lateral, yaw) velocities.
  static LinearSystem walker(double variance = 0.02, double pose_variance = 0.001) {
    LinearSystem s;
    s.a.resize(2, 2);
    s.a << 0.95, 0.1, -0.1, 0.95;
    s.variance = variance;
    s.c.resize(3, 2);
    s.c << 0.2, 0.0, 0.0, 0.0, 0.0, 0.5;
    s.offset = Eigen::Vector3d(1.0, 0.0, 0.0);
    s.pose_variance = pose_variance;
    s.h = 0.1;
    s.det = {false, false};
    s.channels = VelocityChannels{0, 1, 2};
    return s;
  }
};

static_assert(latentplan::LatentSystem<LinearSystem>);

inline Eigen::MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

}  // namespace testing_support
