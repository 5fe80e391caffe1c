#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dataset.hpp"
#include "latentplan/gp.hpp"
#include "latentplan/lvm.hpp"

namespace latentplan {

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  double r = std::remainder(a, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

// Latent point plus planar global frame (x m, y m, heading rad).
struct AugmentedState {
  Eigen::VectorXd latent;
  Eigen::Vector3d global = Eigen::Vector3d::Zero();
};

// Gaussian with isotropic scalar variance, as produced by a GP posterior.
struct Moments {
  Eigen::VectorXd mean;
  double variance = 0.0;
};

// What the planner and the path-integral cascade need from a learned generative system.
template <class S>
concept LatentSystem = requires(const S& s, const Eigen::VectorXd& x) {
  { s.latent_dim() } -> std::convertible_to<Index>;
  { s.pose_dim() } -> std::convertible_to<Index>;
  { s.latent_moments(x) } -> std::same_as<Moments>;
  { s.pose_moments(x) } -> std::same_as<Moments>;
  { s.deterministic_dims() } -> std::convertible_to<const std::vector<bool>&>;
  { s.velocity_channels() } -> std::convertible_to<std::optional<VelocityChannels>>;
  { s.step_seconds() } -> std::convertible_to<double>;
};

// LatentSystem view of a trained model. Dimensions tagged periodic-phase are deterministic.
class GpSystem {
 public:
  explicit GpSystem(const LatentModel& model) : model_(&model), velocity_(model.velocity_channels()) {
    for (LatentRole r : model.roles) deterministic_.push_back(r == LatentRole::PeriodicPhase);
    deterministic_.resize(static_cast<size_t>(model.latent_dim()), false);
  }

  const LatentModel& model() const { return *model_; }
  Index latent_dim() const { return model_->latent_dim(); }
  Index pose_dim() const { return model_->pose_dim(); }
  double step_seconds() const { return model_->step_seconds(); }
  const std::vector<bool>& deterministic_dims() const { return deterministic_; }
  std::optional<VelocityChannels> velocity_channels() const { return velocity_; }

  Moments latent_moments(const Eigen::VectorXd& x) const {
    auto p = gp_posterior(x, model_->dyn_inputs, model_->dyn_cache, model_->dyn_params, true);
    return {std::move(p.mean), p.variance};
  }
  Moments pose_moments(const Eigen::VectorXd& x) const {
    auto p = gp_posterior(x, model_->latent, model_->map_cache, model_->map_params, true);
    return {p.mean + model_->offsets, p.variance};
  }

 private:
  const LatentModel* model_;
  std::optional<VelocityChannels> velocity_;
  std::vector<bool> deterministic_;
};

static_assert(LatentSystem<GpSystem>);

struct LatentStep {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Mean and covariance of x_{k+1} given x_k; deterministic dimensions get zero noise.
template <LatentSystem S>
LatentStep latent_step_distribution(const S& system, const Eigen::VectorXd& x) {
  const Moments m = system.latent_moments(x);
  LatentStep out{m.mean, Eigen::MatrixXd::Zero(system.latent_dim(), system.latent_dim())};
  const auto& det = system.deterministic_dims();
  for (Index j = 0; j < system.latent_dim(); ++j)
    if (!det[static_cast<size_t>(j)]) out.cov(j, j) = m.variance;
  return out;
}

inline LatentStep latent_step_distribution(const LatentModel& model, const Eigen::VectorXd& x) {
  return latent_step_distribution(GpSystem(model), x);
}

// Mean pose mu_Y(x) plus channel offsets. With an rng, adds the GP pose noise instead.
inline Eigen::VectorXd decode_pose(const LatentModel& model, const Eigen::VectorXd& x) {
  return reconstruct(model, x);
}

template <class Rng>
Eigen::VectorXd decode_pose(const LatentModel& model, const Eigen::VectorXd& x, Rng& rng) {
  const Moments m = GpSystem(model).pose_moments(x);
  std::normal_distribution<double> normal;
  Eigen::VectorXd y = m.mean;
  const double sd = std::sqrt(m.variance);
  for (Index c = 0; c < y.size(); ++c) y(c) += sd * normal(rng);
  return y;
}

// g + h R_theta (v + sqrt(var_v) * noise), with R_theta rotating (forward, lateral) into the
// world frame and leaving the yaw rate unchanged.
inline Eigen::Vector3d global_step(const Eigen::Vector3d& g, const Eigen::VectorXd& y, const Eigen::Vector3d& var_v,
                                   const Eigen::Vector3d& noise, const VelocityChannels& channels, double h) {
  const Eigen::Vector3d v(y(channels.forward) + std::sqrt(var_v(0)) * noise(0),
                          y(channels.lateral) + std::sqrt(var_v(1)) * noise(1),
                          y(channels.yaw) + std::sqrt(var_v(2)) * noise(2));
  const double c = std::cos(g(2));
  const double s = std::sin(g(2));
  Eigen::Vector3d out = g;
  out(0) += h * (c * v(0) - s * v(1));
  out(1) += h * (s * v(0) + c * v(1));
  out(2) = wrap_angle(g(2) + h * v(2));
  return out;
}

}  // namespace latentplan
