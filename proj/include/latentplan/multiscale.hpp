#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dynamics.hpp"
#include "latentplan/error.hpp"
#include "latentplan/particles.hpp"
#include "latentplan/planner.hpp"

namespace latentplan {

struct Level {
  int aggregation = 1;  // M_l, base steps merged into one level step
  int particles = 100;  // N_l
  friend bool operator==(const Level&, const Level&) = default;
};

// Levels ordered coarsest first.
struct LevelSchedule {
  std::vector<Level> levels;

  void validate(int horizon) const {
    for (size_t i = 0; i < levels.size(); ++i) {
      const Level& l = levels[i];
      if (l.aggregation < 1 || l.particles < 1) throw Error(ErrorKind::InvalidInput, "level needs M >= 1 and N >= 1");
      if (horizon % l.aggregation != 0)
        throw Error(ErrorKind::InvalidInput, "aggregation factor " + std::to_string(l.aggregation) +
                                                 " does not divide horizon " + std::to_string(horizon));
      if (i > 0 && !(levels[i - 1].aggregation > l.aggregation))
        throw Error(ErrorKind::InvalidInput, "aggregation factors must decrease from coarse to fine");
    }
  }

  long long propagation_count(int horizon) const {
    long long total = 0;
    for (const Level& l : levels) total += static_cast<long long>(l.particles) * (horizon / l.aggregation);
    return total;
  }
};

struct MultiscaleOptions {
  // Divide the update by N_l on top of normalizing the weights (literal form of the update).
  bool literal_normalization = false;
  double resample_threshold = 0.5;
  // Multiply weights by the passive/guided density ratio exp(-sum(m.n + |m|^2/2)), m being the
  // guidance offset in noise units, so repeated passes keep the passive-prior optimum.
  bool likelihood_ratio = false;
};

// Mean of one aggregated step: x + M (mu(x) - x) + M sqrt(Sigma(x)) u h on stochastic
// dimensions; deterministic dimensions follow the mean dynamics composed M times.
template <LatentSystem S>
Eigen::VectorXd level_step_mean(const S& system, const Eigen::VectorXd& x, const Moments& mom, const Eigen::VectorXd& u,
                                int m, double h) {
  const auto& det = system.deterministic_dims();
  const double scale = static_cast<double>(m);
  Eigen::VectorXd out = m == 1 ? mom.mean : Eigen::VectorXd(x + scale * (mom.mean - x));
  out += scale * std::sqrt(mom.variance) * h * u;
  bool any_det = false;
  for (bool b : det) any_det = any_det || b;
  if (any_det) {
    Eigen::VectorXd composed = mom.mean;
    for (int r = 1; r < m; ++r) composed = system.latent_moments(composed).mean;
    for (Index j = 0; j < x.size(); ++j)
      if (det[static_cast<size_t>(j)]) out(j) = composed(j);
  }
  return out;
}

template <LatentSystem S>
Eigen::VectorXd level_step_mean(const S& system, const Eigen::VectorXd& x, const Eigen::VectorXd& u, int m, double h) {
  return level_step_mean(system, x, system.latent_moments(x), u, m, h);
}

// Per-dimension variance of an aggregated step: M Sigma(x), zero on deterministic dimensions.
template <LatentSystem S>
Eigen::VectorXd level_step_variance(const S& system, const Eigen::VectorXd& x, const Moments& mom, int m) {
  const auto& det = system.deterministic_dims();
  Eigen::VectorXd v(x.size());
  for (Index j = 0; j < x.size(); ++j) v(j) = det[static_cast<size_t>(j)] ? 0.0 : m * mom.variance;
  return v;
}

template <LatentSystem S>
Eigen::VectorXd level_step_variance(const S& system, const Eigen::VectorXd& x, int m) {
  return level_step_variance(system, x, system.latent_moments(x), m);
}

// Stretch a level control (K_l rows) to K rows by repeating each row M times.
inline ControlSequence stretch(const ControlSequence& coarse, int m) {
  ControlSequence out(coarse.rows() * m, coarse.cols());
  for (Index k = 0; k < coarse.rows(); ++k)
    for (int r = 0; r < m; ++r) out.row(k * m + r) = coarse.row(k);
  return out;
}

// Every M-th row of a full-length control.
inline ControlSequence subsample(const ControlSequence& full, int m) {
  ControlSequence out(full.rows() / m, full.cols());
  for (Index k = 0; k < out.rows(); ++k) out.row(k) = full.row(k * m);
  return out;
}

struct PiLevelResult {
  ControlSequence control;                      // K x d, stretched
  ControlSequence level_control;                // K_l x d
  std::vector<Eigen::MatrixXd> latent_noise;    // per particle, K_l x d (ancestral after resampling)
  std::vector<Eigen::MatrixXd> global_noise;    // per particle, K_l x 3
  std::vector<std::vector<AugmentedState>> trajectories;  // per particle, K_l + 1 states
  Eigen::VectorXd final_weights;
  std::vector<int> resample_steps;
  long long propagations = 0;
};

// Path-integral control with a particle filter on the M-aggregated problem. `u_upper` is the
// next-coarser solution stretched to K rows (zeros at the coarsest level).
template <LatentSystem S, class CostFn>
PiLevelResult pi_level_detailed(const S& system, const CostFn& cost_fn, const AugmentedState& start,
                                const ControlSequence& u_upper, const Level& level, std::uint64_t seed,
                                const MultiscaleOptions& opt = {}) {
  const int m = level.aggregation;
  const int n = level.particles;
  const int horizon = static_cast<int>(u_upper.rows());
  if (m < 1 || n < 1 || horizon % m != 0) throw Error(ErrorKind::InvalidInput, "invalid level for this horizon");
  const int k_level = horizon / m;
  const Index d = system.latent_dim();
  const double h = system.step_seconds();
  const auto& det = system.deterministic_dims();
  const auto velocity = system.velocity_channels();
  const ControlSequence u_bar = subsample(u_upper, m);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  PiLevelResult r;
  r.latent_noise.assign(static_cast<size_t>(n), Eigen::MatrixXd::Zero(k_level, d));
  r.global_noise.assign(static_cast<size_t>(n), Eigen::MatrixXd::Zero(k_level, 3));
  r.trajectories.assign(static_cast<size_t>(n), std::vector<AugmentedState>{start});
  const Eigen::VectorXd start_pose = system.pose_moments(start.latent).mean;
  const double start_pose_var = system.pose_moments(start.latent).variance;
  std::vector<Eigen::VectorXd> poses(static_cast<size_t>(n), start_pose);
  std::vector<double> pose_vars(static_cast<size_t>(n), start_pose_var);
  Eigen::VectorXd log_w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);

  for (int k = 1; k <= k_level; ++k) {
    for (int i = 0; i < n; ++i) {
      auto& traj = r.trajectories[static_cast<size_t>(i)];
      const AugmentedState& from = traj.back();
      AugmentedState to;
      Eigen::Vector3d eps = Eigen::Vector3d::Zero();
      if (velocity) {
        eps = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
        to.global = global_step(from.global, poses[static_cast<size_t>(i)],
                                Eigen::Vector3d::Constant(pose_vars[static_cast<size_t>(i)] / m), eps, *velocity, m * h);
      } else {
        to.global = from.global;
      }
      Eigen::VectorXd noise(d);
      for (Index j = 0; j < d; ++j) noise(j) = det[static_cast<size_t>(j)] ? 0.0 : normal(rng);
      const Eigen::VectorXd u_k = u_bar.row(k - 1).transpose();
      const Moments mom = system.latent_moments(from.latent);
      const Eigen::VectorXd var = level_step_variance(system, from.latent, mom, m);
      to.latent = level_step_mean(system, from.latent, mom, u_k, m, h) + (var.array().sqrt() * noise.array()).matrix();
      r.latent_noise[static_cast<size_t>(i)].row(k - 1) = noise.transpose();
      r.global_noise[static_cast<size_t>(i)].row(k - 1) = eps.transpose();
      const Moments pose = system.pose_moments(to.latent);
      poses[static_cast<size_t>(i)] = pose.mean;
      pose_vars[static_cast<size_t>(i)] = pose.variance;
      log_w(i) += -m * cost_fn(pose.mean, to.global, k * m);
      if (opt.likelihood_ratio) {
        const double shift = std::sqrt(static_cast<double>(m)) * h;
        for (Index j = 0; j < d; ++j) {
          if (det[static_cast<size_t>(j)]) continue;
          const double mj = shift * u_k(j);
          log_w(i) -= mj * noise(j) + 0.5 * mj * mj;
        }
      }
      traj.push_back(std::move(to));
    }
    r.propagations += n;
    if (!normalize_log_weights(log_w, w))
      throw Error(ErrorKind::DegenerateWeights, "all particles have zero weight at level step " + std::to_string(k) +
                                                    " (M=" + std::to_string(m) + ")");
    if (ess(w) < n * opt.resample_threshold) {
      const std::vector<int> idx = systematic_resample(w, rng);
      auto noise_copy = r.latent_noise;
      auto gnoise_copy = r.global_noise;
      auto traj_copy = r.trajectories;
      auto pose_copy = poses;
      auto var_copy = pose_vars;
      for (int i = 0; i < n; ++i) {
        const size_t src = static_cast<size_t>(idx[static_cast<size_t>(i)]);
        r.latent_noise[static_cast<size_t>(i)] = noise_copy[src];
        r.global_noise[static_cast<size_t>(i)] = gnoise_copy[src];
        r.trajectories[static_cast<size_t>(i)] = traj_copy[src];
        poses[static_cast<size_t>(i)] = pose_copy[src];
        pose_vars[static_cast<size_t>(i)] = var_copy[src];
      }
      w.setConstant(1.0 / n);
      r.resample_steps.push_back(k);
    }
    log_w = w.unaryExpr([](double v) { return std::log(v); });
  }

  r.final_weights = w;
  r.level_control = u_bar;
  const double scale = std::sqrt(static_cast<double>(m)) / (h * m) / (opt.literal_normalization ? n : 1.0);
  for (int i = 0; i < n; ++i) r.level_control += w(i) * scale * r.latent_noise[static_cast<size_t>(i)];
  r.control = stretch(r.level_control, m);
  return r;
}

template <LatentSystem S, class CostFn>
ControlSequence pi_level(const S& system, const CostFn& cost_fn, const AugmentedState& start,
                         const ControlSequence& u_upper, const Level& level, std::uint64_t seed,
                         const MultiscaleOptions& opt = {}) {
  return pi_level_detailed(system, cost_fn, start, u_upper, level, seed, opt).control;
}

// Replays stored noises through the level dynamics; used to check resampling bookkeeping.
template <LatentSystem S>
std::vector<AugmentedState> resimulate(const S& system, const AugmentedState& start, const ControlSequence& level_control,
                                       int m, const Eigen::MatrixXd& latent_noise, const Eigen::MatrixXd& global_noise) {
  const double h = system.step_seconds();
  const auto velocity = system.velocity_channels();
  std::vector<AugmentedState> out{start};
  for (Index k = 0; k < latent_noise.rows(); ++k) {
    const AugmentedState& from = out.back();
    AugmentedState to;
    if (velocity) {
      const Moments pose = system.pose_moments(from.latent);
      to.global = global_step(from.global, pose.mean, Eigen::Vector3d::Constant(pose.variance / m),
                              global_noise.row(k).transpose(), *velocity, m * h);
    } else {
      to.global = from.global;
    }
    const Moments mom = system.latent_moments(from.latent);
    const Eigen::VectorXd var = level_step_variance(system, from.latent, mom, m);
    to.latent = level_step_mean(system, from.latent, mom, Eigen::VectorXd(level_control.row(k).transpose()), m, h) +
                (var.array().sqrt() * latent_noise.row(k).transpose().array()).matrix();
    out.push_back(std::move(to));
  }
  return out;
}

inline std::uint64_t level_seed(std::uint64_t seed, size_t level_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(level_index), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Coarse-to-fine cascade; returns the finest control u^1 (K rows) for planner guidance.
template <LatentSystem S, class CostFn>
ControlSequence cascade(const S& system, const CostFn& cost_fn, const AugmentedState& start, const LevelSchedule& schedule,
                        int horizon, std::uint64_t seed, const MultiscaleOptions& opt = {},
                        long long* propagations = nullptr) {
  schedule.validate(horizon);
  ControlSequence u = ControlSequence::Zero(horizon, system.latent_dim());
  for (size_t l = 0; l < schedule.levels.size(); ++l) {
    PiLevelResult r = pi_level_detailed(system, cost_fn, start, u, schedule.levels[l], level_seed(seed, l), opt);
    if (propagations) *propagations += r.propagations;
    u = std::move(r.control);
  }
  return u;
}

}  // namespace latentplan
