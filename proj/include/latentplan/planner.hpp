#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dynamics.hpp"
#include "latentplan/error.hpp"
#include "latentplan/particles.hpp"

namespace latentplan {

// Per-step controls u_k (row k, k = 0..K-1) in latent-noise standard deviations per second.
using ControlSequence = Eigen::MatrixXd;

struct PlannerConfig {
  int particles = 500;
  int horizon = 64;
  std::uint64_t seed = 0;
  double resample_threshold = 0.5;  // resample when ESS < particles * threshold
  bool resampling = true;
  std::optional<ControlSequence> guidance;
  bool keep_trellis = false;
  int snapshot_every = 0;  // record the particle cloud every n steps (0 = never)

  void validate() const {
    if (particles < 1) throw Error(ErrorKind::InvalidInput, "particle count must be >= 1");
    if (horizon < 1) throw Error(ErrorKind::InvalidInput, "horizon must be >= 1");
    if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
      throw Error(ErrorKind::InvalidInput, "resample threshold fraction must lie in (0, 1]");
    if (guidance && guidance->rows() < horizon) throw Error(ErrorKind::InvalidInput, "guidance shorter than horizon");
  }
};

// Everything about a step-(k-1) particle needed to score transitions out of it.
struct ParentMoments {
  Eigen::VectorXd latent_mean;  // passive mean mu_X(x)
  double latent_variance = 0.0;
  Eigen::VectorXd pose;         // mu_Y(x) plus offsets
  double pose_variance = 0.0;
  Eigen::Vector3d global_mean = Eigen::Vector3d::Zero();
  double global_variance = 0.0;  // isotropic over (x, y, theta)
  bool has_global = false;
};

template <LatentSystem S>
ParentMoments parent_moments(const S& system, const AugmentedState& s) {
  ParentMoments m;
  Moments lat = system.latent_moments(s.latent);
  Moments pose = system.pose_moments(s.latent);
  m.latent_mean = std::move(lat.mean);
  m.latent_variance = lat.variance;
  m.pose = std::move(pose.mean);
  m.pose_variance = pose.variance;
  if (const auto vc = system.velocity_channels()) {
    const double h = system.step_seconds();
    m.has_global = true;
    m.global_mean = global_step(s.global, m.pose, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), *vc, h);
    m.global_variance = h * h * m.pose_variance;
  } else {
    m.global_mean = s.global;
  }
  return m;
}

namespace detail {

inline double isotropic_log_density(double sq_dist, double variance, int dims) {
  constexpr double log2pi = 1.8378770664093454836;
  if (dims == 0) return 0.0;
  if (variance <= 0.0) return sq_dist == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -0.5 * sq_dist / variance - 0.5 * dims * (log2pi + std::log(variance));
}

}  // namespace detail

// log p(child | parent) under the passive dynamics: Gaussian over the stochastic latent
// dimensions times Gaussian over the global frame. Deterministic dimensions are excluded.
inline double transition_log_density(const ParentMoments& parent, const AugmentedState& child,
                                     const std::vector<bool>& deterministic) {
  double sq = 0.0;
  int dims = 0;
  for (Index j = 0; j < child.latent.size(); ++j) {
    if (deterministic[static_cast<size_t>(j)]) continue;
    const double e = child.latent(j) - parent.latent_mean(j);
    sq += e * e;
    ++dims;
  }
  double out = detail::isotropic_log_density(sq, parent.latent_variance, dims);
  if (parent.has_global) {
    const double ex = child.global(0) - parent.global_mean(0);
    const double ey = child.global(1) - parent.global_mean(1);
    const double et = wrap_angle(child.global(2) - parent.global_mean(2));
    out += detail::isotropic_log_density(ex * ex + ey * ey + et * et, parent.global_variance, 3);
  }
  return out;
}

// One Viterbi recursion step over particle nodes: delta(i) = max_j [prev(j) + log p(i|j)] - cost(i).
// Ties pick the lowest parent index. Returns the number of pair evaluations.
inline long long viterbi_step(const Eigen::VectorXd& prev_delta, const std::vector<ParentMoments>& parents,
                              const std::vector<AugmentedState>& children, const Eigen::VectorXd& costs,
                              const std::vector<bool>& deterministic, Eigen::VectorXd& delta, std::vector<int>& psi) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const Index n_children = static_cast<Index>(children.size());
  const Index n_parents = prev_delta.size();
  delta.resize(n_children);
  psi.assign(static_cast<size_t>(n_children), 0);
  long long pairs = 0;
  for (Index i = 0; i < n_children; ++i) {
    double best = neg_inf;
    int arg = 0;
    for (Index j = 0; j < n_parents; ++j) {
      ++pairs;
      if (prev_delta(j) == neg_inf) continue;
      const double v = prev_delta(j) + transition_log_density(parents[static_cast<size_t>(j)], children[static_cast<size_t>(i)], deterministic);
      if (v > best) {
        best = v;
        arg = static_cast<int>(j);
      }
    }
    delta(i) = best - costs(i);
    psi[static_cast<size_t>(i)] = arg;
  }
  return pairs;
}

struct TrellisStep {
  std::vector<AugmentedState> particles;
  Eigen::MatrixXd poses;         // N x D
  Eigen::VectorXd costs;
  Eigen::VectorXd delta;
  std::vector<int> back_pointer;  // into the previous step's (post-resampling) arrays
  Eigen::VectorXd weights;        // normalized, after resampling if it fired
  std::vector<int> ancestry;      // resampling indices applied at this step (identity if none)
  double ess = 0.0;
  bool resampled = false;
};

struct Trellis {
  std::vector<TrellisStep> steps;  // steps[0] holds the start state replicated
};

struct PlanDiagnostics {
  std::vector<double> ess_history;  // per step k = 1..K, before resampling
  std::vector<int> resample_steps;
  long long dp_pair_evaluations = 0;
  long long propagations = 0;
  bool start_in_collision = false;
};

struct ParticleSnapshot {
  int step = 0;
  std::vector<Eigen::Vector3d> globals;
};

// MAP trajectory. Index 0 is the start state; indices 1..K are the planned steps.
struct Plan {
  std::vector<AugmentedState> states;
  Eigen::MatrixXd poses;           // (K+1) x D
  Eigen::VectorXd costs;           // (K+1), costs(0) is the start cost (not scored)
  Eigen::VectorXd delta;           // DP score along the path, delta(0) = 0
  std::vector<int> path_indices;   // particle index per step
  double log_posterior = 0.0;      // delta_K of the chosen particle
  std::vector<AugmentedState> final_particles;
  std::vector<ParticleSnapshot> snapshots;
  PlanDiagnostics diagnostics;
  std::optional<Trellis> trellis;
};

// Viterbi over a particle-filter trellis. `cost_fn(y, g, k)` returns the extended-real task cost.
template <LatentSystem S, class CostFn>
Plan plan(const S& system, const CostFn& cost_fn, const AugmentedState& start, const PlannerConfig& cfg) {
  cfg.validate();
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const int n = cfg.particles;
  const int k_max = cfg.horizon;
  const Index d = system.latent_dim();
  const Index big_d = system.pose_dim();
  const auto& det = system.deterministic_dims();
  const auto velocity = system.velocity_channels();
  const double h = system.step_seconds();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;

  Plan out;
  std::vector<TrellisStep> steps;
  steps.reserve(static_cast<size_t>(k_max + 1));
  {
    TrellisStep s0;
    s0.particles.assign(static_cast<size_t>(n), start);
    const Moments pose = system.pose_moments(start.latent);
    s0.poses = pose.mean.transpose().replicate(n, 1);
    const double c0 = cost_fn(pose.mean, start.global, 0);
    s0.costs = Eigen::VectorXd::Constant(n, c0);
    s0.delta = Eigen::VectorXd::Zero(n);
    s0.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    s0.back_pointer.assign(static_cast<size_t>(n), 0);
    s0.ancestry.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) s0.ancestry[static_cast<size_t>(i)] = i;
    s0.ess = n;
    out.diagnostics.start_in_collision = !std::isfinite(c0);
    steps.push_back(std::move(s0));
  }
  if (cfg.snapshot_every > 0) out.snapshots.push_back({0, {start.global}});

  Eigen::VectorXd log_w = Eigen::VectorXd::Zero(n);
  std::vector<ParentMoments> parents(static_cast<size_t>(n));
  for (int k = 1; k <= k_max; ++k) {
    const TrellisStep& prev = steps.back();
    for (int j = 0; j < n; ++j) {
      // Resampled duplicates share moments with their first copy.
      if (k > 1 && j > 0 && prev.resampled && prev.ancestry[static_cast<size_t>(j)] == prev.ancestry[static_cast<size_t>(j - 1)])
        parents[static_cast<size_t>(j)] = parents[static_cast<size_t>(j - 1)];
      else if (k == 1 && j > 0)
        parents[static_cast<size_t>(j)] = parents[0];
      else
        parents[static_cast<size_t>(j)] = parent_moments(system, prev.particles[static_cast<size_t>(j)]);
    }

    TrellisStep cur;
    cur.particles.resize(static_cast<size_t>(n));
    cur.poses.resize(n, big_d);
    cur.costs.resize(n);
    for (int i = 0; i < n; ++i) {
      const ParentMoments& pm = parents[static_cast<size_t>(i)];
      const AugmentedState& from = prev.particles[static_cast<size_t>(i)];
      AugmentedState& to = cur.particles[static_cast<size_t>(i)];
      to.latent = pm.latent_mean;
      const double sd = std::sqrt(pm.latent_variance);
      for (Index j = 0; j < d; ++j) {
        if (det[static_cast<size_t>(j)]) continue;
        double offset = 0.0;
        if (cfg.guidance) offset = sd * (*cfg.guidance)(k - 1, j) * h;
        to.latent(j) += offset + sd * normal(rng);
      }
      if (velocity) {
        const Eigen::Vector3d eps(normal(rng), normal(rng), normal(rng));
        to.global = global_step(from.global, pm.pose, Eigen::Vector3d::Constant(pm.pose_variance), eps, *velocity, h);
      } else {
        to.global = from.global;
      }
      const Moments pose = system.pose_moments(to.latent);
      cur.poses.row(i) = pose.mean.transpose();
      cur.costs(i) = cost_fn(pose.mean, to.global, k);
    }
    out.diagnostics.propagations += n;
    out.diagnostics.dp_pair_evaluations +=
        viterbi_step(prev.delta, parents, cur.particles, cur.costs, det, cur.delta, cur.back_pointer);

    for (int i = 0; i < n; ++i) log_w(i) -= cur.costs(i);
    Eigen::VectorXd w;
    if (!normalize_log_weights(log_w, w))
      throw Error(ErrorKind::DegenerateWeights, "all particles have zero weight at step " + std::to_string(k));
    cur.ess = ess(w);
    out.diagnostics.ess_history.push_back(cur.ess);
    cur.ancestry.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) cur.ancestry[static_cast<size_t>(i)] = i;
    if (cfg.resampling && cur.ess < n * cfg.resample_threshold) {
      const std::vector<int> idx = systematic_resample(w, rng);
      TrellisStep r;
      r.particles.resize(static_cast<size_t>(n));
      r.poses.resize(n, big_d);
      r.costs.resize(n);
      r.delta.resize(n);
      r.back_pointer.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int src = idx[static_cast<size_t>(i)];
        r.particles[static_cast<size_t>(i)] = cur.particles[static_cast<size_t>(src)];
        r.poses.row(i) = cur.poses.row(src);
        r.costs(i) = cur.costs(src);
        r.delta(i) = cur.delta(src);
        r.back_pointer[static_cast<size_t>(i)] = cur.back_pointer[static_cast<size_t>(src)];
      }
      r.ancestry = idx;
      r.ess = cur.ess;
      r.resampled = true;
      cur = std::move(r);
      w.setConstant(1.0 / n);
      out.diagnostics.resample_steps.push_back(k);
    }
    cur.weights = w;
    log_w = w.unaryExpr([](double v) { return std::log(v); });
    if (cfg.snapshot_every > 0 && (k % cfg.snapshot_every == 0 || k == k_max)) {
      ParticleSnapshot snap{k, {}};
      for (const auto& p : cur.particles) snap.globals.push_back(p.global);
      out.snapshots.push_back(std::move(snap));
    }
    steps.push_back(std::move(cur));
  }

  const TrellisStep& last = steps.back();
  Index best = 0;
  double best_score = neg_inf;
  for (Index i = 0; i < last.delta.size(); ++i)
    if (last.delta(i) > best_score) {
      best_score = last.delta(i);
      best = i;
    }
  if (best_score == neg_inf) throw Error(ErrorKind::NoFeasiblePath, "every terminal DP score is -inf");

  out.log_posterior = best_score;
  out.path_indices.assign(static_cast<size_t>(k_max + 1), 0);
  out.path_indices[static_cast<size_t>(k_max)] = static_cast<int>(best);
  for (int k = k_max; k > 0; --k)
    out.path_indices[static_cast<size_t>(k - 1)] =
        steps[static_cast<size_t>(k)].back_pointer[static_cast<size_t>(out.path_indices[static_cast<size_t>(k)])];
  out.states.resize(static_cast<size_t>(k_max + 1));
  out.poses.resize(k_max + 1, big_d);
  out.costs.resize(k_max + 1);
  out.delta.resize(k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    const TrellisStep& s = steps[static_cast<size_t>(k)];
    const int i = out.path_indices[static_cast<size_t>(k)];
    out.states[static_cast<size_t>(k)] = s.particles[static_cast<size_t>(i)];
    out.poses.row(k) = s.poses.row(i);
    out.costs(k) = s.costs(i);
    out.delta(k) = s.delta(i);
  }
  out.final_particles = last.particles;
  if (cfg.keep_trellis) out.trellis = Trellis{std::move(steps)};
  return out;
}

}  // namespace latentplan
