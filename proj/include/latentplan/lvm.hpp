#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "latentplan/dataset.hpp"
#include "latentplan/error.hpp"
#include "latentplan/gp.hpp"
#include "latentplan/optimize.hpp"

namespace latentplan {

enum class BackConstraintKind { RbfRegression, PeriodicCos, PeriodicSin };

struct BackConstraintDim {
  BackConstraintKind kind = BackConstraintKind::RbfRegression;
  double width = 0.0;  // kernel length; <= 0 selects the median pairwise distance
  friend bool operator==(const BackConstraintDim&, const BackConstraintDim&) = default;
};

// One entry per latent dimension; all dimensions are back-constrained when present.
struct BackConstraintSpec {
  std::vector<BackConstraintDim> dims;
  friend bool operator==(const BackConstraintSpec&, const BackConstraintSpec&) = default;
};

enum class LatentRole { Free, PeriodicPhase };

struct TrainConfig {
  int latent_dim = 2;
  int iterations = 200;
  std::optional<BackConstraintSpec> back_constraints;
  std::uint64_t seed = 0;
  // Standard deviation of the seeded perturbation added to the initial latent coordinates.
  double init_perturbation = 1e-3;
  // Optional per-dimension override: initialize free dimension j from standardized channel
  // init_channels[j] instead of the j-th principal component. -1 keeps PCA.
  std::vector<int> init_channels;
  double head_prior_variance = 1.0;
  KernelParams init_dynamics{1.0, 1.0, 100.0};
  KernelParams init_mapping{1.0, 1.0, 100.0};
  double back_constraint_ridge = 1e-3;
  double log_param_bound = 10.0;
};

// Latent coordinates, both GP hyperparameter sets and the caches needed for prediction.
// Build with make_model(); treat as immutable afterwards.
struct LatentModel {
  Eigen::MatrixXd latent;        // N x d
  Eigen::MatrixXd observations;  // N x D, mean-centered
  Eigen::VectorXd offsets;       // channel means removed from observations
  std::vector<Index> sequence_starts{0};
  KernelParams dyn_params;
  KernelParams map_params;
  std::optional<BackConstraintSpec> back_constraints;  // widths resolved
  Eigen::MatrixXd bc_weights;                          // N x d
  Eigen::VectorXd bc_bias;                             // d
  std::optional<Eigen::VectorXd> phase;
  std::vector<LatentRole> roles;
  double frame_rate = 30.0;
  std::vector<std::string> channel_names;
  double head_prior_variance = 1.0;

  // Caches.
  std::vector<Index> transition_inputs;   // row indices feeding K_X
  std::vector<Index> transition_targets;  // successor rows
  Eigen::MatrixXd dyn_inputs;
  Eigen::MatrixXd dyn_targets;
  GramCache dyn_cache;  // K_X with K_X^{-1} X_out
  GramCache map_cache;  // K_Y with K_Y^{-1} Y

  Index frames() const { return latent.rows(); }
  Index latent_dim() const { return latent.cols(); }
  Index pose_dim() const { return observations.cols(); }
  double step_seconds() const { return 1.0 / frame_rate; }
  Index sequence_end(Index s) const {
    return s + 1 < static_cast<Index>(sequence_starts.size()) ? sequence_starts[static_cast<size_t>(s + 1)] : frames();
  }

  std::optional<VelocityChannels> velocity_channels() const {
    MotionDataset probe;
    probe.observations.resize(0, pose_dim());
    probe.channel_names = channel_names;
    return probe.velocity_channels();
  }

  // Recomputes transition index lists and both Gram caches from latent and params.
  void rebuild() {
    transition_inputs.clear();
    transition_targets.clear();
    for (size_t s = 0; s < sequence_starts.size(); ++s) {
      const Index b = sequence_starts[s];
      const Index e = sequence_end(static_cast<Index>(s));
      for (Index r = b; r + 1 < e; ++r) {
        transition_inputs.push_back(r);
        transition_targets.push_back(r + 1);
      }
    }
    const Index t = static_cast<Index>(transition_inputs.size());
    dyn_inputs.resize(t, latent_dim());
    dyn_targets.resize(t, latent_dim());
    for (Index i = 0; i < t; ++i) {
      dyn_inputs.row(i) = latent.row(transition_inputs[static_cast<size_t>(i)]);
      dyn_targets.row(i) = latent.row(transition_targets[static_cast<size_t>(i)]);
    }
    dyn_cache = gram(dyn_inputs, dyn_params, dyn_targets);
    map_cache = gram(latent, map_params, observations);
  }
};

// ---------------------------------------------------------------------------------------
// Back-constraint kernels

namespace detail {

inline double median_pairwise_distance(const Eigen::MatrixXd& rows) {
  std::vector<double> d;
  const Index n = rows.rows();
  d.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) d.push_back((rows.row(i) - rows.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

inline Eigen::MatrixXd back_constraint_inputs(BackConstraintKind kind, const Eigen::MatrixXd& centered,
                                              const std::optional<Eigen::VectorXd>& phase) {
  switch (kind) {
    case BackConstraintKind::RbfRegression: return centered;
    case BackConstraintKind::PeriodicCos:
    case BackConstraintKind::PeriodicSin:
      if (!phase) throw Error(ErrorKind::MissingPhase, "periodic back-constraint requires phase data");
      return kind == BackConstraintKind::PeriodicCos ? Eigen::MatrixXd(phase->array().cos().matrix())
                                                     : Eigen::MatrixXd(phase->array().sin().matrix());
  }
  return centered;
}

}  // namespace detail

// Kernel matrix k(u_i, u_m) = exp(-|u_i - u_m|^2 / (2 width^2)) of a back-constraint dimension.
inline Eigen::MatrixXd back_constraint_gram(const BackConstraintDim& dim, const Eigen::MatrixXd& centered,
                                            const std::optional<Eigen::VectorXd>& phase) {
  const Eigen::MatrixXd u = detail::back_constraint_inputs(dim.kind, centered, phase);
  const double w = dim.width > 0.0 ? dim.width : detail::median_pairwise_distance(u);
  const Index n = u.rows();
  Eigen::MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      const double v = std::exp(-(u.row(i) - u.row(j)).squaredNorm() / (2.0 * w * w));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

inline BackConstraintSpec resolve_widths(BackConstraintSpec spec, const Eigen::MatrixXd& centered,
                                         const std::optional<Eigen::VectorXd>& phase) {
  for (auto& dim : spec.dims)
    if (dim.width <= 0.0) dim.width = detail::median_pairwise_distance(detail::back_constraint_inputs(dim.kind, centered, phase));
  return spec;
}

inline std::vector<LatentRole> roles_for(const std::optional<BackConstraintSpec>& spec, int d) {
  std::vector<LatentRole> roles(static_cast<size_t>(d), LatentRole::Free);
  if (spec)
    for (size_t j = 0; j < spec->dims.size() && j < roles.size(); ++j)
      if (spec->dims[j].kind != BackConstraintKind::RbfRegression) roles[j] = LatentRole::PeriodicPhase;
  return roles;
}

// ---------------------------------------------------------------------------------------
// Initialization

struct PcaProjection {
  Eigen::MatrixXd components;  // D x k, columns sorted by decreasing eigenvalue
  Eigen::VectorXd eigenvalues; // k leading eigenvalues of the covariance (1/N normalization)
  Eigen::MatrixXd projection;  // N x k, centered data times components
};

inline PcaProjection pca(const Eigen::MatrixXd& centered, Index k) {
  const double n = static_cast<double>(centered.rows());
  const Eigen::MatrixXd cov = centered.transpose() * centered / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Index dim = cov.rows();
  PcaProjection out;
  out.components.resize(dim, k);
  out.eigenvalues.resize(k);
  for (Index c = 0; c < k; ++c) {
    out.components.col(c) = eig.eigenvectors().col(dim - 1 - c);
    out.eigenvalues(c) = eig.eigenvalues()(dim - 1 - c);
    // Deterministic sign: largest-magnitude loading positive.
    Index arg = 0;
    out.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, c) < 0.0) out.components.col(c) *= -1.0;
  }
  out.projection = centered * out.components;
  return out;
}

// Free dimensions from principal components (or selected channels) scaled to unit variance;
// periodic dimensions from (cos phase, sin phase).
inline Eigen::MatrixXd init_latent(const MotionDataset& data, int d, const std::optional<BackConstraintSpec>& spec,
                                   const std::vector<int>& init_channels = {}) {
  if (d < 1 || d > data.channels()) throw Error(ErrorKind::InvalidInput, "latent dimension must be in [1, D]");
  if (spec && static_cast<int>(spec->dims.size()) != d)
    throw Error(ErrorKind::InvalidInput, "back-constraint spec must list one kind per latent dimension");
  const Eigen::RowVectorXd mean = data.observations.colwise().mean();
  const Eigen::MatrixXd centered = data.observations.rowwise() - mean;
  const auto roles = roles_for(spec, d);
  const Index free_count = std::count(roles.begin(), roles.end(), LatentRole::Free);
  const PcaProjection p = pca(centered, free_count);

  Eigen::MatrixXd x(data.frames(), d);
  Index next_pc = 0;
  Index free_index = 0;
  for (int j = 0; j < d; ++j) {
    if (roles[static_cast<size_t>(j)] == LatentRole::PeriodicPhase) {
      if (!data.phase) throw Error(ErrorKind::MissingPhase, "periodic latent dimensions need phase data");
      if (spec->dims[static_cast<size_t>(j)].kind == BackConstraintKind::PeriodicCos) x.col(j) = data.phase->array().cos();
      else x.col(j) = data.phase->array().sin();
      continue;
    }
    Eigen::VectorXd col;
    const int channel = free_index < static_cast<Index>(init_channels.size()) ? init_channels[static_cast<size_t>(free_index)] : -1;
    if (channel >= 0) {
      if (channel >= data.channels()) throw Error(ErrorKind::InvalidInput, "init channel out of range");
      col = centered.col(channel);
    } else {
      col = p.projection.col(next_pc++);
    }
    ++free_index;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(col.size()));
    x.col(j) = sd > 0.0 ? Eigen::VectorXd(col / sd) : col;
  }
  return x;
}

// ---------------------------------------------------------------------------------------
// MAP objective

struct ObjectiveTerms {
  double observation = 0.0;  // log p(Y | X, beta)
  double dynamics = 0.0;     // log p(X | alpha), including head priors
  double prior_alpha = 0.0;
  double prior_beta = 0.0;
  double total() const { return observation + dynamics + prior_alpha + prior_beta; }
};

inline ObjectiveTerms objective_terms(const LatentModel& m) {
  constexpr double log2pi = 1.8378770664093454836;
  const double n = static_cast<double>(m.frames());
  const double big_d = static_cast<double>(m.pose_dim());
  const double d = static_cast<double>(m.latent_dim());
  const double t = static_cast<double>(m.dyn_inputs.rows());
  ObjectiveTerms out;
  out.observation = -0.5 * n * big_d * log2pi - 0.5 * big_d * m.map_cache.log_det -
                    0.5 * m.observations.cwiseProduct(m.map_cache.inv_times_targets).sum();
  out.dynamics = -0.5 * t * d * log2pi - 0.5 * d * m.dyn_cache.log_det -
                 0.5 * m.dyn_targets.cwiseProduct(m.dyn_cache.inv_times_targets).sum();
  for (Index head : m.sequence_starts)
    out.dynamics += -0.5 * d * (log2pi + std::log(m.head_prior_variance)) -
                    0.5 * m.latent.row(head).squaredNorm() / m.head_prior_variance;
  out.prior_alpha = -(std::log(m.dyn_params.amplitude) + std::log(m.dyn_params.inverse_lengthscale) +
                      std::log(m.dyn_params.noise_precision));
  out.prior_beta = -(std::log(m.map_params.amplitude) + std::log(m.map_params.inverse_lengthscale) +
                     std::log(m.map_params.noise_precision));
  return out;
}

inline double log_map_objective(const LatentModel& m) { return objective_terms(m).total(); }

struct MapGradient {
  Eigen::MatrixXd latent;        // dL/dX, N x d
  Eigen::Vector3d log_alpha;     // dL/dlog(alpha_i)
  Eigen::Vector3d log_beta;
  Eigen::MatrixXd bc_weights;    // dL/da when back-constrained, N x d
  Eigen::VectorXd bc_bias;
};

namespace detail {

// Accumulates tr(G dK) for an RBF Gram matrix: gradient w.r.t. inputs and log-params.
inline void gram_gradient(const Eigen::MatrixXd& g, const Eigen::MatrixXd& inputs, const KernelParams& p,
                          Eigen::MatrixXd& d_inputs, Eigen::Vector3d& d_log_params) {
  const Eigen::MatrixXd kf = rbf_part(inputs, p);
  const Eigen::MatrixXd mk = g.cwiseProduct(kf);
  const Index n = inputs.rows();
  double d_len = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j)
      d_len += 2.0 * mk(i, j) * (-0.5 * p.inverse_lengthscale) * (inputs.row(i) - inputs.row(j)).squaredNorm();
  d_log_params(0) = mk.sum();
  d_log_params(1) = d_len;
  d_log_params(2) = -p.noise_variance() * g.trace();
  const Eigen::VectorXd row_sums = mk.rowwise().sum();
  d_inputs = -2.0 * p.inverse_lengthscale * (row_sums.asDiagonal() * inputs - mk * inputs);
}

}  // namespace detail

// Analytic gradient of log_map_objective. Latent gradient is always filled; when the model is
// back-constrained the chain rule through the mapping is also applied.
inline MapGradient grad_map_objective(const LatentModel& m, const std::vector<Eigen::MatrixXd>* bc_grams = nullptr) {
  MapGradient out;
  const double big_d = static_cast<double>(m.pose_dim());
  const double d = static_cast<double>(m.latent_dim());

  const Eigen::MatrixXd ky_inv = m.map_cache.inverse();
  const Eigen::MatrixXd& a = m.map_cache.inv_times_targets;
  const Eigen::MatrixXd gy = 0.5 * (a * a.transpose() - big_d * ky_inv);
  Eigen::MatrixXd dx_map;
  detail::gram_gradient(gy, m.latent, m.map_params, dx_map, out.log_beta);
  out.log_beta.array() -= 1.0;

  const Eigen::MatrixXd kx_inv = m.dyn_cache.inverse();
  const Eigen::MatrixXd& b = m.dyn_cache.inv_times_targets;
  const Eigen::MatrixXd gx = 0.5 * (b * b.transpose() - d * kx_inv);
  Eigen::MatrixXd dx_in;
  detail::gram_gradient(gx, m.dyn_inputs, m.dyn_params, dx_in, out.log_alpha);
  out.log_alpha.array() -= 1.0;

  out.latent = dx_map;
  for (size_t t = 0; t < m.transition_inputs.size(); ++t) {
    out.latent.row(m.transition_inputs[t]) += dx_in.row(static_cast<Index>(t));
    out.latent.row(m.transition_targets[t]) -= b.row(static_cast<Index>(t));
  }
  for (Index head : m.sequence_starts) out.latent.row(head) -= m.latent.row(head) / m.head_prior_variance;

  if (m.back_constraints && bc_grams) {
    out.bc_weights.resize(m.frames(), m.latent_dim());
    out.bc_bias.resize(m.latent_dim());
    for (Index j = 0; j < m.latent_dim(); ++j) {
      out.bc_weights.col(j) = (*bc_grams)[static_cast<size_t>(j)] * out.latent.col(j);
      out.bc_bias(j) = out.latent.col(j).sum();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Training

// Packs the optimized coordinates: latent (or back-constraint weights and biases), log alpha,
// log beta. Owns the fixed back-constraint kernels.
class MapProblem {
 public:
  MapProblem(LatentModel base, double log_bound) : model_(std::move(base)), log_bound_(log_bound) {
    if (model_.back_constraints) {
      for (const auto& dim : model_.back_constraints->dims)
        bc_grams_.push_back(back_constraint_gram(dim, model_.observations, model_.phase));
    }
  }

  const std::vector<Eigen::MatrixXd>& back_constraint_grams() const { return bc_grams_; }
  bool back_constrained() const { return model_.back_constraints.has_value(); }

  Index size() const {
    const Index n = model_.frames();
    const Index d = model_.latent_dim();
    return (back_constrained() ? n * d + d : n * d) + 6;
  }

  Eigen::VectorXd pack(const LatentModel& m) const {
    Eigen::VectorXd theta(size());
    Index o = 0;
    const Index n = m.frames();
    const Index d = m.latent_dim();
    if (back_constrained()) {
      for (Index j = 0; j < d; ++j) {
        theta.segment(o, n) = m.bc_weights.col(j);
        o += n;
      }
      theta.segment(o, d) = m.bc_bias;
      o += d;
    } else {
      for (Index j = 0; j < d; ++j) {
        theta.segment(o, n) = m.latent.col(j);
        o += n;
      }
    }
    theta.segment<3>(o) << std::log(m.dyn_params.amplitude), std::log(m.dyn_params.inverse_lengthscale),
        std::log(m.dyn_params.noise_precision);
    theta.segment<3>(o + 3) << std::log(m.map_params.amplitude), std::log(m.map_params.inverse_lengthscale),
        std::log(m.map_params.noise_precision);
    return theta;
  }

  // Writes theta into a model copy and rebuilds caches (may throw FactorizationFailure).
  LatentModel unpack(const Eigen::VectorXd& theta) const {
    LatentModel m = model_;
    Index o = 0;
    const Index n = m.frames();
    const Index d = m.latent_dim();
    if (back_constrained()) {
      m.bc_weights.resize(n, d);
      for (Index j = 0; j < d; ++j) {
        m.bc_weights.col(j) = theta.segment(o, n);
        o += n;
      }
      m.bc_bias = theta.segment(o, d);
      o += d;
      for (Index j = 0; j < d; ++j)
        m.latent.col(j) = bc_grams_[static_cast<size_t>(j)] * m.bc_weights.col(j) + Eigen::VectorXd::Constant(n, m.bc_bias(j));
    } else {
      for (Index j = 0; j < d; ++j) {
        m.latent.col(j) = theta.segment(o, n);
        o += n;
      }
    }
    m.dyn_params = {std::exp(theta(o)), std::exp(theta(o + 1)), std::exp(theta(o + 2))};
    m.map_params = {std::exp(theta(o + 3)), std::exp(theta(o + 4)), std::exp(theta(o + 5))};
    m.rebuild();
    return m;
  }

  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const LatentModel m = unpack(theta);
    const double value = log_map_objective(m);
    const MapGradient g = grad_map_objective(m, &bc_grams_);
    grad.resize(size());
    Index o = 0;
    const Index n = m.frames();
    const Index d = m.latent_dim();
    const Eigen::MatrixXd& coords = back_constrained() ? g.bc_weights : g.latent;
    for (Index j = 0; j < d; ++j) {
      grad.segment(o, n) = coords.col(j);
      o += n;
    }
    if (back_constrained()) {
      grad.segment(o, d) = g.bc_bias;
      o += d;
    }
    grad.segment<3>(o) = g.log_alpha;
    grad.segment<3>(o + 3) = g.log_beta;
    return value;
  }

  void project(Eigen::VectorXd& theta) const {
    theta.tail<6>() = theta.tail<6>().cwiseMax(-log_bound_).cwiseMin(log_bound_);
  }

 private:
  LatentModel model_;
  double log_bound_;
  std::vector<Eigen::MatrixXd> bc_grams_;
};

// Builds an untrained model from data and an explicit latent matrix (back-constraint weights
// fitted by ridge regression when a spec is given).
inline LatentModel make_model(const MotionDataset& data, const Eigen::MatrixXd& latent, const TrainConfig& config) {
  data.validate();
  LatentModel m;
  m.offsets = data.observations.colwise().mean().transpose();
  m.observations = data.observations.rowwise() - m.offsets.transpose();
  m.sequence_starts = data.sequence_starts;
  m.phase = data.phase;
  m.frame_rate = data.frame_rate;
  m.channel_names = data.channel_names;
  m.dyn_params = config.init_dynamics;
  m.map_params = config.init_mapping;
  m.head_prior_variance = config.head_prior_variance;
  m.roles = roles_for(config.back_constraints, static_cast<int>(latent.cols()));
  m.latent = latent;
  if (config.back_constraints) {
    m.back_constraints = resolve_widths(*config.back_constraints, m.observations, m.phase);
    const Index n = m.frames();
    m.bc_weights.resize(n, latent.cols());
    m.bc_bias.resize(latent.cols());
    for (Index j = 0; j < latent.cols(); ++j) {
      Eigen::MatrixXd k = back_constraint_gram(m.back_constraints->dims[static_cast<size_t>(j)], m.observations, m.phase);
      m.bc_bias(j) = latent.col(j).mean();
      Eigen::MatrixXd reg = k;
      reg.diagonal().array() += config.back_constraint_ridge;
      m.bc_weights.col(j) = reg.llt().solve(latent.col(j) - Eigen::VectorXd::Constant(n, m.bc_bias(j)));
      m.latent.col(j) = k * m.bc_weights.col(j) + Eigen::VectorXd::Constant(n, m.bc_bias(j));
    }
  }
  m.rebuild();
  return m;
}

inline LatentModel train(const MotionDataset& data, const TrainConfig& config, AscentReport* report = nullptr) {
  data.validate();
  Eigen::MatrixXd x0 = init_latent(data, config.latent_dim, config.back_constraints, config.init_channels);
  if (config.init_perturbation > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, config.init_perturbation);
    for (Index j = 0; j < x0.cols(); ++j)
      for (Index i = 0; i < x0.rows(); ++i) x0(i, j) += normal(rng);
  }
  LatentModel init = make_model(data, x0, config);
  if (!std::isfinite(log_map_objective(init)))
    throw Error(ErrorKind::NonFiniteObjective, "initial objective is not finite; check data scaling");
  if (config.iterations <= 0) {
    if (report) *report = AscentReport{{log_map_objective(init)}, 0, false};
    return init;
  }
  const MapProblem problem(init, config.log_param_bound);
  Eigen::VectorXd theta = problem.pack(init);
  AscentOptions opt;
  opt.iterations = config.iterations;
  AscentReport r = maximize([&](const Eigen::VectorXd& t, Eigen::VectorXd& g) { return problem.evaluate(t, g); }, theta,
                            [&](Eigen::VectorXd& t) { problem.project(t); }, opt);
  if (report) *report = r;
  return problem.unpack(theta);
}

// Mean of the mapping GP at x plus channel offsets.
template <class X>
Eigen::VectorXd reconstruct(const LatentModel& m, const Eigen::MatrixBase<X>& x) {
  return gp_posterior(x, m.latent, m.map_cache, m.map_params, false).mean + m.offsets;
}

}  // namespace latentplan
