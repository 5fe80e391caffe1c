#pragma once

#include <atomic>
#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "latentplan/error.hpp"

namespace latentplan {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// RBF kernel hyperparameters: k(a,b) = amplitude * exp(-inverse_lengthscale/2 |a-b|^2)
// + delta_ab / noise_precision.
struct KernelParams {
  double amplitude = 1.0;
  double inverse_lengthscale = 1.0;
  double noise_precision = 1.0;

  double noise_variance() const { return 1.0 / noise_precision; }
  // Prior variance k(x,x) including the noise term.
  double prior_variance() const { return amplitude + noise_variance(); }

  bool valid() const {
    return amplitude > 0.0 && inverse_lengthscale > 0.0 && noise_precision > 0.0 &&
           std::isfinite(amplitude) && std::isfinite(inverse_lengthscale) &&
           std::isfinite(noise_precision);
  }

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

// Count of posterior variances that came out noticeably negative before clamping.
inline std::atomic<long>& numerical_health_warnings() {
  static std::atomic<long> counter{0};
  return counter;
}

template <class A, class B>
double rbf_kernel(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const KernelParams& p,
                  bool same_index) {
  const double sq = (a - b).squaredNorm();
  double k = p.amplitude * std::exp(-0.5 * p.inverse_lengthscale * sq);
  if (same_index) k += p.noise_variance();
  return k;
}

// Noise-free part of the kernel matrix, exp term only. Rows of `rows` are inputs.
inline MatrixXd rbf_part(const MatrixXd& rows, const KernelParams& p) {
  const Index n = rows.rows();
  MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = p.amplitude;
    for (Index j = 0; j < i; ++j) {
      const double v = p.amplitude * std::exp(-0.5 * p.inverse_lengthscale * (rows.row(i) - rows.row(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Kernel matrix with its Cholesky factor. Immutable once built.
struct GramCache {
  MatrixXd gram;
  MatrixXd chol;               // lower triangular
  MatrixXd inv_times_targets;  // K^{-1} Y, empty when built without targets
  double log_det = 0.0;
  double jitter = 0.0;         // diagonal jitter that had to be added, 0 normally

  Index size() const { return gram.rows(); }

  template <class Rhs>
  MatrixXd solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    const auto l = chol.triangularView<Eigen::Lower>();
    MatrixXd tmp = l.solve(rhs);
    return l.transpose().solve(tmp);
  }

  // L^{-1} v, used for quadratic forms v^T K^{-1} v = |L^{-1} v|^2.
  template <class Rhs>
  VectorXd half_solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return chol.triangularView<Eigen::Lower>().solve(rhs);
  }

  MatrixXd inverse() const { return solve(MatrixXd::Identity(size(), size())); }
};

namespace detail {

inline bool try_cholesky(const MatrixXd& k, MatrixXd& l) {
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return false;
  l = llt.matrixL();
  for (Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
  return true;
}

}  // namespace detail

inline GramCache gram(const MatrixXd& rows, const KernelParams& p) {
  if (rows.rows() < 1) throw Error(ErrorKind::InvalidInput, "gram: need at least one row");
  GramCache c;
  c.gram = rbf_part(rows, p);
  c.gram.diagonal().array() += p.noise_variance();
  if (!c.gram.allFinite()) throw Error(ErrorKind::FactorizationFailure, "gram: non-finite kernel entries");
  if (!detail::try_cholesky(c.gram, c.chol)) {
    const double jitter = 1e-10 * c.gram.trace() / static_cast<double>(c.gram.rows());
    MatrixXd k = c.gram;
    k.diagonal().array() += jitter;
    if (!detail::try_cholesky(k, c.chol))
      throw Error(ErrorKind::FactorizationFailure, "gram: kernel matrix is not numerically positive definite");
    c.jitter = jitter;
  }
  c.log_det = 2.0 * c.chol.diagonal().array().log().sum();
  return c;
}

inline GramCache gram(const MatrixXd& rows, const KernelParams& p, const MatrixXd& targets) {
  GramCache c = gram(rows, p);
  c.inv_times_targets = c.solve(targets);
  return c;
}

struct GpPrediction {
  VectorXd mean;
  double variance = 0.0;
};

// Kernel vector k(x) against training inputs, noise term excluded.
template <class X>
VectorXd kernel_vector(const Eigen::MatrixBase<X>& xstar, const MatrixXd& train_in, const KernelParams& p) {
  VectorXd k(train_in.rows());
  for (Index i = 0; i < train_in.rows(); ++i)
    k(i) = p.amplitude * std::exp(-0.5 * p.inverse_lengthscale * (train_in.row(i).transpose() - xstar).squaredNorm());
  return k;
}

// Posterior mean targets^T K^{-1} k(x) and scalar variance k(x,x) - k^T K^{-1} k.
// k(x,x) includes the noise term. The variance is clamped at zero.
template <class X>
GpPrediction gp_posterior(const Eigen::MatrixBase<X>& xstar, const MatrixXd& train_in, const GramCache& cache,
                          const KernelParams& p, bool with_variance = true) {
  const VectorXd k = kernel_vector(xstar, train_in, p);
  GpPrediction out;
  out.mean = cache.inv_times_targets.transpose() * k;
  if (with_variance) {
    const VectorXd v = cache.half_solve(k);
    const double raw = p.prior_variance() - v.squaredNorm();
    if (raw < -1e-8 * p.prior_variance()) ++numerical_health_warnings();
    out.variance = raw > 0.0 ? raw : 0.0;
  }
  return out;
}

// Overload matching the full argument list; train_out is implied by the cache.
template <class X>
GpPrediction gp_posterior(const Eigen::MatrixBase<X>& xstar, const MatrixXd& train_in, const MatrixXd& /*train_out*/,
                          const GramCache& cache, const KernelParams& p) {
  return gp_posterior(xstar, train_in, cache, p, true);
}

}  // namespace latentplan
