#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/error.hpp"

namespace latentplan {

// Finite KL-control problem: passive transitions p_k (k = 0..K-1, row-stochastic) and state
// costs q_k (k = 0..K), costs may be +inf.
struct FiniteKLMDP {
  int states = 0;
  std::vector<Eigen::MatrixXd> passive;
  std::vector<Eigen::VectorXd> costs;

  int horizon() const { return static_cast<int>(passive.size()); }

  void validate() const {
    if (states < 1) throw Error(ErrorKind::InvalidInput, "MDP needs at least one state");
    if (costs.size() != passive.size() + 1) throw Error(ErrorKind::InvalidInput, "need K+1 cost vectors for K transitions");
    for (const auto& p : passive) {
      if (p.rows() != states || p.cols() != states) throw Error(ErrorKind::InvalidInput, "transition matrix has wrong shape");
      if ((p.array() < 0.0).any()) throw Error(ErrorKind::InvalidInput, "negative transition probability");
      for (Eigen::Index r = 0; r < states; ++r)
        if (std::abs(p.row(r).sum() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidInput, "transition row does not sum to 1");
    }
    for (const auto& q : costs) {
      if (q.size() != states) throw Error(ErrorKind::InvalidInput, "cost vector has wrong length");
      if ((q.array() < 0.0).any() || q.array().isNaN().any()) throw Error(ErrorKind::InvalidInput, "costs must be >= 0");
    }
  }
};

// z_k for k = 0..K; value_k = -log z_k.
struct DesirabilityTable {
  std::vector<Eigen::VectorXd> z;

  Eigen::VectorXd value(int k) const {
    return z[static_cast<size_t>(k)].unaryExpr([](double v) { return -std::log(v); });
  }
};

namespace detail {

// exp(-q) with exp(-inf) == 0 exactly (Eigen's vectorized exp returns a denormal there).
inline Eigen::VectorXd neg_exp(const Eigen::VectorXd& q) {
  return q.unaryExpr([](double v) { return std::exp(-v); });
}

}  // namespace detail

// Backward linear Bellman recursion z_K = exp(-q_K), z_k = exp(-q_k) * (p_k z_{k+1}).
inline DesirabilityTable solve_desirability(const FiniteKLMDP& mdp, int start_state = 0) {
  mdp.validate();
  const int k_max = mdp.horizon();
  DesirabilityTable t;
  t.z.resize(static_cast<size_t>(k_max + 1));
  t.z[static_cast<size_t>(k_max)] = detail::neg_exp(mdp.costs[static_cast<size_t>(k_max)]);
  for (int k = k_max - 1; k >= 0; --k) {
    const Eigen::VectorXd next = mdp.passive[static_cast<size_t>(k)] * t.z[static_cast<size_t>(k + 1)];
    t.z[static_cast<size_t>(k)] = detail::neg_exp(mdp.costs[static_cast<size_t>(k)]).array() * next.array();
  }
  if (start_state >= 0 && start_state < mdp.states && !(t.z[0](start_state) > 0.0))
    throw Error(ErrorKind::AllZeroDesirability, "no feasible trajectory from the start state");
  return t;
}

// pi*_k(x'|x) = p_k(x'|x) z_{k+1}(x') / (p_k z_{k+1})(x). Rows of states that cannot be
// reached from start_state under pi* are left as the passive row when their denominator is 0.
inline std::vector<Eigen::MatrixXd> optimal_policy(const FiniteKLMDP& mdp, const DesirabilityTable& z,
                                                   int start_state = 0) {
  const int k_max = mdp.horizon();
  std::vector<Eigen::MatrixXd> pi(static_cast<size_t>(k_max));
  Eigen::VectorXd reach = Eigen::VectorXd::Zero(mdp.states);
  if (start_state >= 0 && start_state < mdp.states) reach(start_state) = 1.0;
  else reach.setOnes();
  for (int k = 0; k < k_max; ++k) {
    const Eigen::MatrixXd& p = mdp.passive[static_cast<size_t>(k)];
    const Eigen::VectorXd& zn = z.z[static_cast<size_t>(k + 1)];
    const Eigen::VectorXd g = p * zn;
    Eigen::MatrixXd& out = pi[static_cast<size_t>(k)];
    out.resize(mdp.states, mdp.states);
    for (int x = 0; x < mdp.states; ++x) {
      if (g(x) > 0.0) {
        out.row(x) = p.row(x).cwiseProduct(zn.transpose()) / g(x);
      } else {
        if (reach(x) > 0.0)
          throw Error(ErrorKind::DeadEndState, "state " + std::to_string(x) + " at step " + std::to_string(k) +
                                                   " has zero desirability mass ahead");
        out.row(x) = p.row(x);
      }
    }
    Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.states);
    for (int x = 0; x < mdp.states; ++x)
      if (reach(x) > 0.0) next += out.row(x).transpose();
    reach = (next.array() > 0.0).cast<double>();
  }
  return pi;
}

// Mixed-radix enumeration of x_{1:K} for a fixed x_0: index = sum_k x_k S^{k-1}.
inline std::vector<int> decode_trajectory(long long index, int states, int horizon) {
  std::vector<int> x(static_cast<size_t>(horizon));
  for (int k = 0; k < horizon; ++k) {
    x[static_cast<size_t>(k)] = static_cast<int>(index % states);
    index /= states;
  }
  return x;
}

inline long long trajectory_count(int states, int horizon) {
  long long n = 1;
  for (int k = 0; k < horizon; ++k) n *= states;
  return n;
}

// Normalized posterior over x_{1:K} proportional to exp(-q_K(x_K)) prod exp(-q_k(x_k)) p_k(x_{k+1}|x_k).
inline std::vector<double> trajectory_posterior(const FiniteKLMDP& mdp, int x0) {
  mdp.validate();
  const int k_max = mdp.horizon();
  const long long n = trajectory_count(mdp.states, k_max);
  std::vector<double> prob(static_cast<size_t>(n));
  double total = 0.0;
  for (long long t = 0; t < n; ++t) {
    const auto x = decode_trajectory(t, mdp.states, k_max);
    double w = std::exp(-mdp.costs[0](x0));
    int prev = x0;
    for (int k = 0; k < k_max; ++k) {
      const int cur = x[static_cast<size_t>(k)];
      w *= mdp.passive[static_cast<size_t>(k)](prev, cur) * std::exp(-mdp.costs[static_cast<size_t>(k + 1)](cur));
      prev = cur;
    }
    prob[static_cast<size_t>(t)] = w;
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::AllZeroDesirability, "posterior has no mass");
  for (double& p : prob) p /= total;
  return prob;
}

// Law of x_{1:K} under a Markov chain with the given transition matrices, started at x0.
inline std::vector<double> chain_law(const std::vector<Eigen::MatrixXd>& transitions, int states, int x0) {
  const int k_max = static_cast<int>(transitions.size());
  const long long n = trajectory_count(states, k_max);
  std::vector<double> prob(static_cast<size_t>(n));
  for (long long t = 0; t < n; ++t) {
    const auto x = decode_trajectory(t, states, k_max);
    double w = 1.0;
    int prev = x0;
    for (int k = 0; k < k_max; ++k) {
      w *= transitions[static_cast<size_t>(k)](prev, x[static_cast<size_t>(k)]);
      prev = x[static_cast<size_t>(k)];
    }
    prob[static_cast<size_t>(t)] = w;
  }
  return prob;
}

// Expected total cost q_K + sum_k [q_k + KL(pi_k(.|x_k) || p_k(.|x_k))] of running `policy` from x0.
inline double expected_total_cost(const FiniteKLMDP& mdp, const std::vector<Eigen::MatrixXd>& policy, int x0) {
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(mdp.states);
  dist(x0) = 1.0;
  double total = 0.0;
  auto expect_cost = [&](const Eigen::VectorXd& q) {
    double s = 0.0;
    for (int x = 0; x < mdp.states; ++x)
      if (dist(x) > 0.0) s += dist(x) * q(x);
    return s;
  };
  for (int k = 0; k < mdp.horizon(); ++k) {
    total += expect_cost(mdp.costs[static_cast<size_t>(k)]);
    const Eigen::MatrixXd& pi = policy[static_cast<size_t>(k)];
    const Eigen::MatrixXd& p = mdp.passive[static_cast<size_t>(k)];
    for (int x = 0; x < mdp.states; ++x) {
      if (!(dist(x) > 0.0)) continue;
      double kl = 0.0;
      for (int y = 0; y < mdp.states; ++y) {
        if (pi(x, y) <= 0.0) continue;
        kl += p(x, y) > 0.0 ? pi(x, y) * std::log(pi(x, y) / p(x, y)) : std::numeric_limits<double>::infinity();
      }
      total += dist(x) * kl;
    }
    dist = pi.transpose() * dist;
  }
  total += expect_cost(mdp.costs.back());
  return total;
}

// Random instance with S in [2, max_states], K in [1, max_horizon], sparse passive rows and
// costs in [0, 2] (occasionally +inf); redrawn until the start state 0 is feasible.
template <class Rng>
FiniteKLMDP random_mdp(Rng& rng, int max_states = 6, int max_horizon = 5) {
  std::uniform_int_distribution<int> states(2, max_states);
  std::uniform_int_distribution<int> horizon(1, max_horizon);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    FiniteKLMDP m;
    m.states = states(rng);
    const int k_max = horizon(rng);
    for (int k = 0; k < k_max; ++k) {
      Eigen::MatrixXd p(m.states, m.states);
      for (int r = 0; r < m.states; ++r) {
        for (int c = 0; c < m.states; ++c) p(r, c) = unit(rng) < 0.3 ? 0.0 : unit(rng);
        if (p.row(r).sum() == 0.0) p(r, r) = 1.0;
        p.row(r) /= p.row(r).sum();
      }
      m.passive.push_back(p);
    }
    for (int k = 0; k <= k_max; ++k) {
      Eigen::VectorXd q(m.states);
      for (int x = 0; x < m.states; ++x) q(x) = unit(rng) < 0.1 ? std::numeric_limits<double>::infinity() : 2.0 * unit(rng);
      q(0) = k == 0 ? 0.0 : q(0);
      m.costs.push_back(q);
    }
    try {
      solve_desirability(m, 0);
      return m;
    } catch (const Error&) {
    }
  }
}

struct DualityResidual {
  double law = 0.0;    // max |posterior - optimal chain law| over x_{1:K}
  double value = 0.0;  // max |soft value by enumeration - (-log z)| over finite entries
};

// Posterior-vs-controlled-chain identity from x0 = 0, and -log z against the exhaustive
// log-sum over all continuations of every (k, x).
inline DualityResidual duality_residual(const FiniteKLMDP& mdp) {
  const DesirabilityTable z = solve_desirability(mdp, 0);
  const auto pi = optimal_policy(mdp, z, 0);
  const auto post = trajectory_posterior(mdp, 0);
  const auto law = chain_law(pi, mdp.states, 0);
  DualityResidual r;
  for (size_t i = 0; i < post.size(); ++i) r.law = std::max(r.law, std::abs(post[i] - law[i]));
  const int k_max = mdp.horizon();
  for (int k = 0; k <= k_max; ++k) {
    const int rest = k_max - k;
    const long long n = trajectory_count(mdp.states, rest);
    for (int x = 0; x < mdp.states; ++x) {
      double total = 0.0;
      for (long long t = 0; t < n; ++t) {
        const auto path = decode_trajectory(t, mdp.states, rest);
        double w = std::exp(-mdp.costs[static_cast<size_t>(k)](x));
        int prev = x;
        for (int j = 0; j < rest; ++j) {
          const int cur = path[static_cast<size_t>(j)];
          w *= mdp.passive[static_cast<size_t>(k + j)](prev, cur) * std::exp(-mdp.costs[static_cast<size_t>(k + j + 1)](cur));
          prev = cur;
        }
        total += w;
      }
      const double zv = z.z[static_cast<size_t>(k)](x);
      if (total > 0.0 && zv > 0.0) r.value = std::max(r.value, std::abs(-std::log(total) + std::log(zv)));
      else if ((total > 0.0) != (zv > 0.0)) r.value = std::numeric_limits<double>::infinity();
    }
  }
  return r;
}

struct ViterbiPath {
  std::vector<int> nodes;  // one node index per step, k = 0..K
  double score = 0.0;
};

// Exact max-product DP over a trellis. transitions[k-1](j, i) scores the move from node j at
// step k-1 to node i at step k; emissions[k-1](i) scores node i at step k. Scores are
// log-domain extended reals (-inf allowed). Ties resolve to the lowest index.
inline ViterbiPath exact_trellis_viterbi(const Eigen::VectorXd& initial, const std::vector<Eigen::MatrixXd>& transitions,
                                         const std::vector<Eigen::VectorXd>& emissions) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const size_t k_max = transitions.size();
  if (emissions.size() != k_max) throw Error(ErrorKind::InvalidInput, "need one emission vector per transition");
  std::vector<Eigen::VectorXd> delta{initial};
  std::vector<std::vector<int>> psi(k_max);
  for (size_t k = 0; k < k_max; ++k) {
    const Eigen::MatrixXd& t = transitions[k];
    const Eigen::VectorXd& prev = delta.back();
    if (t.rows() != prev.size() || t.cols() != emissions[k].size())
      throw Error(ErrorKind::InvalidInput, "trellis dimensions do not match");
    Eigen::VectorXd cur(t.cols());
    psi[k].assign(static_cast<size_t>(t.cols()), 0);
    for (Eigen::Index i = 0; i < t.cols(); ++i) {
      double best = neg_inf;
      int arg = 0;
      for (Eigen::Index j = 0; j < t.rows(); ++j) {
        const double v = prev(j) + t(j, i);
        if (v > best) {
          best = v;
          arg = static_cast<int>(j);
        }
      }
      cur(i) = best + emissions[k](i);
      psi[k][static_cast<size_t>(i)] = arg;
    }
    delta.push_back(std::move(cur));
  }
  const Eigen::VectorXd& last = delta.back();
  double best = neg_inf;
  int arg = 0;
  for (Eigen::Index i = 0; i < last.size(); ++i)
    if (last(i) > best) {
      best = last(i);
      arg = static_cast<int>(i);
    }
  if (best == neg_inf) throw Error(ErrorKind::NoFeasiblePath, "every terminal score is -inf");
  ViterbiPath out;
  out.score = best;
  out.nodes.assign(k_max + 1, 0);
  out.nodes[k_max] = arg;
  for (size_t k = k_max; k > 0; --k) out.nodes[k - 1] = psi[k - 1][static_cast<size_t>(out.nodes[k])];
  return out;
}

}  // namespace latentplan
