#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "latentplan/oracle.hpp"
#include "latentplan/planner.hpp"
#include "support.hpp"

using namespace latentplan;
using testing_support::LinearSystem;

namespace {

// Quadratic pull toward (0, 3) with a forbidden half-plane x > 1.
struct ToyCost {
  double operator()(const Eigen::VectorXd& y, const Eigen::Vector3d& g, int) const {
    if (g(0) > 1.0) return std::numeric_limits<double>::infinity();
    return 0.5 * (g.head<2>() - Eigen::Vector2d(0.0, 3.0)).squaredNorm() + 0.1 * y(2) * y(2);
  }
};

AugmentedState walker_start() {
  AugmentedState s;
  s.latent = Eigen::Vector2d(0.5, -0.3);
  s.global = Eigen::Vector3d(0.0, 0.0, 1.2);
  return s;
}

// Trellis scores rebuilt from the recorded particles of a plan.
void frozen_trellis_scores(const LinearSystem& sys, const Trellis& t, Eigen::VectorXd& initial,
                           std::vector<Eigen::MatrixXd>& trans, std::vector<Eigen::VectorXd>& emit) {
  initial = t.steps[0].delta;
  trans.clear();
  emit.clear();
  for (size_t k = 1; k < t.steps.size(); ++k) {
    const auto& prev = t.steps[k - 1].particles;
    const auto& cur = t.steps[k].particles;
    Eigen::MatrixXd m(prev.size(), cur.size());
    for (size_t j = 0; j < prev.size(); ++j) {
      const ParentMoments pm = parent_moments(sys, prev[j]);
      for (size_t i = 0; i < cur.size(); ++i)
        m(static_cast<Index>(j), static_cast<Index>(i)) = transition_log_density(pm, cur[i], sys.deterministic_dims());
    }
    trans.push_back(std::move(m));
    emit.push_back(-t.steps[k].costs);
  }
}

}  // namespace

TEST(Planner, FrozenTrellisMatchesExactViterbi) {
  const LinearSystem sys = LinearSystem::walker(0.05, 0.002);
  std::mt19937_64 seeds(3);
  for (int trial = 0; trial < 20; ++trial) {
    PlannerConfig cfg;
    cfg.particles = 5 + static_cast<int>(seeds() % 20);
    cfg.horizon = 3 + static_cast<int>(seeds() % 15);
    cfg.seed = seeds();
    cfg.resampling = false;
    cfg.keep_trellis = true;
    const Plan p = plan(sys, ToyCost{}, walker_start(), cfg);
    Eigen::VectorXd initial;
    std::vector<Eigen::MatrixXd> trans;
    std::vector<Eigen::VectorXd> emit;
    frozen_trellis_scores(sys, *p.trellis, initial, trans, emit);
    const ViterbiPath v = exact_trellis_viterbi(initial, trans, emit);
    EXPECT_EQ(v.nodes, p.path_indices) << "trial " << trial;
    EXPECT_EQ(v.score, p.log_posterior) << "trial " << trial;
  }
}

TEST(Planner, SingleParticleIsTheRollout) {
  const LinearSystem sys = LinearSystem::walker();
  PlannerConfig cfg;
  cfg.particles = 1;
  cfg.horizon = 12;
  cfg.seed = 5;
  cfg.keep_trellis = true;
  const Plan p = plan(sys, ToyCost{}, walker_start(), cfg);
  double expected = 0.0;
  for (int k = 1; k <= cfg.horizon; ++k) {
    const auto& prev = p.trellis->steps[static_cast<size_t>(k - 1)].particles[0];
    const auto& cur = p.trellis->steps[static_cast<size_t>(k)].particles[0];
    EXPECT_EQ(p.states[static_cast<size_t>(k)].latent, cur.latent);
    expected += transition_log_density(parent_moments(sys, prev), cur, sys.det) - p.costs(k);
  }
  EXPECT_NEAR(p.log_posterior, expected, 1e-9 * std::abs(expected));
  for (int i : p.path_indices) EXPECT_EQ(i, 0);
}

TEST(Planner, NoiseFreeModelFollowsMeanRollout) {
  LinearSystem sys = LinearSystem::walker(0.0, 0.0);
  PlannerConfig cfg;
  cfg.particles = 8;
  cfg.horizon = 10;
  const Plan p = plan(sys, ToyCost{}, walker_start(), cfg);
  AugmentedState s = walker_start();
  for (int k = 1; k <= cfg.horizon; ++k) {
    const Eigen::VectorXd pose = sys.c * s.latent + sys.offset;
    s.global = global_step(s.global, pose, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), *sys.channels, sys.h);
    s.latent = sys.a * s.latent;
    EXPECT_LT((p.states[static_cast<size_t>(k)].latent - s.latent).norm(), 1e-14);
    EXPECT_LT((p.states[static_cast<size_t>(k)].global - s.global).norm(), 1e-14);
    for (const auto& q : p.final_particles) EXPECT_EQ(q.latent, p.final_particles[0].latent);
  }
}

TEST(Planner, DeterministicForSeed) {
  const LinearSystem sys = LinearSystem::walker();
  PlannerConfig cfg;
  cfg.particles = 40;
  cfg.horizon = 20;
  cfg.seed = 123;
  const Plan a = plan(sys, ToyCost{}, walker_start(), cfg);
  const Plan b = plan(sys, ToyCost{}, walker_start(), cfg);
  EXPECT_EQ(a.path_indices, b.path_indices);
  EXPECT_EQ(a.log_posterior, b.log_posterior);
  EXPECT_EQ(a.poses, b.poses);
  EXPECT_EQ(a.diagnostics.resample_steps, b.diagnostics.resample_steps);
}

TEST(Planner, ZeroGuidanceEqualsUnguided) {
  const LinearSystem sys = LinearSystem::walker();
  PlannerConfig cfg;
  cfg.particles = 30;
  cfg.horizon = 15;
  cfg.seed = 8;
  const Plan a = plan(sys, ToyCost{}, walker_start(), cfg);
  cfg.guidance = ControlSequence::Zero(15, 2);
  const Plan b = plan(sys, ToyCost{}, walker_start(), cfg);
  EXPECT_EQ(a.poses, b.poses);
  EXPECT_EQ(a.log_posterior, b.log_posterior);
}

TEST(Planner, GuidanceShiftsParticleMean) {
  LinearSystem sys = LinearSystem::scalar(1.0, 0.04, 0.1);
  const auto zero = [](const Eigen::VectorXd&, const Eigen::Vector3d&, int) { return 0.0; };
  PlannerConfig cfg;
  cfg.particles = 4000;
  cfg.horizon = 1;
  cfg.resampling = false;
  cfg.guidance = ControlSequence::Constant(1, 1, 5.0);
  AugmentedState s;
  s.latent = Eigen::VectorXd::Zero(1);
  const Plan p = plan(sys, zero, s, cfg);
  double mean = 0.0;
  for (const auto& q : p.final_particles) mean += q.latent(0);
  mean /= cfg.particles;
  // Offset sqrt(var) * u * h = 0.2 * 5 * 0.1.
  EXPECT_NEAR(mean, 0.1, 4.0 * 0.2 / std::sqrt(4000.0));
}

TEST(Planner, ResampledPathIsConsistent) {
  const LinearSystem sys = LinearSystem::walker(0.05, 0.002);
  PlannerConfig cfg;
  cfg.particles = 60;
  cfg.horizon = 25;
  cfg.seed = 17;
  const Plan p = plan(sys, ToyCost{}, walker_start(), cfg);
  EXPECT_FALSE(p.diagnostics.resample_steps.empty());
  double total = 0.0;
  for (int k = 1; k <= cfg.horizon; ++k) {
    const double lp = transition_log_density(parent_moments(sys, p.states[static_cast<size_t>(k - 1)]),
                                             p.states[static_cast<size_t>(k)], sys.det);
    EXPECT_GT(lp, -std::numeric_limits<double>::infinity());
    EXPECT_TRUE(std::isfinite(p.costs(k)));
    total += lp - p.costs(k);
    EXPECT_NEAR(p.delta(k), total, 1e-9 * std::max(1.0, std::abs(total)));
  }
  EXPECT_EQ(p.diagnostics.ess_history.size(), static_cast<size_t>(cfg.horizon));
  EXPECT_EQ(p.diagnostics.propagations, 60LL * 25);
  EXPECT_EQ(p.diagnostics.dp_pair_evaluations, 60LL * 60 * 25);
}

TEST(Planner, AllParticlesInCollisionReportsStep) {
  const LinearSystem sys = LinearSystem::walker();
  const auto wall = [](const Eigen::VectorXd&, const Eigen::Vector3d&, int k) {
    return k >= 4 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  PlannerConfig cfg;
  cfg.particles = 10;
  cfg.horizon = 8;
  try {
    plan(sys, wall, walker_start(), cfg);
    FAIL() << "expected DegenerateWeights";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateWeights);
    EXPECT_NE(std::string(e.what()).find("step 4"), std::string::npos) << e.what();
  }
}

TEST(Planner, InvalidConfigRejected) {
  const LinearSystem sys = LinearSystem::walker();
  PlannerConfig cfg;
  cfg.particles = 0;
  EXPECT_THROW(plan(sys, ToyCost{}, walker_start(), cfg), Error);
  cfg.particles = 5;
  cfg.resample_threshold = 0.0;
  EXPECT_THROW(plan(sys, ToyCost{}, walker_start(), cfg), Error);
}

TEST(ViterbiStep, ChildPermutationPermutesOutputs) {
  const LinearSystem sys = LinearSystem::walker(0.05, 0.002);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<ParentMoments> parents;
  std::vector<AugmentedState> children;
  for (int j = 0; j < 6; ++j) {
    AugmentedState s;
    s.latent = Eigen::Vector2d(n(rng), n(rng));
    s.global = Eigen::Vector3d(n(rng), n(rng), n(rng));
    parents.push_back(parent_moments(sys, s));
    AugmentedState c = s;
    c.latent += Eigen::Vector2d(n(rng), n(rng)) * 0.2;
    c.global += Eigen::Vector3d(n(rng), n(rng), n(rng)) * 0.05;
    children.push_back(c);
  }
  Eigen::VectorXd prev(6), costs(6);
  for (int j = 0; j < 6; ++j) {
    prev(j) = n(rng);
    costs(j) = std::abs(n(rng));
  }
  Eigen::VectorXd delta;
  std::vector<int> psi;
  viterbi_step(prev, parents, children, costs, sys.det, delta, psi);
  const std::vector<int> perm{4, 2, 0, 5, 1, 3};
  std::vector<AugmentedState> pc;
  Eigen::VectorXd pcost(6);
  for (int i = 0; i < 6; ++i) {
    pc.push_back(children[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
    pcost(i) = costs(perm[static_cast<size_t>(i)]);
  }
  Eigen::VectorXd pdelta;
  std::vector<int> ppsi;
  viterbi_step(prev, parents, pc, pcost, sys.det, pdelta, ppsi);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(pdelta(i), delta(perm[static_cast<size_t>(i)]));
    EXPECT_EQ(ppsi[static_cast<size_t>(i)], psi[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
  }
}

TEST(TransitionDensity, DeterministicDimsExcluded) {
  LinearSystem sys = LinearSystem::walker(0.1, 0.0);
  sys.det = {false, true};
  AugmentedState parent{Eigen::Vector2d(0.2, 0.4), Eigen::Vector3d::Zero()};
  const ParentMoments pm = parent_moments(sys, parent);
  AugmentedState child{pm.latent_mean, pm.global_mean};
  child.latent(1) += 10.0;
  // Only the first latent dim enters: log N(0; 0, 0.1). Pose variance zero makes the global
  // part a point mass that the child matches.
  EXPECT_NEAR(transition_log_density(pm, child, sys.det), -0.5 * std::log(2.0 * 3.14159265358979323846 * 0.1), 1e-12);
}
