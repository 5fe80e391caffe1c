#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "latentplan/multiscale.hpp"
#include "support.hpp"

using namespace latentplan;
using testing_support::LinearSystem;
using testing_support::random_matrix;

namespace {

const auto kZeroCost = [](const Eigen::VectorXd&, const Eigen::Vector3d&, int) { return 0.0; };

AugmentedState walker_start_state() {
  AugmentedState s;
  s.latent = Eigen::Vector2d(0.5, -0.3);
  s.global = Eigen::Vector3d(0.0, 0.0, 1.2);
  return s;
}

AugmentedState scalar_start(double x0) {
  AugmentedState s;
  s.latent = Eigen::VectorXd::Constant(1, x0);
  return s;
}

struct Riccati {
  double a, sigma, c;
  int horizon;

  // Minimum of sum_{k=1..K} c x_k^2 + sum_{k=0..K-1} e_k^2 / 2 with x_{k+1} = a x_k + sigma e_k.
  double optimal_cost(double x0) const {
    double p = c;
    for (int k = horizon - 1; k >= 0; --k) p = (k > 0 ? c : 0.0) + a * a * p / (1.0 + 2.0 * sigma * sigma * p);
    return p * x0 * x0;
  }

  // Same objective evaluated on the mean rollout under controls u with e_k = u_k h.
  double rollout_cost(const ControlSequence& u, double h, double x0) const {
    double x = x0, total = 0.0;
    for (int k = 0; k < horizon; ++k) {
      const double e = u(k, 0) * h;
      total += 0.5 * e * e;
      x = a * x + sigma * e;
      total += c * x * x;
    }
    return total;
  }
};

}  // namespace

TEST(LevelStepMean, SingleStepZeroControlIsPassiveMeanExactly) {
  const LinearSystem sys = LinearSystem::walker();
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x = random_matrix(2, 1, rng);
    EXPECT_EQ(level_step_mean(sys, x, Eigen::VectorXd::Zero(2), 1, sys.h), sys.latent_moments(x).mean);
  }
}

TEST(LevelStepMean, ZeroControlIsLinearExtrapolation) {
  const LinearSystem sys = LinearSystem::walker();
  const Eigen::Vector2d x(0.4, -1.1);
  for (int m : {2, 3, 8}) {
    const Eigen::VectorXd expected = x + m * (sys.a * x - x);
    EXPECT_LT((level_step_mean(sys, x, Eigen::VectorXd::Zero(2), m, sys.h) - expected).norm(), 1e-14);
  }
}

TEST(LevelStepMean, ControlEntersScaledBySqrtVariance) {
  const LinearSystem sys = LinearSystem::scalar(0.9, 0.25, 0.1);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 3.0);
  // x + 4 (0.9 - 1) + 4 * 0.5 * 3 * 0.1
  EXPECT_NEAR(level_step_mean(sys, x, u, 4, 0.1)(0), 1.0 - 0.4 + 0.6, 1e-14);
}

TEST(LevelStepMean, TwoStepsVersusOneDoubleStepIsSecondOrder) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd e0 = random_matrix(3, 3, rng);
  const Eigen::VectorXd x = random_matrix(3, 1, rng);
  double previous_ratio = -1.0;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    LinearSystem sys;
    sys.a = Eigen::MatrixXd::Identity(3, 3) + eps * e0;
    sys.c = Eigen::MatrixXd::Identity(3, 3);
    sys.offset = Eigen::VectorXd::Zero(3);
    sys.det = {false, false, false};
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd two = level_step_mean(sys, level_step_mean(sys, x, zero, 1, 0.1), zero, 1, 0.1);
    const Eigen::VectorXd one = level_step_mean(sys, x, zero, 2, 0.1);
    const double gap = (two - one).norm();
    const double bound = (eps * e0).squaredNorm() * x.norm();
    EXPECT_LE(gap, bound + 1e-15);
    const double ratio = gap / (eps * eps);
    if (previous_ratio > 0.0) EXPECT_NEAR(ratio, previous_ratio, 1e-6 * previous_ratio + 1e-9);
    previous_ratio = ratio;
  }
}

TEST(LevelStepMean, DeterministicDimsComposeMeanDynamics) {
  LinearSystem sys = LinearSystem::walker();
  sys.det = {false, true};
  const Eigen::Vector2d x(0.3, 0.8);
  const Eigen::VectorXd out = level_step_mean(sys, x, Eigen::Vector2d(1.0, 1.0), 4, sys.h);
  const Eigen::VectorXd composed = sys.a * sys.a * sys.a * sys.a * x;
  EXPECT_NEAR(out(1), composed(1), 1e-14);
  EXPECT_NEAR(out(0), x(0) + 4 * ((sys.a * x)(0) - x(0)) + 4 * std::sqrt(sys.variance) * sys.h, 1e-14);
}

TEST(LevelStepVariance, ScalesWithAggregation) {
  LinearSystem sys = LinearSystem::walker(0.037);
  sys.det = {false, true};
  for (int m : {1, 2, 4, 8}) {
    const Eigen::VectorXd v = level_step_variance(sys, Eigen::Vector2d(0.1, 0.2), m);
    EXPECT_EQ(v(0), m * 0.037);
    EXPECT_EQ(v(1), 0.0);
  }
}

TEST(StretchSubsample, RoundTrip) {
  std::mt19937_64 rng(3);
  const ControlSequence coarse = random_matrix(4, 3, rng);
  const ControlSequence full = stretch(coarse, 4);
  ASSERT_EQ(full.rows(), 16);
  for (Index k = 0; k < 16; ++k) EXPECT_EQ(full.row(k), coarse.row(k / 4));
  EXPECT_EQ(subsample(full, 4), coarse);
}

TEST(PiLevel, ZeroCostKeepsUniformWeightsAndCltBound) {
  const LinearSystem sys = LinearSystem::walker();
  const double h = sys.h;
  for (Level level : {Level{4, 800}, Level{1, 500}}) {
    const int horizon = 8;
    std::mt19937_64 rng(11);
    const ControlSequence upper = random_matrix(horizon, 2, rng);
    const PiLevelResult r = pi_level_detailed(sys, kZeroCost, walker_start_state(), upper, level, 99);
    EXPECT_TRUE(r.resample_steps.empty());
    EXPECT_LT((r.final_weights.array() - 1.0 / level.particles).abs().maxCoeff(), 1e-15);
    const double sd = 1.0 / (h * std::sqrt(static_cast<double>(level.aggregation) * level.particles));
    const ControlSequence diff = r.control - stretch(subsample(upper, level.aggregation), level.aggregation);
    EXPECT_LE(diff.cwiseAbs().maxCoeff(), 3.0 * sd);
  }
}

TEST(PiLevel, ZeroCostDeviationHasCltScale) {
  const LinearSystem sys = LinearSystem::walker();
  const Level level{1, 200};
  const int horizon = 64;
  const PiLevelResult r = pi_level_detailed(sys, kZeroCost, walker_start_state(), ControlSequence::Zero(horizon, 2), level, 5);
  const double sd = 1.0 / (sys.h * std::sqrt(200.0));
  const double rms = std::sqrt(r.level_control.squaredNorm() / static_cast<double>(r.level_control.size()));
  EXPECT_GT(rms, 0.8 * sd);
  EXPECT_LT(rms, 1.2 * sd);
}

TEST(PiLevel, SingleParticleReturnsScaledNoise) {
  const LinearSystem sys = LinearSystem::walker();
  const int m = 2;
  std::mt19937_64 rng(12);
  const ControlSequence upper = random_matrix(8, 2, rng);
  const PiLevelResult r = pi_level_detailed(sys, kZeroCost, walker_start_state(), upper, Level{m, 1}, 3);
  const ControlSequence expected = subsample(upper, m) + std::sqrt(double(m)) / (sys.h * m) * r.latent_noise[0];
  EXPECT_LT((r.level_control - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PiLevel, LiteralNormalizationDividesByN) {
  const LinearSystem sys = LinearSystem::walker();
  const auto cost = [](const Eigen::VectorXd&, const Eigen::Vector3d& g, int) { return 0.3 * g.head<2>().squaredNorm(); };
  MultiscaleOptions lit;
  lit.literal_normalization = true;
  const ControlSequence zero = ControlSequence::Zero(8, 2);
  const PiLevelResult a = pi_level_detailed(sys, cost, walker_start_state(), zero, Level{2, 50}, 4);
  const PiLevelResult b = pi_level_detailed(sys, cost, walker_start_state(), zero, Level{2, 50}, 4, lit);
  EXPECT_LT((a.level_control / 50.0 - b.level_control).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PiLevel, ResimulationReproducesStoredStates) {
  const LinearSystem sys = LinearSystem::walker(0.05, 0.01);
  const auto cost = [](const Eigen::VectorXd&, const Eigen::Vector3d& g, int) {
    return 2.0 * (g.head<2>() - Eigen::Vector2d(0.0, 1.0)).squaredNorm();
  };
  std::mt19937_64 rng(8);
  const ControlSequence upper = random_matrix(24, 2, rng);
  for (int m : {1, 2, 4}) {
    const PiLevelResult r = pi_level_detailed(sys, cost, walker_start_state(), upper, Level{m, 64}, 21);
    EXPECT_FALSE(r.resample_steps.empty()) << "M=" << m;
    const ControlSequence u_bar = subsample(upper, m);
    double worst = 0.0;
    for (size_t i = 0; i < r.trajectories.size(); ++i) {
      const auto replay = resimulate(sys, walker_start_state(), u_bar, m, r.latent_noise[i], r.global_noise[i]);
      ASSERT_EQ(replay.size(), r.trajectories[i].size());
      for (size_t k = 0; k < replay.size(); ++k) {
        worst = std::max(worst, (replay[k].latent - r.trajectories[i][k].latent).norm());
        worst = std::max(worst, (replay[k].global - r.trajectories[i][k].global).norm());
      }
    }
    EXPECT_LT(worst, 1e-10) << "M=" << m;
  }
}

TEST(PiLevel, AllParticlesInfeasibleIsDegenerate) {
  const LinearSystem sys = LinearSystem::walker();
  const auto wall = [](const Eigen::VectorXd&, const Eigen::Vector3d&, int) { return std::numeric_limits<double>::infinity(); };
  try {
    pi_level(sys, wall, walker_start_state(), ControlSequence::Zero(4, 2), Level{2, 10}, 1);
    FAIL() << "expected DegenerateWeights";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateWeights);
  }
}

TEST(PiLevel, IteratesTowardRiccatiOptimum) {
  const Riccati lq{1.0, 0.3, 0.5, 20};
  const double h = 0.1;
  const LinearSystem sys = LinearSystem::scalar(lq.a, lq.sigma * lq.sigma, h);
  const auto cost = [&](const Eigen::VectorXd& y, const Eigen::Vector3d&, int) { return lq.c * y(0) * y(0); };
  MultiscaleOptions opt;
  opt.likelihood_ratio = true;
  const double best = lq.optimal_cost(2.0);
  ControlSequence u = ControlSequence::Zero(lq.horizon, 1);
  std::vector<double> costs{lq.rollout_cost(u, h, 2.0)};
  for (int it = 0; it < 5; ++it) {
    u = pi_level(sys, cost, scalar_start(2.0), u, Level{1, 500}, 100 + it, opt);
    costs.push_back(lq.rollout_cost(u, h, 2.0));
  }
  EXPECT_LT(costs.back(), 1.1 * best);
  EXPECT_GE(costs.back(), best - 1e-9);
  EXPECT_LT(costs[1], costs[0]);
  for (size_t i = 1; i < costs.size(); ++i) EXPECT_LE(costs[i], costs[i - 1] * 1.02) << "iteration " << i;
}

TEST(Cascade, EmptyScheduleGivesZeroControl) {
  const LinearSystem sys = LinearSystem::walker();
  long long props = 0;
  const ControlSequence u = cascade(sys, kZeroCost, walker_start_state(), LevelSchedule{}, 16, 1, {}, &props);
  EXPECT_EQ(u, ControlSequence::Zero(16, 2));
  EXPECT_EQ(props, 0);
}

TEST(Cascade, SingleLevelEqualsOnePass) {
  const LinearSystem sys = LinearSystem::walker();
  const auto cost = [](const Eigen::VectorXd&, const Eigen::Vector3d& g, int) { return g.head<2>().squaredNorm(); };
  const LevelSchedule schedule{{{1, 30}}};
  const ControlSequence a = cascade(sys, cost, walker_start_state(), schedule, 8, 6);
  const ControlSequence b = pi_level(sys, cost, walker_start_state(), ControlSequence::Zero(8, 2), Level{1, 30}, level_seed(6, 0));
  EXPECT_EQ(a, b);
}

TEST(Cascade, ScheduleValidation) {
  EXPECT_THROW(LevelSchedule({{{4, 10}, {8, 10}}}).validate(16), Error);
  EXPECT_THROW(LevelSchedule({{{3, 10}}}).validate(16), Error);
  EXPECT_NO_THROW(LevelSchedule({{{8, 800}, {4, 400}, {2, 200}}}).validate(64));
  EXPECT_EQ(LevelSchedule({{{8, 800}, {4, 400}, {2, 200}}}).propagation_count(64), 800 * 8 + 400 * 16 + 200 * 32);
}

TEST(KlIdentity, GaussianShiftEqualsQuadraticControlCost) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> uh(0.01, 1.0);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int t = 0; t < 100; ++t) {
    const int d = dim(rng);
    const Eigen::MatrixXd b = random_matrix(d, d, rng) + 2.0 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd u = random_matrix(d, 1, rng);
    const Eigen::VectorXd mu = random_matrix(d, 1, rng);
    const double h = uh(rng);
    const Eigen::MatrixXd cov = b * b.transpose() * h;
    const Eigen::VectorXd m1 = mu + b * u * h;
    // KL(N(m1, S) || N(mu, S)) with equal covariances: trace and log-det terms cancel.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::VectorXd diff = m1 - mu;
    const double kl = 0.5 * (ldlt.solve(cov).trace() - d + diff.dot(ldlt.solve(diff)));
    EXPECT_NEAR(kl, 0.5 * h * u.squaredNorm(), 1e-8 * std::max(1.0, kl));
  }
}
