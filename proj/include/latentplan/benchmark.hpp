#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latentplan/io.hpp"
#include "latentplan/lvm.hpp"
#include "latentplan/multiscale.hpp"
#include "latentplan/planner.hpp"
#include "latentplan/synth.hpp"
#include "latentplan/tasks.hpp"

namespace latentplan::bench {

struct Case {
  std::string name;
  int particles = 50;
  std::optional<LevelSchedule> schedule;  // multiscale guidance when set
};

struct Environment {
  std::string name;
  TaskFile task;
};

struct CellResult {
  bool success = false;
  double wallclock_s = 0.0;
  long long propagations = 0;
  long long dp_pairs = 0;
};

inline GeneratorSpec arena_data_spec() {
  GeneratorSpec g;
  g.kind = OracleKind::Circle;
  g.dim = 8;
  g.frames_per_cycle = 10;
  g.cycles = 3;
  g.sequences = 4;
  g.turn_amplitude = 0.6;
  g.noise_std = 0.01;
  g.frame_rate = 10.0;
  g.seed = 1;
  return g;
}

inline TrainConfig arena_train_config() {
  TrainConfig c;
  c.latent_dim = 3;
  c.iterations = 50;
  c.back_constraints = BackConstraintSpec{{{BackConstraintKind::RbfRegression, 0.0},
                                           {BackConstraintKind::PeriodicCos, 0.0},
                                           {BackConstraintKind::PeriodicSin, 0.0}}};
  c.init_channels = {2};
  return c;
}

// Walking model used by the benchmark: turning-walk circle data, yaw-rate free dimension
// plus a back-constrained phase pair.
inline LatentModel arena_model() { return train(generate(arena_data_spec()).dataset, arena_train_config()); }

inline TaskFile arena_task(bool with_obstacles) {
  TaskFile t;
  t.task.name = with_obstacles ? "env2" : "env1";
  t.task.domain = {-3.0, 3.0, 0.0, 9.0};
  t.task.goal = {{0.0, 8.0}, 0.5};
  t.task.family = CostFamily::Goal;
  t.task.weights.goal = 0.01;
  t.task.horizon = 64;
  t.task.resolution = 0.1;
  if (with_obstacles) {
    // Two discs leaving a 0.1 m corridor on the straight line to the goal.
    t.task.obstacles.emplace_back(Circle{{-1.25, 5.0}, 1.2});
    t.task.obstacles.emplace_back(Circle{{1.25, 5.0}, 1.2});
  }
  t.start_global = {0.0, 0.5, 1.5707963267948966};
  t.start_frame = 0;
  t.task.distance_field = build_distance_field(t.task, t.task.resolution);
  return t;
}

inline std::vector<Environment> arena_environments() { return {{"env1", arena_task(false)}, {"env2", arena_task(true)}}; }

inline std::vector<Case> arena_cases() {
  return {{"naive_N50", 50, std::nullopt},
          {"naive_N500", 500, std::nullopt},
          {"multiscale_N50", 50, LevelSchedule{{{8, 800}, {4, 400}, {2, 200}}}}};
}

// True when some particle's root lies in the goal circle at the final step.
inline bool any_particle_reached(const Plan& p, const Circle& goal) {
  for (const auto& s : p.final_particles)
    if (goal.contains(s.global.head<2>())) return true;
  return false;
}

template <LatentSystem S>
CellResult run_cell(const S& system, const AugmentedState& start, const Environment& env, const Case& c, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult r;
  const TaskCost cost{&env.task.task, &env.task.chain};
  PlannerConfig cfg;
  cfg.particles = c.particles;
  cfg.horizon = env.task.task.horizon;
  cfg.seed = seed;
  try {
    if (c.schedule) {
      long long props = 0;
      cfg.guidance = cascade(system, cost, start, *c.schedule, cfg.horizon, seed, {}, &props);
      r.propagations += props;
    }
    const Plan p = plan(system, cost, start, cfg);
    r.propagations += p.diagnostics.propagations;
    r.dp_pairs = p.diagnostics.dp_pair_evaluations;
    r.success = any_particle_reached(p, env.task.task.goal);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateWeights && e.kind() != ErrorKind::NoFeasiblePath) throw;
    r.success = false;
  }
  r.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace latentplan::bench
