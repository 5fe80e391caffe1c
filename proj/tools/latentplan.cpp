// latentplan command-line tool. Exit codes: 0 ok, 2 input error, 3 infeasible, 4 numerical failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "latentplan/benchmark.hpp"
#include "latentplan/latentplan.hpp"

#ifndef LATENTPLAN_GIT_DESCRIBE
#define LATENTPLAN_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using namespace latentplan;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput:
    case ErrorKind::MissingPhase:
    case ErrorKind::UnreachableGoal:
      return 2;
    case ErrorKind::NoFeasiblePath:
    case ErrorKind::DegenerateWeights:
    case ErrorKind::AllZeroDesirability:
    case ErrorKind::DeadEndState:
      return 3;
    case ErrorKind::FactorizationFailure:
    case ErrorKind::NonFiniteObjective:
      return 4;
  }
  return 4;
}

class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> argv) : subcommand_(std::move(subcommand)), argv_(std::move(argv)) {}

  json& config() { return config_; }
  void seed(std::uint64_t s) { seed_ = s; }

  template <class F>
  auto phase(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      Manifest* m;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Record() { m->timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
    } rec{this, name, t0};
    return f();
  }

  void write(const fs::path& dir) const {
    json j;
    j["subcommand"] = subcommand_;
    j["argv"] = argv_;
    j["cwd"] = fs::current_path().string();
    j["config"] = config_;
    j["seed"] = seed_;
    j["git_describe"] = LATENTPLAN_GIT_DESCRIBE;
    json t = json::object();
    for (const auto& [k, v] : timings_) t[k] = v;
    j["timings_s"] = t;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write manifest in " + dir.string());
    out << j.dump(1) << "\n";
  }

 private:
  std::string subcommand_;
  std::vector<std::string> argv_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  std::map<std::string, double> timings_;
};

fs::path output_dir(const std::string& out_file) {
  fs::path dir = fs::path(out_file).parent_path();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::string& path) {
  output_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  return out;
}

LevelSchedule parse_schedule(const std::string& text) {
  LevelSchedule s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidInput, "multiscale level '" + item + "' is not M:N");
    try {
      s.levels.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidInput, "multiscale level '" + item + "' is not M:N");
    }
  }
  if (s.levels.empty()) throw Error(ErrorKind::InvalidInput, "empty multiscale schedule");
  return s;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidInput, "'" + item + "' is not an integer");
    }
  }
  return out;
}

std::optional<BackConstraintSpec> parse_back_constraint_list(const std::string& text) {
  if (text.empty() || text == "none") return std::nullopt;
  json dims = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) dims.push_back(item);
  return parse_back_constraints(dims);
}

unsigned worker_count(size_t cells) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LATENTPLAN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<size_t>(n, std::max<size_t>(cells, 1)));
}

// ---------------------------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "circle";
  GeneratorSpec spec;
  std::string out = "data.csv";
  std::string latent_out;
};

int cmd_synth(const SynthArgs& a, Manifest& man) {
  GeneratorSpec spec = a.spec;
  if (a.kind == "circle") spec.kind = OracleKind::Circle;
  else if (a.kind == "lissajous") spec.kind = OracleKind::Lissajous;
  else if (a.kind == "two-gait") spec.kind = OracleKind::TwoGait;
  else throw Error(ErrorKind::InvalidInput, "unknown oracle kind '" + a.kind + "'");
  man.seed(spec.seed);
  man.config() = {{"kind", a.kind}, {"dim", spec.dim}, {"noise_std", spec.noise_std}, {"frames_per_cycle", spec.frames_per_cycle},
                  {"cycles", spec.cycles}, {"sequences", spec.sequences}, {"turn_amplitude", spec.turn_amplitude},
                  {"base_speed", spec.base_speed}, {"frame_rate", spec.frame_rate}, {"out", a.out}, {"latent_out", a.latent_out}};
  const SyntheticData data = man.phase("generate", [&] { return generate(spec); });
  man.phase("write", [&] {
    auto out = open_out(a.out);
    write_dataset_csv(out, data.dataset);
    if (!a.latent_out.empty()) {
      auto lat = open_out(a.latent_out);
      for (Index j = 0; j < data.latent.cols(); ++j) lat << (j ? "," : "") << "z" << j;
      lat << "\n";
      for (Index i = 0; i < data.latent.rows(); ++i) {
        for (Index j = 0; j < data.latent.cols(); ++j) lat << (j ? "," : "") << csv::format(data.latent(i, j));
        lat << "\n";
      }
    }
    return 0;
  });
  man.write(output_dir(a.out));
  std::cout << "wrote " << data.dataset.frames() << " frames x " << data.dataset.channels() << " channels to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  TrainConfig config;
  std::string back_constraints = "none";
  std::string init_channels;
  std::string out = "model.json";
  std::string curve;
};

int cmd_train(TrainArgs a, Manifest& man) {
  a.config.back_constraints = parse_back_constraint_list(a.back_constraints);
  a.config.init_channels = parse_int_list(a.init_channels);
  const fs::path dir = output_dir(a.out);
  if (a.curve.empty()) a.curve = (dir / "training_curve.csv").string();
  man.seed(a.config.seed);
  man.config() = {{"data", a.data}, {"latent_dim", a.config.latent_dim}, {"iterations", a.config.iterations},
                  {"back_constraints", a.back_constraints}, {"init_channels", a.init_channels},
                  {"init_perturbation", a.config.init_perturbation}, {"out", a.out}, {"curve", a.curve}};
  const MotionDataset data = man.phase("load", [&] { return read_dataset_csv(a.data); });
  AscentReport report;
  const LatentModel model = man.phase("train", [&] { return train(data, a.config, &report); });
  man.phase("write", [&] {
    save_model(a.out, model);
    auto curve = open_out(a.curve);
    curve << "iteration,log_posterior\n";
    for (size_t i = 0; i < report.history.size(); ++i) curve << i << "," << csv::format(report.history[i]) << "\n";
    return 0;
  });
  man.write(dir);
  std::cout << "trained " << model.frames() << " frames, d=" << model.latent_dim() << ", log posterior "
            << (report.history.empty() ? 0.0 : report.history.back()) << " after " << report.iterations << " iterations\n";
  return 0;
}

struct PlanArgs {
  std::string model;
  std::string task;
  int particles = 500;
  int horizon = 0;  // 0: take the task horizon
  std::uint64_t seed = 0;
  std::string guidance;
  std::string multiscale;
  std::string out = "trajectory.csv";
  std::string svg;
  int snapshot_every = 8;
};

int cmd_plan(const PlanArgs& a, Manifest& man) {
  man.seed(a.seed);
  man.config() = {{"model", a.model}, {"task", a.task}, {"particles", a.particles}, {"horizon", a.horizon},
                  {"guidance", a.guidance}, {"multiscale", a.multiscale}, {"out", a.out}, {"svg", a.svg},
                  {"snapshot_every", a.snapshot_every}};
  const LatentModel model = man.phase("load_model", [&] { return load_model(a.model); });
  const TaskFile task = man.phase("load_task", [&] { return load_task(a.task); });
  const GpSystem system(model);
  const TaskCost cost{&task.task, &task.chain};
  const AugmentedState start = task.start_state(model);
  PlannerConfig cfg;
  cfg.particles = a.particles;
  cfg.horizon = a.horizon > 0 ? a.horizon : task.task.horizon;
  cfg.seed = a.seed;
  cfg.snapshot_every = a.snapshot_every;
  if (!a.guidance.empty() && !a.multiscale.empty())
    throw Error(ErrorKind::InvalidInput, "--guidance and --multiscale are mutually exclusive");
  if (!a.guidance.empty()) cfg.guidance = load_control(a.guidance);
  if (!a.multiscale.empty()) {
    const LevelSchedule schedule = parse_schedule(a.multiscale);
    cfg.guidance = man.phase("cascade", [&] { return cascade(system, cost, start, schedule, cfg.horizon, a.seed); });
  }
  const Plan p = man.phase("plan", [&] { return plan(system, cost, start, cfg); });
  man.phase("write", [&] {
    auto out = open_out(a.out);
    write_trajectory_csv(out, p, model.channel_names);
    if (!a.svg.empty()) {
      auto svg = open_out(a.svg);
      write_plan_svg(svg, task.task, p);
    }
    return 0;
  });
  man.write(output_dir(a.out));
  const auto& last = p.states.back().global;
  std::cout << "planned " << cfg.horizon << " steps with " << cfg.particles << " particles; log posterior "
            << p.log_posterior << "; final pose (" << last(0) << ", " << last(1) << ", " << last(2) << ")"
            << (task.task.goal.contains(last.head<2>()) ? " in goal" : "") << "\n";
  return 0;
}

struct GuideArgs {
  std::string model;
  std::string task;
  std::string multiscale = "8:800,4:400,2:200";
  int horizon = 0;
  std::uint64_t seed = 0;
  std::string out = "control.csv";
};

int cmd_guide(const GuideArgs& a, Manifest& man) {
  man.seed(a.seed);
  man.config() = {{"model", a.model}, {"task", a.task}, {"multiscale", a.multiscale}, {"horizon", a.horizon}, {"out", a.out}};
  const LatentModel model = man.phase("load_model", [&] { return load_model(a.model); });
  const TaskFile task = man.phase("load_task", [&] { return load_task(a.task); });
  const GpSystem system(model);
  const TaskCost cost{&task.task, &task.chain};
  const int horizon = a.horizon > 0 ? a.horizon : task.task.horizon;
  const LevelSchedule schedule = parse_schedule(a.multiscale);
  const ControlSequence u =
      man.phase("cascade", [&] { return cascade(system, cost, task.start_state(model), schedule, horizon, a.seed); });
  man.phase("write", [&] {
    auto out = open_out(a.out);
    write_control_csv(out, u);
    return 0;
  });
  man.write(output_dir(a.out));
  std::cout << "wrote " << u.rows() << " x " << u.cols() << " control to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string model;
  int seeds = 100;
  std::uint64_t seed = 0;
  std::string out = "results.csv";
  bool no_wallclock = false;
};

int cmd_eval(const EvalArgs& a, Manifest& man) {
  std::vector<bench::Environment> envs;
  std::vector<bench::Case> cases = bench::arena_cases();
  std::vector<std::uint64_t> seeds;
  std::string model_path = a.model;
  if (!a.config.empty()) {
    const json cfg = detail::parse_json(detail::read_file(a.config), a.config);
    const fs::path base = fs::path(a.config).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
    if (model_path.empty() && cfg.contains("model")) model_path = resolve(cfg["model"].get<std::string>());
    if (cfg.contains("environments")) {
      for (const auto& e : cfg["environments"]) {
        const json& t = e.at("task");
        envs.push_back({e.at("name").get<std::string>(),
                        t.is_string() ? load_task(resolve(t.get<std::string>())) : task_from_json(t)});
      }
    }
    if (cfg.contains("cases")) {
      cases.clear();
      for (const auto& c : cfg["cases"]) {
        bench::Case bc{c.at("name").get<std::string>(), c.value("particles", 50), std::nullopt};
        if (c.contains("multiscale")) bc.schedule = parse_schedule(c["multiscale"].get<std::string>());
        cases.push_back(bc);
      }
    }
    if (cfg.contains("seeds")) seeds = cfg["seeds"].get<std::vector<std::uint64_t>>();
  }
  if (envs.empty()) envs = bench::arena_environments();
  if (seeds.empty())
    for (int s = 0; s < a.seeds; ++s) seeds.push_back(a.seed + static_cast<std::uint64_t>(s));

  man.seed(a.seed);
  json case_list = json::array();
  for (const auto& c : cases) {
    std::string sched;
    if (c.schedule)
      for (const auto& l : c.schedule->levels) sched += (sched.empty() ? "" : ",") + std::to_string(l.aggregation) + ":" + std::to_string(l.particles);
    case_list.push_back({{"name", c.name}, {"particles", c.particles}, {"multiscale", sched}});
  }
  json env_list = json::array();
  for (const auto& e : envs) env_list.push_back({{"name", e.name}, {"task", task_to_json(e.task)}});
  man.config() = {{"config", a.config}, {"model", model_path.empty() ? "builtin-arena" : model_path}, {"seeds", seeds},
                  {"cases", case_list}, {"environments", env_list}, {"out", a.out}, {"no_wallclock", a.no_wallclock}};

  const LatentModel model = man.phase("model", [&] { return model_path.empty() ? bench::arena_model() : load_model(model_path); });
  const GpSystem system(model);

  struct Cell {
    size_t c, e, s;
  };
  std::vector<Cell> cells;
  for (size_t c = 0; c < cases.size(); ++c)
    for (size_t e = 0; e < envs.size(); ++e)
      for (size_t s = 0; s < seeds.size(); ++s) cells.push_back({c, e, s});
  std::vector<bench::CellResult> results(cells.size());
  std::vector<AugmentedState> starts;
  for (const auto& e : envs) starts.push_back(e.task.start_state(model));

  man.phase("sweep", [&] {
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (size_t i = next++; i < cells.size(); i = next++) {
        try {
          const Cell& cell = cells[i];
          results[i] = bench::run_cell(system, starts[cell.e], envs[cell.e], cases[cell.c], seeds[cell.s]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const unsigned n = worker_count(cells.size());
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return 0;
  });

  man.phase("write", [&] {
    auto out = open_out(a.out);
    out << "case,env,successes,trials,rate,mean_wallclock_s,mean_propagations,mean_dp_pairs\n";
    for (size_t c = 0; c < cases.size(); ++c)
      for (size_t e = 0; e < envs.size(); ++e) {
        int successes = 0;
        double wall = 0.0, props = 0.0, pairs = 0.0;
        for (size_t i = 0; i < cells.size(); ++i) {
          if (cells[i].c != c || cells[i].e != e) continue;
          successes += results[i].success ? 1 : 0;
          wall += results[i].wallclock_s;
          props += static_cast<double>(results[i].propagations);
          pairs += static_cast<double>(results[i].dp_pairs);
        }
        const double n = static_cast<double>(seeds.size());
        out << cases[c].name << "," << envs[e].name << "," << successes << "," << seeds.size() << ","
            << csv::format(n > 0 ? successes / n : 0.0) << "," << csv::format(a.no_wallclock || n == 0 ? 0.0 : wall / n) << ","
            << csv::format(n > 0 ? props / n : 0.0) << "," << csv::format(n > 0 ? pairs / n : 0.0) << "\n";
        std::cout << cases[c].name << " " << envs[e].name << ": " << successes << "/" << seeds.size() << "\n";
      }
    return 0;
  });
  man.write(output_dir(a.out));
  return 0;
}

struct DualityArgs {
  int instances = 20;
  std::uint64_t seed = 0;
  int max_states = 6;
  int max_horizon = 5;
  std::string out;
};

int cmd_verify_duality(const DualityArgs& a, Manifest& man) {
  if (a.instances < 0 || a.max_states < 2 || a.max_horizon < 1)
    throw Error(ErrorKind::InvalidInput, "need instances >= 0, max states >= 2 and max horizon >= 1");
  man.seed(a.seed);
  man.config() = {{"instances", a.instances}, {"max_states", a.max_states}, {"max_horizon", a.max_horizon}, {"out", a.out}};
  std::mt19937_64 rng(a.seed);
  std::ostringstream report;
  report << "instance,states,horizon,law_residual,value_residual\n";
  double worst_law = 0.0, worst_value = 0.0;
  man.phase("check", [&] {
    for (int i = 0; i < a.instances; ++i) {
      const FiniteKLMDP mdp = random_mdp(rng, a.max_states, a.max_horizon);
      const DualityResidual r = duality_residual(mdp);
      worst_law = std::max(worst_law, r.law);
      worst_value = std::max(worst_value, r.value);
      report << i << "," << mdp.states << "," << mdp.horizon() << "," << csv::format(r.law) << "," << csv::format(r.value) << "\n";
    }
    return 0;
  });
  std::cout << report.str();
  std::cout << "max law residual " << worst_law << ", max value residual " << worst_value << "\n";
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    out << report.str();
    man.write(output_dir(a.out));
  }
  const bool pass = worst_law < 1e-9 && worst_value < 1e-9;
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

int run(int argc, char** argv);

int cmd_rerun(const std::string& manifest_path) {
  const json m = detail::parse_json(detail::read_file(manifest_path), manifest_path);
  std::vector<std::string> args;
  try {
    args = m.at("argv").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("manifest lacks argv: ") + e.what());
  }
  if (args.size() < 2 || args[1] == "rerun") throw Error(ErrorKind::InvalidInput, "manifest does not describe a rerunnable command");
  const fs::path previous = fs::current_path();
  if (m.contains("cwd")) fs::current_path(m["cwd"].get<std::string>());
  std::vector<char*> ptrs;
  for (auto& s : args) ptrs.push_back(s.data());
  const int code = run(static_cast<int>(ptrs.size()), ptrs.data());
  fs::current_path(previous);
  return code;
}

int run(int argc, char** argv) {
  CLI::App app{"Latent-space motion learning and MAP trajectory planning"};
  app.require_subcommand(1);
  const std::vector<std::string> raw(argv, argv + argc);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic motion dataset CSV");
  synth->add_option("--kind", sa.kind, "circle | lissajous | two-gait")->capture_default_str();
  synth->add_option("--dim", sa.spec.dim, "Observation channels (>= 4)")->capture_default_str();
  synth->add_option("--noise", sa.spec.noise_std, "Per-channel noise std")->capture_default_str();
  synth->add_option("--frames-per-cycle", sa.spec.frames_per_cycle)->capture_default_str();
  synth->add_option("--cycles", sa.spec.cycles, "Cycles per sequence (per gait for two-gait)")->capture_default_str();
  synth->add_option("--sequences", sa.spec.sequences)->capture_default_str();
  synth->add_option("--turn-amplitude", sa.spec.turn_amplitude, "Peak yaw rate of the turn level (rad/s)")->capture_default_str();
  synth->add_option("--speed", sa.spec.base_speed, "Forward speed of the slow gait (m/s)")->capture_default_str();
  synth->add_option("--frame-rate", sa.spec.frame_rate)->capture_default_str();
  synth->add_option("--seed", sa.spec.seed)->capture_default_str();
  synth->add_option("--out", sa.out, "Dataset CSV")->capture_default_str();
  synth->add_option("--latent-out", sa.latent_out, "Optional CSV of the ground-truth oracle path");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Fit a latent dynamical model to a dataset CSV");
  trn->add_option("--data", ta.data, "Dataset CSV")->required();
  trn->add_option("--latent-dim", ta.config.latent_dim)->capture_default_str();
  trn->add_option("--iterations", ta.config.iterations)->capture_default_str();
  trn->add_option("--back-constraints", ta.back_constraints,
                  "Comma list per latent dim: rbf, periodic_cos, periodic_sin; or none")->capture_default_str();
  trn->add_option("--init-channels", ta.init_channels, "Comma list of channels initializing free dims (rest: PCA)");
  trn->add_option("--init-perturbation", ta.config.init_perturbation)->capture_default_str();
  trn->add_option("--seed", ta.config.seed)->capture_default_str();
  trn->add_option("--out", ta.out, "Model JSON")->capture_default_str();
  trn->add_option("--curve", ta.curve, "Training-curve CSV (default: next to the model)");

  PlanArgs pa;
  auto* pln = app.add_subcommand("plan", "Plan a MAP trajectory");
  pln->add_option("--model", pa.model)->required();
  pln->add_option("--task", pa.task)->required();
  pln->add_option("--particles", pa.particles)->capture_default_str();
  pln->add_option("--horizon", pa.horizon, "Steps (default: task horizon)");
  pln->add_option("--seed", pa.seed)->capture_default_str();
  pln->add_option("--guidance", pa.guidance, "Control CSV (K x d) from `guide`");
  pln->add_option("--multiscale", pa.multiscale, "Guidance schedule M:N,... coarsest first");
  pln->add_option("--out", pa.out, "Trajectory CSV")->capture_default_str();
  pln->add_option("--svg", pa.svg, "Top-down SVG plot");
  pln->add_option("--snapshot-every", pa.snapshot_every, "Particle cloud snapshot period for the plot")->capture_default_str();

  GuideArgs ga;
  auto* gde = app.add_subcommand("guide", "Run the multiscale cascade and write the guidance control CSV");
  gde->add_option("--model", ga.model)->required();
  gde->add_option("--task", ga.task)->required();
  gde->add_option("--multiscale", ga.multiscale)->capture_default_str();
  gde->add_option("--horizon", ga.horizon, "Steps (default: task horizon)");
  gde->add_option("--seed", ga.seed)->capture_default_str();
  gde->add_option("--out", ga.out)->capture_default_str();

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Success-rate sweep over cases x environments x seeds");
  evl->add_option("--config", ea.config, "Benchmark JSON (default: built-in arena)");
  evl->add_option("--model", ea.model, "Model JSON (default: train the arena model)");
  evl->add_option("--seeds", ea.seeds, "Seed count when the config lists none")->capture_default_str();
  evl->add_option("--seed", ea.seed, "First seed")->capture_default_str();
  evl->add_option("--out", ea.out)->capture_default_str();
  evl->add_flag("--no-wallclock", ea.no_wallclock, "Write 0 in the wall-clock column for byte-stable output");

  DualityArgs da;
  auto* dual = app.add_subcommand("verify-duality", "Check the control/inference duality on random finite problems");
  dual->add_option("--instances", da.instances)->capture_default_str();
  dual->add_option("--seed", da.seed)->capture_default_str();
  dual->add_option("--max-states", da.max_states)->capture_default_str();
  dual->add_option("--max-horizon", da.max_horizon)->capture_default_str();
  dual->add_option("--out", da.out, "Residual CSV");

  std::string manifest_path;
  auto* rer = app.add_subcommand("rerun", "Re-execute the command recorded in a manifest");
  rer->add_option("manifest", manifest_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rer) return cmd_rerun(manifest_path);
    const std::string name = app.get_subcommands().front()->get_name();
    Manifest man(name, raw);
    if (*synth) return cmd_synth(sa, man);
    if (*trn) return cmd_train(ta, man);
    if (*pln) return cmd_plan(pa, man);
    if (*gde) return cmd_guide(ga, man);
    if (*evl) return cmd_eval(ea, man);
    if (*dual) return cmd_verify_duality(da, man);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
