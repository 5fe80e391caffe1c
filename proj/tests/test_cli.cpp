#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "latentplan/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("latentplan_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args) {
  const fs::path log = workdir() / "last_output.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && '" + std::string(LATENTPLAN_CLI) + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(workdir() / p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories((workdir() / p).parent_path());
  std::ofstream(workdir() / p, std::ios::binary) << text;
}

const std::string kOpenTask = R"({"domain":{"xmin":-3,"xmax":3,"ymin":0,"ymax":9},
  "goal":{"center":[0,8],"radius":0.5},"weights":{"goal":0.01},"horizon":24,
  "start":{"global":[0,0.5,1.5707963267948966],"frame":0}})";

const std::string kSealedTask = R"({"domain":{"xmin":-3,"xmax":3,"ymin":0,"ymax":9},
  "obstacles":[{"type":"rect","xmin":-1,"xmax":1,"ymin":1.5,"ymax":1.8},
               {"type":"rect","xmin":-1.3,"xmax":-1,"ymin":0,"ymax":1.8},
               {"type":"rect","xmin":1,"xmax":1.3,"ymin":0,"ymax":1.8}],
  "goal":{"center":[0,8],"radius":0.5},"weights":{"goal":0.01},"horizon":24,
  "start":{"global":[0,0.5,1.5707963267948966],"frame":0}})";

// Trains the shared model once; later tests reuse data/ and model/.
void ensure_model() {
  if (fs::exists(workdir() / "model/model.json")) return;
  ASSERT_EQ(run("synth-data --turn-amplitude 0.5 --cycles 3 --sequences 2 --seed 3 --out data/walk.csv").code, 0);
  ASSERT_EQ(run("train --data data/walk.csv --latent-dim 3 --iterations 15 --back-constraints rbf,periodic_cos,periodic_sin --seed 1 "
                "--out model/model.json")
                .code,
            0);
  write_file("tasks/open.json", kOpenTask);
  write_file("tasks/sealed.json", kSealedTask);
}

}  // namespace

TEST(Cli, SynthDataIsReproducibleAndWritesManifest) {
  ASSERT_EQ(run("synth-data --seed 9 --out a/walk.csv").code, 0);
  ASSERT_EQ(run("synth-data --seed 9 --out b/walk.csv").code, 0);
  EXPECT_EQ(slurp("a/walk.csv"), slurp("b/walk.csv"));
  EXPECT_FALSE(slurp("a/walk.csv").empty());
  const auto m = latentplan::json::parse(slurp("a/manifest.json"));
  EXPECT_EQ(m.at("subcommand"), "synth-data");
  EXPECT_EQ(m.at("seed"), 9);
  EXPECT_TRUE(m.contains("timings_s"));
  EXPECT_TRUE(m.contains("git_describe"));
}

TEST(Cli, TrainIsReproducible) {
  ensure_model();
  ASSERT_EQ(run("train --data data/walk.csv --latent-dim 3 --iterations 15 --back-constraints rbf,periodic_cos,periodic_sin --seed 1 "
                "--out model2/model.json --curve model2/curve.csv")
                .code,
            0);
  EXPECT_EQ(slurp("model/model.json"), slurp("model2/model.json"));
  EXPECT_TRUE(fs::exists(workdir() / "model/manifest.json"));
}

TEST(Cli, BadCsvExitsTwoWithLineNumber) {
  write_file("bad/data.csv", "seq,c0,c1,c2,c3\n0,1,2,3,4\n0,1,2,oops,4\n");
  const Result r = run("train --data bad/data.csv --out bad/model.json");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
}

TEST(Cli, MissingModelExitsTwo) {
  write_file("tasks/open.json", kOpenTask);
  EXPECT_EQ(run("plan --model nowhere/model.json --task tasks/open.json --out x/traj.csv").code, 2);
}

TEST(Cli, PlanIsReproducibleAndSvgWellFormed) {
  ensure_model();
  ASSERT_EQ(run("plan --model model/model.json --task tasks/open.json --particles 40 --seed 5 --out p1/traj.csv --svg p1/plan.svg")
                .code,
            0);
  ASSERT_EQ(run("plan --model model/model.json --task tasks/open.json --particles 40 --seed 5 --out p2/traj.csv").code, 0);
  EXPECT_EQ(slurp("p1/traj.csv"), slurp("p2/traj.csv"));
  std::istringstream csv(slurp("p1/traj.csv"));
  const auto table = latentplan::read_trajectory_csv(csv);
  EXPECT_EQ(table.globals.size(), 25u);
  const std::string svg = slurp("p1/plan.svg");
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  size_t open = 0, close = 0;
  for (size_t i = 0; i + 1 < svg.size(); ++i) {
    if (svg[i] == '<') ++open;
    if (svg[i] == '>') ++close;
  }
  EXPECT_EQ(open, close);
}

TEST(Cli, SealedBoxExitsThree) {
  ensure_model();
  const Result r = run("plan --model model/model.json --task tasks/sealed.json --particles 20 --out s/traj.csv");
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Cli, GuideThenPlanWithGuidance) {
  ensure_model();
  ASSERT_EQ(run("guide --model model/model.json --task tasks/open.json --multiscale 4:60,2:30 --seed 2 --out g/u.csv").code, 0);
  std::istringstream u(slurp("g/u.csv"));
  const auto control = latentplan::read_control_csv(u);
  EXPECT_EQ(control.rows(), 24);
  EXPECT_EQ(control.cols(), 3);
  EXPECT_EQ(run("plan --model model/model.json --task tasks/open.json --particles 20 --guidance g/u.csv --out g/traj.csv").code, 0);
  EXPECT_EQ(run("plan --model model/model.json --task tasks/open.json --particles 20 --multiscale 4:60 --out g2/traj.csv").code, 0);
}

TEST(Cli, EvalIsByteStable) {
  ensure_model();
  write_file("eval/config.json", R"({"cases":[{"name":"naive","particles":20},{"name":"ms","particles":20,"multiscale":"4:40"}],
    "environments":[{"name":"open","task":"../tasks/open.json"}],"seeds":[1,2]})");
  ASSERT_EQ(run("eval --config eval/config.json --model model/model.json --no-wallclock --out e1/summary.csv").code, 0);
  ASSERT_EQ(run("eval --config eval/config.json --model model/model.json --no-wallclock --out e2/summary.csv").code, 0);
  EXPECT_EQ(slurp("e1/summary.csv"), slurp("e2/summary.csv"));
  EXPECT_NE(slurp("e1/summary.csv").find("ms,open,"), std::string::npos);
}

TEST(Cli, VerifyDualityPasses) {
  const Result r = run("verify-duality --instances 10 --seed 4");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
}

TEST(Cli, RerunReproducesOutput) {
  ASSERT_EQ(run("synth-data --seed 12 --kind lissajous --out r/walk.csv").code, 0);
  const std::string first = slurp("r/walk.csv");
  fs::remove(workdir() / "r/walk.csv");
  ASSERT_EQ(run("rerun r/manifest.json").code, 0);
  EXPECT_EQ(slurp("r/walk.csv"), first);
}

TEST(Cli, UnknownOptionIsInputError) { EXPECT_EQ(run("plan --bogus 1").code, 2); }
