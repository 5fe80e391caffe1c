#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "latentplan/dataset.hpp"
#include "latentplan/dynamics.hpp"
#include "latentplan/error.hpp"
#include "latentplan/lvm.hpp"
#include "latentplan/planner.hpp"
#include "latentplan/tasks.hpp"

namespace latentplan {

using json = nlohmann::ordered_json;

namespace detail {

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::MatrixXd matrix_from(const json& j, Index cols_hint = 0) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidInput, "expected a matrix (array of rows)");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : cols_hint;
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw Error(ErrorKind::InvalidInput, "ragged matrix rows");
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidInput, "expected a numeric array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

inline json to_json(const KernelParams& p) {
  return {{"amplitude", p.amplitude}, {"inverse_lengthscale", p.inverse_lengthscale}, {"noise_precision", p.noise_precision}};
}

inline KernelParams kernel_from(const json& j) {
  return {j.at("amplitude").get<double>(), j.at("inverse_lengthscale").get<double>(), j.at("noise_precision").get<double>()};
}

inline const char* kind_name(BackConstraintKind k) {
  switch (k) {
    case BackConstraintKind::RbfRegression: return "rbf";
    case BackConstraintKind::PeriodicCos: return "periodic_cos";
    case BackConstraintKind::PeriodicSin: return "periodic_sin";
  }
  return "rbf";
}

inline BackConstraintKind kind_from(const std::string& s) {
  if (s == "rbf") return BackConstraintKind::RbfRegression;
  if (s == "periodic_cos") return BackConstraintKind::PeriodicCos;
  if (s == "periodic_sin") return BackConstraintKind::PeriodicSin;
  throw Error(ErrorKind::InvalidInput, "unknown back-constraint kind '" + s + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, what + ": " + e.what());
  }
}

}  // namespace detail

inline BackConstraintSpec parse_back_constraints(const json& j) {
  BackConstraintSpec spec;
  for (const auto& d : j) {
    BackConstraintDim dim;
    if (d.is_string()) {
      dim.kind = detail::kind_from(d.get<std::string>());
    } else {
      dim.kind = detail::kind_from(d.at("kind").get<std::string>());
      dim.width = d.value("width", 0.0);
    }
    spec.dims.push_back(dim);
  }
  return spec;
}

// ---------------------------------------------------------------------------------------
// Model file

inline json model_to_json(const LatentModel& m) {
  json j;
  j["format"] = "latentplan-model";
  j["version"] = 1;
  j["frame_rate"] = m.frame_rate;
  j["channel_names"] = m.channel_names;
  j["sequence_starts"] = m.sequence_starts;
  j["head_prior_variance"] = m.head_prior_variance;
  json roles = json::array();
  for (LatentRole r : m.roles) roles.push_back(r == LatentRole::PeriodicPhase ? "periodic_phase" : "free");
  j["latent_dim_roles"] = roles;
  j["dynamics"] = detail::to_json(m.dyn_params);
  j["mapping"] = detail::to_json(m.map_params);
  j["offsets"] = detail::to_json(m.offsets);
  j["latent"] = detail::to_json(m.latent);
  j["observations_centered"] = detail::to_json(m.observations);
  j["phase"] = m.phase ? detail::to_json(*m.phase) : json(nullptr);
  if (m.back_constraints) {
    json dims = json::array();
    for (const auto& d : m.back_constraints->dims) dims.push_back({{"kind", detail::kind_name(d.kind)}, {"width", d.width}});
    j["back_constraints"] = {{"dims", dims}, {"weights", detail::to_json(m.bc_weights)}, {"bias", detail::to_json(m.bc_bias)}};
  } else {
    j["back_constraints"] = nullptr;
  }
  return j;
}

inline LatentModel model_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "latentplan-model") throw Error(ErrorKind::InvalidInput, "not a latentplan model file");
    LatentModel m;
    m.frame_rate = j.at("frame_rate").get<double>();
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    m.sequence_starts = j.at("sequence_starts").get<std::vector<Index>>();
    m.head_prior_variance = j.value("head_prior_variance", 1.0);
    m.dyn_params = detail::kernel_from(j.at("dynamics"));
    m.map_params = detail::kernel_from(j.at("mapping"));
    m.offsets = detail::vector_from(j.at("offsets"));
    m.latent = detail::matrix_from(j.at("latent"));
    m.observations = detail::matrix_from(j.at("observations_centered"), m.offsets.size());
    if (!j.at("phase").is_null()) m.phase = detail::vector_from(j.at("phase"));
    for (const auto& r : j.at("latent_dim_roles"))
      m.roles.push_back(r.get<std::string>() == "periodic_phase" ? LatentRole::PeriodicPhase : LatentRole::Free);
    const json& bc = j.at("back_constraints");
    if (!bc.is_null()) {
      m.back_constraints = parse_back_constraints(bc.at("dims"));
      m.bc_weights = detail::matrix_from(bc.at("weights"));
      m.bc_bias = detail::vector_from(bc.at("bias"));
    }
    if (m.latent.rows() != m.observations.rows() || m.observations.cols() != m.offsets.size() ||
        static_cast<Index>(m.roles.size()) != m.latent.cols() ||
        static_cast<Index>(m.channel_names.size()) != m.observations.cols())
      throw Error(ErrorKind::InvalidInput, "model file has inconsistent dimensions");
    if (!m.dyn_params.valid() || !m.map_params.valid()) throw Error(ErrorKind::InvalidInput, "model file has invalid kernel parameters");
    m.rebuild();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const LatentModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << model_to_json(m).dump(1) << "\n";
}

inline LatentModel load_model(const std::string& path) {
  return model_from_json(detail::parse_json(detail::read_file(path), path));
}

// ---------------------------------------------------------------------------------------
// Task file

struct TaskFile {
  Task task;
  KinematicChain chain;
  Eigen::Vector3d start_global = Eigen::Vector3d::Zero();
  std::optional<Eigen::VectorXd> start_latent;  // defaults to a training frame
  int start_frame = 0;

  AugmentedState start_state(const LatentModel& m) const {
    AugmentedState s;
    s.global = start_global;
    if (start_latent) {
      if (start_latent->size() != m.latent_dim()) throw Error(ErrorKind::InvalidInput, "start latent has wrong dimension");
      s.latent = *start_latent;
    } else {
      if (start_frame < 0 || start_frame >= m.frames()) throw Error(ErrorKind::InvalidInput, "start frame out of range");
      s.latent = m.latent.row(start_frame).transpose();
    }
    return s;
  }
};

inline json task_to_json(const TaskFile& t) {
  const Task& task = t.task;
  json j;
  j["name"] = task.name;
  j["domain"] = {{"xmin", task.domain.xmin}, {"xmax", task.domain.xmax}, {"ymin", task.domain.ymin}, {"ymax", task.domain.ymax}};
  json obstacles = json::array();
  for (const auto& o : task.obstacles) {
    if (const auto* c = std::get_if<Circle>(&o)) {
      obstacles.push_back({{"type", "circle"}, {"center", {c->center.x(), c->center.y()}}, {"radius", c->radius}});
    } else {
      json verts = json::array();
      for (const auto& v : std::get<Polygon>(o).vertices) verts.push_back({v.x(), v.y()});
      obstacles.push_back({{"type", "polygon"}, {"vertices", verts}});
    }
  }
  j["obstacles"] = obstacles;
  json strips = json::array();
  for (const auto& s : task.forbidden_strips) strips.push_back({{"axis", s.axis}, {"lo", s.lo}, {"hi", s.hi}});
  j["forbidden_strips"] = strips;
  j["goal"] = {{"center", {task.goal.center.x(), task.goal.center.y()}}, {"radius", task.goal.radius}};
  j["family"] = task.family == CostFamily::Goal ? "goal" : "heading";
  const CostWeights& w = task.weights;
  j["weights"] = {{"heading", w.heading}, {"lateral", w.lateral}, {"speed", w.speed}, {"desired_heading", w.desired_heading},
                  {"desired_x", w.desired_x}, {"desired_speed", w.desired_speed}, {"goal", w.goal}};
  j["horizon"] = task.horizon;
  j["resolution"] = task.resolution;
  j["speed_channel"] = task.speed_channel;
  j["chain"] = {{"link_lengths", t.chain.link_lengths}, {"joint_channels", t.chain.joint_channels},
                {"root_height_channel", t.chain.root_height_channel}};
  json start = {{"global", {t.start_global(0), t.start_global(1), t.start_global(2)}}};
  if (t.start_latent) start["latent"] = detail::to_json(*t.start_latent);
  else start["frame"] = t.start_frame;
  j["start"] = start;
  return j;
}

// Parses a task; the distance field is built for goal-family tasks.
inline TaskFile task_from_json(const json& j) {
  try {
    TaskFile t;
    Task& task = t.task;
    task.name = j.value("name", std::string("task"));
    const json& d = j.at("domain");
    task.domain = {d.at("xmin").get<double>(), d.at("xmax").get<double>(), d.at("ymin").get<double>(), d.at("ymax").get<double>()};
    if (!(task.domain.xmax > task.domain.xmin && task.domain.ymax > task.domain.ymin))
      throw Error(ErrorKind::InvalidInput, "task domain is empty");
    for (const auto& o : j.value("obstacles", json::array())) {
      const std::string type = o.at("type").get<std::string>();
      if (type == "circle") {
        const auto c = o.at("center").get<std::vector<double>>();
        if (c.size() != 2) throw Error(ErrorKind::InvalidInput, "circle center needs 2 coordinates");
        task.obstacles.emplace_back(Circle{{c[0], c[1]}, o.at("radius").get<double>()});
      } else if (type == "polygon") {
        Polygon p;
        for (const auto& v : o.at("vertices")) {
          const auto xy = v.get<std::vector<double>>();
          if (xy.size() != 2) throw Error(ErrorKind::InvalidInput, "polygon vertex needs 2 coordinates");
          p.vertices.emplace_back(xy[0], xy[1]);
        }
        if (p.vertices.size() < 3) throw Error(ErrorKind::InvalidInput, "polygon needs at least 3 vertices");
        task.obstacles.emplace_back(std::move(p));
      } else if (type == "rect") {
        const double x0 = o.at("xmin").get<double>(), x1 = o.at("xmax").get<double>();
        const double y0 = o.at("ymin").get<double>(), y1 = o.at("ymax").get<double>();
        task.obstacles.emplace_back(Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}});
      } else {
        throw Error(ErrorKind::InvalidInput, "unknown obstacle type '" + type + "'");
      }
    }
    for (const auto& s : j.value("forbidden_strips", json::array()))
      task.forbidden_strips.push_back({s.value("axis", 1), s.at("lo").get<double>(), s.at("hi").get<double>()});
    const json& g = j.at("goal");
    const auto gc = g.at("center").get<std::vector<double>>();
    if (gc.size() != 2) throw Error(ErrorKind::InvalidInput, "goal center needs 2 coordinates");
    task.goal = {{gc[0], gc[1]}, g.at("radius").get<double>()};
    const std::string family = j.value("family", std::string("goal"));
    if (family == "goal") task.family = CostFamily::Goal;
    else if (family == "heading") task.family = CostFamily::Heading;
    else throw Error(ErrorKind::InvalidInput, "unknown cost family '" + family + "'");
    if (j.contains("weights")) {
      const json& w = j["weights"];
      CostWeights& cw = task.weights;
      cw.heading = w.value("heading", cw.heading);
      cw.lateral = w.value("lateral", cw.lateral);
      cw.speed = w.value("speed", cw.speed);
      cw.desired_heading = w.value("desired_heading", cw.desired_heading);
      cw.desired_x = w.value("desired_x", cw.desired_x);
      cw.desired_speed = w.value("desired_speed", cw.desired_speed);
      cw.goal = w.value("goal", cw.goal);
    }
    task.horizon = j.value("horizon", task.horizon);
    task.resolution = j.value("resolution", task.resolution);
    task.speed_channel = j.value("speed_channel", task.speed_channel);
    if (j.contains("chain")) {
      const json& c = j["chain"];
      t.chain.link_lengths = c.value("link_lengths", std::vector<double>{});
      t.chain.joint_channels = c.value("joint_channels", std::vector<int>{});
      t.chain.root_height_channel = c.value("root_height_channel", -1);
    }
    if (j.contains("start")) {
      const json& s = j["start"];
      if (s.contains("global")) {
        const auto gs = s["global"].get<std::vector<double>>();
        if (gs.size() != 3) throw Error(ErrorKind::InvalidInput, "start global needs x, y, theta");
        t.start_global = {gs[0], gs[1], gs[2]};
      }
      if (s.contains("latent")) t.start_latent = detail::vector_from(s["latent"]);
      t.start_frame = s.value("frame", 0);
    }
    if (task.family == CostFamily::Goal) task.distance_field = build_distance_field(task, task.resolution);
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("task file: ") + e.what());
  }
}

inline TaskFile load_task(const std::string& path) {
  return task_from_json(detail::parse_json(detail::read_file(path), path));
}

inline void save_task(const std::string& path, const TaskFile& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  out << task_to_json(t).dump(1) << "\n";
}

// ---------------------------------------------------------------------------------------
// Trajectory and control CSV

inline void write_trajectory_csv(std::ostream& out, const Plan& p, const std::vector<std::string>& channel_names) {
  const Index d = p.states.empty() ? 0 : p.states[0].latent.size();
  out << "step,gx,gy,theta";
  for (Index j = 0; j < d; ++j) out << ",x" << j;
  for (Index c = 0; c < p.poses.cols(); ++c)
    out << "," << (static_cast<size_t>(c) < channel_names.size() ? channel_names[static_cast<size_t>(c)] : "y" + std::to_string(c));
  out << ",cost,delta\n";
  for (size_t k = 0; k < p.states.size(); ++k) {
    const auto& s = p.states[k];
    out << k << "," << csv::format(s.global(0)) << "," << csv::format(s.global(1)) << "," << csv::format(s.global(2));
    for (Index j = 0; j < d; ++j) out << "," << csv::format(s.latent(j));
    for (Index c = 0; c < p.poses.cols(); ++c) out << "," << csv::format(p.poses(static_cast<Index>(k), c));
    out << "," << csv::format(p.costs(static_cast<Index>(k))) << "," << csv::format(p.delta(static_cast<Index>(k))) << "\n";
  }
}

struct TrajectoryTable {
  std::vector<Eigen::Vector3d> globals;
  Eigen::MatrixXd latent;
  Eigen::MatrixXd poses;
  Eigen::VectorXd costs;
  Eigen::VectorXd delta;
};

inline TrajectoryTable read_trajectory_csv(std::istream& in) {
  std::string line;
  size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, "empty trajectory file");
  const auto header = csv::split(line);
  Index d = 0;
  while (static_cast<size_t>(4 + d) < header.size() && header[static_cast<size_t>(4 + d)] == "x" + std::to_string(d)) ++d;
  const Index big_d = static_cast<Index>(header.size()) - 4 - d - 2;
  if (header.size() < 6 || big_d < 0 || header[0] != "step") throw Error(ErrorKind::InvalidInput, "line 1: not a trajectory header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != header.size()) throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": wrong field count");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(csv::parse_double(c, line_no));
    rows.push_back(std::move(row));
  }
  TrajectoryTable t;
  const Index n = static_cast<Index>(rows.size());
  t.latent.resize(n, d);
  t.poses.resize(n, big_d);
  t.costs.resize(n);
  t.delta.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<size_t>(r)];
    t.globals.emplace_back(row[1], row[2], row[3]);
    for (Index j = 0; j < d; ++j) t.latent(r, j) = row[static_cast<size_t>(4 + j)];
    for (Index c = 0; c < big_d; ++c) t.poses(r, c) = row[static_cast<size_t>(4 + d + c)];
    t.costs(r) = row[static_cast<size_t>(4 + d + big_d)];
    t.delta(r) = row[static_cast<size_t>(5 + d + big_d)];
  }
  return t;
}

inline void write_control_csv(std::ostream& out, const ControlSequence& u) {
  for (Index j = 0; j < u.cols(); ++j) out << (j ? "," : "") << "u" << j;
  out << "\n";
  for (Index k = 0; k < u.rows(); ++k) {
    for (Index j = 0; j < u.cols(); ++j) out << (j ? "," : "") << csv::format(u(k, j));
    out << "\n";
  }
}

inline ControlSequence read_control_csv(std::istream& in) {
  std::string line;
  size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, "empty control file");
  const size_t cols = csv::split(line).size();
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != cols) throw Error(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": wrong field count");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(csv::parse_double(c, line_no));
    rows.push_back(std::move(row));
  }
  ControlSequence u(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols; ++c) u(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return u;
}

inline ControlSequence load_control(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
  return read_control_csv(in);
}

}  // namespace latentplan
