#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dynamics.hpp"
#include "latentplan/error.hpp"

namespace latentplan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rect {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool contains(const Eigen::Vector2d& p) const { return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax; }
};

struct Circle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  bool contains(const Eigen::Vector2d& p) const { return (p - center).squaredNorm() <= radius * radius; }
};

// Convex polygon, vertices in either winding order.
struct Polygon {
  std::vector<Eigen::Vector2d> vertices;
  bool contains(const Eigen::Vector2d& p) const {
    const size_t n = vertices.size();
    if (n < 3) return false;
    int sign = 0;
    for (size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d a = vertices[i];
      const Eigen::Vector2d b = vertices[(i + 1) % n];
      const double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
      if (cross == 0.0) continue;
      const int s = cross > 0.0 ? 1 : -1;
      if (sign == 0) sign = s;
      else if (s != sign) return false;
    }
    return true;
  }
};

using Obstacle = std::variant<Circle, Polygon>;

inline bool inside(const Obstacle& o, const Eigen::Vector2d& p) {
  return std::visit([&](const auto& shape) { return shape.contains(p); }, o);
}

// Ground band {p : lo <= p[axis] <= hi} that feet must not touch.
struct Strip {
  int axis = 1;
  double lo = 0.0;
  double hi = 0.0;
  bool contains(const Eigen::Vector2d& p) const { return p(axis) >= lo && p(axis) <= hi; }
};

enum class CostFamily {
  Heading,  // q_obs + w_heading (theta - theta_d)^2 + w_lateral |x - x_d| + w_speed (v - v_d)^2
  Goal,     // q_obs + q_bnd + w_goal * distance_to_goal^2
};

struct CostWeights {
  double heading = 1.0;
  double lateral = 0.01;
  double speed = 0.1;
  double desired_heading = 0.0;
  double desired_x = 0.0;
  double desired_speed = 5.0;
  double goal = 1e-5;
};

// Shortest obstacle-avoiding path length to the goal region sampled at cell centers.
struct DistanceField {
  double xmin = 0.0;
  double ymin = 0.0;
  double resolution = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;       // row-major by y, +inf on blocked/disconnected cells
  std::vector<unsigned char> blocked;

  double at(int ix, int iy) const { return values[static_cast<size_t>(iy) * static_cast<size_t>(nx) + static_cast<size_t>(ix)]; }
  bool is_blocked(int ix, int iy) const { return blocked[static_cast<size_t>(iy) * static_cast<size_t>(nx) + static_cast<size_t>(ix)] != 0; }
  Eigen::Vector2d center(int ix, int iy) const {
    return {xmin + (ix + 0.5) * resolution, ymin + (iy + 0.5) * resolution};
  }
  std::pair<int, int> cell_of(const Eigen::Vector2d& p) const {
    const int ix = std::clamp(static_cast<int>(std::floor((p.x() - xmin) / resolution)), 0, nx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((p.y() - ymin) / resolution)), 0, ny - 1);
    return {ix, iy};
  }

  // Bilinear interpolation over the finite corner values; +inf when none is finite.
  double sample(const Eigen::Vector2d& p) const {
    const double fx = std::clamp((p.x() - xmin) / resolution - 0.5, 0.0, static_cast<double>(nx - 1));
    const double fy = std::clamp((p.y() - ymin) / resolution - 0.5, 0.0, static_cast<double>(ny - 1));
    const int x0 = std::min(static_cast<int>(fx), std::max(nx - 2, 0));
    const int y0 = std::min(static_cast<int>(fy), std::max(ny - 2, 0));
    const int x1 = std::min(x0 + 1, nx - 1);
    const int y1 = std::min(y0 + 1, ny - 1);
    const double tx = fx - x0;
    const double ty = fy - y0;
    const auto [ox, oy] = cell_of(p);
    if (!std::isfinite(at(ox, oy)) && !is_blocked(ox, oy)) return kInf;  // disconnected pocket
    const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    const double v[4] = {at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1)};
    double acc = 0.0;
    double wsum = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite(v[i])) continue;
      acc += w[i] * v[i];
      wsum += w[i];
    }
    if (wsum > 0.0) return acc / wsum;
    double best = kInf;
    for (int i = 0; i < 4; ++i) best = std::min(best, v[i]);
    return best;
  }
};

struct Task {
  std::string name;
  Rect domain;
  std::vector<Obstacle> obstacles;
  std::vector<Strip> forbidden_strips;
  Circle goal;
  CostFamily family = CostFamily::Goal;
  CostWeights weights;
  int horizon = 64;
  double resolution = 0.1;
  int speed_channel = 0;  // forward-velocity channel used by the heading family
  std::optional<DistanceField> distance_field;

  bool in_obstacle(const Eigen::Vector2d& p) const {
    return std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return inside(o, p); });
  }
};

// Planar chain rooted at the global frame; joint angles are read from pose channels.
struct KinematicChain {
  std::vector<double> link_lengths;
  std::vector<int> joint_channels;
  int root_height_channel = -1;

  bool valid(Index pose_dim) const {
    if (link_lengths.size() != joint_channels.size()) return false;
    for (int c : joint_channels)
      if (c < 0 || c >= pose_dim) return false;
    return root_height_channel < pose_dim;
  }
};

// Root position followed by each link endpoint; z is the root height (0 without a channel).
inline std::vector<Eigen::Vector3d> forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& y,
                                                       const Eigen::Vector3d& g) {
  const double z = chain.root_height_channel >= 0 ? y(chain.root_height_channel) : 0.0;
  std::vector<Eigen::Vector3d> points;
  points.reserve(chain.link_lengths.size() + 1);
  Eigen::Vector2d p(g(0), g(1));
  points.emplace_back(p.x(), p.y(), z);
  double angle = g(2);
  for (size_t i = 0; i < chain.link_lengths.size(); ++i) {
    angle += y(chain.joint_channels[i]);
    p += chain.link_lengths[i] * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    points.emplace_back(p.x(), p.y(), z);
  }
  return points;
}

// Task cost q_k(y, g) as an extended real; +inf marks collision, leaving the domain, or a
// position from which the goal cannot be reached.
inline double cost(const Task& task, const KinematicChain& chain, const Eigen::VectorXd& y, const Eigen::Vector3d& g,
                   int /*step*/) {
  const Eigen::Vector2d root(g(0), g(1));
  if (!task.domain.contains(root)) return kInf;
  const auto points = forward_kinematics(chain, y, g);
  for (const auto& p : points)
    if (task.in_obstacle(p.head<2>())) return kInf;
  if (!task.forbidden_strips.empty() && !chain.link_lengths.empty()) {
    const Eigen::Vector2d foot = points.back().head<2>();
    for (const auto& s : task.forbidden_strips)
      if (s.contains(foot)) return kInf;
  }
  const CostWeights& w = task.weights;
  if (task.family == CostFamily::Heading) {
    const double dtheta = wrap_angle(g(2) - w.desired_heading);
    const double dv = y(task.speed_channel) - w.desired_speed;
    return w.heading * dtheta * dtheta + w.lateral * std::abs(g(0) - w.desired_x) + w.speed * dv * dv;
  }
  if (!task.distance_field) return 0.0;
  const double d = task.distance_field->sample(root);
  if (!std::isfinite(d)) return kInf;
  return w.goal * d * d;
}

// Cost callable bound to a task and chain, as consumed by the planner.
struct TaskCost {
  const Task* task;
  const KinematicChain* chain;
  double operator()(const Eigen::VectorXd& y, const Eigen::Vector3d& g, int k) const { return cost(*task, *chain, y, g, k); }
};

namespace detail {

inline bool line_of_sight(const DistanceField& f, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(4.0 * len / f.resolution)));
  for (int s = 0; s <= steps; ++s) {
    const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(s) / steps);
    const auto [ix, iy] = f.cell_of(p);
    if (f.is_blocked(ix, iy)) return false;
  }
  return true;
}

}  // namespace detail

// 8-connected Dijkstra over cell centers with any-angle parent shortcuts: a neighbor may
// attach to its predecessor's parent when the straight segment is obstacle-free. Cells whose
// center lies in the goal circle are sources with value 0.
inline DistanceField build_distance_field(const Task& task, double resolution) {
  if (resolution <= 0.0) throw Error(ErrorKind::InvalidInput, "distance field resolution must be positive");
  DistanceField f;
  f.xmin = task.domain.xmin;
  f.ymin = task.domain.ymin;
  f.resolution = resolution;
  f.nx = std::max(1, static_cast<int>(std::ceil((task.domain.xmax - task.domain.xmin) / resolution)));
  f.ny = std::max(1, static_cast<int>(std::ceil((task.domain.ymax - task.domain.ymin) / resolution)));
  const size_t cells = static_cast<size_t>(f.nx) * static_cast<size_t>(f.ny);
  f.values.assign(cells, kInf);
  f.blocked.assign(cells, 0);
  auto idx = [&](int ix, int iy) { return static_cast<size_t>(iy) * static_cast<size_t>(f.nx) + static_cast<size_t>(ix); };
  for (int iy = 0; iy < f.ny; ++iy)
    for (int ix = 0; ix < f.nx; ++ix)
      f.blocked[idx(ix, iy)] = task.in_obstacle(f.center(ix, iy)) ? 1 : 0;

  std::vector<size_t> parent(cells, cells);
  using Entry = std::pair<double, size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  int sources = 0;
  for (int iy = 0; iy < f.ny; ++iy)
    for (int ix = 0; ix < f.nx; ++ix) {
      const size_t i = idx(ix, iy);
      if (!f.blocked[i] && task.goal.contains(f.center(ix, iy))) {
        f.values[i] = 0.0;
        parent[i] = i;
        open.emplace(0.0, i);
        ++sources;
      }
    }
  if (sources == 0) {
    const auto [ix, iy] = f.cell_of(task.goal.center);
    const size_t i = idx(ix, iy);
    if (!f.blocked[i]) {
      f.values[i] = std::max(0.0, (f.center(ix, iy) - task.goal.center).norm() - task.goal.radius);
      parent[i] = i;
      open.emplace(f.values[i], i);
      ++sources;
    }
  }
  if (sources == 0) throw Error(ErrorKind::UnreachableGoal, "goal region lies entirely inside obstacles");

  auto pos = [&](size_t i) { return f.center(static_cast<int>(i % static_cast<size_t>(f.nx)), static_cast<int>(i / static_cast<size_t>(f.nx))); };
  std::vector<unsigned char> closed(cells, 0);
  size_t reached = 0;
  while (!open.empty()) {
    const auto [value, i] = open.top();
    open.pop();
    if (closed[i] || value > f.values[i]) continue;
    closed[i] = 1;
    ++reached;
    const int ix = static_cast<int>(i % static_cast<size_t>(f.nx));
    const int iy = static_cast<int>(i / static_cast<size_t>(f.nx));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int jx = ix + dx;
        const int jy = iy + dy;
        if (jx < 0 || jy < 0 || jx >= f.nx || jy >= f.ny) continue;
        const size_t j = idx(jx, jy);
        if (f.blocked[j] || closed[j]) continue;
        if (dx != 0 && dy != 0 && (f.blocked[idx(ix + dx, iy)] || f.blocked[idx(ix, iy + dy)])) continue;
        const Eigen::Vector2d pj = pos(j);
        size_t via = i;
        double cand = f.values[i] + (pj - pos(i)).norm();
        const size_t pi = parent[i];
        if (pi != i && detail::line_of_sight(f, pos(pi), pj)) {
          const double alt = f.values[pi] + (pj - pos(pi)).norm();
          if (alt <= cand) {
            cand = alt;
            via = pi;
          }
        }
        if (cand < f.values[j]) {
          f.values[j] = cand;
          parent[j] = via;
          open.emplace(cand, j);
        }
      }
  }
  size_t free_cells = 0;
  for (size_t i = 0; i < cells; ++i) free_cells += f.blocked[i] ? 0 : 1;
  if (reached == static_cast<size_t>(sources) && free_cells > reached)
    throw Error(ErrorKind::UnreachableGoal, "goal region is sealed off from the free space");
  return f;
}

}  // namespace latentplan
