#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "latentplan/dataset.hpp"
#include "latentplan/planner.hpp"
#include "latentplan/tasks.hpp"

namespace latentplan {

// Top-down plot: domain, obstacles, goal, particle snapshots and the MAP path.
inline void write_plan_svg(std::ostream& out, const Task& task, const Plan& p, double pixels_per_meter = 60.0) {
  const Rect& d = task.domain;
  const double s = pixels_per_meter;
  const double width = (d.xmax - d.xmin) * s;
  const double height = (d.ymax - d.ymin) * s;
  auto px = [&](double x) { return csv::format((x - d.xmin) * s); };
  auto py = [&](double y) { return csv::format((d.ymax - y) * s); };
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << csv::format(width) << "\" height=\"" << csv::format(height)
      << "\" viewBox=\"0 0 " << csv::format(width) << " " << csv::format(height) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << csv::format(width) << "\" height=\"" << csv::format(height)
      << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& st : task.forbidden_strips) {
    const double lo = st.lo, hi = st.hi;
    if (st.axis == 0)
      out << "<rect x=\"" << px(lo) << "\" y=\"0\" width=\"" << csv::format((hi - lo) * s) << "\" height=\"" << csv::format(height)
          << "\" fill=\"#f4d03f\" fill-opacity=\"0.5\"/>\n";
    else
      out << "<rect x=\"0\" y=\"" << py(hi) << "\" width=\"" << csv::format(width) << "\" height=\"" << csv::format((hi - lo) * s)
          << "\" fill=\"#f4d03f\" fill-opacity=\"0.5\"/>\n";
  }
  for (const auto& o : task.obstacles) {
    if (const auto* c = std::get_if<Circle>(&o)) {
      out << "<circle cx=\"" << px(c->center.x()) << "\" cy=\"" << py(c->center.y()) << "\" r=\"" << csv::format(c->radius * s)
          << "\" fill=\"#555555\"/>\n";
    } else {
      out << "<polygon points=\"";
      bool first = true;
      for (const auto& v : std::get<Polygon>(o).vertices) {
        out << (first ? "" : " ") << px(v.x()) << "," << py(v.y());
        first = false;
      }
      out << "\" fill=\"#555555\"/>\n";
    }
  }
  out << "<circle cx=\"" << px(task.goal.center.x()) << "\" cy=\"" << py(task.goal.center.y()) << "\" r=\""
      << csv::format(task.goal.radius * s) << "\" fill=\"#2ecc71\" fill-opacity=\"0.4\" stroke=\"#27ae60\"/>\n";
  for (const auto& snap : p.snapshots) {
    out << "<g fill=\"#3498db\" fill-opacity=\"0.25\" data-step=\"" << snap.step << "\">\n";
    for (const auto& g : snap.globals)
      out << "<circle cx=\"" << px(g(0)) << "\" cy=\"" << py(g(1)) << "\" r=\"1.5\"/>\n";
    out << "</g>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (size_t k = 0; k < p.states.size(); ++k)
    out << (k ? " " : "") << px(p.states[k].global(0)) << "," << py(p.states[k].global(1));
  out << "\"/>\n";
  if (!p.states.empty())
    out << "<circle cx=\"" << px(p.states[0].global(0)) << "\" cy=\"" << py(p.states[0].global(1))
        << "\" r=\"4\" fill=\"#c0392b\"/>\n";
  out << "</svg>\n";
}

}  // namespace latentplan
