#pragma once

// SVG rendering of a maze with skill-coloured trajectories. Output depends
// only on the inputs, so identical inputs give identical bytes.

#include "cesd/env.hpp"
#include "cesd/metrics.hpp"

#include <array>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cesd {

inline constexpr std::array<std::string_view, 10> kSkillPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct PlotStyle {
  double pixels_per_unit = 40.0;
  double margin = 10.0;
  double wall_width = 3.0;
  double path_width = 1.5;
  double start_radius = 5.0;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace detail

inline void write_svg(std::ostream& os, const MazeSpec& maze, const std::vector<SkillTrajectory>& trajectories, const PlotStyle& style = {}) {
  const double w = maze.bounds.width() * style.pixels_per_unit + 2 * style.margin;
  const double h = maze.bounds.height() * style.pixels_per_unit + 2 * style.margin;
  const auto px = [&](Point p) {
    return Point{style.margin + (p.x - maze.bounds.lo.x) * style.pixels_per_unit, style.margin + (maze.bounds.hi.y - p.y) * style.pixels_per_unit};
  };
  using detail::fmt2;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt2(w) << "\" height=\"" << fmt2(h) << "\" viewBox=\"0 0 " << fmt2(w)
     << ' ' << fmt2(h) << "\">\n";
  os << "<title>" << maze.name << " maze</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << fmt2(w) << "\" height=\"" << fmt2(h) << "\" fill=\"#ffffff\"/>\n";

  os << "<g id=\"trajectories\" fill=\"none\" stroke-width=\"" << fmt2(style.path_width) << "\" stroke-linejoin=\"round\">\n";
  for (const auto& t : trajectories) {
    os << "<polyline data-skill=\"" << t.skill << "\" stroke=\"" << kSkillPalette[static_cast<std::size_t>(t.skill) % kSkillPalette.size()]
       << "\" points=\"";
    for (std::size_t i = 0; i < t.states.size(); ++i) {
      const Point q = px(t.states[i]);
      os << (i ? " " : "") << fmt2(q.x) << ',' << fmt2(q.y);
    }
    os << "\"/>\n";
  }
  os << "</g>\n";

  os << "<g id=\"walls\" stroke=\"#000000\" stroke-width=\"" << fmt2(style.wall_width) << "\" stroke-linecap=\"square\">\n";
  const Point lo = px({maze.bounds.lo.x, maze.bounds.hi.y});
  os << "<rect x=\"" << fmt2(lo.x) << "\" y=\"" << fmt2(lo.y) << "\" width=\"" << fmt2(maze.bounds.width() * style.pixels_per_unit)
     << "\" height=\"" << fmt2(maze.bounds.height() * style.pixels_per_unit) << "\" fill=\"none\"/>\n";
  for (const auto& s : maze.walls) {
    const Point a = px(s.a);
    const Point b = px(s.b);
    os << "<line x1=\"" << fmt2(a.x) << "\" y1=\"" << fmt2(a.y) << "\" x2=\"" << fmt2(b.x) << "\" y2=\"" << fmt2(b.y) << "\"/>\n";
  }
  os << "</g>\n";

  const Point st = px(maze.start);
  os << "<circle id=\"start\" cx=\"" << fmt2(st.x) << "\" cy=\"" << fmt2(st.y) << "\" r=\"" << fmt2(style.start_radius)
     << "\" fill=\"#000000\"/>\n";
  os << "</svg>\n";
}

}  // namespace cesd
