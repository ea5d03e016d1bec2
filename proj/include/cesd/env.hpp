#pragma once

// Continuous 2D point-mass mazes.
//
// The agent observes its position and moves by at most `action_scale` per
// axis each step. Walls are zero-thickness segments; a move that would cross
// a wall or leave the bounds stops just short of the first contact.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cesd {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }

struct Segment {
  Point a;
  Point b;
};

struct Rect {
  Point lo;
  Point hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double diagonal() const { return std::hypot(width(), height()); }
  bool contains(Point p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
  bool strictly_contains(Point p) const { return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y; }
};

struct MazeSpec {
  std::string name;
  Rect bounds;
  std::vector<Segment> walls;
  Point start;
  double action_scale = 0.25;
  int horizon = 50;
};

struct EnvState {
  Point position;
  int step_count = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState state;
  bool collided = false;
  bool done = false;
};

inline constexpr double kCollisionMargin = 1e-3;
inline constexpr double kDefaultActionScale = 0.25;
inline constexpr int kDefaultHorizon = 50;

namespace detail {

// Earliest parameter t in [0,1] at which p + t*d touches segment w, or +inf.
inline double first_contact(Point p, Point d, const Segment& w) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Point s = w.b - w.a;
  const Point qp = w.a - p;
  const double denom = cross(d, s);
  const double dd = dot(d, d);
  if (dd == 0.0) return inf;
  if (std::abs(denom) <= 1e-14 * std::sqrt(dd * dot(s, s))) {
    // parallel; only collinear overlap counts
    if (std::abs(cross(qp, d)) > 1e-12 * std::sqrt(dd)) return inf;
    double t0 = dot(w.a - p, d) / dd;
    double t1 = dot(w.b - p, d) / dd;
    if (t0 > t1) std::swap(t0, t1);
    const double lo = std::max(t0, 0.0);
    const double hi = std::min(t1, 1.0);
    return lo <= hi ? lo : inf;
  }
  const double t = cross(qp, s) / denom;
  const double u = cross(qp, d) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return inf;
  return t;
}

inline std::array<Segment, 4> boundary_edges(const Rect& r) {
  return {Segment{{r.lo.x, r.lo.y}, {r.hi.x, r.lo.y}}, Segment{{r.hi.x, r.lo.y}, {r.hi.x, r.hi.y}},
          Segment{{r.hi.x, r.hi.y}, {r.lo.x, r.hi.y}}, Segment{{r.lo.x, r.hi.y}, {r.lo.x, r.lo.y}}};
}

inline double distance_to_segment(Point p, const Segment& w) {
  const Point s = w.b - w.a;
  const double ss = dot(s, s);
  double t = ss > 0.0 ? dot(p - w.a, s) / ss : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (w.a + t * s));
}

}  // namespace detail

/// True when the open path p -> q touches any wall or boundary edge.
inline bool path_blocked(const MazeSpec& spec, Point p, Point q) {
  const Point d = q - p;
  for (const auto& w : spec.walls)
    if (std::isfinite(detail::first_contact(p, d, w))) return true;
  for (const auto& e : detail::boundary_edges(spec.bounds))
    if (std::isfinite(detail::first_contact(p, d, e))) return true;
  return false;
}

inline bool on_wall(const MazeSpec& spec, Point p, double tolerance = 0.0) {
  return std::any_of(spec.walls.begin(), spec.walls.end(),
                     [&](const Segment& w) { return detail::distance_to_segment(p, w) <= tolerance; });
}

inline void validate(const MazeSpec& spec) {
  const auto fail = [&](const std::string& what) { throw std::invalid_argument("maze '" + spec.name + "': " + what); };
  if (!(spec.bounds.width() > 0.0 && spec.bounds.height() > 0.0)) fail("bounds must have positive extent");
  if (!(spec.action_scale > 0.0)) fail("action_scale must be > 0");
  if (spec.horizon < 1) fail("horizon must be >= 1");
  if (!spec.bounds.strictly_contains(spec.start)) fail("start must lie strictly inside bounds");
  if (on_wall(spec, spec.start, kCollisionMargin)) fail("start lies on a wall");
  for (const auto& w : spec.walls)
    if (!spec.bounds.contains(w.a) || !spec.bounds.contains(w.b)) fail("wall outside bounds");
}

namespace detail {

// Square maze, 10x10 world units. S = start.
//
//  10 +-------------------+-------------------+
//     |  S                |                   |
//     |                   |                   |
//   7 |        +----------+----------+        |
//     |        |                     |        |
//     |        |                     |        |
//     |        |                     |        |
//   3 |        +---------------------+        |
//     |                                       |
// 1.5 |                   |                   |
//   0 +-------------------+-------------------+
//     0        3          5          7       10
//
// A U-shaped box open at the top, split from above by a wall hanging from the
// top edge, plus a short stub rising from the bottom edge.
inline MazeSpec square_maze() {
  MazeSpec m;
  m.name = "square";
  m.bounds = {{0.0, 0.0}, {10.0, 10.0}};
  m.walls = {
      {{3.0, 3.0}, {3.0, 7.0}},  {{3.0, 3.0}, {7.0, 3.0}}, {{7.0, 3.0}, {7.0, 7.0}},
      {{5.0, 7.0}, {5.0, 10.0}}, {{5.0, 0.0}, {5.0, 1.5}},
  };
  m.start = {1.0, 9.0};
  return m;
}

// Tree maze, 10x10 world units: an open crown at the top feeding a three-level
// binary branching of corridors (2 -> 4 -> 8 leaves).
//
//  10 +---------------------------------------+
//     |                   S                   |
//   7 |----------------+     +----------------|
//     |                                       |
//   6 |                   |                   |
//   4 |-----+     +-------|-------+     +-----|
//   3 |         |         |         |         |
//   2 |-+  +--  |  --+  +-|-+  +--  |  --+  +-|
//   1 |    |    |    |    |    |    |    |    |
//   0 +---------------------------------------+
//     0   1.25 2.5 3.75   5  6.25  7.5 8.75  10
inline MazeSpec tree_maze() {
  MazeSpec m;
  m.name = "tree";
  m.bounds = {{0.0, 0.0}, {10.0, 10.0}};
  m.walls = {
      // crown floor with the trunk opening at x in [4, 6]
      {{0.0, 7.0}, {4.0, 7.0}},
      {{6.0, 7.0}, {10.0, 7.0}},
      // level 1 split
      {{5.0, 0.0}, {5.0, 6.0}},
      // level 2 floors with openings centred at x = 2.5 and x = 7.5
      {{0.0, 4.0}, {1.5, 4.0}},
      {{3.5, 4.0}, {5.0, 4.0}},
      {{5.0, 4.0}, {6.5, 4.0}},
      {{8.5, 4.0}, {10.0, 4.0}},
      // level 2 splits
      {{2.5, 0.0}, {2.5, 3.0}},
      {{7.5, 0.0}, {7.5, 3.0}},
      // level 3 floors with openings centred on each quarter
      {{0.0, 2.0}, {0.75, 2.0}},
      {{1.75, 2.0}, {2.5, 2.0}},
      {{2.5, 2.0}, {3.25, 2.0}},
      {{4.25, 2.0}, {5.0, 2.0}},
      {{5.0, 2.0}, {5.75, 2.0}},
      {{6.75, 2.0}, {7.5, 2.0}},
      {{7.5, 2.0}, {8.25, 2.0}},
      {{9.25, 2.0}, {10.0, 2.0}},
      // level 3 splits
      {{1.25, 0.0}, {1.25, 1.5}},
      {{3.75, 0.0}, {3.75, 1.5}},
      {{6.25, 0.0}, {6.25, 1.5}},
      {{8.75, 0.0}, {8.75, 1.5}},
  };
  m.start = {5.0, 9.5};
  return m;
}

}  // namespace detail

inline constexpr std::array<std::string_view, 2> kMazeNames{"square", "tree"};

inline MazeSpec load_maze(std::string_view name) {
  MazeSpec m;
  if (name == "square")
    m = detail::square_maze();
  else if (name == "tree")
    m = detail::tree_maze();
  else
    throw std::invalid_argument("unknown maze '" + std::string(name) + "'; valid names: square, tree");
  validate(m);
  return m;
}

inline EnvState reset(const MazeSpec& spec) { return EnvState{spec.start, 0}; }

inline StepResult step(const MazeSpec& spec, const EnvState& state, Point action) {
  const Point a{std::clamp(action.x, -1.0, 1.0), std::clamp(action.y, -1.0, 1.0)};
  const Point p = state.position;
  const Point d = spec.action_scale * a;

  StepResult out;
  out.state.step_count = state.step_count + 1;
  out.done = out.state.step_count >= spec.horizon;

  const double len = norm(d);
  if (len == 0.0) {
    out.state.position = p;
    return out;
  }

  double t_hit = std::numeric_limits<double>::infinity();
  for (const auto& w : spec.walls) t_hit = std::min(t_hit, detail::first_contact(p, d, w));
  for (const auto& e : detail::boundary_edges(spec.bounds)) t_hit = std::min(t_hit, detail::first_contact(p, d, e));

  if (!std::isfinite(t_hit)) {
    out.state.position = p + d;
    return out;
  }

  out.collided = true;
  const double t_stop = std::max(0.0, t_hit - kCollisionMargin / len);
  Point q = p + t_stop * d;
  // Rounding near grazing contacts must never let the point through.
  if (t_stop > 0.0 && path_blocked(spec, p, q)) q = p;
  out.state.position = q;
  return out;
}

/// Wall segments as CSV rows `x1,y1,x2,y2` with a header line.
inline void write_walls_csv(std::ostream& os, const MazeSpec& spec) {
  os << "x1,y1,x2,y2\n";
  for (const auto& w : spec.walls) os << w.a.x << ',' << w.a.y << ',' << w.b.x << ',' << w.b.y << '\n';
}

}  // namespace cesd
