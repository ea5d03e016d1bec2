#pragma once

// Occupancy-grid metrics over logged states: coverage, pairwise skill
// overlap, exact discrete mutual information and per-skill entropies.

#include "cesd/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

struct SkillTrajectory {
  int skill = 0;
  std::vector<Point> states;
};

struct OccupancyGrid {
  int g = 2;
  int n_skills = 1;
  Rect bounds;
  std::vector<std::uint8_t> reachable;  // g*g, row-major over (ix, iy) as ix*g + iy
  std::vector<std::int64_t> counts;     // n_skills * g*g

  int bins() const { return g * g; }
  std::int64_t& at(int skill, int bin) { return counts[static_cast<std::size_t>(skill) * bins() + bin]; }
  std::int64_t at(int skill, int bin) const { return counts[static_cast<std::size_t>(skill) * bins() + bin]; }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  std::int64_t skill_total(int skill) const {
    std::int64_t t = 0;
    for (int b = 0; b < bins(); ++b) t += at(skill, b);
    return t;
  }

  int reachable_count() const {
    int r = 0;
    for (auto v : reachable) r += v;
    return r;
  }
};

/// Bin index along one axis; points on an interior boundary go to the lower bin.
inline int axis_bin(double v, double lo, double hi, int g) {
  const double t = (v - lo) / (hi - lo) * g;
  const int i = static_cast<int>(std::ceil(t)) - 1;
  return std::clamp(i, 0, g - 1);
}

inline int grid_bin(const Rect& bounds, int g, Point p) {
  if (!bounds.contains(p))
    throw std::out_of_range("state (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") lies outside the maze bounds");
  return axis_bin(p.x, bounds.lo.x, bounds.hi.x, g) * g + axis_bin(p.y, bounds.lo.y, bounds.hi.y, g);
}

inline Point bin_center(const Rect& bounds, int g, int bin) {
  const int ix = bin / g;
  const int iy = bin % g;
  return {bounds.lo.x + (ix + 0.5) * bounds.width() / g, bounds.lo.y + (iy + 0.5) * bounds.height() / g};
}

inline OccupancyGrid make_grid(const MazeSpec& maze, int g, int n_skills) {
  if (g < 2) throw std::invalid_argument("grid resolution must be >= 2");
  if (n_skills < 1) throw std::invalid_argument("grid needs n_skills >= 1");
  OccupancyGrid grid;
  grid.g = g;
  grid.n_skills = n_skills;
  grid.bounds = maze.bounds;
  grid.reachable.assign(static_cast<std::size_t>(g * g), 1);
  for (int b = 0; b < g * g; ++b)
    grid.reachable[static_cast<std::size_t>(b)] = on_wall(maze, bin_center(maze.bounds, g, b)) ? 0 : 1;
  grid.counts.assign(static_cast<std::size_t>(n_skills) * g * g, 0);
  return grid;
}

inline void add_visit(OccupancyGrid& grid, int skill, Point p) {
  if (skill < 0 || skill >= grid.n_skills) throw std::out_of_range("skill " + std::to_string(skill) + " outside the grid's skill range");
  ++grid.at(skill, grid_bin(grid.bounds, grid.g, p));
}

inline OccupancyGrid bin_visits(const std::vector<SkillTrajectory>& trajectories, const MazeSpec& maze, int g, int n_skills) {
  OccupancyGrid grid = make_grid(maze, g, n_skills);
  for (const auto& t : trajectories)
    for (const auto& p : t.states) add_visit(grid, t.skill, p);
  return grid;
}

/// Fraction of reachable bins visited by any skill.
inline double coverage(const OccupancyGrid& grid) {
  const int reach = grid.reachable_count();
  if (reach == 0) return 0.0;
  int visited = 0;
  for (int b = 0; b < grid.bins(); ++b) {
    if (!grid.reachable[static_cast<std::size_t>(b)]) continue;
    for (int z = 0; z < grid.n_skills; ++z)
      if (grid.at(z, b) > 0) {
        ++visited;
        break;
      }
  }
  return static_cast<double>(visited) / reach;
}

/// Mean Jaccard index over skill pairs of their visited-bin sets. A pair in
/// which neither skill visited anything counts as identical.
inline double skill_overlap(const OccupancyGrid& grid) {
  if (grid.n_skills < 2) throw std::invalid_argument("skill_overlap needs at least two skills");
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < grid.n_skills; ++i)
    for (int j = i + 1; j < grid.n_skills; ++j) {
      int inter = 0, uni = 0;
      for (int b = 0; b < grid.bins(); ++b) {
        const bool a = grid.at(i, b) > 0;
        const bool c = grid.at(j, b) > 0;
        inter += a && c;
        uni += a || c;
      }
      sum += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
      ++pairs;
    }
  return sum / pairs;
}

/// I(S;Z) in nats on the joint (skill, bin) table.
inline double binned_mi(const OccupancyGrid& grid) {
  const auto total = static_cast<double>(grid.total());
  if (total <= 0.0) throw std::invalid_argument("binned_mi: grid holds no visits");
  std::vector<double> pz(static_cast<std::size_t>(grid.n_skills), 0.0);
  std::vector<double> pb(static_cast<std::size_t>(grid.bins()), 0.0);
  for (int z = 0; z < grid.n_skills; ++z)
    for (int b = 0; b < grid.bins(); ++b) {
      const double p = grid.at(z, b) / total;
      pz[static_cast<std::size_t>(z)] += p;
      pb[static_cast<std::size_t>(b)] += p;
    }
  double mi = 0.0;
  for (int z = 0; z < grid.n_skills; ++z)
    for (int b = 0; b < grid.bins(); ++b) {
      const double p = grid.at(z, b) / total;
      if (p > 0.0) mi += p * std::log(p / (pz[static_cast<std::size_t>(z)] * pb[static_cast<std::size_t>(b)]));
    }
  return std::max(mi, 0.0);
}

/// Shannon entropy (nats) of each skill's bin distribution; 0 for skills with no visits.
inline std::vector<double> skill_entropies(const OccupancyGrid& grid) {
  std::vector<double> h(static_cast<std::size_t>(grid.n_skills), 0.0);
  for (int z = 0; z < grid.n_skills; ++z) {
    const auto t = static_cast<double>(grid.skill_total(z));
    if (t <= 0.0) continue;
    double s = 0.0;
    for (int b = 0; b < grid.bins(); ++b)
      if (grid.at(z, b) > 0) {
        const double p = grid.at(z, b) / t;
        s -= p * std::log(p);
      }
    h[static_cast<std::size_t>(z)] = s;
  }
  return h;
}

struct MetricSummary {
  double coverage = 0.0;
  double overlap = 0.0;
  double mi = 0.0;
  std::vector<double> skill_entropy;
};

inline MetricSummary summarize(const OccupancyGrid& grid) {
  return {coverage(grid), grid.n_skills >= 2 ? skill_overlap(grid) : 0.0, grid.total() > 0 ? binned_mi(grid) : 0.0, skill_entropies(grid)};
}

}  // namespace cesd
