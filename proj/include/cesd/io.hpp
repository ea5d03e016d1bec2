#pragma once

// Versioned CSV artifacts. Every file opens with a `# cesd <kind> v<N>` line
// followed by a header row; readers reject other kinds, versions and headers.

#include "cesd/config.hpp"
#include "cesd/metrics.hpp"
#include "cesd/trainer.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cesd {

inline constexpr int kCsvVersion = 1;

namespace detail {

inline void write_preamble(std::ostream& os, std::string_view kind, const std::string& header) {
  os << "# cesd " << kind << " v" << kCsvVersion << '\n' << header << '\n';
}

inline void read_preamble(std::istream& is, std::string_view kind, const std::string& header) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(std::string(kind) + " csv: empty file");
  const std::string prefix = "# cesd " + std::string(kind) + " v";
  if (line.rfind(prefix, 0) != 0) throw std::runtime_error(std::string(kind) + " csv: missing '" + prefix + "N' version line");
  if (line != prefix + std::to_string(kCsvVersion))
    throw std::runtime_error(std::string(kind) + " csv: unsupported version '" + line.substr(prefix.size()) + "'");
  if (!std::getline(is, line) || trim(line) != header)
    throw std::runtime_error(std::string(kind) + " csv: header mismatch, expected '" + header + "'");
}

inline std::vector<std::string_view> split_commas(const std::string&&) = delete;
inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

inline std::string train_log_header(int n_skills) {
  std::string h = "frame,coverage,overlap,mi";
  for (int i = 0; i < n_skills; ++i) h += ",entropy_" + std::to_string(i);
  return h + ",critic_loss,actor_loss,aux_loss,intrinsic,updates";
}

inline void write_train_log(std::ostream& os, const std::vector<LogRow>& rows, int n_skills) {
  detail::write_preamble(os, "train_log", train_log_header(n_skills));
  using detail::format_double;
  for (const auto& r : rows) {
    os << r.frame << ',' << format_double(r.metrics.coverage) << ',' << format_double(r.metrics.overlap) << ','
       << format_double(r.metrics.mi);
    for (double h : r.metrics.skill_entropy) os << ',' << format_double(h);
    os << ',' << format_double(r.critic_loss) << ',' << format_double(r.actor_loss) << ',' << format_double(r.aux_loss) << ','
       << format_double(r.intrinsic) << ',' << r.updates << '\n';
  }
}

inline std::vector<LogRow> read_train_log(std::istream& is, int n_skills) {
  detail::read_preamble(is, "train_log", train_log_header(n_skills));
  std::vector<LogRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const auto c = detail::split_commas(line);
    if (c.size() != static_cast<std::size_t>(n_skills) + 9) throw std::runtime_error("train_log csv: wrong column count");
    LogRow r;
    std::size_t i = 0;
    r.frame = detail::parse_number<long>("frame", c[i++]);
    r.metrics.coverage = detail::parse_number<double>("coverage", c[i++]);
    r.metrics.overlap = detail::parse_number<double>("overlap", c[i++]);
    r.metrics.mi = detail::parse_number<double>("mi", c[i++]);
    for (int s = 0; s < n_skills; ++s) r.metrics.skill_entropy.push_back(detail::parse_number<double>("entropy", c[i++]));
    r.critic_loss = detail::parse_number<double>("critic_loss", c[i++]);
    r.actor_loss = detail::parse_number<double>("actor_loss", c[i++]);
    r.aux_loss = detail::parse_number<double>("aux_loss", c[i++]);
    r.intrinsic = detail::parse_number<double>("intrinsic", c[i++]);
    r.updates = detail::parse_number<long>("updates", c[i++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline constexpr std::string_view kTrajectoryHeader = "skill,step,x,y";

inline void write_trajectories(std::ostream& os, const std::vector<SkillTrajectory>& trajectories) {
  detail::write_preamble(os, "trajectories", std::string(kTrajectoryHeader));
  for (const auto& t : trajectories)
    for (std::size_t s = 0; s < t.states.size(); ++s)
      os << t.skill << ',' << s << ',' << detail::format_double(t.states[s].x) << ',' << detail::format_double(t.states[s].y) << '\n';
}

/// A new trajectory starts at every row with step 0.
inline std::vector<SkillTrajectory> read_trajectories(std::istream& is) {
  detail::read_preamble(is, "trajectories", std::string(kTrajectoryHeader));
  std::vector<SkillTrajectory> out;
  std::string line;
  int lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    const auto c = detail::split_commas(row);
    if (c.size() != 4) throw std::runtime_error("trajectories csv line " + std::to_string(lineno) + ": expected 4 columns");
    try {
      const int skill = detail::parse_number<int>("skill", c[0]);
      const long step = detail::parse_number<long>("step", c[1]);
      const Point p{detail::parse_number<double>("x", c[2]), detail::parse_number<double>("y", c[3])};
      if (skill < 0) throw std::invalid_argument("negative skill");
      if (step == 0 || out.empty() || out.back().skill != skill) out.push_back({skill, {}});
      out.back().states.push_back(p);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("trajectories csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_metrics(std::ostream& os, const MetricSummary& m) {
  detail::write_preamble(os, "metrics", "metric,value");
  using detail::format_double;
  os << "coverage," << format_double(m.coverage) << '\n';
  os << "overlap," << format_double(m.overlap) << '\n';
  os << "mi," << format_double(m.mi) << '\n';
  for (std::size_t i = 0; i < m.skill_entropy.size(); ++i) os << "entropy_" << i << ',' << format_double(m.skill_entropy[i]) << '\n';
}

inline void write_returns(std::ostream& os, const std::vector<double>& returns) {
  detail::write_preamble(os, "returns", "episode,return");
  for (std::size_t i = 0; i < returns.size(); ++i) os << i << ',' << detail::format_double(returns[i]) << '\n';
}

inline std::vector<double> read_returns(std::istream& is) {
  detail::read_preamble(is, "returns", "episode,return");
  std::vector<double> out;
  std::string line;
  while (std::getline(is, line)) {
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    const auto c = detail::split_commas(row);
    if (c.size() != 2) throw std::runtime_error("returns csv: expected 2 columns");
    out.push_back(detail::parse_number<double>("return", c[1]));
  }
  return out;
}

}  // namespace cesd
