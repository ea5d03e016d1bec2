#pragma once

// Run configuration: flat `key = value` text, one field per line, `#`
// comments. Every key has a default, so an empty file is a valid config.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace cesd {

enum class AgentKind { cesd, diayn, entropy };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::cesd: return "cesd";
    case AgentKind::diayn: return "diayn";
    case AgentKind::entropy: return "entropy";
  }
  return "cesd";
}

inline AgentKind parse_agent_kind(std::string_view s) {
  if (s == "cesd") return AgentKind::cesd;
  if (s == "diayn") return AgentKind::diayn;
  if (s == "entropy") return AgentKind::entropy;
  throw std::invalid_argument("unknown agent '" + std::string(s) + "'; valid: cesd, diayn, entropy");
}

struct RunConfig {
  AgentKind agent = AgentKind::cesd;
  std::string maze = "square";
  int n_skills = 10;
  int ensemble_size = 0;  // 0: one critic per skill for cesd, one critic for baselines
  double gamma = 0.99;
  int n_step = 3;
  int batch_size = 256;
  double lr = 1e-4;
  double tau_q = 0.01;
  long seed_frames = 4000;
  int skill_freq = 50;
  double alpha = 1.0;
  double lambda = 1.0;
  int knn_k = 16;
  std::string knn_space = "state";  // state: scaled observation, feature: normalized encoder output
  double sinkhorn_epsilon = 0.05;
  int sinkhorn_iters = 3;
  int proto_iters = 4;
  double match_decay = 0.99;  // EMA decay of the skill-by-prototype overlap that assigns prototypes to skills
  int proto_dim = 16;
  double proto_tau = 0.1;
  double noise_std = 0.2;
  double noise_clip = 0.3;
  double actor_preact_l2 = 0.1;
  long total_frames = 100000;
  int update_every = 2;
  std::uint64_t seed = 1;
  long buffer_capacity = 100000;
  int critic_hidden = 256;
  int actor_hidden = 256;
  int encoder_hidden = 128;
  long snapshot_every = 5000;
  int grid = 20;

  int effective_ensemble_size() const {
    if (ensemble_size > 0) return ensemble_size;
    return agent == AgentKind::cesd ? n_skills : 1;
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw std::invalid_argument("field '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field numeric_field(T RunConfig::*member, std::string key) {
  return {[member, key](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

// Key order here is the serialisation order.
inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    f.emplace_back("agent", Field{[](RunConfig& c, std::string_view v) { c.agent = parse_agent_kind(v); },
                                  [](const RunConfig& c) { return to_string(c.agent); }});
    f.emplace_back("maze", Field{[](RunConfig& c, std::string_view v) { c.maze = std::string(v); },
                                 [](const RunConfig& c) { return c.maze; }});
    f.emplace_back("knn_space", Field{[](RunConfig& c, std::string_view v) { c.knn_space = std::string(v); },
                                      [](const RunConfig& c) { return c.knn_space; }});
#define CESD_FIELD(name) f.emplace_back(#name, numeric_field(&RunConfig::name, #name))
    CESD_FIELD(n_skills);
    CESD_FIELD(ensemble_size);
    CESD_FIELD(gamma);
    CESD_FIELD(n_step);
    CESD_FIELD(batch_size);
    CESD_FIELD(lr);
    CESD_FIELD(tau_q);
    CESD_FIELD(seed_frames);
    CESD_FIELD(skill_freq);
    CESD_FIELD(alpha);
    CESD_FIELD(lambda);
    CESD_FIELD(knn_k);
    CESD_FIELD(sinkhorn_epsilon);
    CESD_FIELD(sinkhorn_iters);
    CESD_FIELD(proto_iters);
    CESD_FIELD(match_decay);
    CESD_FIELD(proto_dim);
    CESD_FIELD(proto_tau);
    CESD_FIELD(noise_std);
    CESD_FIELD(noise_clip);
    CESD_FIELD(actor_preact_l2);
    CESD_FIELD(total_frames);
    CESD_FIELD(update_every);
    CESD_FIELD(seed);
    CESD_FIELD(buffer_capacity);
    CESD_FIELD(critic_hidden);
    CESD_FIELD(actor_hidden);
    CESD_FIELD(encoder_hidden);
    CESD_FIELD(snapshot_every);
    CESD_FIELD(grid);
#undef CESD_FIELD
    return f;
  }();
  return fields;
}

}  // namespace detail

/// Sets one field from its text form; unknown keys are rejected.
inline void set_field(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& [name, field] : detail::config_fields())
    if (name == key) {
      field.set(cfg, detail::trim(value));
      return;
    }
  throw std::invalid_argument("unknown config field '" + std::string(key) + "'");
}

inline std::string get_field(const RunConfig& cfg, std::string_view key) {
  for (const auto& [name, field] : detail::config_fields())
    if (name == key) return field.get(cfg);
  throw std::invalid_argument("unknown config field '" + std::string(key) + "'");
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, field] : detail::config_fields()) keys.push_back(name);
  return keys;
}

/// Throws std::invalid_argument naming the first offending field.
inline void validate(const RunConfig& c) {
  const auto fail = [](const std::string& field, const std::string& rule) {
    throw std::invalid_argument("invalid config: field '" + field + "' " + rule);
  };
  if (c.maze != "square" && c.maze != "tree") fail("maze", "must be one of square, tree");
  if (c.n_skills < 1) fail("n_skills", "must be >= 1");
  if (c.ensemble_size < 0 || c.ensemble_size > c.n_skills) fail("ensemble_size", "must lie in [0, n_skills]");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) fail("gamma", "must lie in (0,1)");
  if (c.n_step < 1) fail("n_step", "must be >= 1");
  if (c.batch_size < c.n_skills || c.batch_size < 2) fail("batch_size", "must be >= n_skills and >= 2");
  if (!(c.lr > 0.0)) fail("lr", "must be > 0");
  if (!(c.tau_q >= 0.0 && c.tau_q <= 1.0)) fail("tau_q", "must lie in [0,1]");
  if (c.seed_frames < 0) fail("seed_frames", "must be >= 0");
  if (c.skill_freq < 1) fail("skill_freq", "must be >= 1");
  if (!(c.alpha >= 0.0)) fail("alpha", "must be >= 0");
  if (!(c.lambda > 0.0)) fail("lambda", "must be > 0");
  if (c.knn_k < 1) fail("knn_k", "must be >= 1");
  if (c.knn_space != "state" && c.knn_space != "feature") fail("knn_space", "must be one of state, feature");
  if (!(c.sinkhorn_epsilon > 0.0)) fail("sinkhorn_epsilon", "must be > 0");
  if (c.sinkhorn_iters < 1) fail("sinkhorn_iters", "must be >= 1");
  if (c.proto_iters < 0) fail("proto_iters", "must be >= 0");
  if (!(c.match_decay >= 0.0 && c.match_decay < 1.0)) fail("match_decay", "must be in [0, 1)");
  if (c.proto_dim < 1) fail("proto_dim", "must be >= 1");
  if (!(c.proto_tau > 0.0)) fail("proto_tau", "must be > 0");
  if (!(c.noise_std >= 0.0)) fail("noise_std", "must be >= 0");
  if (!(c.noise_clip >= 0.0)) fail("noise_clip", "must be >= 0");
  if (!(c.actor_preact_l2 >= 0.0)) fail("actor_preact_l2", "must be >= 0");
  if (c.total_frames < 0) fail("total_frames", "must be >= 0");
  if (c.update_every < 1) fail("update_every", "must be >= 1");
  if (c.buffer_capacity < c.batch_size + c.n_step) fail("buffer_capacity", "must be >= batch_size + n_step");
  if (c.critic_hidden < 1) fail("critic_hidden", "must be >= 1");
  if (c.actor_hidden < 1) fail("actor_hidden", "must be >= 1");
  if (c.encoder_hidden < 1) fail("encoder_hidden", "must be >= 1");
  if (c.snapshot_every < 1) fail("snapshot_every", "must be >= 1");
  if (c.grid < 2) fail("grid", "must be >= 2");
}

inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_field(cfg, detail::trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(is, path);
}

inline std::string serialize(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [name, field] : detail::config_fields()) os << name << " = " << field.get(cfg) << '\n';
  return os.str();
}

}  // namespace cesd
