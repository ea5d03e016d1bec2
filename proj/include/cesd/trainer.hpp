#pragma once

// Pretraining loop for all agent kinds and goal-reaching finetuning.

#include "cesd/agent.hpp"
#include "cesd/baselines.hpp"
#include "cesd/checkpoint.hpp"
#include "cesd/config.hpp"
#include "cesd/metrics.hpp"
#include "cesd/proto.hpp"
#include "cesd/replay_buffer.hpp"
#include "cesd/reward.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

struct AgentNetworks {
  Mlp actor;
  Mlp actor_target;
  AdamState actor_opt;
  EnsembleCritic critic;
  std::optional<PrototypeBank> bank;  // cesd and entropy
  std::optional<Discriminator> disc;  // diayn
};

inline AgentNetworks make_networks(const RunConfig& cfg, Rng& rng) {
  AgentNetworks a;
  a.actor = make_actor(cfg.n_skills, cfg.actor_hidden, rng);
  a.actor_target = a.actor;
  a.actor_opt = make_adam(a.actor);
  a.critic = make_ensemble_critic(cfg.effective_ensemble_size(), cfg.n_skills, cfg.critic_hidden, cfg.agent == AgentKind::diayn, rng);
  if (cfg.agent == AgentKind::diayn)
    a.disc = make_discriminator(kObsDim, cfg.encoder_hidden, cfg.n_skills, rng);
  else
    a.bank = make_prototype_bank(kObsDim, cfg.encoder_hidden, cfg.proto_dim, cfg.n_skills, cfg.proto_tau, rng);
  return a;
}

inline Checkpoint to_checkpoint(const AgentNetworks& a) {
  Checkpoint c;
  c.put("actor", a.actor);
  c.put("actor_target", a.actor_target);
  for (int i = 0; i < a.critic.size(); ++i) {
    c.put("critic/" + std::to_string(i), a.critic.online[static_cast<std::size_t>(i)]);
    c.put("critic_target/" + std::to_string(i), a.critic.target[static_cast<std::size_t>(i)]);
  }
  if (a.bank) {
    c.put("encoder", a.bank->encoder);
    c.put("encoder_target", a.bank->target_encoder);
    c.put("prototypes", a.bank->prototypes);
  }
  if (a.disc) c.put("discriminator", a.disc->net);
  return c;
}

namespace detail {

inline Mlp load_like(const Checkpoint& c, const std::string& name, const Mlp& shape) {
  const Mlp* net = c.find(name);
  if (net == nullptr) throw std::runtime_error("checkpoint has no network '" + name + "'");
  validate(*net);
  check_same_shape(*net, shape, ("checkpoint network '" + name + "'").c_str());
  for (std::size_t l = 0; l < net->layers.size(); ++l)
    if (net->layers[l].activation != shape.layers[l].activation)
      throw std::runtime_error("checkpoint network '" + name + "': activation mismatch");
  return *net;
}

}  // namespace detail

/// Rebuilds the networks described by `cfg` and fills them from `c`.
/// Optimiser moments start fresh.
inline AgentNetworks networks_from_checkpoint(const RunConfig& cfg, const Checkpoint& c) {
  Rng scratch(0);
  AgentNetworks a = make_networks(cfg, scratch);
  a.actor = detail::load_like(c, "actor", a.actor);
  a.actor_target = detail::load_like(c, "actor_target", a.actor_target);
  for (int i = 0; i < a.critic.size(); ++i) {
    auto& on = a.critic.online[static_cast<std::size_t>(i)];
    auto& tg = a.critic.target[static_cast<std::size_t>(i)];
    on = detail::load_like(c, "critic/" + std::to_string(i), on);
    tg = detail::load_like(c, "critic_target/" + std::to_string(i), tg);
  }
  if (a.bank) {
    a.bank->encoder = detail::load_like(c, "encoder", a.bank->encoder);
    a.bank->target_encoder = detail::load_like(c, "encoder_target", a.bank->target_encoder);
    a.bank->prototypes = detail::load_like(c, "prototypes", a.bank->prototypes);
  }
  if (a.disc) a.disc->net = detail::load_like(c, "discriminator", a.disc->net);
  return a;
}

struct LogRow {
  long frame = 0;
  MetricSummary metrics;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double aux_loss = 0.0;  // prototype loss, or discriminator loss for diayn
  double intrinsic = 0.0;  // mean per-step training reward
  long updates = 0;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double aux_loss = 0.0;
  double intrinsic = 0.0;
};

/// Reward labelling and one gradient round for a sampled batch of chains.
class Learner {
 public:
  Learner(const RunConfig& cfg, const MazeSpec& maze, AgentNetworks& nets)
      : cfg_(cfg), scale_(ObservationScale::of(maze)), nets_(nets), matcher_(cfg.n_skills, cfg.match_decay) {}

  const ClusterMatcher& matcher() const { return matcher_; }

  UpdateStats update(const std::vector<TransitionChain>& chains, Rng& rng) {
    const auto b = static_cast<Eigen::Index>(chains.size());
    std::vector<int> z_pe(chains.size());
    Mat obs(b, kObsDim), actions(b, kActionDim);
    // Flattened chain steps: step 0 of every row first, then later steps.
    std::vector<std::pair<std::size_t, std::size_t>> steps;
    for (std::size_t r = 0; r < chains.size(); ++r) {
      const Transition& t = chains[r].front();
      z_pe[r] = t.z_pe;
      obs.row(static_cast<Eigen::Index>(r)) = scale_(t.s);
      actions(static_cast<Eigen::Index>(r), 0) = t.a.x;
      actions(static_cast<Eigen::Index>(r), 1) = t.a.y;
      steps.emplace_back(r, 0);
    }
    for (std::size_t r = 0; r < chains.size(); ++r)
      for (std::size_t j = 1; j < chains[r].size(); ++j) steps.emplace_back(r, j);
    Mat next_obs(static_cast<Eigen::Index>(steps.size()), kObsDim);
    for (std::size_t i = 0; i < steps.size(); ++i)
      next_obs.row(static_cast<Eigen::Index>(i)) = scale_(chains[steps[i].first][steps[i].second].s_next);
    const Mat next0 = next_obs.topRows(b);

    std::vector<double> reward;
    std::vector<int> value_skill = z_pe;
    switch (cfg_.agent) {
      case AgentKind::cesd: reward = cesd_rewards(next_obs, b, z_pe, steps, value_skill); break;
      case AgentKind::entropy: reward = entropy_rewards(next_obs, b); break;
      case AgentKind::diayn: {
        std::vector<int> skills;
        skills.reserve(steps.size());
        for (const auto& [r, j] : steps) skills.push_back(z_pe[r]);
        reward = diayn_reward(*nets_.disc, next_obs, skills);
        break;
      }
    }

    TdBatch td;
    td.obs = obs;
    td.actions = actions;
    td.value_skill = value_skill;
    td.partial_return = Vec::Zero(b);
    td.bootstrap_obs.resize(b, kObsDim);
    td.bootstrap_discount.resize(b);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto [r, j] = steps[i];
      td.partial_return(static_cast<Eigen::Index>(r)) += std::pow(cfg_.gamma, static_cast<double>(j)) * reward[i];
      if (j + 1 == chains[r].size()) {
        td.bootstrap_obs.row(static_cast<Eigen::Index>(r)) = next_obs.row(static_cast<Eigen::Index>(i));
        td.bootstrap_discount(static_cast<Eigen::Index>(r)) = std::pow(cfg_.gamma, static_cast<double>(j + 1));
      }
    }

    UpdateStats st;
    for (double v : reward) st.intrinsic += v;
    st.intrinsic /= static_cast<double>(reward.size());

    const TdSettings settings{cfg_.lr, cfg_.tau_q, cfg_.noise_std, cfg_.noise_clip};
    const auto losses = ensemble_td_update(nets_.critic, nets_.actor_target, td, settings, rng);
    int counted = 0;
    for (const auto& l : losses)
      if (l) {
        st.critic_loss += *l;
        ++counted;
      }
    if (counted > 0) st.critic_loss /= counted;
    st.actor_loss = actor_update(nets_.actor, nets_.actor_opt, nets_.critic, obs, z_pe, cfg_.lr, cfg_.actor_preact_l2);

    if (nets_.bank) {
      const SinkhornConfig sk{cfg_.sinkhorn_epsilon, cfg_.sinkhorn_iters};
      for (int i = 0; i < cfg_.proto_iters; ++i) st.aux_loss += proto_update(*nets_.bank, next0, cfg_.lr, sk) / cfg_.proto_iters;
    } else if (nets_.disc) {
      st.aux_loss = discriminator_update(*nets_.disc, next0, z_pe, cfg_.lr);
    }
    soft_update(nets_.actor_target, nets_.actor, cfg_.tau_q);
    return st;
  }

 private:
  std::vector<double> cesd_rewards(const Mat& next_obs, Eigen::Index b, const std::vector<int>& z_pe,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& steps, std::vector<int>& value_skill) {
    const EncodedBatch enc = encode(*nets_.bank, next_obs);
    // Prototype indices are mapped to the skill each prototype is assigned to.
    const std::vector<int> protos = cluster_assign(assign_probs(*nets_.bank, enc.normalized));
    matcher_.observe(z_pe, std::vector<int>(protos.begin(), protos.begin() + b));
    const std::vector<int> labels = matcher_.relabel(protos);
    const std::vector<int> z_clu(labels.begin(), labels.begin() + b);
    value_skill = z_clu;

    std::vector<Eigen::Index> self(steps.size(), -1);
    for (Eigen::Index i = 0; i < b; ++i) self[static_cast<std::size_t>(i)] = i;
    const Mat& space = knn_features(next_obs, enc.normalized);
    const Mat refs = space.topRows(b);
    const auto r_cesd = cluster_query_rewards(refs, z_clu, space, labels, self, cfg_.knn_k);
    const auto r_reg_skill = constraint_rewards(z_pe, z_clu, cfg_.lambda, cfg_.n_skills);
    std::vector<double> r_reg(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) r_reg[i] = r_reg_skill[static_cast<std::size_t>(z_pe[steps[i].first])];
    return combine(r_cesd, r_reg, cfg_.alpha);
  }

  const Mat& knn_features(const Mat& next_obs, const Mat& encoded) const {
    return cfg_.knn_space == "feature" ? encoded : next_obs;
  }

  std::vector<double> entropy_rewards(const Mat& next_obs, Eigen::Index b) {
    const Mat encoded = cfg_.knn_space == "feature" ? encode(*nets_.bank, next_obs).normalized : Mat();
    const Mat& features = knn_features(next_obs, encoded);
    const Mat refs = features.topRows(b);
    const int k = std::min<int>(cfg_.knn_k, static_cast<int>(b) - 1);
    std::vector<double> r(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      r[static_cast<std::size_t>(i)] = kth_neighbor_distance(refs, features.row(i), k, i < b ? i : -1);
    return r;
  }

  const RunConfig& cfg_;
  ObservationScale scale_;
  AgentNetworks& nets_;
  ClusterMatcher matcher_;
};

/// Collects experience with skills resampled every skill_freq steps and at
/// every reset, acting uniformly at random for the first seed_frames frames,
/// and updates every update_every frames afterwards. A metric snapshot over
/// every state visited so far is logged every snapshot_every frames and at
/// the end.
inline PretrainResult pretrain(const RunConfig& cfg, const MazeSpec& maze, const std::function<void(const LogRow&)>& on_snapshot = {}) {
  validate(cfg);
  validate(maze);
  Rng rng(cfg.seed);
  AgentNetworks nets = make_networks(cfg, rng);
  Learner learner(cfg, maze, nets);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  const ObservationScale scale = ObservationScale::of(maze);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  OccupancyGrid visits = make_grid(maze, cfg.grid, cfg.n_skills);
  PretrainResult result;
  UpdateStats acc;
  long acc_count = 0;
  auto snapshot = [&](long frame) {
    LogRow row;
    row.frame = frame;
    row.metrics = summarize(visits);
    if (acc_count > 0) {
      row.critic_loss = acc.critic_loss / acc_count;
      row.actor_loss = acc.actor_loss / acc_count;
      row.aux_loss = acc.aux_loss / acc_count;
      row.intrinsic = acc.intrinsic / acc_count;
    }
    row.updates = acc_count;
    acc = {};
    acc_count = 0;
    result.log.push_back(row);
    if (on_snapshot) on_snapshot(row);
  };

  EnvState state = reset(maze);
  SkillVector skill = sample_skill(cfg.n_skills, rng);
  std::int64_t episode = 0, segment = 0;
  int since_skill = 0;
  for (long frame = 1; frame <= cfg.total_frames; ++frame) {
    if (since_skill == cfg.skill_freq) {
      skill = sample_skill(cfg.n_skills, rng);
      ++segment;
      since_skill = 0;
    }
    Point a;
    if (frame <= cfg.seed_frames)
      a = {uniform(rng), uniform(rng)};
    else
      a = act(nets.actor, scale(state.position), skill, cfg.noise_std, cfg.noise_clip, rng);
    const StepResult res = step(maze, state, a);
    buffer.push(Transition{state.position, a, res.state.position, skill.index, -1, 0.0}, episode, segment);
    add_visit(visits, skill.index, res.state.position);
    ++since_skill;
    state = res.state;
    if (res.done) {
      state = reset(maze);
      skill = sample_skill(cfg.n_skills, rng);
      ++episode;
      ++segment;
      since_skill = 0;
    }

    if (frame > cfg.seed_frames && frame % cfg.update_every == 0 &&
        buffer.size() >= static_cast<std::size_t>(cfg.batch_size + cfg.n_step)) {
      const UpdateStats st = learner.update(buffer.sample(static_cast<std::size_t>(cfg.batch_size), cfg.n_step, rng), rng);
      acc.critic_loss += st.critic_loss;
      acc.actor_loss += st.actor_loss;
      acc.aux_loss += st.aux_loss;
      acc.intrinsic += st.intrinsic;
      ++acc_count;
    }
    if (frame % cfg.snapshot_every == 0 || frame == cfg.total_frames) snapshot(frame);
  }
  result.checkpoint = to_checkpoint(nets);
  return result;
}

/// Deterministic-by-seed rollout of one skill from the maze start. States
/// include the start position.
inline std::vector<Point> rollout(const Mlp& actor, const MazeSpec& maze, const SkillVector& skill, double noise_std, double noise_clip,
                                  Rng& rng) {
  const ObservationScale scale = ObservationScale::of(maze);
  EnvState s = reset(maze);
  std::vector<Point> states{s.position};
  for (;;) {
    const StepResult r = step(maze, s, act(actor, scale(s.position), skill, noise_std, noise_clip, rng));
    states.push_back(r.state.position);
    s = r.state;
    if (r.done) break;
  }
  return states;
}

inline double goal_reward(const MazeSpec& maze, Point s, Point goal) { return -norm(s - goal) / maze.bounds.diagonal(); }

struct FinetuneResult {
  std::vector<double> returns;  // one per completed episode
};

/// Goal-reaching finetuning with a fixed skill. The actor and the critic
/// member owning `skill` start from `pretrained` (or from a fresh random
/// initialisation when null); updates begin after seed_frames steps.
inline FinetuneResult finetune(const RunConfig& cfg, const Checkpoint* pretrained, const MazeSpec& maze, Point goal, int skill_index,
                               long frames, std::uint64_t seed) {
  validate(cfg);
  validate(maze);
  if (!maze.bounds.contains(goal))
    throw std::invalid_argument("goal (" + std::to_string(goal.x) + ", " + std::to_string(goal.y) + ") lies outside the maze bounds");
  if (frames < 0) throw std::invalid_argument("finetune frames must be >= 0");
  const SkillVector skill = make_skill(skill_index, cfg.n_skills);

  Rng rng(seed);
  AgentNetworks nets = pretrained ? networks_from_checkpoint(cfg, *pretrained) : make_networks(cfg, rng);
  const int member = nets.critic.member_of(skill.index);
  EnsembleCritic critic;
  critic.n_skills = cfg.n_skills;
  critic.skill_input = nets.critic.skill_input;
  critic.online.push_back(nets.critic.online[static_cast<std::size_t>(member)]);
  critic.target.push_back(nets.critic.target[static_cast<std::size_t>(member)]);
  critic.opt.push_back(make_adam(critic.online.back()));
  Mlp actor = nets.actor;
  Mlp actor_target = nets.actor_target;
  AdamState actor_opt = make_adam(actor);

  const ObservationScale scale = ObservationScale::of(maze);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  const TdSettings settings{cfg.lr, cfg.tau_q, cfg.noise_std, cfg.noise_clip};
  FinetuneResult out;
  EnvState state = reset(maze);
  std::int64_t episode = 0;
  double ret = 0.0;
  for (long frame = 1; frame <= frames; ++frame) {
    const Point a = act(actor, scale(state.position), skill, cfg.noise_std, cfg.noise_clip, rng);
    const StepResult res = step(maze, state, a);
    const double r = goal_reward(maze, res.state.position, goal);
    buffer.push(Transition{state.position, a, res.state.position, skill.index, -1, r}, episode, episode);
    ret += r;
    state = res.state;
    if (res.done) {
      out.returns.push_back(ret);
      ret = 0.0;
      state = reset(maze);
      ++episode;
    }
    if (frame > cfg.seed_frames && frame % cfg.update_every == 0 &&
        buffer.size() >= static_cast<std::size_t>(cfg.batch_size + cfg.n_step)) {
      const auto chains = buffer.sample(static_cast<std::size_t>(cfg.batch_size), cfg.n_step, rng);
      const auto b = static_cast<Eigen::Index>(chains.size());
      TdBatch td;
      td.obs.resize(b, kObsDim);
      td.actions.resize(b, kActionDim);
      td.value_skill.assign(chains.size(), skill.index);
      td.partial_return = Vec::Zero(b);
      td.bootstrap_obs.resize(b, kObsDim);
      td.bootstrap_discount.resize(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto& chain = chains[static_cast<std::size_t>(i)];
        td.obs.row(i) = scale(chain.front().s);
        td.actions(i, 0) = chain.front().a.x;
        td.actions(i, 1) = chain.front().a.y;
        for (std::size_t j = 0; j < chain.size(); ++j)
          td.partial_return(i) += std::pow(cfg.gamma, static_cast<double>(j)) * chain[j].r_ext;
        td.bootstrap_obs.row(i) = scale(chain.back().s_next);
        td.bootstrap_discount(i) = std::pow(cfg.gamma, static_cast<double>(chain.size()));
      }
      ensemble_td_update(critic, actor_target, td, settings, rng);
      actor_update(actor, actor_opt, critic, td.obs, td.value_skill, cfg.lr, cfg.actor_preact_l2);
      soft_update(actor_target, actor, cfg.tau_q);
    }
  }
  return out;
}

}  // namespace cesd
