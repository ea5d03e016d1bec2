#pragma once

// Skill-conditioned DDPG machinery shared by every agent kind: skill
// sampling, the exploratory actor, an ensemble of critics updated through a
// per-row member mask, and the actor step against the ensemble.

#include "cesd/adam.hpp"
#include "cesd/env.hpp"
#include "cesd/mlp.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

inline constexpr int kObsDim = 2;
inline constexpr int kActionDim = 2;

struct SkillVector {
  int index = 0;
  int n = 1;

  Vec one_hot() const {
    Vec z = Vec::Zero(n);
    z(index) = 1.0;
    return z;
  }
};

inline SkillVector make_skill(int index, int n) {
  if (n < 1) throw std::invalid_argument("skill count must be >= 1");
  if (index < 0 || index >= n)
    throw std::out_of_range("skill index " + std::to_string(index) + " outside [0, " + std::to_string(n) + ")");
  return {index, n};
}

inline SkillVector sample_skill(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_skill: n must be >= 1");
  std::uniform_int_distribution<int> pick(0, n - 1);
  return {pick(rng), n};
}

/// Affine map from maze coordinates to [-1,1]^2 network inputs.
struct ObservationScale {
  Point center{0.0, 0.0};
  Point half{1.0, 1.0};

  static ObservationScale of(const MazeSpec& m) {
    return {{0.5 * (m.bounds.lo.x + m.bounds.hi.x), 0.5 * (m.bounds.lo.y + m.bounds.hi.y)},
            {0.5 * m.bounds.width(), 0.5 * m.bounds.height()}};
  }

  RowVec operator()(Point p) const {
    RowVec r(kObsDim);
    r << (p.x - center.x) / half.x, (p.y - center.y) / half.y;
    return r;
  }

  template <typename Range, typename Proj>
  Mat rows(const Range& items, Proj proj) const {
    Mat m(static_cast<Eigen::Index>(std::size(items)), kObsDim);
    Eigen::Index r = 0;
    for (const auto& it : items) m.row(r++) = (*this)(proj(it));
    return m;
  }
};

inline Mat one_hot_rows(const std::vector<int>& skills, int n) {
  Mat z = Mat::Zero(static_cast<Eigen::Index>(skills.size()), n);
  for (std::size_t r = 0; r < skills.size(); ++r) z(static_cast<Eigen::Index>(r), skills[r]) = 1.0;
  return z;
}

inline Mat hcat(const Mat& a, const Mat& b) {
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Actor and critics share the DDPG trunk: a layer-normalized tanh layer
// followed by a ReLU layer.
inline Mlp make_ddpg_mlp(int in, int hidden, int out, Activation output, Rng& rng) {
  Mlp net = make_mlp({in, hidden, hidden, out}, Activation::relu, output, rng);
  if (!std::getenv("NOLN")) net.layers.front().activation = Activation::layer_norm_tanh;
  return net;
}

inline Mlp make_actor(int n_skills, int hidden, Rng& rng) {
  return make_ddpg_mlp(kObsDim + n_skills, hidden, kActionDim, Activation::tanh, rng);
}

inline Mat actor_input(const Mat& obs, const std::vector<int>& skills, int n_skills) {
  return hcat(obs, one_hot_rows(skills, n_skills));
}

/// Exploratory action: tanh actor output plus clipped Gaussian noise, then
/// clipped to the action box.
inline Point act(const Mlp& actor, const RowVec& obs, const SkillVector& z, double noise_std, double noise_clip, Rng& rng) {
  if (noise_std < 0.0) throw std::invalid_argument("act: noise_std must be >= 0");
  Mat in(1, obs.size() + z.n);
  in << obs, z.one_hot().transpose();
  const Mat mu = forward(actor, in);
  double a[2] = {mu(0, 0), mu(0, 1)};
  if (noise_std > 0.0) {
    std::normal_distribution<double> g(0.0, noise_std);
    for (double& c : a) c += std::clamp(g(rng), -noise_clip, noise_clip);
  }
  return {std::clamp(a[0], -1.0, 1.0), std::clamp(a[1], -1.0, 1.0)};
}

struct EnsembleCritic {
  std::vector<Mlp> online;
  std::vector<Mlp> target;
  std::vector<AdamState> opt;
  int n_skills = 1;
  bool skill_input = false;  // critic additionally sees the one-hot skill

  int size() const { return static_cast<int>(online.size()); }
  /// Skill/cluster index -> ensemble member; contiguous blocks of skills share a member.
  int member_of(int skill) const { return static_cast<int>(static_cast<long>(skill) * size() / n_skills); }

  Mat input(const Mat& obs, const Mat& actions, const std::vector<int>& skills) const {
    Mat oa = hcat(obs, actions);
    return skill_input ? hcat(oa, one_hot_rows(skills, n_skills)) : oa;
  }
};

inline EnsembleCritic make_ensemble_critic(int members, int n_skills, int hidden, bool skill_input, Rng& rng) {
  if (members < 1 || members > n_skills) throw std::invalid_argument("ensemble size must lie in [1, n_skills]");
  EnsembleCritic c;
  c.n_skills = n_skills;
  c.skill_input = skill_input;
  const int in = kObsDim + kActionDim + (skill_input ? n_skills : 0);
  for (int i = 0; i < members; ++i) {
    c.online.push_back(make_ddpg_mlp(in, hidden, 1, Activation::identity, rng));
    c.target.push_back(c.online.back());
    c.opt.push_back(make_adam(c.online.back()));
  }
  return c;
}

/// Rows for one masked TD step. `value_skill[r]` selects the ensemble member
/// (through member_of) and the skill whose value is being learned. The
/// n-step reward sum is precomputed; the bootstrap uses the state reached
/// after the window with discount gamma^len.
struct TdBatch {
  Mat obs;
  Mat actions;
  std::vector<int> value_skill;
  Vec partial_return;
  Mat bootstrap_obs;
  Vec bootstrap_discount;
};

struct TdSettings {
  double lr = 1e-4;
  double tau = 0.01;
  double target_noise_std = 0.2;
  double target_noise_clip = 0.3;
};

namespace detail {

inline std::vector<Eigen::Index> rows_of_member(const EnsembleCritic& c, const std::vector<int>& skills, int member) {
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < skills.size(); ++r)
    if (c.member_of(skills[r]) == member) rows.push_back(static_cast<Eigen::Index>(r));
  return rows;
}

inline Mat take_rows(const Mat& m, const std::vector<Eigen::Index>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<Eigen::Index>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace detail

/// Per-member TD regression on the rows routed to it, one Adam step each,
/// followed by a Polyak update of that member's target. Members with no rows
/// are left untouched and report no loss.
inline std::vector<std::optional<double>> ensemble_td_update(EnsembleCritic& critic, const Mlp& actor_target, const TdBatch& batch,
                                                             const TdSettings& settings, Rng& rng) {
  const Eigen::Index b = batch.obs.rows();
  if (batch.actions.rows() != b || batch.bootstrap_obs.rows() != b || batch.partial_return.size() != b ||
      batch.bootstrap_discount.size() != b || static_cast<Eigen::Index>(batch.value_skill.size()) != b)
    throw std::invalid_argument("ensemble_td_update: batch fields disagree in length");

  // Target policy smoothing, drawn in row order for reproducibility.
  Mat next_actions = forward(actor_target, actor_input(batch.bootstrap_obs, batch.value_skill, critic.n_skills));
  if (settings.target_noise_std > 0.0) {
    std::normal_distribution<double> g(0.0, settings.target_noise_std);
    for (Eigen::Index r = 0; r < b; ++r)
      for (Eigen::Index c = 0; c < next_actions.cols(); ++c)
        next_actions(r, c) = std::clamp(next_actions(r, c) + std::clamp(g(rng), -settings.target_noise_clip, settings.target_noise_clip),
                                        -1.0, 1.0);
  }

  std::vector<std::optional<double>> losses(static_cast<std::size_t>(critic.size()));
  for (int e = 0; e < critic.size(); ++e) {
    const auto rows = detail::rows_of_member(critic, batch.value_skill, e);
    if (rows.empty()) continue;
    const auto skills = detail::take(batch.value_skill, rows);
    const auto m = static_cast<double>(rows.size());

    const Mat q_next = forward(critic.target[static_cast<std::size_t>(e)],
                               critic.input(detail::take_rows(batch.bootstrap_obs, rows), detail::take_rows(next_actions, rows), skills));
    Vec y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = batch.partial_return(rows[i]) + batch.bootstrap_discount(rows[i]) * q_next(static_cast<Eigen::Index>(i), 0);

    MlpCache cache;
    auto& net = critic.online[static_cast<std::size_t>(e)];
    const Mat q = forward(net, critic.input(detail::take_rows(batch.obs, rows), detail::take_rows(batch.actions, rows), skills), cache);
    const Vec diff = q.col(0) - y;
    losses[static_cast<std::size_t>(e)] = diff.squaredNorm() / m;
    const Mlp grads = backward(net, cache, Mat(2.0 * diff / m));
    adam_step(net, critic.opt[static_cast<std::size_t>(e)], grads, settings.lr);
    soft_update(critic.target[static_cast<std::size_t>(e)], net, settings.tau);
  }
  return losses;
}

/// Deterministic policy gradient: each row's action pi(s, z) ascends the
/// critic member that owns skill z. `preact_l2` penalizes the squared
/// pre-tanh output so weak critic slopes cannot pin actions at the box edge.
/// Returns -mean Q before the step.
inline double actor_update(Mlp& actor, AdamState& opt, const EnsembleCritic& critic, const Mat& obs, const std::vector<int>& skills,
                           double lr, double preact_l2 = 0.0) {
  const Eigen::Index b = obs.rows();
  if (b == 0) throw std::invalid_argument("actor_update: empty batch");
  if (static_cast<Eigen::Index>(skills.size()) != b) throw std::invalid_argument("actor_update: skill count mismatch");

  MlpCache actor_cache;
  const Mat actions = forward(actor, actor_input(obs, skills, critic.n_skills), actor_cache);
  Mat grad_actions = Mat::Zero(b, actions.cols());
  double q_sum = 0.0;
  for (int e = 0; e < critic.size(); ++e) {
    const auto rows = detail::rows_of_member(critic, skills, e);
    if (rows.empty()) continue;
    MlpCache cache;
    const auto& net = critic.online[static_cast<std::size_t>(e)];
    const Mat q = forward(net, critic.input(detail::take_rows(obs, rows), detail::take_rows(actions, rows), detail::take(skills, rows)), cache);
    q_sum += q.sum();
    const Mat g_in = input_gradient(net, cache, Mat::Constant(q.rows(), 1, -1.0 / static_cast<double>(b)));
    for (std::size_t i = 0; i < rows.size(); ++i)
      grad_actions.row(rows[i]) = g_in.row(static_cast<Eigen::Index>(i)).segment(kObsDim, kActionDim);
  }
  const Mat grad_pre = (2.0 * preact_l2 / static_cast<double>(b)) * actor_cache.output_pre;
  const Mlp grads = backward(actor, actor_cache, grad_actions, nullptr, preact_l2 > 0.0 ? &grad_pre : nullptr);
  adam_step(actor, opt, grads, lr);
  return -q_sum / static_cast<double>(b);
}

}  // namespace cesd
