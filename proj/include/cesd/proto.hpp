#pragma once

// State prototypes: an encoder maps observations to features u, the unit
// feature u/|u| is softly assigned to n unit prototypes by a tempered softmax
// over cosine scores, and the encoder and prototypes are trained with a
// cross-entropy against balanced Sinkhorn-Knopp targets.

#include "cesd/adam.hpp"
#include "cesd/mlp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

struct PrototypeBank {
  Mlp encoder;         // obs -> R^m
  Mlp target_encoder;  // gradient-blocked copy, refreshed after each update
  Mlp prototypes;      // single bias-free linear layer; weight rows are c_1..c_n
  double tau = 0.1;
  AdamState encoder_opt;
  AdamState prototype_opt;

  int feature_dim() const { return static_cast<int>(prototypes.layers.front().weight.cols()); }
  int count() const { return static_cast<int>(prototypes.layers.front().weight.rows()); }
  const Mat& prototype_matrix() const { return prototypes.layers.front().weight; }
};

struct SinkhornConfig {
  double epsilon = 0.05;
  int iterations = 3;
};

struct EncodedBatch {
  Mat features;    // u, B x m
  Mat normalized;  // u / |u|, B x m
};

/// Row-wise L2 normalisation. Zero rows map to the first basis vector.
inline Mat normalize_rows(const Mat& u) {
  Mat out(u.rows(), u.cols());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double n = u.row(r).norm();
    if (n > 0.0) {
      out.row(r) = u.row(r) / n;
    } else {
      out.row(r).setZero();
      out(r, 0) = 1.0;
    }
  }
  return out;
}

inline void normalize_prototypes(PrototypeBank& bank) {
  Mat& c = bank.prototypes.layers.front().weight;
  c = normalize_rows(c);
}

inline PrototypeBank make_prototype_bank(int obs_dim, int hidden, int feature_dim, int count, double tau, Rng& rng) {
  if (count < 1 || feature_dim < 1) throw std::invalid_argument("prototype bank needs count >= 1 and feature_dim >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("prototype temperature must be > 0");
  PrototypeBank bank;
  bank.encoder = make_mlp({obs_dim, hidden, hidden, feature_dim}, Activation::relu, Activation::identity, rng);
  bank.target_encoder = bank.encoder;
  Layer head;
  head.weight.resize(count, feature_dim);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index c = 0; c < head.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < head.weight.rows(); ++r) head.weight(r, c) = g(rng);
  head.bias = Vec::Zero(count);
  head.activation = Activation::identity;
  bank.prototypes.layers.push_back(std::move(head));
  normalize_prototypes(bank);
  bank.tau = tau;
  bank.encoder_opt = make_adam(bank.encoder);
  bank.prototype_opt = make_adam(bank.prototypes);
  return bank;
}

inline EncodedBatch encode(const PrototypeBank& bank, const Mat& observations) {
  EncodedBatch e;
  e.features = forward(bank.encoder, observations);
  e.normalized = normalize_rows(e.features);
  return e;
}

/// Row-wise softmax with max subtraction.
inline Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// p_i = exp(u^T c_i / tau) / sum_j exp(u^T c_j / tau) for unit features u.
inline Mat assign_probs(const Mat& prototypes, const Mat& unit_features, double tau) {
  if (unit_features.cols() != prototypes.cols()) throw std::invalid_argument("assign_probs: feature dimension mismatch");
  if (!(tau > 0.0)) throw std::invalid_argument("assign_probs: tau must be > 0");
  return softmax_rows(unit_features * prototypes.transpose() / tau);
}

inline Mat assign_probs(const PrototypeBank& bank, const Mat& unit_features) {
  return assign_probs(bank.prototype_matrix(), unit_features, bank.tau);
}

/// Balanced soft assignment: start from exp(scores/epsilon), then alternate
/// column scaling to mass B/n and row scaling to mass 1 for `iterations`
/// rounds. The result always ends on the row step.
inline Mat sinkhorn_targets(const Mat& scores, double epsilon, int iterations) {
  const Eigen::Index b = scores.rows();
  const Eigen::Index n = scores.cols();
  if (n < 1 || b < n) throw std::invalid_argument("sinkhorn_targets: need batch size >= prototype count");
  if (iterations < 1) throw std::invalid_argument("sinkhorn_targets: iterations must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn_targets: epsilon must be > 0");
  if (!scores.allFinite()) throw std::domain_error("sinkhorn_targets: non-finite scores");

  // A global shift cancels in the first normalisation.
  Mat q = ((scores.array() - scores.maxCoeff()) / epsilon).exp().matrix();
  const double col_mass = static_cast<double>(b) / static_cast<double>(n);
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double s = q.col(c).sum();
      if (s > 0.0) q.col(c) *= col_mass / s;
    }
    for (Eigen::Index r = 0; r < b; ++r) {
      const double s = q.row(r).sum();
      if (s > 0.0)
        q.row(r) /= s;
      else
        q.row(r).setConstant(1.0 / static_cast<double>(n));
    }
  }
  return q;
}

/// Hard labels: row-wise argmax, ties to the lowest index.
inline std::vector<int> cluster_assign(const Mat& probs) {
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
/// Returns owner with owner[c] = the row matched to column c.
inline std::vector<int> max_weight_matching(const Mat& weight) {
  const Eigen::Index n = weight.rows();
  if (n != weight.cols()) throw std::invalid_argument("max_weight_matching: matrix must be square");
  if (!weight.allFinite()) throw std::domain_error("max_weight_matching: non-finite weight");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Eigen::Index> row_of(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  const auto cost = [&](Eigen::Index r, Eigen::Index c) { return -weight(r - 1, c - 1); };
  for (Eigen::Index r = 1; r <= n; ++r) {
    row_of[0] = r;
    Eigen::Index c0 = 0;
    std::vector<double> slack(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(c0)] = 1;
      const Eigen::Index r0 = row_of[static_cast<std::size_t>(c0)];
      double delta = inf;
      Eigen::Index c1 = 0;
      for (Eigen::Index c = 1; c <= n; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (used[cu]) continue;
        const double reduced = cost(r0, c) - u[static_cast<std::size_t>(r0)] - v[cu];
        if (reduced < slack[cu]) {
          slack[cu] = reduced;
          way[cu] = c0;
        }
        if (slack[cu] < delta) {
          delta = slack[cu];
          c1 = c;
        }
      }
      for (Eigen::Index c = 0; c <= n; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (used[cu]) {
          u[static_cast<std::size_t>(row_of[cu])] += delta;
          v[cu] -= delta;
        } else {
          slack[cu] -= delta;
        }
      }
      c0 = c1;
    } while (row_of[static_cast<std::size_t>(c0)] != 0);
    do {
      const Eigen::Index c1 = way[static_cast<std::size_t>(c0)];
      row_of[static_cast<std::size_t>(c0)] = row_of[static_cast<std::size_t>(c1)];
      c0 = c1;
    } while (c0 != 0);
  }
  std::vector<int> owner(static_cast<std::size_t>(n));
  for (Eigen::Index c = 1; c <= n; ++c) owner[static_cast<std::size_t>(c - 1)] = static_cast<int>(row_of[static_cast<std::size_t>(c)] - 1);
  return owner;
}

/// Assigns each prototype to the skill it overlaps most. The overlap is an
/// exponential moving average of skill-by-prototype co-occurrence fractions.
class ClusterMatcher {
 public:
  ClusterMatcher(int n, double decay) : decay_(decay), overlap_(Mat::Zero(n, n)) {
    if (n < 1) throw std::invalid_argument("ClusterMatcher: need n >= 1");
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("ClusterMatcher: decay must be in [0, 1)");
    for (int i = 0; i < n; ++i) skill_of_.push_back(i);
  }

  /// Folds in one batch of (skill, prototype) pairs and re-solves the matching.
  void observe(const std::vector<int>& skills, const std::vector<int>& prototypes) {
    if (skills.size() != prototypes.size() || skills.empty()) throw std::invalid_argument("ClusterMatcher: label vectors differ or are empty");
    const auto n = static_cast<int>(overlap_.rows());
    overlap_ *= decay_;
    const double w = (1.0 - decay_) / static_cast<double>(skills.size());
    for (std::size_t i = 0; i < skills.size(); ++i) {
      if (skills[i] < 0 || skills[i] >= n || prototypes[i] < 0 || prototypes[i] >= n)
        throw std::out_of_range("ClusterMatcher: label out of range");
      overlap_(skills[i], prototypes[i]) += w;
    }
    skill_of_ = max_weight_matching(overlap_);
  }

  /// skill_of()[c] is the skill that owns prototype c.
  const std::vector<int>& skill_of() const { return skill_of_; }
  const Mat& overlap() const { return overlap_; }

  std::vector<int> relabel(std::vector<int> prototypes) const {
    for (int& p : prototypes) p = skill_of_.at(static_cast<std::size_t>(p));
    return prototypes;
  }

 private:
  double decay_;
  Mat overlap_;
  std::vector<int> skill_of_;
};

/// Mean over rows of -sum_i q_i log p_i.
inline double cross_entropy(const Mat& targets, const Mat& probs) {
  constexpr double tiny = std::numeric_limits<double>::min();
  return -(targets.array() * probs.array().max(tiny).log()).sum() / static_cast<double>(probs.rows());
}

namespace detail {

inline bool same_parameters(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].weight.rows() != b.layers[l].weight.rows() || a.layers[l].weight.cols() != b.layers[l].weight.cols() ||
        a.layers[l].weight != b.layers[l].weight || a.layers[l].bias != b.layers[l].bias)
      return false;
  return true;
}

}  // namespace detail

struct ProtoGradients {
  double loss = 0.0;
  Mlp encoder;
  Mlp prototypes;
};

/// Loss and gradients of the prototype cross-entropy. Targets come from the
/// target encoder through Sinkhorn and are treated as constants.
inline ProtoGradients proto_gradients(const PrototypeBank& bank, const Mat& observations, const SinkhornConfig& sk = {}) {
  const Eigen::Index b = observations.rows();
  const int n = bank.count();
  if (b < n)
    throw std::invalid_argument("proto_update: batch of " + std::to_string(b) + " is smaller than " + std::to_string(n) +
                                " prototypes");
  const Mat& c = bank.prototype_matrix();

  MlpCache cache;
  const Mat u = forward(bank.encoder, observations, cache);
  const Mat u_hat = normalize_rows(u);
  const bool same = detail::same_parameters(bank.target_encoder, bank.encoder);
  const Mat target_unit = same ? u_hat : normalize_rows(forward(bank.target_encoder, observations));
  const Mat q = sinkhorn_targets(target_unit * c.transpose(), sk.epsilon, sk.iterations);
  const Mat p = softmax_rows(u_hat * c.transpose() / bank.tau);

  ProtoGradients g;
  g.loss = cross_entropy(q, p);
  // d loss / d logits = (p - q) / B; logits = u_hat c^T / tau
  const Mat g_logits = (p - q) / static_cast<double>(b);
  g.prototypes = zeros_like(bank.prototypes);
  g.prototypes.layers.front().weight = g_logits.transpose() * u_hat / bank.tau;
  const Mat g_unit = g_logits * c / bank.tau;

  // through u_hat = u / |u|
  Mat g_u(u.rows(), u.cols());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double len = u.row(r).norm();
    if (len > 0.0)
      g_u.row(r) = (g_unit.row(r) - u_hat.row(r) * u_hat.row(r).dot(g_unit.row(r))) / len;
    else
      g_u.row(r).setZero();
  }
  g.encoder = backward(bank.encoder, cache, g_u);
  return g;
}

/// One prototype step: Adam on encoder and prototypes, prototype
/// re-normalisation and a target refresh. Returns the loss evaluated before
/// the step.
inline double proto_update(PrototypeBank& bank, const Mat& observations, double lr, const SinkhornConfig& sk = {}) {
  const ProtoGradients g = proto_gradients(bank, observations, sk);
  adam_step(bank.encoder, bank.encoder_opt, g.encoder, lr);
  adam_step(bank.prototypes, bank.prototype_opt, g.prototypes, lr);
  normalize_prototypes(bank);
  bank.target_encoder = bank.encoder;
  return g.loss;
}

}  // namespace cesd
