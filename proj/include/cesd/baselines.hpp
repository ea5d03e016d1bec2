#pragma once

// Comparison rewards: a skill discriminator (reverse mutual information) and
// unclustered k-NN novelty over the whole batch.

#include "cesd/adam.hpp"
#include "cesd/mlp.hpp"
#include "cesd/reward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

struct Discriminator {
  Mlp net;  // observation -> n logits
  AdamState opt;
  int n = 1;
};

inline Discriminator make_discriminator(int obs_dim, int hidden, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("discriminator needs n >= 1");
  Discriminator d;
  d.net = make_mlp({obs_dim, hidden, hidden, n}, Activation::relu, Activation::identity, rng);
  d.opt = make_adam(d.net);
  d.n = n;
  return d;
}

inline Mat log_softmax_rows(const Mat& logits) {
  Mat out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

/// log q(z|s) - log p(z) with uniform p(z), one value per row.
inline std::vector<double> diayn_reward(const Discriminator& d, const Mat& obs, const std::vector<int>& skills) {
  if (static_cast<Eigen::Index>(skills.size()) != obs.rows()) throw std::invalid_argument("diayn_reward: skill count mismatch");
  const Mat lp = log_softmax_rows(forward(d.net, obs));
  const double log_n = std::log(static_cast<double>(d.n));
  std::vector<double> r(skills.size());
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (skills[i] < 0 || skills[i] >= d.n) throw std::out_of_range("diayn_reward: skill " + std::to_string(skills[i]) + " out of range");
    r[i] = lp(static_cast<Eigen::Index>(i), skills[i]) + log_n;
  }
  return r;
}

inline double diayn_reward(const Discriminator& d, const RowVec& obs, int skill) {
  return diayn_reward(d, Mat(obs), std::vector<int>{skill}).front();
}

/// One Adam step on the cross-entropy of predicting `skills` from `obs`;
/// returns the loss before the step.
inline double discriminator_update(Discriminator& d, const Mat& obs, const std::vector<int>& skills, double lr) {
  const Eigen::Index b = obs.rows();
  if (b == 0) throw std::invalid_argument("discriminator_update: empty batch");
  if (static_cast<Eigen::Index>(skills.size()) != b) throw std::invalid_argument("discriminator_update: skill count mismatch");
  MlpCache cache;
  const Mat logits = forward(d.net, obs, cache);
  const Mat lp = log_softmax_rows(logits);
  Mat grad = lp.array().exp().matrix();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    const int z = skills[static_cast<std::size_t>(r)];
    if (z < 0 || z >= d.n) throw std::out_of_range("discriminator_update: skill out of range");
    loss -= lp(r, z);
    grad(r, z) -= 1.0;
  }
  grad /= static_cast<double>(b);
  adam_step(d.net, d.opt, backward(d.net, cache, grad), lr);
  return loss / static_cast<double>(b);
}

/// Distance to the k-th nearest other row over the whole batch.
inline std::vector<double> apt_reward(const Mat& features, int k) {
  if (k < 1) throw std::invalid_argument("apt_reward: k must be >= 1");
  if (features.rows() <= k)
    throw std::invalid_argument("apt_reward: batch of " + std::to_string(features.rows()) + " rows needs more than k=" + std::to_string(k));
  std::vector<double> r(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) r[static_cast<std::size_t>(i)] = knn_distance(features, i, k);
  return r;
}

}  // namespace cesd
