#pragma once

#include "cesd/mlp.hpp"

#include <stdexcept>
#include <vector>

namespace cesd {

struct AdamState {
  std::vector<Mat> m_weight;
  std::vector<Mat> v_weight;
  std::vector<Vec> m_bias;
  std::vector<Vec> v_bias;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam(const Mlp& params, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const auto& l : params.layers) {
    s.m_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    s.v_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    s.m_bias.push_back(Vec::Zero(l.bias.size()));
    s.v_bias.push_back(Vec::Zero(l.bias.size()));
  }
  return s;
}

namespace detail {

template <typename P, typename G>
void adam_apply(P& p, P& m, P& v, const G& g, double b1, double b2, double lr_t, double eps_t) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  p.array() -= lr_t * m.array() / (v.array().sqrt() + eps_t);
}

}  // namespace detail

/// One bias-corrected Adam step. Throws before touching anything if a
/// gradient entry is not finite.
inline void adam_step(Mlp& params, AdamState& state, const Mlp& grads, double lr) {
  check_same_shape(params, grads, "adam_step");
  if (state.m_weight.size() != params.layers.size()) throw std::invalid_argument("adam_step: optimizer state does not match");
  if (!all_finite(grads)) throw std::domain_error("adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  // p -= lr * (m/c1) / (sqrt(v/c2) + eps)  ==  p -= lr_t * m / (sqrt(v) + eps_t)
  const double lr_t = lr * std::sqrt(c2) / c1;
  const double eps_t = state.epsilon * std::sqrt(c2);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    detail::adam_apply(params.layers[l].weight, state.m_weight[l], state.v_weight[l], grads.layers[l].weight, state.beta1,
                       state.beta2, lr_t, eps_t);
    detail::adam_apply(params.layers[l].bias, state.m_bias[l], state.v_bias[l], grads.layers[l].bias, state.beta1,
                       state.beta2, lr_t, eps_t);
  }
}

}  // namespace cesd
