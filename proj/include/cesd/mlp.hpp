#pragma once

// Dense multilayer perceptrons with hand-written reverse-mode gradients.
//
// Batches are row-major in the logical sense: one sample per row. A layer maps
// X (B x in) to act(X W^T + 1 b^T) with W stored out x in.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

// layer_norm_tanh: tanh of the row-wise standardized pre-activation (no gain or shift).
enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, layer_norm_tanh = 3 };

inline constexpr double kLayerNormEps = 1e-5;

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation activation = Activation::identity;
};

struct Mlp {
  std::vector<Layer> layers;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
};

/// Activations recorded by a forward pass; `inputs[l]` feeds layer l and
/// `outputs[l]` is its post-activation value. Layer-normalized layers also
/// keep the standardized values and per-row scale; `output_pre` is the last
/// layer before its activation.
struct MlpCache {
  std::vector<Mat> inputs;
  std::vector<Mat> outputs;
  Mat output_pre;
  std::vector<Mat> standardized;
  std::vector<Vec> scale;
};

inline void validate(const Mlp& net) {
  if (net.layers.empty()) throw std::invalid_argument("mlp has no layers");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.bias.size() != layer.weight.rows())
      throw std::invalid_argument("mlp layer " + std::to_string(l) + ": bias size does not match weight rows");
    if (l > 0 && layer.weight.cols() != net.layers[l - 1].weight.rows())
      throw std::invalid_argument("mlp layer " + std::to_string(l) + ": input width does not chain");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw std::invalid_argument("mlp layer " + std::to_string(l) + ": non-finite parameter");
  }
}

/// Layer widths `dims` = {in, h1, ..., out}. Weights and biases are drawn
/// uniformly from +-1/sqrt(fan_in).
inline Mlp make_mlp(std::span<const int> dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output widths");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("make_mlp: widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline Mlp make_mlp(std::initializer_list<int> dims, Activation hidden, Activation output, Rng& rng) {
  return make_mlp(std::span<const int>(dims.begin(), dims.size()), hidden, output, rng);
}

inline Mlp zeros_like(const Mlp& net) {
  Mlp z;
  z.layers.reserve(net.layers.size());
  for (const auto& l : net.layers)
    z.layers.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size()), l.activation});
  return z;
}

namespace detail {

// Standardizes each row of z in place and returns the per-row scale.
inline Vec standardize_rows(Mat& z) {
  Vec scale(z.rows());
  const auto width = static_cast<double>(z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mean = z.row(r).sum() / width;
    z.row(r).array() -= mean;
    scale(r) = std::sqrt(z.row(r).squaredNorm() / width + kLayerNormEps);
    z.row(r) /= scale(r);
  }
  return scale;
}

inline void apply_activation(Mat& z, Activation a, Mat* standardized = nullptr, Vec* scale = nullptr) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::layer_norm_tanh: {
      const Vec s = standardize_rows(z);
      if (standardized != nullptr) *standardized = z;
      if (scale != nullptr) *scale = s;
      z = z.array().tanh().matrix();
      break;
    }
  }
}

// Multiplies g in place by the derivative of layer l's activation.
inline void gate_gradient(Mat& g, const MlpCache& cache, std::size_t l, Activation a) {
  const Mat& y = cache.outputs[l];
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: g = (y.array() > 0.0).select(g, 0.0); break;
    case Activation::tanh: g.array() *= (1.0 - y.array().square()); break;
    case Activation::layer_norm_tanh: {
      g.array() *= (1.0 - y.array().square());
      const Mat& n = cache.standardized[l];
      const auto width = static_cast<double>(g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double mean_g = g.row(r).sum() / width;
        const double mean_gn = g.row(r).dot(n.row(r)) / width;
        g.row(r) = (g.row(r).array() - mean_g - n.row(r).array() * mean_gn).matrix() / cache.scale[l](r);
      }
      break;
    }
  }
}

inline void check_input(const Mlp& net, const Mat& x) {
  if (net.layers.empty()) throw std::invalid_argument("mlp has no layers");
  if (x.cols() != net.input_dim())
    throw std::invalid_argument("mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                                std::to_string(net.input_dim()));
}

}  // namespace detail

inline Mat forward(const Mlp& net, const Mat& x) {
  detail::check_input(net, x);
  Mat h = x;
  for (const auto& layer : net.layers) {
    Mat z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    detail::apply_activation(z, layer.activation);
    h = std::move(z);
  }
  return h;
}

inline Mat forward(const Mlp& net, const Mat& x, MlpCache& cache) {
  detail::check_input(net, x);
  cache.inputs.resize(net.layers.size());
  cache.outputs.resize(net.layers.size());
  cache.standardized.resize(net.layers.size());
  cache.scale.resize(net.layers.size());
  const Mat* h = &x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    cache.inputs[l] = *h;
    Mat& z = cache.outputs[l];
    z.noalias() = cache.inputs[l] * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 == net.layers.size()) cache.output_pre = z;
    detail::apply_activation(z, layer.activation, &cache.standardized[l], &cache.scale[l]);
    h = &z;
  }
  return cache.outputs.back();
}

inline Vec forward(const Mlp& net, const Vec& x) { return forward(net, Mat(x.transpose())).row(0).transpose(); }

/// Reverse pass for the batch recorded in `cache`. Parameter gradients are
/// summed over the batch rows. When `grad_input` is non-null it receives
/// dL/dX. `grad_output_pre`, when given, is added to the gradient of the last
/// layer's pre-activation.
inline Mlp backward(const Mlp& net, const MlpCache& cache, const Mat& grad_output, Mat* grad_input = nullptr,
                    const Mat* grad_output_pre = nullptr) {
  if (cache.outputs.size() != net.layers.size()) throw std::invalid_argument("mlp backward: cache does not match network");
  const Mat& out = cache.outputs.back();
  if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols())
    throw std::invalid_argument("mlp backward: grad_output shape mismatch");
  if (grad_output_pre != nullptr && (grad_output_pre->rows() != out.rows() || grad_output_pre->cols() != out.cols()))
    throw std::invalid_argument("mlp backward: grad_output_pre shape mismatch");

  Mlp grads;
  grads.layers.resize(net.layers.size());
  Mat g = grad_output;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    detail::gate_gradient(g, cache, l, layer.activation);
    if (grad_output_pre != nullptr && l + 1 == net.layers.size()) g += *grad_output_pre;
    auto& gl = grads.layers[l];
    gl.activation = layer.activation;
    gl.weight.noalias() = g.transpose() * cache.inputs[l];
    gl.bias = g.colwise().sum().transpose();
    if (l > 0 || grad_input != nullptr) {
      Mat next = g * layer.weight;
      g = std::move(next);
    }
  }
  if (grad_input != nullptr) *grad_input = std::move(g);
  return grads;
}

/// dL/dX only; skips the parameter gradients.
inline Mat input_gradient(const Mlp& net, const MlpCache& cache, const Mat& grad_output) {
  if (cache.outputs.size() != net.layers.size()) throw std::invalid_argument("mlp input_gradient: cache does not match network");
  Mat g = grad_output;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    detail::gate_gradient(g, cache, l, net.layers[l].activation);
    Mat next = g * net.layers[l].weight;
    g = std::move(next);
  }
  return g;
}

struct MlpGradient {
  Mlp params;
  Vec input;
};

inline MlpGradient backward(const Mlp& net, const Vec& input, const Vec& grad_output) {
  MlpCache cache;
  forward(net, Mat(input.transpose()), cache);
  Mat gin;
  Mlp gp = backward(net, cache, Mat(grad_output.transpose()), &gin);
  return {std::move(gp), gin.row(0).transpose()};
}

inline bool all_finite(const Mlp& net) {
  for (const auto& l : net.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

inline void check_same_shape(const Mlp& a, const Mlp& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (std::size_t l = 0; ok && l < a.layers.size(); ++l)
    ok = a.layers[l].weight.rows() == b.layers[l].weight.rows() && a.layers[l].weight.cols() == b.layers[l].weight.cols() &&
         a.layers[l].bias.size() == b.layers[l].bias.size();
  if (!ok) throw std::invalid_argument(std::string(what) + ": network shapes differ");
}

/// Polyak averaging: target <- (1 - tau) target + tau online.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  check_same_shape(target, online, "soft_update");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0,1]");
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    target.layers[l].weight = (1.0 - tau) * target.layers[l].weight + tau * online.layers[l].weight;
    target.layers[l].bias = (1.0 - tau) * target.layers[l].bias + tau * online.layers[l].bias;
  }
}

/// dst += scale * src, shape-checked.
inline void accumulate(Mlp& dst, const Mlp& src, double scale = 1.0) {
  check_same_shape(dst, src, "accumulate");
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    dst.layers[l].weight += scale * src.layers[l].weight;
    dst.layers[l].bias += scale * src.layers[l].bias;
  }
}

inline double max_abs_difference(const Mlp& a, const Mlp& b) {
  check_same_shape(a, b, "max_abs_difference");
  double m = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    m = std::max(m, (a.layers[l].weight - b.layers[l].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace cesd
