#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latent_calib/netcore/dropout.hpp"
#include "latent_calib/netcore/rng.hpp"
#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::netcore {

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1 };

struct DenseLayer {
  Tensor2 weights;  // in_dim x out_dim
  Tensor2 biases;   // 1 x out_dim
  Activation activation = Activation::Identity;

  [[nodiscard]] Eigen::Index in_dim() const { return weights.rows(); }
  [[nodiscard]] Eigen::Index out_dim() const { return weights.cols(); }
};

/// Adam moment accumulators, one pair per weight and bias tensor.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor2> m_weights, v_weights, m_biases, v_biases;
};

struct NetworkParameters {
  std::vector<DenseLayer> layers;
  AdamState optimizer;
  std::uint64_t rng_seed = 0;
  // Bumped on every parameter update; forward caches remember the value they saw.
  std::uint64_t generation = 0;

  [[nodiscard]] Eigen::Index in_dim() const { return layers.front().in_dim(); }
  [[nodiscard]] Eigen::Index out_dim() const { return layers.back().out_dim(); }
  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
  }
};

inline void validate(const NetworkParameters& net) {
  if (net.layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    require_shape(l.biases, 1, l.out_dim(), "bias of layer " + std::to_string(i));
    if (i + 1 < net.layers.size() && l.out_dim() != net.layers[i + 1].in_dim()) {
      throw DimensionError("layer " + std::to_string(i) + " out_dim does not chain into layer " +
                           std::to_string(i + 1));
    }
  }
}

/// Builds a dense chain over `dims` (dims.size()-1 layers). Hidden layers use
/// `hidden`, the last layer uses `output`. He-uniform init for ReLU layers,
/// Xavier-uniform for Identity layers, zero biases.
inline NetworkParameters make_network(std::span<const Eigen::Index> dims, Activation hidden,
                                      Activation output, std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionError("make_network needs at least two widths");
  NetworkParameters net;
  net.rng_seed = seed;
  Rng rng = make_rng(seed, "init");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const Eigen::Index fan_in = dims[i], fan_out = dims[i + 1];
    if (fan_in < 1 || fan_out < 1) throw DimensionError("layer widths must be positive");
    DenseLayer layer;
    layer.activation = (i + 2 == dims.size()) ? output : hidden;
    const double limit = layer.activation == Activation::ReLU
                             ? std::sqrt(6.0 / static_cast<double>(fan_in))
                             : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    layer.weights.resize(fan_in, fan_out);
    for (Eigen::Index k = 0; k < layer.weights.size(); ++k) {
      layer.weights.data()[k] = uniform(rng, -limit, limit);
    }
    layer.biases = Tensor2::Zero(1, fan_out);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline NetworkParameters make_network(std::initializer_list<Eigen::Index> dims, Activation hidden,
                                      Activation output, std::uint64_t seed) {
  std::vector<Eigen::Index> v(dims);
  return make_network(std::span<const Eigen::Index>(v), hidden, output, seed);
}

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  std::uint64_t generation = 0;
  std::vector<Tensor2> layer_inputs;  // input to each affine map, after masking/scaling
  std::vector<Tensor2> pre_activations;
  std::vector<std::optional<DropoutMask>> masks;
  bool valid = false;
};

namespace detail {

inline Tensor2 apply_mask(const Tensor2& input, const DropoutMask& m, std::size_t layer) {
  if (m.width() != input.cols()) {
    throw DimensionError("dropout mask width mismatch at layer " + std::to_string(layer));
  }
  const double scale = m.scaling();
  if (m.mask.rows() == 1) {
    return (input.array().rowwise() * (m.mask.row(0).array() * scale)).matrix();
  }
  if (m.mask.rows() != input.rows()) {
    throw DimensionError("dropout mask rows mismatch at layer " + std::to_string(layer));
  }
  return (input.array() * m.mask.array() * scale).matrix();
}

inline void check_masks(const NetworkParameters& net, std::span<const DropoutMask> masks) {
  if (!masks.empty() && masks.size() != net.layers.size()) {
    throw DimensionError("expected one dropout mask per layer (" +
                         std::to_string(net.layers.size()) + "), got " +
                         std::to_string(masks.size()));
  }
}

}  // namespace detail

/// Forward pass. With masks, every layer input is multiplied by its mask and
/// scaled by 1/keep_rate before the affine map. A mask slot may be supplied for
/// every layer; pass an empty span for a mask-free pass.
inline Tensor2 forward(const NetworkParameters& net, const Tensor2& input,
                       std::span<const DropoutMask> masks = {}, ForwardCache* cache = nullptr) {
  if (net.layers.empty()) throw DimensionError("network has no layers");
  if (input.cols() != net.in_dim()) {
    throw DimensionError("input has " + std::to_string(input.cols()) + " columns, network expects " +
                         std::to_string(net.in_dim()));
  }
  detail::check_masks(net, masks);
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
    cache->masks.clear();
    cache->generation = net.generation;
    cache->valid = false;
  }
  Tensor2 act = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (act.cols() != layer.in_dim()) throw DimensionError("layer chain mismatch");
    Tensor2 layer_in = masks.empty() ? act : detail::apply_mask(act, masks[i], i);
    Tensor2 pre = layer_in * layer.weights;
    pre.rowwise() += layer.biases.row(0);
    if (cache) {
      cache->layer_inputs.push_back(layer_in);
      cache->pre_activations.push_back(pre);
      cache->masks.push_back(masks.empty() ? std::nullopt : std::optional(masks[i]));
    }
    act = layer.activation == Activation::ReLU ? Tensor2(pre.cwiseMax(0.0)) : std::move(pre);
  }
  require_finite(act, "network output");
  if (cache) cache->valid = true;
  return act;
}

struct Gradients {
  std::vector<Tensor2> weights;
  std::vector<Tensor2> biases;
  Tensor2 input;  // d loss / d network input (before masking)

  static Gradients zeros_like(const NetworkParameters& net) {
    Gradients g;
    for (const auto& l : net.layers) {
      g.weights.push_back(Tensor2::Zero(l.weights.rows(), l.weights.cols()));
      g.biases.push_back(Tensor2::Zero(1, l.out_dim()));
    }
    return g;
  }
};

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Reverse-mode gradients of a scalar loss given dL/d(output). Masks gate gradients
/// exactly as they gated activations in the matching forward call.
inline Gradients backward(const NetworkParameters& net, const Tensor2& loss_gradient_at_output,
                          const ForwardCache& cache) {
  if (!cache.valid || cache.generation != net.generation ||
      cache.layer_inputs.size() != net.layers.size()) {
    throw StaleCacheError("forward cache does not match the current network parameters");
  }
  const Eigen::Index batch = cache.layer_inputs.front().rows();
  require_shape(loss_gradient_at_output, batch, net.out_dim(), "output gradient");
  require_finite(loss_gradient_at_output, "output gradient");

  Gradients g;
  g.weights.resize(net.layers.size());
  g.biases.resize(net.layers.size());
  Tensor2 delta = loss_gradient_at_output;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& layer = net.layers[k];
    if (layer.activation == Activation::ReLU) {
      delta = (cache.pre_activations[k].array() > 0.0).select(delta, 0.0);
    }
    g.weights[k].noalias() = cache.layer_inputs[k].transpose() * delta;
    g.biases[k] = delta.colwise().sum();
    Tensor2 d_in = delta * layer.weights.transpose();
    if (const auto& m = cache.masks[k]) {
      const double scale = m->scaling();
      if (m->mask.rows() == 1) {
        d_in = (d_in.array().rowwise() * (m->mask.row(0).array() * scale)).matrix();
      } else {
        d_in = (d_in.array() * m->mask.array() * scale).matrix();
      }
    }
    delta = std::move(d_in);
  }
  g.input = std::move(delta);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    require_finite(g.weights[k], "weight gradient");
    require_finite(g.biases[k], "bias gradient");
  }
  return g;
}

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8 unless changed in the state).
inline void optimizer_step(NetworkParameters& net, const Gradients& grads, double learning_rate) {
  const std::size_t n = net.layers.size();
  if (grads.weights.size() != n || grads.biases.size() != n) {
    throw DimensionError("gradient layer count does not match network");
  }
  for (std::size_t k = 0; k < n; ++k) {
    require_shape(grads.weights[k], net.layers[k].weights.rows(), net.layers[k].weights.cols(),
                  "weight gradient");
    require_shape(grads.biases[k], 1, net.layers[k].out_dim(), "bias gradient");
    require_finite(grads.weights[k], "weight gradient");
    require_finite(grads.biases[k], "bias gradient");
  }
  auto& st = net.optimizer;
  if (st.m_weights.size() != n) {
    st.m_weights.clear();
    st.v_weights.clear();
    st.m_biases.clear();
    st.v_biases.clear();
    for (const auto& l : net.layers) {
      st.m_weights.push_back(Tensor2::Zero(l.weights.rows(), l.weights.cols()));
      st.v_weights.push_back(Tensor2::Zero(l.weights.rows(), l.weights.cols()));
      st.m_biases.push_back(Tensor2::Zero(1, l.out_dim()));
      st.v_biases.push_back(Tensor2::Zero(1, l.out_dim()));
    }
    st.step = 0;
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  auto update = [&](Tensor2& param, Tensor2& m, Tensor2& v, const Tensor2& g) {
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + st.epsilon);
  };
  for (std::size_t k = 0; k < n; ++k) {
    update(net.layers[k].weights, st.m_weights[k], st.v_weights[k], grads.weights[k]);
    update(net.layers[k].biases, st.m_biases[k], st.v_biases[k], grads.biases[k]);
  }
  ++net.generation;
}

inline void accumulate(Gradients& into, const Gradients& g) {
  for (std::size_t k = 0; k < into.weights.size(); ++k) {
    into.weights[k] += g.weights[k];
    into.biases[k] += g.biases[k];
  }
}

/// Copy of `layer` keeping only the listed output columns.
inline DenseLayer select_outputs(const DenseLayer& layer, std::span<const Eigen::Index> columns) {
  DenseLayer out;
  out.activation = layer.activation;
  out.weights.resize(layer.in_dim(), static_cast<Eigen::Index>(columns.size()));
  out.biases.resize(1, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto c = columns[j];
    if (c < 0 || c >= layer.out_dim()) throw DimensionError("selected output column out of range");
    out.weights.col(static_cast<Eigen::Index>(j)) = layer.weights.col(c);
    out.biases(0, static_cast<Eigen::Index>(j)) = layer.biases(0, c);
  }
  return out;
}

}  // namespace latent_calib::netcore
