#pragma once

// Central finite differences, kept independent of the backward pass they check.

#include <algorithm>
#include <cmath>
#include <functional>

#include "latent_calib/netcore/network.hpp"

namespace latent_calib::testing {

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / scale;
}

/// Largest relative error between `grads` and central differences of `loss` over every
/// weight and bias of `net`.
inline double max_fd_error(netcore::NetworkParameters net, const netcore::Gradients& grads,
                           const std::function<double(const netcore::NetworkParameters&)>& loss,
                           double eps = 1e-5) {
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + eps;
    const double up = loss(net);
    param = saved - eps;
    const double down = loss(net);
    param = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * eps)));
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) probe(l.weights.data()[i], grads.weights[k].data()[i]);
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) probe(l.biases.data()[i], grads.biases[k].data()[i]);
  }
  return worst;
}

}  // namespace latent_calib::testing
