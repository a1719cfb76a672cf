#pragma once

#include <cmath>
#include <cstddef>

#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::forward_uq {

inline constexpr double kDefaultSigmaFloor = 1e-6;

struct NllDiagnostics {
  std::size_t floor_substitutions = 0;
};

/// Per-dimension Gaussian negative log likelihood, mean-reduced over dimensions:
///   (1/d) sum_d [ (z_d - mu_d)^2 / (2 sigma_d^2) + 0.5 log sigma_d^2 ].
/// Any sigma_d at or below `floor` is replaced by `floor` and counted.
inline double gaussian_nll(const RowVector& z, const RowVector& mu, const RowVector& sigma,
                           double floor = kDefaultSigmaFloor, NllDiagnostics* diag = nullptr) {
  if (z.size() != mu.size() || z.size() != sigma.size() || z.size() == 0) {
    throw DimensionError("gaussian_nll: z, mu and sigma must have equal non-zero length");
  }
  double total = 0.0;
  for (Eigen::Index d = 0; d < z.size(); ++d) {
    double s = sigma(d);
    if (!(s > floor)) {
      s = floor;
      if (diag) ++diag->floor_substitutions;
    }
    const double var = s * s;
    const double r = z(d) - mu(d);
    total += r * r / (2.0 * var) + 0.5 * std::log(var);
  }
  const double loss = total / static_cast<double>(z.size());
  require_finite(loss, "gaussian_nll");
  return loss;
}

struct McNllResult {
  double loss = 0.0;        // mean over items
  Tensor2 output_gradient;  // d loss / d outputs, same shape as the stacked outputs
  std::size_t floor_substitutions = 0;
  std::size_t collapsed_items = 0;  // items with every dimension at the floor
};

/// Gaussian NLL of a batch of Monte Carlo predictions and its gradient w.r.t. every
/// per-sample output. `outputs` stacks `samples` consecutive rows per item; mu and sigma
/// are the per-item column mean and sample sd (ddof = 1) and are differentiated through.
inline McNllResult mc_gaussian_nll(const Tensor2& outputs, const Tensor2& truths, int samples,
                                   double floor = kDefaultSigmaFloor) {
  if (samples < 2) throw std::invalid_argument("Monte Carlo NLL needs at least 2 samples");
  const Eigen::Index items = truths.rows(), d_z = truths.cols();
  require_shape(outputs, items * samples, d_z, "Monte Carlo outputs");
  McNllResult res;
  res.output_gradient.resize(outputs.rows(), outputs.cols());
  const double S = samples;
  const double scale = 1.0 / (static_cast<double>(items) * static_cast<double>(d_z));
  double total = 0.0;
  for (Eigen::Index i = 0; i < items; ++i) {
    const auto block = outputs.middleRows(i * samples, samples);
    const RowVector mu = block.colwise().mean();
    const RowVector var = (block.rowwise() - mu).array().square().colwise().sum() / (S - 1.0);
    std::size_t floored = 0;
    for (Eigen::Index d = 0; d < d_z; ++d) {
      const double sd = std::sqrt(var(d));
      const bool at_floor = !(sd > floor);
      const double v = at_floor ? floor * floor : var(d);
      const double r = truths(i, d) - mu(d);
      total += r * r / (2.0 * v) + 0.5 * std::log(v);
      const double dmu = -r / v;
      const double dvar = at_floor ? 0.0 : 0.5 / v - r * r / (2.0 * v * v);
      for (int s = 0; s < samples; ++s) {
        const double o = block(s, d);
        res.output_gradient(i * samples + s, d) =
            scale * (dmu / S + dvar * 2.0 * (o - mu(d)) / (S - 1.0));
      }
      if (at_floor) ++floored;
    }
    res.floor_substitutions += floored;
    if (floored == static_cast<std::size_t>(d_z)) ++res.collapsed_items;
  }
  res.loss = total * scale;
  require_finite(res.loss, "Monte Carlo Gaussian NLL");
  require_finite(res.output_gradient, "Monte Carlo Gaussian NLL gradient");
  return res;
}

}  // namespace latent_calib::forward_uq
