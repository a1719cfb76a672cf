#pragma once

// Posterior spread of one decoded scalar along a single input coordinate.

#include "latent_calib/forward_uq/forward_model.hpp"

namespace latent_calib::experiments {

struct DensityOptions {
  int coordinate = 0;
  int scalar = 3;  // depends only on inputs 1 and 2, so it is flat along coordinate 0
  int n_eval = 1000;
  int samples = 200;
  int bins = 20;
  double fixed_value = 0.5;
  double split = 0.5;  // boundary between the two halves of the axis
};

struct DensityStudy {
  Tensor2 table;  // n_eval x 3: input value, mu, sd
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;  // training samples per bin
  double count_ratio = 0.0;         // training samples below split / above split
  double sd_low = 0.0, sd_high = 0.0;  // mean sd over each half of the evaluation grid
};

/// Only the decoder columns feeding the designated scalar are evaluated.
inline Tensor2 decode_scalar(const autoencoder::AutoencoderModel& ae, const Tensor2& z, int scalar) {
  auto head = ae.decoder;
  const Eigen::Index column[] = {scalar};
  head.layers.back() = netcore::select_outputs(head.layers.back(), column);
  const Tensor2 out = netcore::forward(head, z);
  return (out.array() * ae.stats.scalar_sd(scalar) + ae.stats.scalar_mean(scalar)).matrix();
}

inline DensityStudy density_study(const forward_uq::ForwardModel& m, const autoencoder::AutoencoderModel& ae,
                                  const autoencoder::LatentDataset& train_data, const DensityOptions& o,
                                  std::uint64_t seed) {
  if (o.coordinate < 0 || o.coordinate >= m.d_in) throw std::out_of_range("density coordinate out of range");
  if (o.scalar < 0 || o.scalar >= ae.dims.d_s) throw std::out_of_range("density scalar out of range");
  if (o.n_eval < 2 || o.bins < 1) throw std::invalid_argument("density study needs n_eval >= 2 and bins >= 1");
  if (!(o.fixed_value >= 0.0 && o.fixed_value <= 1.0) || !(o.split > 0.0 && o.split < 1.0)) {
    throw std::out_of_range("density fixed value or split outside [0, 1]");
  }
  DensityStudy d;
  d.table.resize(o.n_eval, 3);
  double low_sum = 0.0, high_sum = 0.0;
  int low_n = 0, high_n = 0;
  for (int i = 0; i < o.n_eval; ++i) {
    RowVector x = RowVector::Constant(m.d_in, o.fixed_value);
    x(o.coordinate) = (i + 0.5) / o.n_eval;
    const auto post = forward_uq::predict_posterior(m, x, o.samples, derive_seed(seed, "density", static_cast<std::uint64_t>(i)));
    const Tensor2 s = decode_scalar(ae, post.samples, o.scalar);
    const double mu = s.mean();
    const double sd = std::sqrt((s.array() - mu).square().sum() / static_cast<double>(s.rows() - 1));
    d.table.row(i) << x(o.coordinate), mu, sd;
    (x(o.coordinate) < o.split ? low_sum : high_sum) += sd;
    ++(x(o.coordinate) < o.split ? low_n : high_n);
  }
  d.sd_low = low_sum / low_n;
  d.sd_high = high_sum / high_n;

  d.counts.assign(static_cast<std::size_t>(o.bins), 0);
  for (int b = 0; b <= o.bins; ++b) d.bin_edges.push_back(static_cast<double>(b) / o.bins);
  std::size_t below = 0, above = 0;
  for (std::size_t i : train_data.manifest.train) {
    const double v = train_data.inputs(static_cast<Eigen::Index>(i), o.coordinate);
    ++d.counts[std::min(static_cast<std::size_t>(v * o.bins), static_cast<std::size_t>(o.bins - 1))];
    ++(v < o.split ? below : above);
  }
  d.count_ratio = above > 0 ? static_cast<double>(below) / static_cast<double>(above) : 0.0;
  return d;
}

}  // namespace latent_calib::experiments
