#pragma once

#include <cmath>
#include <span>
#include <string>

#include "latent_calib/netcore/rng.hpp"
#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::netcore {

/// Binary keep mask for one layer input. `mask` is either a single row broadcast over the
/// batch, or one row per batch item. Retained entries are scaled by 1/keep_rate.
struct DropoutMask {
  double keep_rate = 1.0;
  Tensor2 mask;

  [[nodiscard]] double scaling() const { return 1.0 / keep_rate; }
  [[nodiscard]] Eigen::Index width() const { return mask.cols(); }
};

inline void check_keep_rate(double keep_rate) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw std::invalid_argument("keep_rate must lie in (0, 1], got " + std::to_string(keep_rate));
  }
}

/// Fills `out` with independent Bernoulli(keep_rate) entries. Only the zeros are drawn:
/// the run of ones before each zero is Geometric(1 - keep_rate), so a nearly-all-ones mask
/// costs about (1 - keep_rate) * size draws.
inline void fill_bernoulli(std::span<double> out, double keep_rate, Rng& rng) {
  std::fill(out.begin(), out.end(), 1.0);
  if (keep_rate == 1.0) return;
  const double log_keep = std::log(keep_rate);
  std::size_t pos = 0;
  while (true) {
    const double run = std::floor(std::log(1.0 - uniform01(rng)) / log_keep);
    if (run >= static_cast<double>(out.size() - pos)) return;
    pos += static_cast<std::size_t>(run);
    out[pos++] = 0.0;
  }
}

/// Independent Bernoulli(keep_rate) entries, `rows` x `width`.
inline DropoutMask sample_mask(double keep_rate, Eigen::Index rows, Eigen::Index width, Rng& rng) {
  check_keep_rate(keep_rate);
  DropoutMask m{keep_rate, Tensor2(rows, width)};
  fill_bernoulli({m.mask.data(), static_cast<std::size_t>(m.mask.size())}, keep_rate, rng);
  return m;
}

inline DropoutMask sample_mask(double keep_rate, Eigen::Index width, Rng& rng) {
  return sample_mask(keep_rate, 1, width, rng);
}

}  // namespace latent_calib::netcore
