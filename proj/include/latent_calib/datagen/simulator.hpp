#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::datagen {

/// Bumped whenever any formula below changes; datasets record it in their manifest.
inline constexpr int kSimulatorVersion = 1;

struct SimulatorDims {
  int d_in = 4;
  int d_s = 8;
  int d_img = 16;
};

inline void validate(const SimulatorDims& d) {
  if (d.d_in < 4) throw DimensionError("simulator needs d_in >= 4");
  if (d.d_s < 2) throw DimensionError("simulator needs d_s >= 2");
  if (d.d_img < 8) throw DimensionError("simulator needs d_img >= 8");
}

struct MultimodalOutput {
  RowVector scalars;
  Tensor2 image;  // d_img x d_img, row index = y, column index = x
};

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Index of the scalar pair (s0, s1) that is strongly correlated by construction.
inline constexpr int kCorrelatedFirst = 0;
inline constexpr int kCorrelatedSecond = 1;
/// Input coordinate that moves the image blob horizontally.
inline constexpr int kPositionInput = 2;

/// Deterministic analytic stand-in for an expensive multiphysics code.
///
/// Scalars (u = x in [0,1]^d_in):
///   s0 = 1 + 0.8 u0 + 0.5 u1^2 + 0.3 sin(pi u2) + 0.4 u0 u3
///   s1 = s0 + 0.02 sin(4 pi u1)
///   s2 = exp(1.2 u0 - 0.5 u3)
///   s3 = 0.5 cos(1.5 pi u1) + 0.3 u2
///   s4 = log(1 + 2 u0 + u2)
///   s5 = u3^2 - 0.5 u1 u2
///   s6 = 0.6 sin(2 u0 + u3) + 0.2 u1
///   s7 = 1 / (1 + u2 + 0.5 u3)
///   s_k (k >= 8) = 0.5 sin((k - 6) u0 + u1) + 0.3 u2 u3
/// Inputs beyond the fourth add 0.1 sin(pi u_j) to every scalar.
///
/// Image: rotated anisotropic Gaussian blob on a d x d grid, scale h = d / 16,
///   centre   cx = (d-1)(0.38 + 0.24 u2), cy = (d-1)(0.5 + 0.06 (u1 - 0.5))
///   width    w = h (1.4 + 0.8 u0); major = w (1 + 0.4 u3), minor = w (1 - 0.2 u3)
///   angle    pi/2 u1
///   peak     0.6 + 0.4 s2
inline MultimodalOutput simulate(std::span<const double> x, const SimulatorDims& dims = {}) {
  validate(dims);
  if (static_cast<int>(x.size()) != dims.d_in) {
    throw DimensionError("simulate: expected " + std::to_string(dims.d_in) + " inputs");
  }
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("simulate: input outside [0, 1]");
  }
  using std::numbers::pi;
  const double u0 = x[0], u1 = x[1], u2 = x[2], u3 = x[3];
  double extra = 0.0;
  for (int j = 4; j < dims.d_in; ++j) extra += 0.1 * std::sin(pi * x[static_cast<std::size_t>(j)]);

  MultimodalOutput y;
  y.scalars.resize(dims.d_s);
  const double s0 = 1.0 + 0.8 * u0 + 0.5 * u1 * u1 + 0.3 * std::sin(pi * u2) + 0.4 * u0 * u3;
  const double s2 = std::exp(1.2 * u0 - 0.5 * u3);
  const double base[8] = {
      s0,
      s0 + 0.02 * std::sin(4.0 * pi * u1),
      s2,
      0.5 * std::cos(1.5 * pi * u1) + 0.3 * u2,
      std::log(1.0 + 2.0 * u0 + u2),
      u3 * u3 - 0.5 * u1 * u2,
      0.6 * std::sin(2.0 * u0 + u3) + 0.2 * u1,
      1.0 / (1.0 + u2 + 0.5 * u3),
  };
  for (int k = 0; k < dims.d_s; ++k) {
    const double v = k < 8 ? base[k] : 0.5 * std::sin((k - 6) * u0 + u1) + 0.3 * u2 * u3;
    y.scalars(k) = v + extra;
  }

  const int d = dims.d_img;
  const double h = d / 16.0;
  const double cx = (d - 1) * (0.38 + 0.24 * u2);
  const double cy = (d - 1) * (0.5 + 0.06 * (u1 - 0.5));
  const double w = h * (1.4 + 0.8 * u0);
  const double major = w * (1.0 + 0.4 * u3);
  const double minor = w * (1.0 - 0.2 * u3);
  const double theta = 0.5 * pi * u1;
  const double amp = 0.6 + 0.4 * s2;
  const double ct = std::cos(theta), st = std::sin(theta);
  y.image.resize(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      const double dx = c - cx, dy = r - cy;
      const double a = (ct * dx + st * dy) / major;
      const double b = (-st * dx + ct * dy) / minor;
      y.image(r, c) = amp * std::exp(-0.5 * (a * a + b * b));
    }
  }
  return y;
}

}  // namespace latent_calib::datagen
