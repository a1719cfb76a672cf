#pragma once

// Brute-force level-set scan: no rays, no interpolation. Every pixel centre at or above the
// level votes for the angular sector it falls in; a sector's radius is its farthest vote.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::testing {

inline Tensor2 gaussian_blob(int side, double cx, double cy, double sx, double sy, double theta = 0.0) {
  Tensor2 img(side, side);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int r = 0; r < side; ++r) {
    for (int k = 0; k < side; ++k) {
      const double dx = k - cx, dy = r - cy;
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      img(r, k) = std::exp(-0.5 * (u * u / (sx * sx) + v * v / (sy * sy)));
    }
  }
  return img;
}

/// Level-set radius of gaussian_blob's continuous Gaussian along `angle` from its centre.
inline double analytic_radius(double sx, double sy, double theta, double angle, double fraction) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double u = std::cos(theta) * dx + std::sin(theta) * dy, v = -std::sin(theta) * dx + std::cos(theta) * dy;
  return std::sqrt(2.0 * std::log(1.0 / fraction) / (u * u / (sx * sx) + v * v / (sy * sy)));
}

/// Farthest above-level pixel centre within +-half_width of each angle, measured from (cx, cy).
inline std::vector<std::optional<double>> sector_scan(const Tensor2& img, double level, double cx, double cy,
                                                      const std::vector<double>& angles, double half_width) {
  std::vector<std::optional<double>> out(angles.size());
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index k = 0; k < img.cols(); ++k) {
      if (img(r, k) < level) continue;
      const double dx = static_cast<double>(k) - cx, dy = static_cast<double>(r) - cy;
      const double dist = std::hypot(dx, dy);
      const double phi = std::atan2(dy, dx);
      for (std::size_t a = 0; a < angles.size(); ++a) {
        double diff = std::remainder(phi - angles[a], 2.0 * std::numbers::pi);
        if (std::abs(diff) <= half_width && (!out[a] || dist > *out[a])) out[a] = dist;
      }
    }
  }
  return out;
}

}  // namespace latent_calib::testing
