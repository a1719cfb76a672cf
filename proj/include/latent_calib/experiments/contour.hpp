#pragma once

// Constant-brightness contours as radius-vs-azimuth about the brightness centroid.
// Rays assume the level set is star-shaped around the centroid, which holds for the
// simulator's blob family but not for general images.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::experiments {

inline constexpr double kContourFraction = 0.17;
inline constexpr int kDefaultAngles = 64;

class ContourError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Contour {
  double cx = 0.0, cy = 0.0;  // column, row
  std::vector<double> radii;
};

inline std::vector<double> contour_angles(int n_angles) {
  std::vector<double> a(static_cast<std::size_t>(n_angles));
  for (int k = 0; k < n_angles; ++k) a[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * k / n_angles;
  return a;
}

/// Bilinear sample at (x = column, y = row); outside the grid reads as 0.
inline double bilinear(const Tensor2& img, double x, double y) {
  if (x < 0.0 || y < 0.0 || x > static_cast<double>(img.cols() - 1) || y > static_cast<double>(img.rows() - 1)) {
    return 0.0;
  }
  const auto c0 = std::min(static_cast<Eigen::Index>(x), img.cols() - 2);
  const auto r0 = std::min(static_cast<Eigen::Index>(y), img.rows() - 2);
  const double fx = x - static_cast<double>(c0), fy = y - static_cast<double>(r0);
  return (1 - fy) * ((1 - fx) * img(r0, c0) + fx * img(r0, c0 + 1)) +
         fy * ((1 - fx) * img(r0 + 1, c0) + fx * img(r0 + 1, c0 + 1));
}

/// Outermost crossing of fraction * peak along n_angles rays from the brightness centroid.
/// Rays are marched in steps of `step` px and the crossing is linearly interpolated between
/// the bracketing samples. A ray that never reaches the level gives radius 0.
inline Contour extract_contour(const Tensor2& img, double fraction = kContourFraction,
                               int n_angles = kDefaultAngles, double step = 0.02) {
  if (img.rows() < 2 || img.cols() < 2) throw DimensionError("extract_contour needs at least a 2x2 image");
  if (n_angles < 1) throw std::invalid_argument("n_angles must be >= 1");
  if (!(fraction > 0.0)) throw std::invalid_argument("contour fraction must be positive");
  if (fraction > 1.0) throw ContourError("level set is empty for fraction > 1");
  require_finite(img, "extract_contour image");
  const double peak = img.maxCoeff();
  if (!(peak > 0.0)) throw ContourError("image has no positive brightness");

  Contour c;
  const Tensor2 w = img.cwiseMax(0.0);
  const double total = w.sum();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      c.cx += static_cast<double>(k) * w(r, k);
      c.cy += static_cast<double>(r) * w(r, k);
    }
  }
  c.cx /= total;
  c.cy /= total;

  const double level = fraction * peak;
  const double reach = std::hypot(static_cast<double>(img.cols()), static_cast<double>(img.rows()));
  const auto n_steps = static_cast<int>(std::ceil(reach / step));
  for (double theta : contour_angles(n_angles)) {
    const double dx = std::cos(theta), dy = std::sin(theta);
    double radius = 0.0;
    double outer = bilinear(img, c.cx + n_steps * step * dx, c.cy + n_steps * step * dy);
    for (int s = n_steps - 1; s >= 0; --s) {
      const double t = s * step;
      const double v = bilinear(img, c.cx + t * dx, c.cy + t * dy);
      if (v >= level) {
        radius = t + step * (v - level) / (v - outer);
        break;
      }
      outer = v;
    }
    c.radii.push_back(radius);
  }
  return c;
}

/// Contours of a stack of flattened square images plus per-angle radius statistics.
struct ContourSet {
  std::vector<double> angles;
  Tensor2 radii;  // images x angles
  RowVector mean, sd;
};

inline ContourSet contour_set(const Tensor2& images, int side, double fraction = kContourFraction,
                              int n_angles = kDefaultAngles) {
  if (images.cols() != static_cast<Eigen::Index>(side) * side) throw DimensionError("image width is not side^2");
  if (images.rows() < 2) throw std::invalid_argument("contour statistics need at least 2 images");
  ContourSet cs;
  cs.angles = contour_angles(n_angles);
  cs.radii.resize(images.rows(), n_angles);
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    const Tensor2 img = Eigen::Map<const Tensor2>(images.row(i).data(), side, side);
    const auto c = extract_contour(img, fraction, n_angles);
    for (int k = 0; k < n_angles; ++k) cs.radii(i, k) = c.radii[static_cast<std::size_t>(k)];
  }
  cs.mean = cs.radii.colwise().mean();
  cs.sd = column_sd(cs.radii);
  return cs;
}

/// Splits the stack into `groups` consecutive blocks, averages each block into one image
/// and returns the contours of those mean images.
inline ContourSet mean_image_contours(const Tensor2& images, int side, int groups,
                                      double fraction = kContourFraction, int n_angles = kDefaultAngles) {
  if (groups < 2 || images.rows() < groups) throw std::invalid_argument("need at least 2 groups of >= 1 image");
  const Eigen::Index per = images.rows() / groups;
  Tensor2 means(groups, images.cols());
  for (int g = 0; g < groups; ++g) means.row(g) = images.middleRows(g * per, per).colwise().mean();
  return contour_set(means, side, fraction, n_angles);
}

/// (max - min) / mean of a per-angle profile; 0 for a flat or all-zero profile.
inline double azimuthal_variation(const RowVector& profile) {
  const double m = profile.mean();
  return m > 0.0 ? (profile.maxCoeff() - profile.minCoeff()) / m : 0.0;
}

}  // namespace latent_calib::experiments
