#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace latent_calib {

/// Row-major dense matrix. Vectors x, y, z travel as 1 x d rows; batches stack rows.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised whenever a NaN/Inf shows up in activations, losses or gradients.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

inline void require_finite(const Tensor2& t, const std::string& what) {
  if (!t.allFinite()) {
    throw NumericalError("non-finite value in " + what + " (" + std::to_string(t.rows()) + "x" +
                         std::to_string(t.cols()) + ")");
  }
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in " + what);
}

inline void require_shape(const Tensor2& t, Eigen::Index rows, Eigen::Index cols,
                          const std::string& what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw DimensionError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  }
}

/// Per-column sample sd (n - 1 denominator) from deviations against the first row, so a
/// column of identical values gives exactly 0. Needs at least 2 rows.
inline RowVector column_sd(const Tensor2& t) {
  const double n = static_cast<double>(t.rows());
  const Tensor2 dev = t.rowwise() - t.row(0);
  const RowVector ss = dev.array().square().colwise().sum().matrix() - (dev.colwise().sum().array().square() / n).matrix();
  return (ss.array().max(0.0) / (n - 1.0)).sqrt().matrix();
}

}  // namespace latent_calib
