#pragma once

#include "latent_calib/datagen/dataset.hpp"

namespace latent_calib::datagen {

class ZeroVarianceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-scalar-channel standardization plus one shared mean/sd for the pixel population.
/// Statistics come from the training split; sd is the population (ddof = 0) value.
struct OutputNormalization {
  RowVector scalar_mean, scalar_sd;
  double pixel_mean = 0.0;
  double pixel_sd = 1.0;

  [[nodiscard]] Eigen::Index d_s() const { return scalar_mean.size(); }

  /// Joint normalized row: [scalars | flattened image].
  [[nodiscard]] Tensor2 normalize(const Tensor2& scalars, const Tensor2& images) const {
    if (scalars.rows() != images.rows() || scalars.cols() != d_s()) {
      throw DimensionError("normalize: shape mismatch");
    }
    Tensor2 out(scalars.rows(), scalars.cols() + images.cols());
    out.leftCols(scalars.cols()) =
        ((scalars.rowwise() - scalar_mean).array().rowwise() / scalar_sd.array()).matrix();
    out.rightCols(images.cols()) = ((images.array() - pixel_mean) / pixel_sd).matrix();
    return out;
  }

  /// Inverse of normalize; returns (scalars, images) in physical units.
  [[nodiscard]] std::pair<Tensor2, Tensor2> denormalize(const Tensor2& joint) const {
    if (joint.cols() <= d_s()) throw DimensionError("denormalize: too few columns");
    Tensor2 s = ((joint.leftCols(d_s()).array().rowwise() * scalar_sd.array()).rowwise() +
                 scalar_mean.array())
                    .matrix();
    Tensor2 img = (joint.rightCols(joint.cols() - d_s()).array() * pixel_sd + pixel_mean).matrix();
    return {std::move(s), std::move(img)};
  }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"scalar_mean", io::to_json(scalar_mean)},
            {"scalar_sd", io::to_json(scalar_sd)},
            {"pixel_mean", pixel_mean},
            {"pixel_sd", pixel_sd}};
  }

  static OutputNormalization from_json(const nlohmann::json& j) {
    OutputNormalization n;
    n.scalar_mean = io::row_from_json(j.at("scalar_mean"));
    n.scalar_sd = io::row_from_json(j.at("scalar_sd"));
    n.pixel_mean = j.at("pixel_mean").get<double>();
    n.pixel_sd = j.at("pixel_sd").get<double>();
    return n;
  }
};

struct NormalizedDataset {
  Tensor2 joint;  // n x (d_s + d_img^2)
  OutputNormalization stats;
};

inline OutputNormalization fit_normalization(const Dataset& ds) {
  const auto& train = ds.manifest.train;
  if (train.size() < 2) throw std::invalid_argument("normalization needs >= 2 training samples");
  const Tensor2 s = take_rows(ds.scalars, train);
  const Tensor2 img = take_rows(ds.images, train);
  OutputNormalization n;
  n.scalar_mean = s.colwise().mean();
  n.scalar_sd = ((s.rowwise() - n.scalar_mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < n.scalar_sd.size(); ++j) {
    if (!(n.scalar_sd(j) > 1e-12)) {
      throw ZeroVarianceError("scalar channel " + std::to_string(j) + " has zero variance");
    }
  }
  n.pixel_mean = img.mean();
  n.pixel_sd = std::sqrt((img.array() - n.pixel_mean).square().mean());
  if (!(n.pixel_sd > 1e-12)) throw ZeroVarianceError("image pixels have zero variance");
  return n;
}

inline NormalizedDataset normalize_outputs(const Dataset& ds) {
  NormalizedDataset out;
  out.stats = fit_normalization(ds);
  out.joint = out.stats.normalize(ds.scalars, ds.images);
  return out;
}

}  // namespace latent_calib::datagen
