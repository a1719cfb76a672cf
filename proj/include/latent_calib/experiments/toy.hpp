#pragma once

// Residual-resampling uncertainty for a deterministic surrogate, applied either in latent
// space (then decoded) or directly in output space.

#include <string>

#include "latent_calib/forward_uq/forward_model.hpp"

namespace latent_calib::experiments {

enum class Space { Latent, Output };

inline std::string to_string(Space s) { return s == Space::Latent ? "latent" : "output"; }

class MissingResidualsError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Validation residuals of the deterministic pipeline in one space. Output-space columns are
/// the physical scalars followed by the flattened image.
struct ResidualUncertaintyModel {
  Space space = Space::Latent;
  Tensor2 residuals;  // validation rows x dims
  forward_uq::PointModel reference;
};

inline ResidualUncertaintyModel residual_model(Space space, const forward_uq::PointModel& pm,
                                               const autoencoder::AutoencoderModel& ae,
                                               const datagen::Dataset& ds, const autoencoder::LatentDataset& ld) {
  const auto& val = ds.manifest.validation;
  const Tensor2 x = datagen::take_rows(ds.inputs, val);
  const Tensor2 z_hat = pm.predict(x);
  ResidualUncertaintyModel m{space, {}, pm};
  if (space == Space::Latent) {
    m.residuals = datagen::take_rows(ld.latents, val) - z_hat;
  } else {
    const auto [s, img] = autoencoder::decode_batch(ae, z_hat);
    Tensor2 truth(static_cast<Eigen::Index>(val.size()), s.cols() + img.cols());
    truth << datagen::take_rows(ds.scalars, val), datagen::take_rows(ds.images, val);
    Tensor2 pred(truth.rows(), truth.cols());
    pred << s, img;
    m.residuals = truth - pred;
  }
  return m;
}

/// M draws around the deterministic prediction at x. Each column of every draw picks its
/// residual from an independently chosen validation row. Returns decoded/physical outputs.
struct UncertaintySamples {
  Tensor2 scalars;  // M x d_s
  Tensor2 images;   // M x d_img^2
};

inline UncertaintySamples draw_samples(const ResidualUncertaintyModel& m, const autoencoder::AutoencoderModel& ae,
                                       const RowVector& x, int draws, std::uint64_t seed) {
  if (m.residuals.rows() == 0) throw MissingResidualsError("residual model has no validation residuals");
  if (draws < 2) throw std::invalid_argument("need at least 2 draws");
  const RowVector z_hat = m.reference.predict(Tensor2(x)).row(0);
  Rng rng = make_rng(seed, m.space == Space::Latent ? "toy-latent" : "toy-output");
  const auto rows = static_cast<std::size_t>(m.residuals.rows());
  auto noisy = [&](const RowVector& centre) {
    if (centre.size() != m.residuals.cols()) throw DimensionError("residual width does not match the prediction");
    Tensor2 out = centre.replicate(draws, 1);
    for (int i = 0; i < draws; ++i) {
      for (Eigen::Index d = 0; d < out.cols(); ++d) {
        out(i, d) += m.residuals(static_cast<Eigen::Index>(uniform_index(rng, rows)), d);
      }
    }
    return out;
  };
  UncertaintySamples u;
  if (m.space == Space::Latent) {
    std::tie(u.scalars, u.images) = autoencoder::decode_batch(ae, noisy(z_hat));
  } else {
    const auto [s, img] = autoencoder::decode_batch(ae, Tensor2(z_hat));
    RowVector centre(s.cols() + img.cols());
    centre << s.row(0), img.row(0);
    const Tensor2 out = noisy(centre);
    u.scalars = out.leftCols(s.cols());
    u.images = out.rightCols(img.cols());
  }
  return u;
}

inline double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson needs two equal-length series");
  const double ma = a.mean(), mb = b.mean();
  const double sab = ((a.array() - ma) * (b.array() - mb)).sum();
  const double saa = (a.array() - ma).square().sum(), sbb = (b.array() - mb).square().sum();
  // A collapsed cloud has no defined correlation; report 0.
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct ToyResult {
  RowVector x;
  UncertaintySamples latent, output;
  double r_latent = 0.0, r_output = 0.0, r_simulator = 0.0;

  [[nodiscard]] double gap() const { return r_latent - std::abs(r_output); }
};

inline ToyResult toy_compare(const forward_uq::PointModel& pm, const autoencoder::AutoencoderModel& ae,
                             const datagen::Dataset& ds, const autoencoder::LatentDataset& ld, const RowVector& x,
                             int draws, std::uint64_t seed) {
  using datagen::kCorrelatedFirst, datagen::kCorrelatedSecond;
  ToyResult t;
  t.x = x;
  t.latent = draw_samples(residual_model(Space::Latent, pm, ae, ds, ld), ae, x, draws, seed);
  t.output = draw_samples(residual_model(Space::Output, pm, ae, ds, ld), ae, x, draws, seed);
  t.r_latent = pearson(t.latent.scalars.col(kCorrelatedFirst), t.latent.scalars.col(kCorrelatedSecond));
  t.r_output = pearson(t.output.scalars.col(kCorrelatedFirst), t.output.scalars.col(kCorrelatedSecond));
  t.r_simulator = pearson(ds.scalars.col(kCorrelatedFirst), ds.scalars.col(kCorrelatedSecond));
  return t;
}

}  // namespace latent_calib::experiments
