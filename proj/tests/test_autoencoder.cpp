#include <gtest/gtest.h>

#include "latent_calib/autoencoder/autoencoder.hpp"
#include "test_util.hpp"

using namespace latent_calib;
using namespace latent_calib::autoencoder;
namespace lct = latent_calib::testing;

namespace {

double r_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  const double ss_res = (truth - pred).squaredNorm();
  const double ss_tot = (truth.array() - truth.mean()).square().sum();
  return 1.0 - ss_res / ss_tot;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto ca = (a.array() - a.mean()), cb = (b.array() - b.mean());
  return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

// The default dataset and a fully trained default autoencoder, shared by the suite.
class TrainedAutoencoder : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ds_ = new datagen::Dataset(datagen::generate_dataset(2000, 7, datagen::DensityProfile{}));
    const auto norm = datagen::normalize_outputs(*ds_);
    ae_ = new AutoencoderModel(train_autoencoder(*ds_, norm, AutoencoderConfig{}));
  }
  static void TearDownTestSuite() {
    delete ds_;
    delete ae_;
  }
  static datagen::Dataset* ds_;
  static AutoencoderModel* ae_;
};

datagen::Dataset* TrainedAutoencoder::ds_ = nullptr;
AutoencoderModel* TrainedAutoencoder::ae_ = nullptr;

}  // namespace

TEST_F(TrainedAutoencoder, ValidationReconstructionPerScalarChannel) {
  const auto& val = ds_->manifest.validation;
  const Tensor2 truth = datagen::take_rows(ds_->scalars, val);
  const auto [s, img] = decode_batch(*ae_, encode_normalized(*ae_, ae_->stats.normalize(truth, datagen::take_rows(ds_->images, val))));
  for (Eigen::Index j = 0; j < truth.cols(); ++j) EXPECT_GE(r_squared(truth.col(j), s.col(j)), 0.95) << "scalar " << j;
}

TEST_F(TrainedAutoencoder, LossAfterWarmupDoesNotIncrease) {
  ASSERT_EQ(ae_->log.size(), 200u);
  EXPECT_LE(ae_->log.back().train, ae_->log[9].train);
  EXPECT_LE(ae_->log.back().train, ae_->log.front().train);
}

TEST_F(TrainedAutoencoder, CorrelatedPairSurvivesRoundTrip) {
  const auto& val = ds_->manifest.validation;
  const auto [s, img] = decode_batch(
      *ae_, encode_normalized(*ae_, ae_->stats.normalize(datagen::take_rows(ds_->scalars, val), datagen::take_rows(ds_->images, val))));
  EXPECT_GE(pearson(s.col(datagen::kCorrelatedFirst), s.col(datagen::kCorrelatedSecond)), 0.9);
}

TEST_F(TrainedAutoencoder, EncodeIsDeterministic) {
  const auto y = ds_->output(3);
  EXPECT_EQ(encode(*ae_, y), encode(*ae_, y));
}

TEST_F(TrainedAutoencoder, LatentDimsHavePositiveVariance) {
  const auto ld = encode_dataset(*ae_, *ds_);
  const Tensor2 val = datagen::take_rows(ld.latents, ds_->manifest.validation);
  const RowVector mean = val.colwise().mean();
  const RowVector var = (val.rowwise() - mean).array().square().colwise().mean();
  for (Eigen::Index j = 0; j < var.size(); ++j) {
    EXPECT_TRUE(std::isfinite(var(j)));
    EXPECT_GT(var(j), 1e-8);
  }
}

TEST_F(TrainedAutoencoder, DecodedImagesAreClampedAndContinuous) {
  const auto ld = encode_dataset(*ae_, *ds_);
  RowVector z = ld.latents.row(11);
  const auto a = decode(*ae_, z);
  EXPECT_GE(a.image.minCoeff(), 0.0);
  // Far outside the training latents as well.
  EXPECT_GE(decode(*ae_, RowVector::Constant(ae_->d_z, 50.0)).image.minCoeff(), 0.0);
  z(0) += 1e-7;
  const auto b = decode(*ae_, z);
  EXPECT_LT((a.scalars - b.scalars).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((a.image - b.image).cwiseAbs().maxCoeff(), 1e-3);
}

TEST_F(TrainedAutoencoder, EncodeDatasetKeepsSplitsAndStats) {
  const auto ld = encode_dataset(*ae_, *ds_);
  EXPECT_EQ(ld.latents.rows(), static_cast<Eigen::Index>(ds_->size()));
  EXPECT_EQ(ld.manifest.train, ds_->manifest.train);
  EXPECT_EQ(ld.manifest.test, ds_->manifest.test);
  const Tensor2 train = datagen::take_rows(ld.latents, ds_->manifest.train);
  const RowVector mean = train.colwise().mean();
  EXPECT_LT((mean - ld.latent_mean).cwiseAbs().maxCoeff(), 1e-12);
  const RowVector sd =
      ((train.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(train.rows() - 1)).sqrt();
  EXPECT_LT((sd - ld.latent_sd).cwiseAbs().maxCoeff(), 1e-12);

  lct::TempDir a("latents_a"), b("latents_b");
  write_latent_dataset(a.path(), ld);
  write_latent_dataset(b.path(), encode_dataset(*ae_, *ds_));
  for (const char* f : {"latents.csv", "inputs.csv", "latent_meta.json"}) {
    EXPECT_EQ(lct::slurp(a.path() / f), lct::slurp(b.path() / f)) << f;
  }
  const auto back = read_latent_dataset(a.path());
  EXPECT_EQ(back.latents, ld.latents);
}

TEST_F(TrainedAutoencoder, CheckpointDirectoryRoundTrip) {
  lct::TempDir dir("ae_ckpt");
  save_autoencoder(dir.path(), *ae_);
  for (const char* f : {"encoder.lcnn", "decoder.lcnn", "ae_meta.json"}) EXPECT_TRUE(std::filesystem::exists(dir.path() / f));
  const auto back = load_autoencoder(dir.path());
  const auto y = ds_->output(5);
  EXPECT_EQ(encode(back, y), encode(*ae_, y));
  EXPECT_EQ(back.log.size(), ae_->log.size());
}

TEST(Autoencoder, LatentWidthMustBeBelowOutputWidth) {
  const auto ds = datagen::generate_dataset(60, 2, datagen::DensityProfile{});
  const auto norm = datagen::normalize_outputs(ds);
  AutoencoderConfig cfg;
  cfg.epochs = 1;
  cfg.d_z = 8 + 16 * 16;
  EXPECT_THROW(train_autoencoder(ds, norm, cfg), std::invalid_argument);
  cfg.d_z = 0;
  EXPECT_THROW(train_autoencoder(ds, norm, cfg), std::invalid_argument);
}

TEST(Autoencoder, SameSeedSameParameters) {
  const auto ds = datagen::generate_dataset(120, 2, datagen::DensityProfile{});
  const auto norm = datagen::normalize_outputs(ds);
  AutoencoderConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = {16};
  const auto a = train_autoencoder(ds, norm, cfg), b = train_autoencoder(ds, norm, cfg);
  EXPECT_EQ(a.encoder.layers[0].weights, b.encoder.layers[0].weights);
  EXPECT_EQ(a.decoder.layers[1].biases, b.decoder.layers[1].biases);
}

TEST(Autoencoder, EncodeRejectsWrongDims) {
  const auto ds = datagen::generate_dataset(60, 2, datagen::DensityProfile{});
  const auto norm = datagen::normalize_outputs(ds);
  AutoencoderConfig cfg;
  cfg.epochs = 1;
  cfg.hidden = {8};
  const auto ae = train_autoencoder(ds, norm, cfg);
  datagen::MultimodalOutput y = ds.output(0);
  y.scalars.conservativeResize(5);
  EXPECT_THROW(encode(ae, y), DimensionError);
  EXPECT_THROW(decode(ae, RowVector::Zero(3)), DimensionError);
}
