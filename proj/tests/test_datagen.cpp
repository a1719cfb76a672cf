#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "latent_calib/datagen/normalize.hpp"
#include "test_util.hpp"

using namespace latent_calib;
using namespace latent_calib::datagen;
namespace lct = latent_calib::testing;

namespace {

double pearson(const Tensor2& a, const Tensor2& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  return cov / std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
}

}  // namespace

TEST(Simulate, IsDeterministic) {
  const std::vector<double> x{0.1, 0.7, 0.4, 0.9};
  const auto a = simulate(x), b = simulate(x);
  EXPECT_EQ(a.scalars, b.scalars);
  EXPECT_EQ(a.image, b.image);
}

TEST(Simulate, RejectsOutOfDomainInputs) {
  EXPECT_THROW(simulate(std::vector<double>{0.1, 1.2, 0.4, 0.9}), DomainError);
  EXPECT_THROW(simulate(std::vector<double>{-0.01, 0.2, 0.4, 0.9}), DomainError);
  EXPECT_THROW(simulate(std::vector<double>{0.1, 0.2, 0.4}), DimensionError);
}

TEST(Simulate, ImagesAreNonNegativeWithPositivePeak) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x{u(gen), u(gen), u(gen), u(gen)};
    const auto y = simulate(x);
    EXPECT_GE(y.image.minCoeff(), 0.0);
    EXPECT_GT(y.image.maxCoeff(), 0.0);
  }
}

TEST(Simulate, CorrelatedPairOverUniformSamples) {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor2 a(1000, 1), b(1000, 1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x{u(gen), u(gen), u(gen), u(gen)};
    const auto y = simulate(x);
    a(i, 0) = y.scalars(kCorrelatedFirst);
    b(i, 0) = y.scalars(kCorrelatedSecond);
  }
  EXPECT_GE(pearson(a, b), 0.95);
}

TEST(Simulate, PeakMovesMonotonicallyWithPositionInput) {
  int last_col = -1;
  for (int k = 0; k <= 20; ++k) {
    std::vector<double> x{0.5, 0.5, 0.5, 0.5};
    x[kPositionInput] = k / 20.0;
    const auto y = simulate(x);
    Eigen::Index r = 0, c = 0;
    y.image.maxCoeff(&r, &c);
    EXPECT_GE(static_cast<int>(c), last_col) << "step " << k;
    last_col = static_cast<int>(c);
  }
  EXPECT_GT(last_col, 8);
}

TEST(Simulate, SupportsExtraInputsAndScalars) {
  SimulatorDims dims{9, 12, 20};
  std::vector<double> x(9, 0.3);
  const auto y = simulate(x, dims);
  EXPECT_EQ(y.scalars.size(), 12);
  EXPECT_EQ(y.image.rows(), 20);
}

TEST(GenerateDataset, UniformMeansConcentrate) {
  const auto ds = generate_dataset(1000, 3, DensityProfile{});
  for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
    EXPECT_GE(ds.inputs.col(j).mean(), 0.45);
    EXPECT_LE(ds.inputs.col(j).mean(), 0.55);
  }
}

TEST(GenerateDataset, RampProfileHitsTheDensityRatio) {
  const auto ds = generate_dataset(2000, 5, DensityProfile::parse("ramp:1.75"));
  const double dense = (ds.inputs.col(0).array() < 0.5).count();
  const double sparse = static_cast<double>(ds.size()) - dense;
  EXPECT_GE(dense / sparse, 1.6);
  EXPECT_LE(dense / sparse, 1.9);
  EXPECT_EQ(ds.manifest.profile, "ramp:1.75");
}

TEST(GenerateDataset, SplitsAreDisjointAndCover) {
  const auto ds = generate_dataset(517, 8, DensityProfile{});
  const auto& m = ds.manifest;
  EXPECT_EQ(m.train.size() + m.validation.size() + m.test.size(), 517u);
  EXPECT_GE(m.validation.size(), 52u);
  EXPECT_GE(m.test.size(), 52u);
  EXPECT_NO_THROW(validate_splits(m));
  auto broken = m;
  broken.test.push_back(broken.train.front());
  EXPECT_THROW(validate_splits(broken), std::invalid_argument);
}

TEST(GenerateDataset, RejectsBadArguments) {
  EXPECT_THROW(generate_dataset(49, 1, DensityProfile{}), std::invalid_argument);
  EXPECT_THROW(DensityProfile::parse("ramp:abc"), std::invalid_argument);
  EXPECT_THROW(DensityProfile::parse("ramp:-1"), std::invalid_argument);
  EXPECT_THROW(DensityProfile::parse("gaussian"), std::invalid_argument);
  EXPECT_THROW(generate_dataset(100, 1, DensityProfile{}, {}, {0.9, 0.05, 0.05}), std::invalid_argument);
}

TEST(DatasetFiles, SameArgumentsGiveByteIdenticalFiles) {
  lct::TempDir a("ds_a"), b("ds_b");
  write_dataset(a.path(), generate_dataset(120, 9, DensityProfile::parse("ramp:2")));
  write_dataset(b.path(), generate_dataset(120, 9, DensityProfile::parse("ramp:2")));
  for (const char* f : {"manifest.json", "inputs.csv", "scalars.csv", "images.csv"}) {
    EXPECT_EQ(lct::slurp(a.path() / f), lct::slurp(b.path() / f)) << f;
  }
}

TEST(DatasetFiles, ReadBackMatchesWritten) {
  lct::TempDir dir("ds_rt");
  const auto ds = generate_dataset(80, 2, DensityProfile{});
  write_dataset(dir.path(), ds);
  const auto back = read_dataset(dir.path());
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.manifest.train, ds.manifest.train);
  const auto header = lct::slurp(dir.path() / "scalars.csv").substr(0, 9);
  EXPECT_EQ(header, "s0,s1,s2,");
}

TEST(DatasetFiles, UnwritableOutputPathThrows) {
  lct::TempDir dir("ds_file");
  std::ofstream(dir.path() / "blocker") << "x";
  EXPECT_THROW(write_dataset(dir.path() / "blocker" / "sub", generate_dataset(60, 1, DensityProfile{})),
               std::exception);
}

TEST(Normalize, TrainingSplitIsStandardized) {
  const auto ds = generate_dataset(400, 6, DensityProfile{});
  const auto norm = normalize_outputs(ds);
  const Tensor2 train = take_rows(norm.joint, ds.manifest.train);
  const auto d_s = ds.manifest.dims.d_s;
  for (Eigen::Index j = 0; j < d_s; ++j) {
    const double mu = train.col(j).mean();
    const double sd = std::sqrt((train.col(j).array() - mu).square().mean());
    EXPECT_LT(std::abs(mu), 1e-9);
    EXPECT_LT(std::abs(sd - 1.0), 1e-9);
  }
  const auto pixels = train.rightCols(train.cols() - d_s);
  const double pm = pixels.mean();
  EXPECT_LT(std::abs(pm), 1e-9);
  EXPECT_LT(std::abs(std::sqrt((pixels.array() - pm).square().mean()) - 1.0), 1e-9);
}

TEST(Normalize, RoundTripRecoversPhysicalUnits) {
  const auto ds = generate_dataset(200, 6, DensityProfile{});
  const auto norm = normalize_outputs(ds);
  const auto [s, img] = norm.stats.denormalize(norm.joint);
  EXPECT_LT((s - ds.scalars).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((img - ds.images).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ConstantChannelIsAnError) {
  auto ds = generate_dataset(100, 6, DensityProfile{});
  ds.scalars.col(3).setConstant(2.5);
  EXPECT_THROW(normalize_outputs(ds), ZeroVarianceError);
}
