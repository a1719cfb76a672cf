#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "contour_oracle.hpp"
#include "latent_calib/experiments/pipeline.hpp"
#include "test_util.hpp"

using namespace latent_calib;
using namespace latent_calib::experiments;
namespace fs = std::filesystem;
namespace lct = latent_calib::testing;

namespace {

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = haystack.find(needle); p != std::string::npos; p = haystack.find(needle, p + 1)) ++n;
  return n;
}

std::vector<fs::path> files_with_extension(const fs::path& root, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipelineConfig tiny_config() {
  auto c = config_from_json(nlohmann::json::object());
  c.n_samples = 200;
  c.autoencoder.epochs = 8;
  c.autoencoder.hidden = {32, 16};
  c.autoencoder.d_z = 4;
  c.forward.hidden = {16};
  c.forward.epochs = 3;
  c.forward.mc_train = 5;
  c.forward.mc_predict = 40;
  c.keep_rates = "0.9,0.95";
  c.toy_draws = 100;
  c.contour_groups = 5;
  c.density.n_eval = 40;
  c.density.samples = 20;
  return c;
}

}  // namespace

TEST(ExtractContour, IsotropicBlobMatchesAnalyticRadius) {
  const auto img = lct::gaussian_blob(33, 16.0, 16.0, 3.0, 3.0);
  const double expected = 3.0 * std::sqrt(2.0 * std::log(1.0 / 0.17));
  const auto c = extract_contour(img);
  ASSERT_EQ(c.radii.size(), 64u);
  EXPECT_NEAR(c.cx, 16.0, 1e-9);
  EXPECT_NEAR(c.cy, 16.0, 1e-9);
  for (double r : c.radii) EXPECT_NEAR(r, expected, 0.5);
}

TEST(ExtractContour, EllipticalBlobAxisRatio) {
  const auto img = lct::gaussian_blob(41, 20.0, 20.0, 4.0, 2.0);
  const auto c = extract_contour(img);
  const double hi = *std::max_element(c.radii.begin(), c.radii.end());
  const double lo = *std::min_element(c.radii.begin(), c.radii.end());
  EXPECT_NEAR(hi / lo, 2.0, 0.2);
}

TEST(ExtractContour, FullPeakFractionShrinksToCentre) {
  const auto c = extract_contour(lct::gaussian_blob(21, 10.0, 10.0, 2.5, 2.5), 1.0);
  for (double r : c.radii) EXPECT_LE(r, 0.05);
}

TEST(ExtractContour, EmptyLevelSetsAreErrors) {
  const auto img = lct::gaussian_blob(16, 8.0, 8.0, 2.0, 2.0);
  EXPECT_THROW(extract_contour(img, 1.2), ContourError);
  EXPECT_THROW(extract_contour(Tensor2::Zero(16, 16)), ContourError);
  EXPECT_THROW(extract_contour(img, 0.0), std::invalid_argument);
}

TEST(ExtractContour, RotatedBlobsMatchAnalyticLevelSet) {
  struct Blob {
    double cx, cy, sx, sy, theta;
  };
  const std::vector<Blob> blobs{{15.0, 15.0, 3.0, 3.0, 0.0}, {14.2, 16.7, 4.5, 2.2, 0.6}, {17.0, 13.5, 2.5, 3.8, 2.1}};
  for (const auto& b : blobs) {
    const auto c = extract_contour(lct::gaussian_blob(32, b.cx, b.cy, b.sx, b.sy, b.theta));
    EXPECT_NEAR(c.cx, b.cx, 0.05);
    EXPECT_NEAR(c.cy, b.cy, 0.05);
    const auto angles = contour_angles(64);
    for (std::size_t a = 0; a < angles.size(); ++a) {
      EXPECT_NEAR(c.radii[a], lct::analytic_radius(b.sx, b.sy, b.theta, angles[a], 0.17), 0.5) << "angle " << a;
    }
  }
}

// Every pixel centre at or above the level lies inside the contour (up to one pixel), and
// the contour never reaches past the farthest such pixel in a wide sector by more than a pixel.
TEST(ExtractContour, SimulatorImagesAgreeWithBruteForceScan) {
  for (const auto& x : std::vector<std::vector<double>>{{0.2, 0.3, 0.5, 0.1}, {0.9, 0.6, 0.2, 0.8}, {0.5, 0.5, 0.5, 0.5}}) {
    const auto img = datagen::simulate(x).image;
    const auto c = extract_contour(img);
    const auto angles = contour_angles(64);
    const double level = 0.17 * img.maxCoeff();
    const auto narrow = lct::sector_scan(img, level, c.cx, c.cy, angles, 0.05);
    const auto wide = lct::sector_scan(img, level, c.cx, c.cy, angles, 0.4);
    for (std::size_t a = 0; a < angles.size(); ++a) {
      if (narrow[a]) EXPECT_LE(*narrow[a], c.radii[a] + 1.0) << "angle " << a;
      ASSERT_TRUE(wide[a].has_value());
      EXPECT_LE(c.radii[a], *wide[a] + 1.0) << "angle " << a;
    }
  }
}

TEST(ContourSet, IdenticalImagesHaveZeroSpread) {
  const auto img = lct::gaussian_blob(16, 7.3, 8.1, 2.0, 3.0, 0.4);
  const Tensor2 stack = Eigen::Map<const RowVector>(img.data(), 256).replicate(20, 1);
  const auto cs = contour_set(stack, 16);
  EXPECT_EQ(cs.sd.maxCoeff(), 0.0);
  EXPECT_EQ(azimuthal_variation(cs.sd), 0.0);
}

TEST(ContourSet, SpreadIsFiniteAndBoundedOnJitteredBlobs) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  Tensor2 stack(30, 256);
  for (int i = 0; i < 30; ++i) {
    const auto img = lct::gaussian_blob(16, 7.5 + jitter(gen), 7.5 + jitter(gen), 2.0 + 0.3 * jitter(gen), 2.5);
    stack.row(i) = Eigen::Map<const RowVector>(img.data(), 256);
  }
  const auto cs = contour_set(stack, 16);
  for (Eigen::Index k = 0; k < cs.sd.size(); ++k) {
    EXPECT_TRUE(std::isfinite(cs.sd(k)));
    EXPECT_LE(cs.sd(k), 8.0);
    EXPECT_GE(cs.radii.col(k).minCoeff(), 0.0);
  }
  EXPECT_GT(cs.sd.maxCoeff(), 0.0);
  const auto means = mean_image_contours(stack, 16, 5);
  EXPECT_EQ(means.radii.rows(), 5);
}

TEST(Pearson, CollapsedSeriesGiveZero) {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(5, 2.0), b = Eigen::VectorXd::LinSpaced(5, 0, 1);
  EXPECT_EQ(pearson(a, b), 0.0);
  EXPECT_NEAR(pearson(b, 3.0 * b), 1.0, 1e-12);
}

TEST(Config, RoundTripsThroughJson) {
  auto c = tiny_config();
  c.keep_rates = "0.5,0.7";
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.toy_x.size(), 4u);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_THROW(config_from_json({{"sweep", {{"keep_rates", "0.9:1.2:0.1"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"toy", {{"x", {0.5, 0.5}}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"data", {{"profile", "ramp:x"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"data", {{"d_in", 2}}}}), std::invalid_argument);
}

TEST(Report, EmptyRunDirectoryListsEveryExpectedFile) {
  lct::TempDir dir("report_empty");
  try {
    make_report(dir.path());
    FAIL() << "expected MissingArtifactsError";
  } catch (const MissingArtifactsError& e) {
    EXPECT_EQ(e.missing(), report_inputs());
    for (const auto& f : report_inputs()) EXPECT_NE(std::string(e.what()).find(f), std::string::npos) << f;
  }
}

// One tiny end-to-end run shared by the pipeline-level checks.
class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new lct::TempDir("tiny_run");
    std::ostringstream log;
    result_ = new RunResult(run_all(tiny_config(), dir_->path() / "a", log));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete dir_;
  }
  static lct::TempDir* dir_;
  static RunResult* result_;
};

lct::TempDir* TinyRun::dir_ = nullptr;
RunResult* TinyRun::result_ = nullptr;

TEST_F(TinyRun, WritesResolvedConfigAndArtifacts) {
  const fs::path run = dir_->path() / "a";
  EXPECT_EQ(io::read_json(run / "config.json"), to_json(tiny_config()));
  for (const auto& f : report_inputs()) EXPECT_TRUE(fs::exists(run / f)) << f;
  for (const char* f : {"data/manifest.json", "ae/ae_meta.json", "ae/encoder.lcnn", "ae/decoder.lcnn",
                        "calibration/calibration_report.json", "sweep/keep_0.9000/fwd_meta.json"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
}

TEST_F(TinyRun, RerunGivesByteIdenticalCsvs) {
  std::ostringstream log;
  run_all(tiny_config(), dir_->path() / "b", log);
  const auto a = files_with_extension(dir_->path() / "a", ".csv");
  const auto b = files_with_extension(dir_->path() / "b", ".csv");
  ASSERT_EQ(a, b);
  EXPECT_GE(a.size(), 15u);
  for (const auto& f : a) {
    EXPECT_EQ(lct::slurp(dir_->path() / "a" / f), lct::slurp(dir_->path() / "b" / f)) << f;
  }
}

TEST_F(TinyRun, ReportRegenerationIsByteIdentical) {
  const fs::path run = dir_->path() / "a";
  std::map<fs::path, std::string> before;
  for (const auto& f : files_with_extension(run / "report", ".svg")) before[f] = lct::slurp(run / "report" / f);
  ASSERT_EQ(before.size(), 5u);
  make_report(run);
  for (const auto& [f, text] : before) EXPECT_EQ(lct::slurp(run / "report" / f), text) << f;
}

TEST_F(TinyRun, CalibrationPlotHasOneSeriesPerLatentDimPlusDiagonal) {
  const auto svg = lct::slurp(dir_->path() / "a" / "report" / "calibration_curves.svg");
  EXPECT_EQ(count_of(svg, "class=\"series\""), 4u);
  EXPECT_EQ(count_of(svg, "class=\"reference\""), 1u);
}

TEST_F(TinyRun, ZeroResidualsCollapseBothMethodsToOnePoint) {
  const auto& r = *result_;
  const auto pm = forward_uq::train_point_model(r.latents, tiny_config().forward, 5);
  const RowVector x = RowVector::Constant(4, 0.4);
  auto latent = residual_model(Space::Latent, pm, r.ae, r.data, r.latents);
  auto output = residual_model(Space::Output, pm, r.ae, r.data, r.latents);
  EXPECT_EQ(latent.residuals.rows(), static_cast<Eigen::Index>(r.data.manifest.validation.size()));
  latent.residuals.setZero();
  output.residuals.setZero();
  const auto a = draw_samples(latent, r.ae, x, 20, 1), b = draw_samples(output, r.ae, x, 20, 1);
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_LT((a.scalars.row(i) - a.scalars.row(0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.scalars.row(i) - b.scalars.row(i)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.images.row(i) - b.images.row(i)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_F(TinyRun, ToyCloudsAreSeeded) {
  const auto& r = *result_;
  const auto pm = forward_uq::train_point_model(r.latents, tiny_config().forward, 5);
  const RowVector x = RowVector::Constant(4, 0.5);
  const auto a = toy_compare(pm, r.ae, r.data, r.latents, x, 50, 9), b = toy_compare(pm, r.ae, r.data, r.latents, x, 50, 9);
  EXPECT_EQ(a.latent.scalars, b.latent.scalars);
  EXPECT_EQ(a.output.scalars, b.output.scalars);
  EXPECT_NE(toy_compare(pm, r.ae, r.data, r.latents, x, 50, 10).latent.scalars, a.latent.scalars);
  ResidualUncertaintyModel empty{Space::Latent, Tensor2(0, 4), pm};
  EXPECT_THROW(draw_samples(empty, r.ae, x, 10, 1), MissingResidualsError);
}

TEST_F(TinyRun, DensityStudyValidatesCoordinate) {
  const auto& r = *result_;
  DensityOptions o;
  o.n_eval = 4;
  o.samples = 5;
  o.coordinate = 4;
  EXPECT_THROW(density_study(r.sweep.best().model, r.ae, r.latents, o, 1), std::out_of_range);
  o.coordinate = 1;
  const auto d = density_study(r.sweep.best().model, r.ae, r.latents, o, 1);
  EXPECT_EQ(d.table.rows(), 4);
  EXPECT_EQ(d.counts.size(), 20u);
  std::size_t total = 0;
  for (auto c : d.counts) total += c;
  EXPECT_EQ(total, r.latents.manifest.train.size());
}

TEST_F(TinyRun, DropoutContoursCollapseAtKeepRateOne) {
  const auto& r = *result_;
  auto cfg = tiny_config().forward;
  cfg.epochs = 1;
  const auto m = forward_uq::train_forward(r.latents, 1.0, cfg, 4);
  const auto post = forward_uq::predict_output_posterior(m, r.ae, RowVector::Constant(4, 0.5), 30, 2);
  const auto cs = contour_set(post.images, 16);
  EXPECT_EQ(cs.sd.maxCoeff(), 0.0);
}
