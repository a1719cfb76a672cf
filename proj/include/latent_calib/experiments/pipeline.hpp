#pragma once

// Stages of a full run. Each stage reads and writes plain files so the CLI can run them
// one at a time; run_all chains them under one root seed.
//
// Seed substreams (all derive_seed(root, tag)):
//   "data"          uniform dataset          "autoencoder"   AE init and shuffling
//   "sweep"         sweep training/posteriors "point"        deterministic F for the toy
//   "toy"           residual resampling      "contours"      dropout contour posterior
//   "density-data"  ramp dataset             "density-train" ramp forward model
//   "density"       density posteriors

#include <filesystem>
#include <iostream>
#include <ostream>

#include "latent_calib/experiments/config.hpp"
#include "latent_calib/experiments/report.hpp"
#include "latent_calib/experiments/toy.hpp"

namespace latent_calib::experiments {

namespace fs = std::filesystem;

inline void write_config(const fs::path& dir, const PipelineConfig& c) { io::write_json(dir / "config.json", to_json(c)); }

inline datagen::Dataset run_gen_data(const PipelineConfig& c, const fs::path& out) {
  auto ds = datagen::generate_dataset(c.n_samples, derive_seed(c.seed, "data"), datagen::DensityProfile::parse(c.profile),
                                      c.dims, c.fractions);
  datagen::write_dataset(out, ds);
  return ds;
}

inline autoencoder::AutoencoderModel run_train_ae(const PipelineConfig& c, const datagen::Dataset& ds, const fs::path& out,
                                                  std::ostream& log) {
  auto cfg = c.autoencoder;
  cfg.seed = derive_seed(c.seed, "autoencoder");
  const auto norm = datagen::normalize_outputs(ds);
  auto ae = autoencoder::train_autoencoder(ds, norm, cfg, [&](int epoch, const autoencoder::EpochLoss& l) {
    if ((epoch + 1) % 25 == 0) log << "  ae epoch " << epoch + 1 << " train " << l.train << " val " << l.validation << '\n';
  });
  autoencoder::save_autoencoder(out, ae);
  return ae;
}

inline calibration::SweepOptions sweep_options(const PipelineConfig& c) {
  calibration::SweepOptions o;
  o.forward = c.forward;
  o.method = c.interval;
  o.seed = derive_seed(c.seed, "sweep");
  o.threads = c.sweep_threads;
  return o;
}

inline std::string member_dir_name(double keep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "keep_%.4f", keep);
  return buf;
}

/// Writes sweep/sweep.csv, one model + test report per member, and the selected member's
/// test report under calibration/.
inline calibration::SweepResult run_sweep(const PipelineConfig& c, const autoencoder::LatentDataset& ld,
                                          const fs::path& run, std::ostream& log) {
  const auto rates = calibration::parse_keep_rates(c.keep_rates);
  auto save_member = [&](const calibration::SweepMember& m) {
    const fs::path dir = run / "sweep" / member_dir_name(m.keep_rate);
    forward_uq::save_forward_model(dir, m.model);
    calibration::write_report(dir, m.test);
    log << "  keep " << m.keep_rate << "  validation " << m.validation.mean_error << "  test " << m.test.mean_error
        << '\n';
  };
  calibration::SweepResult r;
  try {
    r = calibration::sweep_keep_rate(ld, rates, sweep_options(c), save_member);
  } catch (const calibration::SweepError& e) {
    if (!e.partial().members.empty()) {
      auto partial = e.partial();
      partial.selected.reset();
      calibration::write_sweep_table(run / "sweep" / "sweep_partial.csv", partial);
    }
    throw;
  }
  calibration::write_sweep_table(run / "sweep" / "sweep.csv", r);
  calibration::write_report(run / "calibration", r.best().test);
  io::write_json(run / "calibration" / "selected.json",
                 {{"keep_rate", r.selected_keep_rate()}, {"model", "sweep/" + member_dir_name(r.selected_keep_rate())}});
  return r;
}

inline void write_pair(const fs::path& path, const Tensor2& scalars) {
  using datagen::kCorrelatedFirst, datagen::kCorrelatedSecond;
  Tensor2 t(scalars.rows(), 2);
  t << scalars.col(kCorrelatedFirst), scalars.col(kCorrelatedSecond);
  io::write_csv(path, {"s" + std::to_string(kCorrelatedFirst), "s" + std::to_string(kCorrelatedSecond)}, t);
}

/// toy/summary.csv rows: method 0 = latent residuals, 1 = output residuals, 2 = simulator.
inline ToyResult run_toy(const PipelineConfig& c, const datagen::Dataset& ds, const autoencoder::AutoencoderModel& ae,
                         const autoencoder::LatentDataset& ld, const fs::path& run) {
  const auto pm = forward_uq::train_point_model(ld, c.forward, derive_seed(c.seed, "point"));
  const RowVector x = Eigen::Map<const RowVector>(c.toy_x.data(), static_cast<Eigen::Index>(c.toy_x.size()));
  auto t = toy_compare(pm, ae, ds, ld, x, c.toy_draws, derive_seed(c.seed, "toy"));
  write_pair(run / "toy" / "latent_cloud.csv", t.latent.scalars);
  write_pair(run / "toy" / "output_cloud.csv", t.output.scalars);
  Tensor2 s(3, 2);
  s << 0, t.r_latent, 1, t.r_output, 2, t.r_simulator;
  io::write_csv(run / "toy" / "summary.csv", {"method", "pearson_r"}, s);
  return t;
}

struct ContourStudy {
  ContourSet dropout, latent, output, output_mean_image;
};

inline ContourStudy run_contours(const PipelineConfig& c, const ToyResult& toy, const forward_uq::ForwardModel& model,
                                 const autoencoder::AutoencoderModel& ae, const fs::path& run) {
  const int side = ae.dims.d_img;
  ContourStudy s;
  const auto post = forward_uq::predict_output_posterior(model, ae, toy.x, model.mc_predict, derive_seed(c.seed, "contours"));
  s.dropout = contour_set(post.images, side, c.contour_fraction, c.contour_angles);
  s.latent = contour_set(toy.latent.images, side, c.contour_fraction, c.contour_angles);
  s.output = contour_set(toy.output.images, side, c.contour_fraction, c.contour_angles);
  s.output_mean_image = mean_image_contours(toy.output.images, side, c.contour_groups, c.contour_fraction, c.contour_angles);

  const auto header = io::numbered_header("a", c.contour_angles);
  io::write_csv(run / "contours" / "dropout_radii.csv", header, s.dropout.radii);
  io::write_csv(run / "contours" / "latent_radii.csv", header, s.latent.radii);
  io::write_csv(run / "contours" / "output_radii.csv", header, s.output.radii);
  io::write_csv(run / "contours" / "output_mean_image_radii.csv", header, s.output_mean_image.radii);
  Tensor2 summary(c.contour_angles, 9);
  for (int k = 0; k < c.contour_angles; ++k) {
    summary.row(k) << s.dropout.angles[static_cast<std::size_t>(k)], s.dropout.mean(k), s.dropout.sd(k), s.latent.mean(k),
        s.latent.sd(k), s.output.mean(k), s.output.sd(k), s.output_mean_image.mean(k), s.output_mean_image.sd(k);
  }
  io::write_csv(run / "contours" / "summary.csv",
                {"angle", "dropout_mean", "dropout_sd", "latent_mean", "latent_sd", "output_mean", "output_sd",
                 "output_mean_image_mean", "output_mean_image_sd"},
                summary);
  return s;
}

struct DensityPair {
  DensityStudy ramp, uniform;
  double keep_rate = 1.0;
};

/// The ramp model is trained at `keep_rate`; `uniform_model` is the control trained on the
/// uniform dataset at the same keep-rate.
inline DensityPair run_density(const PipelineConfig& c, const autoencoder::AutoencoderModel& ae,
                               const forward_uq::ForwardModel& uniform_model, const autoencoder::LatentDataset& uniform_ld,
                               const fs::path& run, std::ostream& log) {
  DensityPair d;
  d.keep_rate = uniform_model.keep_rate;
  const auto ramp_ds = datagen::generate_dataset(c.n_samples, derive_seed(c.seed, "density-data"),
                                                 datagen::DensityProfile::parse(c.density_profile), c.dims, c.fractions);
  datagen::write_dataset(run / "density" / "data", ramp_ds);
  const auto ramp_ld = autoencoder::encode_dataset(ae, ramp_ds);
  const auto ramp_model = forward_uq::train_forward(ramp_ld, d.keep_rate, c.forward, derive_seed(c.seed, "density-train"));
  forward_uq::save_forward_model(run / "density" / "model", ramp_model);
  d.ramp = density_study(ramp_model, ae, ramp_ld, c.density, derive_seed(c.seed, "density"));
  d.uniform = density_study(uniform_model, ae, uniform_ld, c.density, derive_seed(c.seed, "density"));
  log << "  ramp sd low/high " << d.ramp.sd_low << " / " << d.ramp.sd_high << "  uniform " << d.uniform.sd_low << " / "
      << d.uniform.sd_high << '\n';

  const std::vector<std::string> cols{"x", "mu", "sd"};
  io::write_csv(run / "density" / "ramp.csv", cols, d.ramp.table);
  io::write_csv(run / "density" / "uniform.csv", cols, d.uniform.table);
  Tensor2 hist(static_cast<Eigen::Index>(d.ramp.counts.size()), 3);
  for (std::size_t b = 0; b < d.ramp.counts.size(); ++b) {
    hist.row(static_cast<Eigen::Index>(b)) << d.ramp.bin_edges[b], d.ramp.bin_edges[b + 1],
        static_cast<double>(d.ramp.counts[b]);
  }
  io::write_csv(run / "density" / "histogram.csv", {"lo", "hi", "count"}, hist);
  Tensor2 s(2, 4);
  s << 0, d.ramp.count_ratio, d.ramp.sd_low, d.ramp.sd_high, 1, d.uniform.count_ratio, d.uniform.sd_low, d.uniform.sd_high;
  io::write_csv(run / "density" / "summary.csv", {"profile", "count_ratio", "sd_low", "sd_high"}, s);
  return d;
}

struct RunResult {
  datagen::Dataset data;
  autoencoder::AutoencoderModel ae;
  autoencoder::LatentDataset latents;
  calibration::SweepResult sweep;
  ToyResult toy;
  ContourStudy contours;
  DensityPair density;
};

/// gen-data, train-ae, sweep, toy, contours, density and report under `run`.
inline RunResult run_all(const PipelineConfig& config, const fs::path& run, std::ostream& log = std::cerr) {
  PipelineConfig c = config;
  if (c.toy_x.empty()) c.toy_x.assign(static_cast<std::size_t>(c.dims.d_in), 0.5);
  fs::create_directories(run);
  write_config(run, c);
  RunResult r;
  log << "[1/7] dataset\n";
  r.data = run_gen_data(c, run / "data");
  log << "[2/7] autoencoder\n";
  r.ae = run_train_ae(c, r.data, run / "ae", log);
  r.latents = autoencoder::encode_dataset(r.ae, r.data);
  autoencoder::write_latent_dataset(run / "latents", r.latents);
  log << "[3/7] keep-rate sweep\n";
  r.sweep = run_sweep(c, r.latents, run, log);
  log << "  selected keep-rate " << r.sweep.selected_keep_rate() << ", test error " << r.sweep.best().test.mean_error
      << '\n';
  log << "[4/7] residual toy\n";
  r.toy = run_toy(c, r.data, r.ae, r.latents, run);
  log << "  r latent " << r.toy.r_latent << "  r output " << r.toy.r_output << "  r simulator " << r.toy.r_simulator
      << '\n';
  log << "[5/7] contours\n";
  r.contours = run_contours(c, r.toy, r.sweep.best().model, r.ae, run);
  log << "[6/7] density study\n";
  r.density = run_density(c, r.ae, r.sweep.best().model, r.latents, run, log);
  log << "[7/7] report\n";
  make_report(run);
  return r;
}

}  // namespace latent_calib::experiments
