// latent-calib: command-line front end for the pipeline stages.

#include <CLI11.hpp>

#include <iostream>

#include "latent_calib/latent_calib.hpp"

namespace fs = std::filesystem;
using namespace latent_calib;
using experiments::PipelineConfig;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? experiments::config_from_json(nlohmann::json::object())
                                      : experiments::load_config(config);
    if (seed) c.seed = *seed;
    return c;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file (missing keys take defaults)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "root seed (overrides the config)");
}

autoencoder::LatentDataset latents_for(const fs::path& data, const std::string& ae_dir) {
  if (fs::exists(data / "latent_meta.json")) return autoencoder::read_latent_dataset(data);
  if (ae_dir.empty()) throw std::invalid_argument(data.string() + " is not a latent dataset; pass --ae to encode it");
  return autoencoder::encode_dataset(autoencoder::load_autoencoder(ae_dir), datagen::read_dataset(data));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoencoder + MC-dropout surrogate with latent-space calibration"};
  app.require_subcommand(1);

  // gen-data
  Common gen_c;
  std::size_t gen_n = 0;
  std::string gen_profile, gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  add_common(gen, gen_c);
  gen->add_option("--n", gen_n, "number of samples");
  gen->add_option("--profile", gen_profile, "uniform | ramp:RATIO");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train-ae
  Common ae_c;
  std::string ae_data, ae_out;
  std::optional<int> ae_dz, ae_epochs;
  auto* tae = app.add_subcommand("train-ae", "train the autoencoder and encode the dataset");
  add_common(tae, ae_c);
  tae->add_option("--data", ae_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tae->add_option("--out", ae_out, "autoencoder directory")->required();
  tae->add_option("--d-z", ae_dz, "latent width");
  tae->add_option("--epochs", ae_epochs, "training epochs");

  // train-forward
  Common fw_c;
  std::string fw_data, fw_ae, fw_out;
  double fw_keep = 0.98;
  std::optional<int> fw_mc, fw_epochs;
  auto* tfw = app.add_subcommand("train-forward", "train one MC-dropout forward model");
  add_common(tfw, fw_c);
  tfw->add_option("--data", fw_data, "latent dataset, or dataset directory with --ae")->required();
  tfw->add_option("--ae", fw_ae, "autoencoder directory");
  tfw->add_option("--keep-rate", fw_keep, "dropout keep-rate in (0, 1]");
  tfw->add_option("--mc-train", fw_mc, "Monte Carlo passes per training item");
  tfw->add_option("--epochs", fw_epochs, "training epochs");
  tfw->add_option("--out", fw_out, "model directory")->required();

  // sweep
  Common sw_c;
  std::string sw_data, sw_ae, sw_out;
  std::optional<std::string> sw_rates;
  std::optional<int> sw_threads;
  auto* sw = app.add_subcommand("sweep", "train one model per keep-rate and select on validation");
  add_common(sw, sw_c);
  sw->add_option("--data", sw_data, "latent dataset, or dataset directory with --ae")->required();
  sw->add_option("--ae", sw_ae, "autoencoder directory");
  sw->add_option("--keep-rates", sw_rates, "lo:hi:step or comma list");
  sw->add_option("--threads", sw_threads, "members trained in parallel (0: all hardware threads)")->check(CLI::NonNegativeNumber);
  sw->add_option("--out", sw_out, "run directory")->required();

  // calibrate
  std::string cal_model, cal_data, cal_ae, cal_out, cal_split = "test", cal_interval = "empirical";
  std::uint64_t cal_seed = 1;
  std::optional<int> cal_samples;
  auto* cal = app.add_subcommand("calibrate", "coverage curves and calibration error of a trained model");
  cal->add_option("--model", cal_model, "forward model directory")->required()->check(CLI::ExistingDirectory);
  cal->add_option("--data", cal_data, "latent dataset, or dataset directory with --ae")->required();
  cal->add_option("--ae", cal_ae, "autoencoder directory");
  cal->add_option("--split", cal_split, "validation | test")->check(CLI::IsMember({"validation", "test"}));
  cal->add_option("--samples", cal_samples, "posterior samples per point (default: the model's)");
  cal->add_option("--seed", cal_seed, "posterior seed");
  cal->add_option("--interval", cal_interval, "empirical | gaussian");
  cal->add_option("--out", cal_out, "report directory (default: the model directory)");

  // toy-compare / contours / density
  Common ex_c;
  std::string ex_data, ex_ae, ex_model, ex_out;
  auto* toy = app.add_subcommand("toy-compare", "latent vs output residual uncertainty on the correlated pair");
  auto* con = app.add_subcommand("contours", "17% contour uncertainty for dropout and residual methods");
  auto* den = app.add_subcommand("density", "posterior sd along one input on ramp vs uniform data");
  for (auto* sc : {toy, con, den}) {
    add_common(sc, ex_c);
    sc->add_option("--data", ex_data, "uniform dataset directory")->required()->check(CLI::ExistingDirectory);
    sc->add_option("--ae", ex_ae, "autoencoder directory")->required()->check(CLI::ExistingDirectory);
    sc->add_option("--out", ex_out, "run directory")->required();
  }
  for (auto* sc : {con, den}) {
    sc->add_option("--model", ex_model, "forward model directory")->required()->check(CLI::ExistingDirectory);
  }

  // report
  std::string rep_run;
  auto* rep = app.add_subcommand("report", "render SVG plots and summary.txt from a run directory");
  rep->add_option("--run", rep_run, "run directory")->required();

  // run-all
  Common all_c;
  std::string all_out;
  auto* all = app.add_subcommand("run-all", "every stage under one root seed");
  add_common(all, all_c);
  all->add_option("--out", all_out, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto c = gen_c.resolve();
      if (gen_n) c.n_samples = gen_n;
      if (!gen_profile.empty()) c.profile = gen_profile;
      const auto ds = experiments::run_gen_data(c, gen_out);
      experiments::write_config(gen_out, c);
      std::cout << "wrote " << ds.size() << " samples to " << gen_out << '\n';
    } else if (tae->parsed()) {
      auto c = ae_c.resolve();
      if (ae_dz) c.autoencoder.d_z = *ae_dz;
      if (ae_epochs) c.autoencoder.epochs = *ae_epochs;
      const auto ds = datagen::read_dataset(ae_data);
      const auto ae = experiments::run_train_ae(c, ds, ae_out, std::cerr);
      autoencoder::write_latent_dataset(fs::path(ae_out) / "latents", autoencoder::encode_dataset(ae, ds));
      experiments::write_config(ae_out, c);
      std::cout << "best epoch " << ae.best_epoch + 1 << ", validation loss " << ae.log.at(ae.best_epoch).validation << '\n';
    } else if (tfw->parsed()) {
      auto c = fw_c.resolve();
      if (fw_mc) c.forward.mc_train = *fw_mc;
      if (fw_epochs) c.forward.epochs = *fw_epochs;
      const auto ld = latents_for(fw_data, fw_ae);
      const auto m = forward_uq::train_forward(ld, fw_keep, c.forward, derive_seed(c.seed, "forward"),
                                               [](int e, const forward_uq::NllEpoch& l) {
                                                 if ((e + 1) % 25 == 0) {
                                                   std::cerr << "  epoch " << e + 1 << " train " << l.train << " val "
                                                             << l.validation << '\n';
                                                 }
                                               });
      forward_uq::save_forward_model(fw_out, m);
      experiments::write_config(fw_out, c);
      std::cout << "best epoch " << m.best_epoch + 1 << ", validation NLL " << m.log.at(m.best_epoch).validation << '\n';
    } else if (sw->parsed()) {
      auto c = sw_c.resolve();
      if (sw_rates) c.keep_rates = *sw_rates;
      if (sw_threads) c.sweep_threads = *sw_threads;
      const auto ld = latents_for(sw_data, sw_ae);
      fs::create_directories(sw_out);
      experiments::write_config(sw_out, c);
      const auto r = experiments::run_sweep(c, ld, sw_out, std::cerr);
      std::cout << "selected keep-rate " << r.selected_keep_rate() << ", test mean calibration error "
                << r.best().test.mean_error << '\n';
    } else if (cal->parsed()) {
      const auto m = forward_uq::load_forward_model(cal_model);
      const auto ld = latents_for(cal_data, cal_ae);
      const auto& split = cal_split == "test" ? ld.manifest.test : ld.manifest.validation;
      const auto report = calibration::calibrate_split(m, ld, split, cal_split, cal_samples.value_or(m.mc_predict), cal_seed,
                                                       calibration::ConfidenceGrid::standard(),
                                                       calibration::parse_interval_method(cal_interval));
      calibration::write_report(cal_out.empty() ? cal_model : cal_out, report);
      std::cout << "mean calibration error " << report.mean_error << " over " << report.n_test << " points\n";
    } else if (toy->parsed() || con->parsed() || den->parsed()) {
      auto c = ex_c.resolve();
      const auto ds = datagen::read_dataset(ex_data);
      const auto ae = autoencoder::load_autoencoder(ex_ae);
      const auto ld = autoencoder::encode_dataset(ae, ds);
      fs::create_directories(ex_out);
      experiments::write_config(ex_out, c);
      if (den->parsed()) {
        const auto d = experiments::run_density(c, ae, forward_uq::load_forward_model(ex_model), ld, ex_out, std::cerr);
        std::cout << "ramp count ratio " << d.ramp.count_ratio << "; mean sd low/high: ramp " << d.ramp.sd_low << " / "
                  << d.ramp.sd_high << ", uniform " << d.uniform.sd_low << " / " << d.uniform.sd_high << '\n';
      } else {
        const auto t = experiments::run_toy(c, ds, ae, ld, ex_out);
        std::cout << "pearson r: latent " << t.r_latent << ", output " << t.r_output << ", simulator " << t.r_simulator
                  << '\n';
        if (con->parsed()) {
          const auto s = experiments::run_contours(c, t, forward_uq::load_forward_model(ex_model), ae, ex_out);
          std::cout << "max radius sd: dropout " << s.dropout.sd.maxCoeff() << ", latent " << s.latent.sd.maxCoeff()
                    << ", output mean image " << s.output_mean_image.sd.maxCoeff() << '\n';
        }
      }
    } else if (rep->parsed()) {
      for (const auto& p : experiments::make_report(rep_run)) std::cout << p.string() << '\n';
    } else if (all->parsed()) {
      const auto c = all_c.resolve();
      const auto r = experiments::run_all(c, all_out, std::cerr);
      std::cout << "selected keep-rate " << r.sweep.selected_keep_rate() << ", test mean calibration error "
                << r.sweep.best().test.mean_error << "\nreport: " << (fs::path(all_out) / "report").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
