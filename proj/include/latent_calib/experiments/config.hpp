#pragma once

// Pipeline configuration. Every key is optional in the file; missing keys take the
// defaults below and the fully resolved config is written into each run directory.

#include <filesystem>
#include <string>

#include "latent_calib/calibration/sweep.hpp"
#include "latent_calib/experiments/contour.hpp"
#include "latent_calib/experiments/density.hpp"

namespace latent_calib::experiments {

struct PipelineConfig {
  std::uint64_t seed = 7;

  std::size_t n_samples = 2000;
  std::string profile = "uniform";
  datagen::SimulatorDims dims;
  datagen::SplitFractions fractions;

  autoencoder::AutoencoderConfig autoencoder;
  forward_uq::ForwardConfig forward;

  std::string keep_rates = "0.90:0.99:0.01";
  int sweep_threads = 0;  // 0: one per hardware thread
  calibration::IntervalMethod interval = calibration::IntervalMethod::EmpiricalQuantile;

  std::vector<double> toy_x;  // empty: domain midpoint
  int toy_draws = 1000;

  double contour_fraction = kContourFraction;
  int contour_angles = kDefaultAngles;
  int contour_groups = 10;

  std::string density_profile = "ramp:1.75";
  DensityOptions density;
};

namespace detail {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  const auto& a = c.autoencoder;
  const auto& f = c.forward;
  const auto& d = c.density;
  return {
      {"seed", c.seed},
      {"data",
       {{"n_samples", c.n_samples},
        {"profile", c.profile},
        {"d_in", c.dims.d_in},
        {"d_s", c.dims.d_s},
        {"d_img", c.dims.d_img},
        {"fractions", {c.fractions.train, c.fractions.validation, c.fractions.test}}}},
      {"autoencoder",
       {{"d_z", a.d_z},
        {"hidden", a.hidden},
        {"epochs", a.epochs},
        {"batch_size", a.batch_size},
        {"learning_rate", a.learning_rate},
        {"scalar_weight", a.scalar_weight}}},
      {"forward",
       {{"hidden", f.hidden},
        {"epochs", f.epochs},
        {"batch_size", f.batch_size},
        {"learning_rate", f.learning_rate},
        {"mc_train", f.mc_train},
        {"mc_predict", f.mc_predict},
        {"dropout_on_input", f.dropout_on_input},
        {"sigma_floor", f.sigma_floor}}},
      {"sweep",
       {{"keep_rates", c.keep_rates},
        {"threads", c.sweep_threads},
        {"interval", calibration::to_string(c.interval)}}},
      {"toy", {{"x", c.toy_x}, {"draws", c.toy_draws}}},
      {"contours", {{"fraction", c.contour_fraction}, {"angles", c.contour_angles}, {"groups", c.contour_groups}}},
      {"density",
       {{"profile", c.density_profile},
        {"coordinate", d.coordinate},
        {"scalar", d.scalar},
        {"n_eval", d.n_eval},
        {"samples", d.samples},
        {"bins", d.bins},
        {"fixed_value", d.fixed_value},
        {"split", d.split}}},
  };
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  using detail::read_if;
  PipelineConfig c;
  read_if(j, "seed", c.seed);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    read_if(d, "n_samples", c.n_samples);
    read_if(d, "profile", c.profile);
    read_if(d, "d_in", c.dims.d_in);
    read_if(d, "d_s", c.dims.d_s);
    read_if(d, "d_img", c.dims.d_img);
    if (d.contains("fractions")) {
      const auto v = d.at("fractions").get<std::vector<double>>();
      if (v.size() != 3) throw std::invalid_argument("data.fractions needs three entries");
      c.fractions = {v[0], v[1], v[2]};
    }
  }
  if (j.contains("autoencoder")) {
    const auto& a = j.at("autoencoder");
    read_if(a, "d_z", c.autoencoder.d_z);
    read_if(a, "hidden", c.autoencoder.hidden);
    read_if(a, "epochs", c.autoencoder.epochs);
    read_if(a, "batch_size", c.autoencoder.batch_size);
    read_if(a, "learning_rate", c.autoencoder.learning_rate);
    read_if(a, "scalar_weight", c.autoencoder.scalar_weight);
  }
  if (j.contains("forward")) {
    const auto& f = j.at("forward");
    read_if(f, "hidden", c.forward.hidden);
    read_if(f, "epochs", c.forward.epochs);
    read_if(f, "batch_size", c.forward.batch_size);
    read_if(f, "learning_rate", c.forward.learning_rate);
    read_if(f, "mc_train", c.forward.mc_train);
    read_if(f, "mc_predict", c.forward.mc_predict);
    read_if(f, "dropout_on_input", c.forward.dropout_on_input);
    read_if(f, "sigma_floor", c.forward.sigma_floor);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    read_if(s, "keep_rates", c.keep_rates);
    read_if(s, "threads", c.sweep_threads);
    if (s.contains("interval")) c.interval = calibration::parse_interval_method(s.at("interval").get<std::string>());
  }
  if (j.contains("toy")) {
    read_if(j.at("toy"), "x", c.toy_x);
    read_if(j.at("toy"), "draws", c.toy_draws);
  }
  if (j.contains("contours")) {
    read_if(j.at("contours"), "fraction", c.contour_fraction);
    read_if(j.at("contours"), "angles", c.contour_angles);
    read_if(j.at("contours"), "groups", c.contour_groups);
  }
  if (j.contains("density")) {
    const auto& d = j.at("density");
    read_if(d, "profile", c.density_profile);
    read_if(d, "coordinate", c.density.coordinate);
    read_if(d, "scalar", c.density.scalar);
    read_if(d, "n_eval", c.density.n_eval);
    read_if(d, "samples", c.density.samples);
    read_if(d, "bins", c.density.bins);
    read_if(d, "fixed_value", c.density.fixed_value);
    read_if(d, "split", c.density.split);
  }
  datagen::validate(c.dims);
  datagen::DensityProfile::parse(c.profile);
  datagen::DensityProfile::parse(c.density_profile);
  calibration::parse_keep_rates(c.keep_rates);
  if (c.sweep_threads < 0) throw std::invalid_argument("sweep.threads must be >= 0");
  if (c.toy_x.empty()) c.toy_x.assign(static_cast<std::size_t>(c.dims.d_in), 0.5);
  if (static_cast<int>(c.toy_x.size()) != c.dims.d_in) throw std::invalid_argument("toy.x length must equal d_in");
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(io::read_json(path)); }

}  // namespace latent_calib::experiments
