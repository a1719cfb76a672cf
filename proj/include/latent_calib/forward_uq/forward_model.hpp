#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "latent_calib/autoencoder/autoencoder.hpp"
#include "latent_calib/forward_uq/gaussian_nll.hpp"
#include "latent_calib/netcore/checkpoint.hpp"
#include "latent_calib/netcore/training.hpp"

namespace latent_calib::forward_uq {

using netcore::Activation;
using netcore::DropoutMask;
using netcore::NetworkParameters;

struct ForwardConfig {
  std::vector<int> hidden{256, 256};
  int epochs = 150;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int mc_train = 20;
  int mc_predict = 1000;
  bool dropout_on_input = false;
  double sigma_floor = kDefaultSigmaFloor;
};

struct NllEpoch {
  double train = 0.0;
  double validation = 0.0;
};

/// F: X -> Z with dropout before every dense layer. Outputs live in standardized latent
/// units internally; predictions are returned in raw latent units.
struct ForwardModel {
  NetworkParameters net;
  double keep_rate = 1.0;
  int d_in = 0;
  int d_z = 0;
  int mc_train = 20;
  int mc_predict = 1000;
  bool dropout_on_input = false;
  double sigma_floor = kDefaultSigmaFloor;
  RowVector latent_mean, latent_sd;
  std::vector<NllEpoch> log;
  int best_epoch = -1;
  std::size_t floor_substitutions = 0;
  std::vector<std::string> warnings;
  bool trained = false;
};

class UntrainedModelError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SigmaCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Inputs in [0,1] are fed to the network as 2x - 1.
inline Tensor2 encode_inputs(const Tensor2& x) { return (2.0 * x.array() - 1.0).matrix(); }

namespace detail {

/// One mask per layer; rows are filled per sample from that sample's own generator.
inline std::vector<DropoutMask> masks_for_rows(const ForwardModel& m, std::span<Rng> row_rngs) {
  std::vector<DropoutMask> masks;
  const auto rows = static_cast<Eigen::Index>(row_rngs.size());
  for (std::size_t l = 0; l < m.net.layers.size(); ++l) {
    const double keep = (l == 0 && !m.dropout_on_input) ? 1.0 : m.keep_rate;
    masks.push_back(DropoutMask{keep, Tensor2(rows, m.net.layers[l].in_dim())});
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto& rng = row_rngs[static_cast<std::size_t>(r)];
    for (auto& mk : masks) {
      netcore::fill_bernoulli({mk.mask.row(r).data(), static_cast<std::size_t>(mk.mask.cols())}, mk.keep_rate, rng);
    }
  }
  return masks;
}

inline std::vector<DropoutMask> masks_from_stream(const ForwardModel& m, Eigen::Index rows, Rng& rng) {
  std::vector<DropoutMask> masks;
  for (std::size_t l = 0; l < m.net.layers.size(); ++l) {
    const double keep = (l == 0 && !m.dropout_on_input) ? 1.0 : m.keep_rate;
    masks.push_back(netcore::sample_mask(keep, rows, m.net.layers[l].in_dim(), rng));
  }
  return masks;
}

inline Tensor2 repeat_rows(const Tensor2& x, int times) {
  Tensor2 out(x.rows() * times, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int s = 0; s < times; ++s) out.row(i * times + s) = x.row(i);
  }
  return out;
}

inline double evaluate_nll(const ForwardModel& m, const Tensor2& x, const Tensor2& z_std,
                           std::uint64_t seed) {
  Rng rng = make_rng(seed, "fwd-eval");
  const Tensor2 rep = repeat_rows(encode_inputs(x), m.mc_train);
  const auto masks = masks_from_stream(m, rep.rows(), rng);
  const Tensor2 out = netcore::forward(m.net, rep, masks);
  return mc_gaussian_nll(out, z_std, m.mc_train, m.sigma_floor).loss;
}

}  // namespace detail

/// Trains F on the latent dataset. Each step runs `mc_train` dropout-masked passes per batch
/// item, forms mu and sigma across them, and backpropagates the Gaussian NLL through every
/// pass. Keeps the parameters of the epoch with the lowest validation NLL.
inline ForwardModel train_forward(const autoencoder::LatentDataset& data, double keep_rate,
                                  const ForwardConfig& cfg, std::uint64_t seed,
                                  const std::function<void(int, const NllEpoch&)>& on_epoch = {}) {
  netcore::check_keep_rate(keep_rate);
  if (cfg.mc_train < 2 || cfg.mc_predict < 2) throw std::invalid_argument("Monte Carlo sample counts must be >= 2");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("epochs and batch_size must be >= 1");
  ForwardModel m;
  m.keep_rate = keep_rate;
  m.d_in = static_cast<int>(data.inputs.cols());
  m.d_z = static_cast<int>(data.latents.cols());
  m.mc_train = cfg.mc_train;
  m.mc_predict = cfg.mc_predict;
  m.dropout_on_input = cfg.dropout_on_input;
  m.sigma_floor = cfg.sigma_floor;
  m.latent_mean = data.latent_mean;
  m.latent_sd = data.latent_sd;
  if (keep_rate == 1.0) {
    m.warnings.emplace_back(
        "degenerate keep-rate 1.0: every dropout mask is identical, sigma is 0 and the loss "
        "is driven entirely by the sigma floor");
    std::cerr << "warning: " << m.warnings.back() << '\n';
  }

  std::vector<Eigen::Index> dims{m.d_in};
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(m.d_z);
  m.net = netcore::make_network(dims, Activation::ReLU, Activation::Identity, derive_seed(seed, "forward-init"));

  auto standardize = [&](const Tensor2& z) {
    return ((z.rowwise() - m.latent_mean).array().rowwise() / m.latent_sd.array()).matrix().eval();
  };
  const Tensor2 x_train = datagen::take_rows(data.inputs, data.manifest.train);
  const Tensor2 z_train = standardize(datagen::take_rows(data.latents, data.manifest.train));
  const Tensor2 x_val = datagen::take_rows(data.inputs, data.manifest.validation);
  const Tensor2 z_val = standardize(datagen::take_rows(data.latents, data.manifest.validation));
  const Tensor2 xin_train = encode_inputs(x_train);
  const auto n = static_cast<std::size_t>(x_train.rows());

  double best = std::numeric_limits<double>::infinity();
  NetworkParameters best_net = m.net;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = netcore::epoch_order(n, derive_seed(seed, "fwd-shuffle"), static_cast<std::uint64_t>(epoch));
    Rng mask_rng = make_rng(seed, "fwd-masks", static_cast<std::uint64_t>(epoch));
    double sum = 0.0;
    netcore::for_each_batch(n, static_cast<std::size_t>(cfg.batch_size), [&](std::size_t b, std::size_t e) {
      const auto items = static_cast<Eigen::Index>(e - b);
      Tensor2 xb(items, m.d_in), zb(items, m.d_z);
      for (std::size_t i = b; i < e; ++i) {
        xb.row(static_cast<Eigen::Index>(i - b)) = xin_train.row(static_cast<Eigen::Index>(order[i]));
        zb.row(static_cast<Eigen::Index>(i - b)) = z_train.row(static_cast<Eigen::Index>(order[i]));
      }
      const Tensor2 rep = detail::repeat_rows(xb, cfg.mc_train);
      const auto masks = detail::masks_from_stream(m, rep.rows(), mask_rng);
      netcore::ForwardCache cache;
      const Tensor2 out = netcore::forward(m.net, rep, masks, &cache);
      const auto nll = mc_gaussian_nll(out, zb, cfg.mc_train, cfg.sigma_floor);
      m.floor_substitutions += nll.floor_substitutions;
      if (keep_rate < 1.0 && 2 * nll.collapsed_items > static_cast<std::size_t>(items)) {
        throw SigmaCollapseError("sigma collapsed to the floor for more than half of a batch at epoch " +
                                 std::to_string(epoch + 1));
      }
      sum += nll.loss * static_cast<double>(items);
      const auto grads = netcore::backward(m.net, nll.output_gradient, cache);
      netcore::optimizer_step(m.net, grads, cfg.learning_rate);
    });
    NllEpoch log{sum / static_cast<double>(n), detail::evaluate_nll(m, x_val, z_val, seed)};
    m.log.push_back(log);
    if (log.validation < best) {
      best = log.validation;
      best_net = m.net;
      m.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, log);
  }
  m.net = std::move(best_net);
  m.trained = true;
  return m;
}

/// Monte Carlo posterior for one input: samples (S x d_z, raw latent units) and their
/// column mean and sample sd (ddof = 1).
struct PosteriorSamples {
  RowVector input;
  Tensor2 samples;
  RowVector mean, sd;
};

inline void summarize(PosteriorSamples& p) {
  p.mean = p.samples.colwise().mean();
  p.sd = column_sd(p.samples);
}

/// S independent dropout-masked passes. Sample s draws its masks from the substream
/// derive_seed(seed, "mc", s), so any split of the work reproduces the same samples.
inline PosteriorSamples predict_posterior(const ForwardModel& m, const RowVector& x, int samples,
                                          std::uint64_t seed) {
  if (!m.trained) throw UntrainedModelError("predict_posterior on an untrained model");
  if (samples < 2) throw std::invalid_argument("predict_posterior needs at least 2 samples");
  if (x.size() != m.d_in) throw DimensionError("predict_posterior: input width mismatch");
  Tensor2 out;
  if (m.keep_rate == 1.0) {
    // Every mask is all ones: one pass, replicated, so the samples are bit-identical.
    out = netcore::forward(m.net, encode_inputs(Tensor2(x))).replicate(samples, 1);
  } else {
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) rngs.emplace_back(derive_seed(seed, "mc", static_cast<std::uint64_t>(s)));
    const auto masks = detail::masks_for_rows(m, rngs);
    out = netcore::forward(m.net, encode_inputs(Tensor2(x)).replicate(samples, 1), masks);
  }
  PosteriorSamples p;
  p.input = x;
  p.samples = ((out.array().rowwise() * m.latent_sd.array()).rowwise() + m.latent_mean.array()).matrix();
  summarize(p);
  return p;
}

inline PosteriorSamples predict_posterior(const ForwardModel& m, const RowVector& x, std::uint64_t seed) {
  return predict_posterior(m, x, m.mc_predict, seed);
}

/// Posteriors for every row of `inputs`; row i uses seed derive_seed(seed, "point", i).
inline std::vector<PosteriorSamples> predict_posteriors(const ForwardModel& m, const Tensor2& inputs,
                                                        int samples, std::uint64_t seed) {
  std::vector<PosteriorSamples> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.push_back(predict_posterior(m, inputs.row(i), samples, derive_seed(seed, "point", static_cast<std::uint64_t>(i))));
  }
  return out;
}

/// Decoded output-space posterior: every latent sample decoded individually.
struct OutputPosterior {
  Tensor2 scalars;  // S x d_s
  Tensor2 images;   // S x d_img^2
  RowVector scalar_mean, scalar_sd, pixel_mean, pixel_sd;

  [[nodiscard]] Eigen::Index size() const { return scalars.rows(); }
};

inline OutputPosterior decode_posterior(const autoencoder::AutoencoderModel& ae, const Tensor2& latent_samples) {
  if (latent_samples.cols() != ae.d_z) throw DimensionError("latent width does not match the autoencoder");
  OutputPosterior o;
  const bool collapsed = latent_samples.rows() > 1 && (latent_samples.rowwise() - latent_samples.row(0)).cwiseAbs().maxCoeff() == 0.0;
  if (collapsed) {
    // Decode once so identical latents give bit-identical outputs.
    const auto [s, img] = autoencoder::decode_batch(ae, latent_samples.topRows(1));
    o.scalars = s.replicate(latent_samples.rows(), 1);
    o.images = img.replicate(latent_samples.rows(), 1);
  } else {
    std::tie(o.scalars, o.images) = autoencoder::decode_batch(ae, latent_samples);
  }
  o.scalar_mean = o.scalars.colwise().mean();
  o.pixel_mean = o.images.colwise().mean();
  o.scalar_sd = o.size() > 1 ? column_sd(o.scalars) : RowVector::Zero(o.scalars.cols());
  o.pixel_sd = o.size() > 1 ? column_sd(o.images) : RowVector::Zero(o.images.cols());
  return o;
}

inline OutputPosterior predict_output_posterior(const ForwardModel& m, const autoencoder::AutoencoderModel& ae,
                                                const RowVector& x, int samples, std::uint64_t seed) {
  if (ae.d_z != m.d_z) throw DimensionError("forward model and autoencoder latent widths differ");
  return decode_posterior(ae, predict_posterior(m, x, samples, seed).samples);
}

/// Deterministic F (no dropout) trained with mean squared error on standardized latents.
struct PointModel {
  NetworkParameters net;
  RowVector latent_mean, latent_sd;

  [[nodiscard]] Tensor2 predict(const Tensor2& x) const {
    const Tensor2 out = netcore::forward(net, encode_inputs(x));
    return ((out.array().rowwise() * latent_sd.array()).rowwise() + latent_mean.array()).matrix();
  }
};

inline PointModel train_point_model(const autoencoder::LatentDataset& data, const ForwardConfig& cfg,
                                    std::uint64_t seed) {
  PointModel pm;
  pm.latent_mean = data.latent_mean;
  pm.latent_sd = data.latent_sd;
  std::vector<Eigen::Index> dims{data.inputs.cols()};
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(data.latents.cols());
  pm.net = netcore::make_network(dims, Activation::ReLU, Activation::Identity, derive_seed(seed, "point-init"));
  auto standardize = [&](const Tensor2& z) {
    return ((z.rowwise() - pm.latent_mean).array().rowwise() / pm.latent_sd.array()).matrix().eval();
  };
  const Tensor2 x = encode_inputs(datagen::take_rows(data.inputs, data.manifest.train));
  const Tensor2 z = standardize(datagen::take_rows(data.latents, data.manifest.train));
  const Tensor2 xv = encode_inputs(datagen::take_rows(data.inputs, data.manifest.validation));
  const Tensor2 zv = standardize(datagen::take_rows(data.latents, data.manifest.validation));
  const auto n = static_cast<std::size_t>(x.rows());
  double best = std::numeric_limits<double>::infinity();
  NetworkParameters best_net = pm.net;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = netcore::epoch_order(n, derive_seed(seed, "point-shuffle"), static_cast<std::uint64_t>(epoch));
    netcore::for_each_batch(n, static_cast<std::size_t>(cfg.batch_size), [&](std::size_t b, std::size_t e) {
      Tensor2 xb(static_cast<Eigen::Index>(e - b), x.cols()), zb(static_cast<Eigen::Index>(e - b), z.cols());
      for (std::size_t i = b; i < e; ++i) {
        xb.row(static_cast<Eigen::Index>(i - b)) = x.row(static_cast<Eigen::Index>(order[i]));
        zb.row(static_cast<Eigen::Index>(i - b)) = z.row(static_cast<Eigen::Index>(order[i]));
      }
      netcore::ForwardCache cache;
      const Tensor2 out = netcore::forward(pm.net, xb, {}, &cache);
      const Tensor2 g = (2.0 / static_cast<double>(out.size())) * (out - zb);
      netcore::optimizer_step(pm.net, netcore::backward(pm.net, g, cache), cfg.learning_rate);
    });
    const double val = (netcore::forward(pm.net, xv) - zv).array().square().mean();
    require_finite(val, "point model validation loss");
    if (val < best) {
      best = val;
      best_net = pm.net;
    }
  }
  pm.net = std::move(best_net);
  return pm;
}

inline void save_forward_model(const std::filesystem::path& dir, const ForwardModel& m) {
  std::filesystem::create_directories(dir);
  netcore::save_checkpoint(dir / "forward.lcnn", m.net);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : m.log) log.push_back({{"train_nll", e.train}, {"validation_nll", e.validation}});
  io::write_json(dir / "fwd_meta.json", {{"keep_rate", m.keep_rate},
                                         {"d_in", m.d_in},
                                         {"d_z", m.d_z},
                                         {"mc_train", m.mc_train},
                                         {"mc_predict", m.mc_predict},
                                         {"dropout_on_input", m.dropout_on_input},
                                         {"sigma_floor", m.sigma_floor},
                                         {"latent_mean", io::to_json(m.latent_mean)},
                                         {"latent_sd", io::to_json(m.latent_sd)},
                                         {"best_epoch", m.best_epoch},
                                         {"floor_substitutions", m.floor_substitutions},
                                         {"warnings", m.warnings},
                                         {"training_log", log}});
}

inline ForwardModel load_forward_model(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "fwd_meta.json");
  ForwardModel m;
  m.keep_rate = meta.at("keep_rate").get<double>();
  m.d_in = meta.at("d_in").get<int>();
  m.d_z = meta.at("d_z").get<int>();
  m.mc_train = meta.at("mc_train").get<int>();
  m.mc_predict = meta.at("mc_predict").get<int>();
  m.dropout_on_input = meta.at("dropout_on_input").get<bool>();
  m.sigma_floor = meta.at("sigma_floor").get<double>();
  m.latent_mean = io::row_from_json(meta.at("latent_mean"));
  m.latent_sd = io::row_from_json(meta.at("latent_sd"));
  m.best_epoch = meta.value("best_epoch", -1);
  m.floor_substitutions = meta.value("floor_substitutions", std::size_t{0});
  m.warnings = meta.value("warnings", std::vector<std::string>{});
  for (const auto& e : meta.at("training_log")) {
    m.log.push_back({e.at("train_nll").get<double>(), e.at("validation_nll").get<double>()});
  }
  m.net = netcore::load_checkpoint(dir / "forward.lcnn");
  if (m.net.in_dim() != m.d_in || m.net.out_dim() != m.d_z) {
    throw netcore::CheckpointError("forward checkpoint dims disagree with fwd_meta.json");
  }
  netcore::check_keep_rate(m.keep_rate);
  m.trained = true;
  return m;
}

}  // namespace latent_calib::forward_uq
