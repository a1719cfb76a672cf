#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "latent_calib/datagen/normalize.hpp"
#include "latent_calib/netcore/checkpoint.hpp"
#include "latent_calib/netcore/training.hpp"

namespace latent_calib::autoencoder {

using netcore::Activation;
using netcore::NetworkParameters;

struct AutoencoderConfig {
  int d_z = 8;
  std::vector<int> hidden{128, 64};  // encoder widths; decoder mirrors them
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  // Relative loss weight of each scalar column against a pixel column.
  double scalar_weight = 1.0;
  std::uint64_t seed = 1;
};

struct EpochLoss {
  double train = 0.0;
  double validation = 0.0;
};

/// Encoder E: Y -> Z and decoder D: Z -> Y over the joint normalized output vector.
struct AutoencoderModel {
  NetworkParameters encoder;
  NetworkParameters decoder;
  int d_z = 0;
  datagen::SimulatorDims dims;
  datagen::OutputNormalization stats;
  std::vector<EpochLoss> log;
  int best_epoch = -1;

  [[nodiscard]] Eigen::Index d_y() const { return dims.d_s + dims.d_img * dims.d_img; }
};

class TrainingDivergedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline RowVector column_weights(Eigen::Index d_s, Eigen::Index d_y, double scalar_weight) {
  RowVector w = RowVector::Ones(d_y);
  w.head(d_s).setConstant(scalar_weight);
  return w / w.sum();
}

inline double weighted_mse(const Tensor2& pred, const Tensor2& target, const RowVector& w) {
  return ((pred - target).array().square().rowwise() * w.array()).sum() /
         static_cast<double>(pred.rows());
}

}  // namespace detail

inline Tensor2 encode_normalized(const AutoencoderModel& m, const Tensor2& joint) {
  if (joint.cols() != m.d_y()) throw DimensionError("encode: expected " + std::to_string(m.d_y()) + " columns");
  return netcore::forward(m.encoder, joint);
}

inline Tensor2 decode_normalized(const AutoencoderModel& m, const Tensor2& z) {
  if (z.cols() != m.d_z) throw DimensionError("decode: expected " + std::to_string(m.d_z) + " latent columns");
  return netcore::forward(m.decoder, z);
}

/// Minimizes weighted mean squared reconstruction error on the training split. The
/// returned model holds the parameters of the epoch with the lowest validation loss.
inline AutoencoderModel train_autoencoder(const datagen::Dataset& ds,
                                          const datagen::NormalizedDataset& norm,
                                          const AutoencoderConfig& cfg,
                                          const std::function<void(int, const EpochLoss&)>& on_epoch = {}) {
  const auto& dims = ds.manifest.dims;
  const Eigen::Index d_y = dims.d_s + dims.d_img * dims.d_img;
  if (cfg.d_z < 1 || cfg.d_z >= d_y) {
    throw std::invalid_argument("d_z must satisfy 1 <= d_z < " + std::to_string(d_y));
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("epochs and batch_size must be >= 1");
  require_shape(norm.joint, static_cast<Eigen::Index>(ds.size()), d_y, "normalized dataset");

  AutoencoderModel m;
  m.d_z = cfg.d_z;
  m.dims = dims;
  m.stats = norm.stats;
  std::vector<Eigen::Index> enc{d_y};
  for (int h : cfg.hidden) enc.push_back(h);
  enc.push_back(cfg.d_z);
  std::vector<Eigen::Index> dec(enc.rbegin(), enc.rend());
  m.encoder = netcore::make_network(enc, Activation::ReLU, Activation::Identity,
                                    derive_seed(cfg.seed, "encoder"));
  m.decoder = netcore::make_network(dec, Activation::ReLU, Activation::Identity,
                                    derive_seed(cfg.seed, "decoder"));

  const Tensor2 train = datagen::take_rows(norm.joint, ds.manifest.train);
  const Tensor2 val = datagen::take_rows(norm.joint, ds.manifest.validation);
  const RowVector w = detail::column_weights(dims.d_s, d_y, cfg.scalar_weight);
  const auto n = static_cast<std::size_t>(train.rows());

  double best = std::numeric_limits<double>::infinity();
  NetworkParameters best_enc = m.encoder, best_dec = m.decoder;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = netcore::epoch_order(n, derive_seed(cfg.seed, "ae-shuffle"), static_cast<std::uint64_t>(epoch));
    double sum = 0.0;
    netcore::for_each_batch(n, static_cast<std::size_t>(cfg.batch_size), [&](std::size_t b, std::size_t e) {
      Tensor2 batch(static_cast<Eigen::Index>(e - b), d_y);
      for (std::size_t i = b; i < e; ++i) batch.row(static_cast<Eigen::Index>(i - b)) = train.row(static_cast<Eigen::Index>(order[i]));
      netcore::ForwardCache enc_cache, dec_cache;
      const Tensor2 z = netcore::forward(m.encoder, batch, {}, &enc_cache);
      const Tensor2 recon = netcore::forward(m.decoder, z, {}, &dec_cache);
      const double loss = detail::weighted_mse(recon, batch, w);
      if (!std::isfinite(loss)) throw TrainingDivergedError("autoencoder loss diverged at epoch " + std::to_string(epoch + 1));
      sum += loss * static_cast<double>(e - b);
      const Tensor2 g_out =
          (2.0 / static_cast<double>(e - b)) * ((recon - batch).array().rowwise() * w.array()).matrix();
      const auto g_dec = netcore::backward(m.decoder, g_out, dec_cache);
      const auto g_enc = netcore::backward(m.encoder, g_dec.input, enc_cache);
      netcore::optimizer_step(m.decoder, g_dec, cfg.learning_rate);
      netcore::optimizer_step(m.encoder, g_enc, cfg.learning_rate);
    });
    EpochLoss el;
    el.train = sum / static_cast<double>(n);
    el.validation = detail::weighted_mse(decode_normalized(m, encode_normalized(m, val)), val, w);
    if (!std::isfinite(el.validation)) throw TrainingDivergedError("autoencoder validation loss diverged");
    m.log.push_back(el);
    if (el.validation < best) {
      best = el.validation;
      best_enc = m.encoder;
      best_dec = m.decoder;
      m.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, el);
  }
  m.encoder = std::move(best_enc);
  m.decoder = std::move(best_dec);
  return m;
}

/// Encodes one physical-unit output (normalized internally with the model's statistics).
inline RowVector encode(const AutoencoderModel& m, const datagen::MultimodalOutput& y) {
  if (y.scalars.size() != m.dims.d_s || y.image.rows() != m.dims.d_img || y.image.cols() != m.dims.d_img) {
    throw DimensionError("encode: output dims do not match the model");
  }
  const Tensor2 img = Eigen::Map<const RowVector>(y.image.data(), y.image.size());
  return encode_normalized(m, m.stats.normalize(y.scalars, img)).row(0);
}

/// Decoded physical outputs for a batch of latents; images clamped at zero.
inline std::pair<Tensor2, Tensor2> decode_batch(const AutoencoderModel& m, const Tensor2& z) {
  auto [s, img] = m.stats.denormalize(decode_normalized(m, z));
  img = img.cwiseMax(0.0);
  return {std::move(s), std::move(img)};
}

inline datagen::MultimodalOutput decode(const AutoencoderModel& m, const RowVector& z) {
  auto [s, img] = decode_batch(m, Tensor2(z));
  datagen::MultimodalOutput y;
  y.scalars = s.row(0);
  y.image = Eigen::Map<const Tensor2>(img.data(), m.dims.d_img, m.dims.d_img);
  return y;
}

/// Latent representation of every sample, with the split structure preserved and the
/// training-split latent statistics recorded for forward-model normalization.
struct LatentDataset {
  Tensor2 inputs;   // n x d_in
  Tensor2 latents;  // n x d_z
  datagen::DatasetManifest manifest;
  RowVector latent_mean, latent_sd;  // training split, ddof = 1
};

inline LatentDataset encode_dataset(const AutoencoderModel& m, const datagen::Dataset& ds) {
  if (ds.manifest.dims.d_s != m.dims.d_s || ds.manifest.dims.d_img != m.dims.d_img) {
    throw DimensionError("encode_dataset: dataset dims do not match the autoencoder");
  }
  LatentDataset out;
  out.inputs = ds.inputs;
  out.latents = encode_normalized(m, m.stats.normalize(ds.scalars, ds.images));
  out.manifest = ds.manifest;
  const Tensor2 train = datagen::take_rows(out.latents, ds.manifest.train);
  out.latent_mean = train.colwise().mean();
  const double dof = static_cast<double>(std::max<Eigen::Index>(train.rows() - 1, 1));
  out.latent_sd = ((train.rowwise() - out.latent_mean).array().square().colwise().sum() / dof).sqrt().matrix();
  for (Eigen::Index j = 0; j < out.latent_sd.size(); ++j) {
    if (!(out.latent_sd(j) * out.latent_sd(j) >= 1e-8)) {
      throw NumericalError("latent dimension " + std::to_string(j) + " collapsed (variance < 1e-8)");
    }
  }
  return out;
}

inline void write_latent_dataset(const std::filesystem::path& dir, const LatentDataset& ld) {
  std::filesystem::create_directories(dir);
  io::write_csv(dir / "inputs.csv", io::numbered_header("x", ld.inputs.cols()), ld.inputs);
  io::write_csv(dir / "latents.csv", io::numbered_header("z", ld.latents.cols()), ld.latents);
  auto meta = datagen::manifest_to_json(ld.manifest);
  meta["format"] = "latent-calib-latents";
  meta["latent_mean"] = io::to_json(ld.latent_mean);
  meta["latent_sd"] = io::to_json(ld.latent_sd);
  meta["files"] = {{"inputs", "inputs.csv"}, {"latents", "latents.csv"}};
  io::write_json(dir / "latent_meta.json", meta);
}

inline LatentDataset read_latent_dataset(const std::filesystem::path& dir) {
  LatentDataset ld;
  const auto meta = io::read_json(dir / "latent_meta.json");
  ld.manifest = datagen::manifest_from_json(meta);
  ld.latent_mean = io::row_from_json(meta.at("latent_mean"));
  ld.latent_sd = io::row_from_json(meta.at("latent_sd"));
  ld.inputs = io::read_csv(dir / "inputs.csv").rows;
  ld.latents = io::read_csv(dir / "latents.csv").rows;
  require_shape(ld.latents, static_cast<Eigen::Index>(ld.manifest.n_samples), ld.latent_mean.size(), "latents.csv");
  return ld;
}

inline void save_autoencoder(const std::filesystem::path& dir, const AutoencoderModel& m) {
  std::filesystem::create_directories(dir);
  netcore::save_checkpoint(dir / "encoder.lcnn", m.encoder);
  netcore::save_checkpoint(dir / "decoder.lcnn", m.decoder);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : m.log) log.push_back({{"train", e.train}, {"validation", e.validation}});
  io::write_json(dir / "ae_meta.json", {{"d_z", m.d_z},
                                        {"d_in", m.dims.d_in},
                                        {"d_s", m.dims.d_s},
                                        {"d_img", m.dims.d_img},
                                        {"normalization", m.stats.to_json()},
                                        {"best_epoch", m.best_epoch},
                                        {"training_log", log}});
}

inline AutoencoderModel load_autoencoder(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "ae_meta.json");
  AutoencoderModel m;
  m.d_z = meta.at("d_z").get<int>();
  m.dims = {meta.at("d_in").get<int>(), meta.at("d_s").get<int>(), meta.at("d_img").get<int>()};
  m.stats = datagen::OutputNormalization::from_json(meta.at("normalization"));
  m.best_epoch = meta.value("best_epoch", -1);
  for (const auto& e : meta.at("training_log")) m.log.push_back({e.at("train").get<double>(), e.at("validation").get<double>()});
  m.encoder = netcore::load_checkpoint(dir / "encoder.lcnn");
  m.decoder = netcore::load_checkpoint(dir / "decoder.lcnn");
  if (m.encoder.out_dim() != m.d_z || m.decoder.in_dim() != m.d_z || m.encoder.in_dim() != m.d_y() ||
      m.decoder.out_dim() != m.d_y()) {
    throw netcore::CheckpointError("autoencoder checkpoint dims disagree with ae_meta.json");
  }
  return m;
}

}  // namespace latent_calib::autoencoder
