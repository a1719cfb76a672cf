#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "latent_calib/datagen/simulator.hpp"
#include "latent_calib/io.hpp"
#include "latent_calib/netcore/rng.hpp"

namespace latent_calib::datagen {

/// Sampling density over the inputs. Uniform on [0,1]^d_in, or piecewise constant on one
/// coordinate with `ratio` times more mass on [0, 0.5) than on [0.5, 1].
struct DensityProfile {
  enum class Kind { Uniform, Ramp };
  Kind kind = Kind::Uniform;
  double ratio = 1.0;
  int coordinate = 0;

  [[nodiscard]] std::string describe() const {
    if (kind == Kind::Uniform) return "uniform";
    return "ramp:" + io::format_double(ratio);
  }

  static DensityProfile parse(const std::string& text) {
    if (text == "uniform") return {};
    const std::string prefix = "ramp:";
    if (text.rfind(prefix, 0) == 0) {
      double r = 0.0;
      try {
        std::size_t used = 0;
        r = std::stod(text.substr(prefix.size()), &used);
        if (used != text.size() - prefix.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::invalid_argument("invalid density profile '" + text + "'");
      }
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("ramp ratio must be positive: '" + text + "'");
      }
      return {Kind::Ramp, r, 0};
    }
    throw std::invalid_argument("invalid density profile '" + text + "' (uniform|ramp:RATIO)");
  }
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetManifest {
  std::size_t n_samples = 0;
  SimulatorDims dims;
  std::vector<std::size_t> train, validation, test;
  std::uint64_t seed = 0;
  std::string profile = "uniform";
  SplitFractions fractions;
  int simulator_version = kSimulatorVersion;
};

struct Dataset {
  Tensor2 inputs;   // n x d_in
  Tensor2 scalars;  // n x d_s
  Tensor2 images;   // n x d_img^2, row-major flattened
  DatasetManifest manifest;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }

  [[nodiscard]] MultimodalOutput output(std::size_t i) const {
    const int d = manifest.dims.d_img;
    MultimodalOutput y;
    y.scalars = scalars.row(static_cast<Eigen::Index>(i));
    y.image = Eigen::Map<const Tensor2>(images.row(static_cast<Eigen::Index>(i)).data(), d, d);
    return y;
  }
};

inline void validate_splits(const DatasetManifest& m) {
  std::vector<int> seen(m.n_samples, 0);
  for (const auto* split : {&m.train, &m.validation, &m.test}) {
    for (auto i : *split) {
      if (i >= m.n_samples) throw std::invalid_argument("split index out of range");
      ++seen[i];
    }
  }
  for (int c : seen) {
    if (c != 1) throw std::invalid_argument("splits must be disjoint and cover every sample");
  }
}

/// Draws inputs per `profile`, runs the simulator, assigns shuffled train/validation/test splits.
inline Dataset generate_dataset(std::size_t n, std::uint64_t seed, const DensityProfile& profile,
                                const SimulatorDims& dims = {}, const SplitFractions& fr = {}) {
  validate(dims);
  if (n < 50) throw std::invalid_argument("generate_dataset needs n >= 50");
  if (profile.kind == DensityProfile::Kind::Ramp &&
      (profile.coordinate < 0 || profile.coordinate >= dims.d_in || !(profile.ratio > 0.0))) {
    throw std::invalid_argument("invalid density profile");
  }
  if (fr.validation < 0.1 || fr.test < 0.1 || fr.train <= 0.0 ||
      std::abs(fr.train + fr.validation + fr.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1 with validation, test >= 0.1");
  }
  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(n), dims.d_in);
  ds.scalars.resize(static_cast<Eigen::Index>(n), dims.d_s);
  ds.images.resize(static_cast<Eigen::Index>(n), dims.d_img * dims.d_img);
  Rng rng = make_rng(seed, "inputs");
  const double dense_mass = profile.ratio / (1.0 + profile.ratio);
  std::vector<double> x(static_cast<std::size_t>(dims.d_in));
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dims.d_in; ++j) x[static_cast<std::size_t>(j)] = uniform01(rng);
    if (profile.kind == DensityProfile::Kind::Ramp) {
      const bool dense = uniform01(rng) < dense_mass;
      auto& c = x[static_cast<std::size_t>(profile.coordinate)];
      c = dense ? 0.5 * c : 0.5 + 0.5 * c;
    }
    const auto y = simulate(x, dims);
    const auto row = static_cast<Eigen::Index>(i);
    ds.inputs.row(row) = Eigen::Map<const RowVector>(x.data(), dims.d_in);
    ds.scalars.row(row) = y.scalars;
    ds.images.row(row) = Eigen::Map<const RowVector>(y.image.data(), y.image.size());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_rng(seed, "splits");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(split_rng, i)]);
  const auto n_val = static_cast<std::size_t>(std::ceil(fr.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::ceil(fr.test * static_cast<double>(n)));
  auto& m = ds.manifest;
  m.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  m.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  m.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  for (auto* s : {&m.train, &m.validation, &m.test}) std::sort(s->begin(), s->end());
  m.n_samples = n;
  m.dims = dims;
  m.seed = seed;
  m.profile = profile.describe();
  m.fractions = fr;
  validate_splits(m);
  return ds;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  return {
      {"format", "latent-calib-dataset"},
      {"simulator_version", m.simulator_version},
      {"n_samples", m.n_samples},
      {"d_in", m.dims.d_in},
      {"d_s", m.dims.d_s},
      {"d_img", m.dims.d_img},
      {"seed", m.seed},
      {"profile", m.profile},
      {"split_fractions",
       {{"train", m.fractions.train}, {"validation", m.fractions.validation}, {"test", m.fractions.test}}},
      {"splits", {{"train", m.train}, {"validation", m.validation}, {"test", m.test}}},
      {"files", {{"inputs", "inputs.csv"}, {"scalars", "scalars.csv"}, {"images", "images.csv"}}},
  };
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.simulator_version = j.at("simulator_version").get<int>();
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.dims = {j.at("d_in").get<int>(), j.at("d_s").get<int>(), j.at("d_img").get<int>()};
  m.seed = j.at("seed").get<std::uint64_t>();
  m.profile = j.at("profile").get<std::string>();
  const auto& f = j.at("split_fractions");
  m.fractions = {f.at("train").get<double>(), f.at("validation").get<double>(), f.at("test").get<double>()};
  const auto& s = j.at("splits");
  m.train = s.at("train").get<std::vector<std::size_t>>();
  m.validation = s.at("validation").get<std::vector<std::size_t>>();
  m.test = s.at("test").get<std::vector<std::size_t>>();
  return m;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw io::IoError("cannot create dataset directory " + dir.string());
  }
  io::write_json(dir / "manifest.json", manifest_to_json(ds.manifest));
  io::write_csv(dir / "inputs.csv", io::numbered_header("x", ds.inputs.cols()), ds.inputs);
  io::write_csv(dir / "scalars.csv", io::numbered_header("s", ds.scalars.cols()), ds.scalars);
  io::write_csv(dir / "images.csv", io::numbered_header("p", ds.images.cols()), ds.images);
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = manifest_from_json(io::read_json(dir / "manifest.json"));
  if (ds.manifest.simulator_version != kSimulatorVersion) {
    throw io::IoError("dataset was produced by simulator version " +
                      std::to_string(ds.manifest.simulator_version));
  }
  ds.inputs = io::read_csv(dir / "inputs.csv").rows;
  ds.scalars = io::read_csv(dir / "scalars.csv").rows;
  ds.images = io::read_csv(dir / "images.csv").rows;
  const auto n = static_cast<Eigen::Index>(ds.manifest.n_samples);
  const auto& d = ds.manifest.dims;
  require_shape(ds.inputs, n, d.d_in, "inputs.csv");
  require_shape(ds.scalars, n, d.d_s, "scalars.csv");
  require_shape(ds.images, n, d.d_img * d.d_img, "images.csv");
  validate_splits(ds.manifest);
  return ds;
}

/// Rows of `m` at `idx`.
inline Tensor2 take_rows(const Tensor2& m, const std::vector<std::size_t>& idx) {
  Tensor2 out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace latent_calib::datagen
