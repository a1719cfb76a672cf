#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "latent_calib/forward_uq/forward_model.hpp"
#include "latent_calib/io.hpp"

namespace latent_calib::calibration {

/// Nominal confidence levels p and their weights w.
struct ConfidenceGrid {
  std::vector<double> levels;
  std::vector<double> weights;

  /// 0.05, 0.10, ..., 0.95 with unit weights.
  static ConfidenceGrid standard() {
    ConfidenceGrid g;
    for (int k = 1; k <= 19; ++k) g.levels.push_back(0.05 * k);
    g.weights.assign(g.levels.size(), 1.0);
    return g;
  }

  void validate() const {
    if (levels.empty()) throw std::invalid_argument("confidence grid is empty");
    if (weights.size() != levels.size()) throw std::invalid_argument("grid weights and levels differ in length");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (!(levels[k] > 0.0 && levels[k] < 1.0)) throw std::invalid_argument("grid levels must lie in (0, 1)");
      if (k > 0 && !(levels[k] > levels[k - 1])) throw std::invalid_argument("grid levels must increase strictly");
      if (!(weights[k] >= 0.0)) throw std::invalid_argument("grid weights must be non-negative");
    }
  }
};

enum class IntervalMethod { EmpiricalQuantile, Gaussian };

inline std::string to_string(IntervalMethod m) {
  return m == IntervalMethod::Gaussian ? "gaussian" : "empirical";
}

inline IntervalMethod parse_interval_method(const std::string& s) {
  if (s == "empirical") return IntervalMethod::EmpiricalQuantile;
  if (s == "gaussian") return IntervalMethod::Gaussian;
  throw std::invalid_argument("unknown interval method '" + s + "' (empirical|gaussian)");
}

class MisalignedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inclusive linear interpolation of order statistics: position q (n - 1).
inline double sorted_quantile(std::span<const double> sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Equal-tailed central interval from ascending samples: quantiles (1-level)/2, (1+level)/2.
inline std::pair<double, double> central_interval(std::span<const double> sorted, double level) {
  if (sorted.size() < 2) throw std::invalid_argument("central_interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  return {sorted_quantile(sorted, 0.5 * (1.0 - level)), sorted_quantile(sorted, 0.5 * (1.0 + level))};
}

/// mu +/- z_{(1+level)/2} sigma.
inline std::pair<double, double> gaussian_interval(double mean, double sd, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  const boost::math::normal_distribution<double> unit;
  const double half = boost::math::quantile(unit, 0.5 * (1.0 + level)) * sd;
  return {mean - half, mean + half};
}

namespace detail {

struct SortedColumn {
  std::vector<double> values;
  double mean = 0.0, sd = 0.0;
};

inline SortedColumn sorted_column(const forward_uq::PosteriorSamples& p, Eigen::Index dim) {
  if (dim < 0 || dim >= p.samples.cols()) throw DimensionError("latent dimension out of range");
  if (p.samples.rows() < 2) throw std::invalid_argument("posterior needs at least 2 samples");
  SortedColumn c;
  c.values.resize(static_cast<std::size_t>(p.samples.rows()));
  for (Eigen::Index s = 0; s < p.samples.rows(); ++s) c.values[static_cast<std::size_t>(s)] = p.samples(s, dim);
  std::sort(c.values.begin(), c.values.end());
  c.mean = p.mean.size() > dim ? p.mean(dim) : 0.0;
  c.sd = p.sd.size() > dim ? p.sd(dim) : 0.0;
  return c;
}

inline bool covered(const SortedColumn& c, double truth, double level, IntervalMethod method) {
  const auto [lo, hi] = method == IntervalMethod::Gaussian ? gaussian_interval(c.mean, c.sd, level)
                                                           : central_interval(c.values, level);
  return lo < truth && truth < hi;
}

inline void check_aligned(std::span<const forward_uq::PosteriorSamples> posteriors, const Tensor2& truths) {
  if (posteriors.empty()) throw std::invalid_argument("coverage needs at least one test point");
  if (static_cast<Eigen::Index>(posteriors.size()) != truths.rows()) {
    throw MisalignedError("posteriors and truths differ in length");
  }
}

}  // namespace detail

/// Fraction of points whose truth lies strictly inside the central interval at `level`.
inline double coverage(std::span<const forward_uq::PosteriorSamples> posteriors, const Tensor2& truths,
                       double level, Eigen::Index dim, IntervalMethod method = IntervalMethod::EmpiricalQuantile) {
  detail::check_aligned(posteriors, truths);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const auto col = detail::sorted_column(posteriors[i], dim);
    if (detail::covered(col, truths(static_cast<Eigen::Index>(i), dim), level, method)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(posteriors.size());
}

/// (p, observed coverage) at every grid level.
using CalibrationCurve = std::vector<std::pair<double, double>>;

inline CalibrationCurve calibration_curve(std::span<const forward_uq::PosteriorSamples> posteriors,
                                          const Tensor2& truths, const ConfidenceGrid& grid, Eigen::Index dim,
                                          IntervalMethod method = IntervalMethod::EmpiricalQuantile) {
  grid.validate();
  detail::check_aligned(posteriors, truths);
  std::vector<std::size_t> hits(grid.levels.size(), 0);
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const auto col = detail::sorted_column(posteriors[i], dim);
    const double t = truths(static_cast<Eigen::Index>(i), dim);
    for (std::size_t k = 0; k < grid.levels.size(); ++k) {
      if (detail::covered(col, t, grid.levels[k], method)) ++hits[k];
    }
  }
  CalibrationCurve curve;
  for (std::size_t k = 0; k < grid.levels.size(); ++k) {
    curve.emplace_back(grid.levels[k], static_cast<double>(hits[k]) / static_cast<double>(posteriors.size()));
  }
  return curve;
}

/// Sum over levels of w (p - observed)^2.
inline double calibration_error(const CalibrationCurve& curve, const ConfidenceGrid& grid) {
  if (curve.size() != grid.levels.size()) throw MisalignedError("curve and grid differ in length");
  double err = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (std::abs(curve[k].first - grid.levels[k]) > 1e-12) throw MisalignedError("curve levels do not match grid");
    const double d = curve[k].first - curve[k].second;
    err += grid.weights[k] * d * d;
  }
  return err;
}

struct CalibrationReport {
  ConfidenceGrid grid;
  std::vector<std::vector<double>> observed;  // [dim][level]
  std::vector<double> dim_error;
  double mean_error = 0.0;
  std::size_t n_test = 0;
  double keep_rate = 1.0;
  std::uint64_t seed = 0;
  std::string split = "test";
  IntervalMethod method = IntervalMethod::EmpiricalQuantile;

  [[nodiscard]] CalibrationCurve curve(std::size_t dim) const {
    CalibrationCurve c;
    for (std::size_t k = 0; k < grid.levels.size(); ++k) c.emplace_back(grid.levels[k], observed.at(dim)[k]);
    return c;
  }
};

inline CalibrationReport evaluate_calibration(std::span<const forward_uq::PosteriorSamples> posteriors,
                                              const Tensor2& truths, const ConfidenceGrid& grid,
                                              IntervalMethod method = IntervalMethod::EmpiricalQuantile) {
  CalibrationReport r;
  r.grid = grid;
  r.method = method;
  r.n_test = posteriors.size();
  for (Eigen::Index d = 0; d < truths.cols(); ++d) {
    const auto c = calibration_curve(posteriors, truths, grid, d, method);
    std::vector<double> obs;
    for (const auto& [p, phat] : c) obs.push_back(phat);
    r.observed.push_back(std::move(obs));
    r.dim_error.push_back(calibration_error(c, grid));
  }
  double sum = 0.0;
  for (double e : r.dim_error) sum += e;
  r.mean_error = r.dim_error.empty() ? 0.0 : sum / static_cast<double>(r.dim_error.size());
  return r;
}

/// Posteriors of `model` for the rows of one split, evaluated against its latents.
inline CalibrationReport calibrate_split(const forward_uq::ForwardModel& model, const autoencoder::LatentDataset& data,
                                         const std::vector<std::size_t>& split, const std::string& split_name,
                                         int samples, std::uint64_t seed, const ConfidenceGrid& grid,
                                         IntervalMethod method = IntervalMethod::EmpiricalQuantile) {
  const Tensor2 x = datagen::take_rows(data.inputs, split);
  const Tensor2 z = datagen::take_rows(data.latents, split);
  const auto post = forward_uq::predict_posteriors(model, x, samples, seed);
  auto r = evaluate_calibration(post, z, grid, method);
  r.keep_rate = model.keep_rate;
  r.seed = seed;
  r.split = split_name;
  return r;
}

inline nlohmann::json report_to_json(const CalibrationReport& r) {
  nlohmann::json dims = nlohmann::json::array();
  for (std::size_t d = 0; d < r.observed.size(); ++d) {
    dims.push_back({{"dim", d}, {"observed", r.observed[d]}, {"calibration_error", r.dim_error[d]}});
  }
  return {{"levels", r.grid.levels},
          {"weights", r.grid.weights},
          {"dimensions", dims},
          {"mean_calibration_error", r.mean_error},
          {"n_test", r.n_test},
          {"keep_rate", r.keep_rate},
          {"seed", r.seed},
          {"split", r.split},
          {"interval_method", to_string(r.method)}};
}

inline CalibrationReport report_from_json(const nlohmann::json& j) {
  CalibrationReport r;
  r.grid.levels = j.at("levels").get<std::vector<double>>();
  r.grid.weights = j.at("weights").get<std::vector<double>>();
  for (const auto& d : j.at("dimensions")) {
    r.observed.push_back(d.at("observed").get<std::vector<double>>());
    r.dim_error.push_back(d.at("calibration_error").get<double>());
  }
  r.mean_error = j.at("mean_calibration_error").get<double>();
  r.n_test = j.at("n_test").get<std::size_t>();
  r.keep_rate = j.at("keep_rate").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.split = j.at("split").get<std::string>();
  r.method = parse_interval_method(j.at("interval_method").get<std::string>());
  return r;
}

/// calibration_report.json plus curves.csv (dim, level, observed).
inline void write_report(const std::filesystem::path& dir, const CalibrationReport& r) {
  io::write_json(dir / "calibration_report.json", report_to_json(r));
  Tensor2 rows(static_cast<Eigen::Index>(r.observed.size() * r.grid.levels.size()), 3);
  Eigen::Index i = 0;
  for (std::size_t d = 0; d < r.observed.size(); ++d) {
    for (std::size_t k = 0; k < r.grid.levels.size(); ++k, ++i) {
      rows(i, 0) = static_cast<double>(d);
      rows(i, 1) = r.grid.levels[k];
      rows(i, 2) = r.observed[d][k];
    }
  }
  io::write_csv(dir / "curves.csv", {"dim", "level", "observed"}, rows);
}

}  // namespace latent_calib::calibration
