#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include "latent_calib/calibration/calibration.hpp"

namespace latent_calib::calibration {

struct SweepMember {
  double keep_rate = 1.0;
  CalibrationReport validation;
  CalibrationReport test;
  forward_uq::ForwardModel model;
};

struct SweepResult {
  std::vector<SweepMember> members;
  std::optional<std::size_t> selected;

  [[nodiscard]] const SweepMember& best() const { return members.at(selected.value()); }
  [[nodiscard]] double selected_keep_rate() const { return best().keep_rate; }
};

class SweepError : public std::runtime_error {
 public:
  SweepError(const std::string& what, SweepResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const SweepResult& partial() const { return partial_; }

 private:
  SweepResult partial_;
};

/// "lo:hi:step" inclusive range, or a comma list.
inline std::vector<double> parse_keep_rates(const std::string& spec) {
  std::vector<double> out;
  if (std::count(spec.begin(), spec.end(), ':') == 2) {
    const auto a = spec.find(':'), b = spec.rfind(':');
    const double lo = std::stod(spec.substr(0, a)), hi = std::stod(spec.substr(a + 1, b - a - 1)),
                 step = std::stod(spec.substr(b + 1));
    if (!(step > 0.0) || hi < lo) throw std::invalid_argument("bad keep-rate range '" + spec + "'");
    const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    // Rounded to 1e-12 so 0.90:0.99:0.01 yields exactly 0.9, 0.91, ...
    for (int k = 0; k <= n; ++k) out.push_back(std::round((lo + k * step) * 1e12) / 1e12);
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  }
  for (double r : out) netcore::check_keep_rate(r);
  return out;
}

/// Index with minimum validation mean error; ties go to the larger keep-rate.
inline std::size_t select_member(const std::vector<SweepMember>& members) {
  if (members.empty()) throw std::invalid_argument("nothing to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const double e = members[i].validation.mean_error, b = members[best].validation.mean_error;
    if (e < b || (e == b && members[i].keep_rate > members[best].keep_rate)) best = i;
  }
  return best;
}

struct SweepOptions {
  forward_uq::ForwardConfig forward;
  ConfidenceGrid grid = ConfidenceGrid::standard();
  IntervalMethod method = IntervalMethod::EmpiricalQuantile;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
};

/// Trains one forward model per keep-rate with otherwise identical seeds and config, tunes
/// on the validation split and reports every member on the test split.
inline SweepResult sweep_keep_rate(const autoencoder::LatentDataset& data, const std::vector<double>& keep_rates,
                                   const SweepOptions& opt,
                                   const std::function<void(const SweepMember&)>& on_member = {}) {
  if (keep_rates.size() < 2) throw std::invalid_argument("sweep needs at least 2 keep-rates");
  if (data.manifest.validation.empty() || data.manifest.test.empty()) {
    throw std::invalid_argument("sweep needs validation and test splits");
  }
  const std::uint64_t train_seed = derive_seed(opt.seed, "sweep-train");
  // Members are independent and fully seeded, so they train on a worker pool and are
  // reported in keep-rate order afterwards.
  std::vector<SweepMember> trained(keep_rates.size());
  std::vector<std::exception_ptr> failed(keep_rates.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keep_rates.size(); i = next++) {
      try {
        SweepMember& m = trained[i];
        m.keep_rate = keep_rates[i];
        m.model = forward_uq::train_forward(data, m.keep_rate, opt.forward, train_seed);
        m.validation = calibrate_split(m.model, data, data.manifest.validation, "validation", opt.forward.mc_predict,
                                       derive_seed(opt.seed, "validation-posterior"), opt.grid, opt.method);
        m.test = calibrate_split(m.model, data, data.manifest.test, "test", opt.forward.mc_predict,
                                 derive_seed(opt.seed, "test-posterior"), opt.grid, opt.method);
      } catch (...) {
        failed[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(keep_rates.size(), opt.threads > 0 ? static_cast<std::size_t>(opt.threads) : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  SweepResult result;
  for (std::size_t i = 0; i < keep_rates.size(); ++i) {
    try {
      if (failed[i]) std::rethrow_exception(failed[i]);
      result.members.push_back(std::move(trained[i]));
      if (on_member) on_member(result.members.back());
    } catch (const std::exception& e) {
      throw SweepError("sweep member keep_rate=" + io::format_double(keep_rates[i]) + " failed: " + e.what(),
                       std::move(result));
    }
  }
  result.selected = select_member(result.members);
  return result;
}

/// sweep.csv: keep_rate, validation and test mean calibration error, then per-dim test errors.
inline void write_sweep_table(const std::filesystem::path& path, const SweepResult& r) {
  const std::size_t d_z = r.members.empty() ? 0 : r.members.front().test.dim_error.size();
  std::vector<std::string> header{"keep_rate", "validation_error", "test_error", "selected"};
  for (std::size_t d = 0; d < d_z; ++d) header.push_back("test_error_z" + std::to_string(d));
  Tensor2 rows(static_cast<Eigen::Index>(r.members.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < r.members.size(); ++i) {
    const auto& m = r.members[i];
    const auto row = static_cast<Eigen::Index>(i);
    rows(row, 0) = m.keep_rate;
    rows(row, 1) = m.validation.mean_error;
    rows(row, 2) = m.test.mean_error;
    rows(row, 3) = (r.selected && *r.selected == i) ? 1.0 : 0.0;
    for (std::size_t d = 0; d < d_z; ++d) rows(row, static_cast<Eigen::Index>(4 + d)) = m.test.dim_error[d];
  }
  io::write_csv(path, header, rows);
}

}  // namespace latent_calib::calibration
