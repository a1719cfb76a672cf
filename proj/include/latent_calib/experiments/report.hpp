#pragma once

// SVG plots and a text summary rendered from the CSV artifacts of a run directory.
// Nothing is recomputed here: every number drawn or printed is read from a CSV.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "latent_calib/io.hpp"

namespace latent_calib::experiments {

namespace fs = std::filesystem;

class MissingArtifactsError : public std::runtime_error {
 public:
  MissingArtifactsError(const std::string& what, std::vector<std::string> missing)
      : std::runtime_error(what), missing_(std::move(missing)) {}
  [[nodiscard]] const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// Paths relative to the run directory that make_report reads.
inline const std::vector<std::string>& report_inputs() {
  static const std::vector<std::string> files{
      "sweep/sweep.csv",          "calibration/curves.csv",    "toy/latent_cloud.csv",
      "toy/output_cloud.csv",     "toy/summary.csv",           "contours/summary.csv",
      "contours/latent_radii.csv", "contours/output_radii.csv", "contours/dropout_radii.csv",
      "density/ramp.csv",          "density/uniform.csv",       "density/histogram.csv",
      "density/summary.csv"};
  return files;
}

namespace svg {

inline std::string num(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return p;
}

inline std::string colour(std::size_t i) { return palette()[i % palette().size()]; }

/// Cartesian plot area with linear axes.
class Plot {
 public:
  Plot(std::string title, double x0, double x1, double y0, double y1, int width = 480, int height = 360)
      : title_(std::move(title)), x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(height) {
    if (!(x1_ > x0_)) x1_ = x0_ + 1.0;
    if (!(y1_ > y0_)) y1_ = y0_ + 1.0;
  }

  [[nodiscard]] double px(double x) const { return left_ + (x - x0_) / (x1_ - x0_) * (w_ - left_ - right_); }
  [[nodiscard]] double py(double y) const { return h_ - bottom_ - (y - y0_) / (y1_ - y0_) * (h_ - top_ - bottom_); }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, const std::string& cls,
                const std::string& dash = "") {
    std::string s = "<polyline class=\"" + cls + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1.5\"";
    if (!dash.empty()) s += " stroke-dasharray=\"" + dash + "\"";
    s += " points=\"";
    for (const auto& [x, y] : pts) s += num(px(x)) + "," + num(py(y)) + " ";
    body_ << s << "\"/>\n";
  }

  void dot(double x, double y, const std::string& fill, double r = 1.6) {
    body_ << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"" << num(r, 1) << "\" fill=\"" << fill
          << "\" fill-opacity=\"0.5\"/>\n";
  }

  void bar(double x_lo, double x_hi, double y, const std::string& fill, const std::string& cls = "bar") {
    const double top = py(std::max(y, y0_)), base = py(y0_);
    body_ << "<rect class=\"" << cls << "\" x=\"" << num(px(x_lo)) << "\" y=\"" << num(top) << "\" width=\""
          << num(px(x_hi) - px(x_lo)) << "\" height=\"" << num(base - top) << "\" fill=\"" << fill << "\"/>\n";
  }

  void band(const std::vector<double>& x, const std::vector<double>& lo, const std::vector<double>& hi,
            const std::string& fill) {
    std::string s = "<polygon fill=\"" + fill + "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) s += num(px(x[i])) + "," + num(py(hi[i])) + " ";
    for (std::size_t i = x.size(); i-- > 0;) s += num(px(x[i])) + "," + num(py(lo[i])) + " ";
    body_ << s << "\"/>\n";
  }

  void label(double x, double y, const std::string& text, const std::string& fill = "#000") {
    body_ << "<text x=\"" << num(px(x)) << "\" y=\"" << num(py(y)) << "\" font-size=\"10\" fill=\"" << fill << "\">"
          << text << "</text>\n";
  }

  void legend(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double y = top_ + 12.0 + 12.0 * static_cast<double>(i);
      body_ << "<text x=\"" << num(w_ - right_ - 70.0) << "\" y=\"" << num(y) << "\" font-size=\"10\" fill=\""
            << colour(i) << "\">" << names[i] << "</text>\n";
    }
  }

  [[nodiscard]] std::string str(const std::string& xlabel, const std::string& ylabel) const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\" viewBox=\"0 0 "
      << w_ << ' ' << h_ << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w_ / 2 << "\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">" << title_ << "</text>\n";
    const double l = px(x0_), r = px(x1_), b = py(y0_), t = py(y1_);
    o << "<path class=\"axis\" d=\"M" << num(l) << ',' << num(t) << " L" << num(l) << ',' << num(b) << " L" << num(r)
      << ',' << num(b) << "\" stroke=\"#333\" fill=\"none\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = x0_ + (x1_ - x0_) * k / 4.0, yv = y0_ + (y1_ - y0_) * k / 4.0;
      o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(b + 14) << "\" font-size=\"9\" text-anchor=\"middle\">"
        << num(xv, 3) << "</text>\n";
      o << "<text x=\"" << num(l - 4) << "\" y=\"" << num(py(yv) + 3) << "\" font-size=\"9\" text-anchor=\"end\">"
        << num(yv, 3) << "</text>\n";
    }
    o << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << h_ - 6 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << xlabel << "</text>\n";
    o << "<text x=\"12\" y=\"" << num((t + b) / 2) << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 12 "
      << num((t + b) / 2) << ")\">" << ylabel << "</text>\n";
    o << body_.str() << "</svg>\n";
    return o.str();
  }

 private:
  std::string title_;
  double x0_, x1_, y0_, y1_;
  int w_, h_;
  double left_ = 56, right_ = 16, top_ = 28, bottom_ = 40;
  std::ostringstream body_;
};

}  // namespace svg

namespace detail {

inline std::size_t column(const io::CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw io::IoError("csv is missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

inline std::vector<double> col(const io::CsvTable& t, const std::string& name) {
  const auto c = static_cast<Eigen::Index>(column(t, name));
  std::vector<double> v(static_cast<std::size_t>(t.rows.rows()));
  for (Eigen::Index i = 0; i < t.rows.rows(); ++i) v[static_cast<std::size_t>(i)] = t.rows(i, c);
  return v;
}

inline std::pair<double, double> range(const std::vector<double>& a, const std::vector<double>& b = {}) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&a, &b}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace detail

inline std::string render_calibration_curves(const io::CsvTable& curves) {
  svg::Plot p("Calibration curves (test split)", 0, 1, 0, 1);
  p.polyline({{0, 0}, {1, 1}}, "#444", "reference", "4 3");
  std::map<int, std::vector<std::pair<double, double>>> series;
  const auto d = detail::col(curves, "dim"), l = detail::col(curves, "level"), o = detail::col(curves, "observed");
  for (std::size_t i = 0; i < d.size(); ++i) series[static_cast<int>(d[i])].emplace_back(l[i], o[i]);
  std::vector<std::string> names;
  for (auto& [dim, pts] : series) {
    p.polyline(pts, svg::colour(names.size()), "series");
    names.push_back("z" + std::to_string(dim));
  }
  p.legend(names);
  return p.str("nominal level", "observed coverage");
}

inline std::string render_sweep(const io::CsvTable& sweep) {
  const auto k = detail::col(sweep, "keep_rate"), v = detail::col(sweep, "validation_error"),
             t = detail::col(sweep, "test_error"), sel = detail::col(sweep, "selected");
  double hi = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) hi = std::max({hi, v[i], t[i]});
  const double n = static_cast<double>(k.size());
  svg::Plot p("Mean calibration error by keep-rate", 0, n, 0, hi * 1.1);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double x = static_cast<double>(i);
    p.bar(x + 0.1, x + 0.5, v[i], sel[i] > 0.5 ? "#d62728" : "#1f77b4");
    p.bar(x + 0.5, x + 0.9, t[i], "#ff7f0e");
    p.label(x + 0.2, -0.0, svg::num(k[i], 2));
  }
  p.legend({"validation", "test"});
  return p.str("keep-rate (bars in grid order; red = selected)", "mean calibration error");
}

inline std::string render_scatter(const io::CsvTable& latent, const io::CsvTable& output, const io::CsvTable& summary) {
  const std::string a = latent.header.at(0), b = latent.header.at(1);
  const auto la = detail::col(latent, a), lb = detail::col(latent, b);
  const auto oa = detail::col(output, a), ob = detail::col(output, b);
  const auto [x0, x1] = detail::range(la, oa);
  const auto [y0, y1] = detail::range(lb, ob);
  svg::Plot p("Correlated scalar pair under residual uncertainty", x0, x1, y0, y1);
  for (std::size_t i = 0; i < la.size(); ++i) p.dot(la[i], lb[i], svg::colour(0));
  for (std::size_t i = 0; i < oa.size(); ++i) p.dot(oa[i], ob[i], svg::colour(1));
  const auto r = detail::col(summary, "pearson_r");
  p.legend({"latent r = " + svg::num(r.at(0), 3), "output r = " + svg::num(r.at(1), 3)});
  return p.str(a, b);
}

inline std::string render_contours(const io::CsvTable& summary, const std::vector<const io::CsvTable*>& radii,
                                   const std::vector<std::string>& names, std::size_t max_curves = 40) {
  // Fans are drawn as radius against azimuth so the per-angle spread reads off directly.
  double hi = 0.0;
  for (const auto* t : radii) hi = std::max(hi, t->rows.size() ? t->rows.maxCoeff() : 0.0);
  const auto angle = detail::col(summary, "angle");
  const double two_pi = angle.empty() ? 6.3 : angle.back() + (angle.size() > 1 ? angle[1] - angle[0] : 0.1);
  svg::Plot p("17% contours: radius vs azimuth", 0, two_pi, 0, hi * 1.1 + 1e-9, 560, 380);
  for (std::size_t m = 0; m < radii.size(); ++m) {
    const auto& t = *radii[m];
    const auto rows = std::min<Eigen::Index>(t.rows.rows(), static_cast<Eigen::Index>(max_curves));
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::vector<std::pair<double, double>> pts;
      for (Eigen::Index k = 0; k < t.rows.cols(); ++k) pts.emplace_back(angle.at(static_cast<std::size_t>(k)), t.rows(i, k));
      p.polyline(pts, svg::colour(m), "fan");
    }
  }
  p.legend(names);
  return p.str("azimuth (rad)", "radius (px)");
}

inline std::string render_density(const io::CsvTable& ramp, const io::CsvTable& uniform, const io::CsvTable& hist) {
  const auto xr = detail::col(ramp, "x"), mr = detail::col(ramp, "mu"), sr = detail::col(ramp, "sd");
  const auto xu = detail::col(uniform, "x"), mu = detail::col(uniform, "mu"), su = detail::col(uniform, "sd");
  std::vector<double> lo, hi, lo_u, hi_u;
  for (std::size_t i = 0; i < xr.size(); ++i) {
    lo.push_back(mr[i] - 2 * sr[i]);
    hi.push_back(mr[i] + 2 * sr[i]);
  }
  for (std::size_t i = 0; i < xu.size(); ++i) {
    lo_u.push_back(mu[i] - 2 * su[i]);
    hi_u.push_back(mu[i] + 2 * su[i]);
  }
  auto [y0, y1] = detail::range(lo, hi);
  const auto [u0, u1] = detail::range(lo_u, hi_u);
  y0 = std::min(y0, u0);
  y1 = std::max(y1, u1);
  svg::Plot p("Posterior band (mean +/- 2 sd) and training density", 0, 1, y0, y1, 560, 380);
  const auto edges_lo = detail::col(hist, "lo"), edges_hi = detail::col(hist, "hi"), counts = detail::col(hist, "count");
  const double cmax = *std::max_element(counts.begin(), counts.end());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    p.bar(edges_lo[b], edges_hi[b], y0 + 0.3 * (y1 - y0) * counts[b] / std::max(cmax, 1.0), "#dddddd", "hist");
  }
  p.band(xr, lo, hi, svg::colour(0));
  p.band(xu, lo_u, hi_u, svg::colour(1));
  std::vector<std::pair<double, double>> mean_r, mean_u;
  for (std::size_t i = 0; i < xr.size(); ++i) mean_r.emplace_back(xr[i], mr[i]);
  for (std::size_t i = 0; i < xu.size(); ++i) mean_u.emplace_back(xu[i], mu[i]);
  p.polyline(mean_r, svg::colour(0), "series");
  p.polyline(mean_u, svg::colour(1), "series");
  p.legend({"ramp", "uniform"});
  return p.str("swept input", "designated scalar");
}

inline std::string render_summary(const io::CsvTable& sweep, const io::CsvTable& toy, const io::CsvTable& contours,
                                  const io::CsvTable& density) {
  std::ostringstream o;
  o << "keep-rate sweep (mean calibration error)\n";
  const auto k = detail::col(sweep, "keep_rate"), v = detail::col(sweep, "validation_error"),
             t = detail::col(sweep, "test_error"), sel = detail::col(sweep, "selected");
  for (std::size_t i = 0; i < k.size(); ++i) {
    o << "  keep " << svg::num(k[i], 3) << "  validation " << svg::num(v[i], 4) << "  test " << svg::num(t[i], 4)
      << (sel[i] > 0.5 ? "  <- selected" : "") << '\n';
  }
  o << "\ncorrelated pair (Pearson r)\n";
  const auto r = detail::col(toy, "pearson_r");
  const char* names[] = {"latent residuals", "output residuals", "simulator"};
  for (std::size_t i = 0; i < r.size() && i < 3; ++i) o << "  " << names[i] << ": " << svg::num(r[i], 4) << '\n';
  o << "\ncontour radius sd (px)\n";
  for (const char* c : {"dropout_sd", "latent_sd", "output_sd", "output_mean_image_sd"}) {
    const auto s = detail::col(contours, c);
    o << "  " << c << ": max " << svg::num(*std::max_element(s.begin(), s.end()), 4) << ", min "
      << svg::num(*std::min_element(s.begin(), s.end()), 4) << '\n';
  }
  o << "\ndensity study\n";
  const auto ratio = detail::col(density, "count_ratio"), lo = detail::col(density, "sd_low"),
             hi = detail::col(density, "sd_high");
  const char* prof[] = {"ramp", "uniform"};
  for (std::size_t i = 0; i < ratio.size() && i < 2; ++i) {
    o << "  " << prof[i] << ": count ratio " << svg::num(ratio[i], 3) << ", mean sd low half " << svg::num(lo[i], 5)
      << ", high half " << svg::num(hi[i], 5) << '\n';
  }
  return o.str();
}

/// Renders every plot into <run>/report. Throws MissingArtifactsError naming each absent input.
inline std::vector<fs::path> make_report(const fs::path& run) {
  std::vector<std::string> missing;
  for (const auto& f : report_inputs()) {
    if (!fs::exists(run / f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    std::string msg = "missing report inputs under " + run.string() + ":";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingArtifactsError(msg, missing);
  }
  auto csv = [&](const char* f) { return io::read_csv(run / f); };
  const auto sweep = csv("sweep/sweep.csv"), curves = csv("calibration/curves.csv");
  const auto latent = csv("toy/latent_cloud.csv"), output = csv("toy/output_cloud.csv"), toy = csv("toy/summary.csv");
  const auto contours = csv("contours/summary.csv");
  const auto r_latent = csv("contours/latent_radii.csv"), r_output = csv("contours/output_radii.csv"),
             r_dropout = csv("contours/dropout_radii.csv");
  const auto ramp = csv("density/ramp.csv"), uniform = csv("density/uniform.csv"), hist = csv("density/histogram.csv"),
             dens = csv("density/summary.csv");

  const fs::path out = run / "report";
  std::vector<std::pair<fs::path, std::string>> files{
      {out / "calibration_curves.svg", render_calibration_curves(curves)},
      {out / "sweep.svg", render_sweep(sweep)},
      {out / "toy_scatter.svg", render_scatter(latent, output, toy)},
      {out / "contours.svg",
       render_contours(contours, {&r_dropout, &r_latent, &r_output}, {"dropout", "latent residual", "output residual"})},
      {out / "density.svg", render_density(ramp, uniform, hist)},
      {out / "summary.txt", render_summary(sweep, toy, contours, dens)}};
  std::vector<fs::path> written;
  for (const auto& [path, text] : files) {
    io::write_text(path, text);
    written.push_back(path);
  }
  return written;
}

}  // namespace latent_calib::experiments
