#include "railodo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "railodo/error.hpp"

namespace railodo::plot {

namespace {

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finalize() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double pad = std::max(1.0, std::abs(lo)) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

class Canvas {
 public:
  Canvas(const Chart& chart, Range x, Range y) : chart_(chart), x_(x), y_(y) {
    if (chart.log_y) {
      y_.lo = std::floor(std::log10(std::max(y_.lo, 1e-12)));
      y_.hi = std::ceil(std::log10(std::max(y_.hi, 1e-12)));
      if (y_.hi <= y_.lo) y_.hi = y_.lo + 1.0;
    }
  }

  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_w(); }
  double py(double y) const {
    const double v = chart_.log_y ? std::log10(std::max(y, 1e-12)) : y;
    return kTop + (1.0 - (v - y_.lo) / (y_.hi - y_.lo)) * plot_h();
  }
  double plot_w() const { return chart_.width - kLeft - kRight; }
  double plot_h() const { return chart_.height - kTop - kBottom; }

  const Range& x() const { return x_; }
  const Range& y() const { return y_; }

  static constexpr double kLeft = 70, kRight = 170, kTop = 36, kBottom = 50;

 private:
  const Chart& chart_;
  Range x_;
  Range y_;
};

}  // namespace

std::string render_svg(const Chart& chart) {
  Range xr, yr;
  for (const Band& b : chart.bands) {
    for (double v : b.x) xr.add(v);
    for (double v : b.lower) yr.add(v);
    for (double v : b.upper) yr.add(v);
  }
  for (const Series& s : chart.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(chart.log_y && v <= 0.0 ? std::numeric_limits<double>::quiet_NaN() : v);
  }
  xr.finalize();
  yr.finalize();
  if (!chart.log_y) {
    const double pad = 0.04 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;
  }
  const Canvas cv(chart, xr, yr);

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      chart.width, chart.height);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     Canvas::kLeft + cv.plot_w() / 2, escape(chart.title));

  // Grid and tick labels.
  const double x_step = nice_step(cv.x().hi - cv.x().lo, 8);
  for (double t = std::ceil(cv.x().lo / x_step) * x_step; t <= cv.x().hi + 1e-9 * x_step; t += x_step) {
    const double x = cv.px(t);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#e0e0e0\"/>\n",
                       x, Canvas::kTop, Canvas::kTop + cv.plot_h());
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", x,
                       Canvas::kTop + cv.plot_h() + 16, t);
  }
  const double y_step = chart.log_y ? 1.0 : nice_step(cv.y().hi - cv.y().lo, 6);
  for (double t = std::ceil(cv.y().lo / y_step) * y_step; t <= cv.y().hi + 1e-9 * y_step; t += y_step) {
    const double value = chart.log_y ? std::pow(10.0, t) : t;
    const double y = cv.py(value);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#e0e0e0\"/>\n",
                       Canvas::kLeft, y, Canvas::kLeft + cv.plot_w());
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", Canvas::kLeft - 6,
                       y + 4, value);
  }
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
      Canvas::kLeft, Canvas::kTop, cv.plot_w(), cv.plot_h());
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                     Canvas::kLeft + cv.plot_w() / 2, chart.height - 10.0, escape(chart.x_label));
  svg += fmt::format(
      "<text transform=\"translate(16,{:.2f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
      Canvas::kTop + cv.plot_h() / 2, escape(chart.y_label));

  svg += fmt::format("<clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{:.2f}\" height=\"{:.2f}\"/></clipPath>\n",
                     Canvas::kLeft, Canvas::kTop, cv.plot_w(), cv.plot_h());
  svg += "<g clip-path=\"url(#plot)\">\n";
  for (const Band& b : chart.bands) {
    std::string pts;
    for (std::size_t k = 0; k < b.x.size(); ++k) pts += fmt::format("{:.2f},{:.2f} ", cv.px(b.x[k]), cv.py(b.upper[k]));
    for (std::size_t k = b.x.size(); k-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", cv.px(b.x[k]), cv.py(b.lower[k]));
    svg += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n", pts, b.color,
                       b.opacity);
  }
  for (const Series& s : chart.series) {
    if (s.points) {
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!std::isfinite(s.y[k])) continue;
        svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.2\" fill=\"{}\"/>\n", cv.px(s.x[k]),
                           cv.py(s.y[k]), s.color);
      }
      continue;
    }
    std::string pts;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (std::isfinite(s.y[k])) pts += fmt::format("{:.2f},{:.2f} ", cv.px(s.x[k]), cv.py(s.y[k]));
    }
    svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n", pts,
                       s.color, s.width, s.dashed ? " stroke-dasharray=\"6,4\"" : "");
  }
  svg += "</g>\n";

  // Legend.
  double ly = Canvas::kTop + 10;
  const double lx = Canvas::kLeft + cv.plot_w() + 12;
  for (const Band& b : chart.bands) {
    if (b.label.empty()) continue;
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"22\" height=\"10\" fill=\"{}\" fill-opacity=\"{}\"/>\n",
                       lx, ly - 8, b.color, b.opacity);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 28, ly + 1, escape(b.label));
    ly += 18;
  }
  for (const Series& s : chart.series) {
    if (s.label.empty()) continue;
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" "
                       "stroke-width=\"2\"{4}/>\n",
                       lx, ly - 3, lx + 22, s.color, s.dashed ? " stroke-dasharray=\"6,4\"" : "");
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 28, ly + 1, escape(s.label));
    ly += 18;
  }
  svg += "</svg>\n";
  return svg;
}

void write_svg(const std::filesystem::path& path, const Chart& chart) {
  const std::string svg = render_svg(chart);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << svg;
  if (!out) throw Error(ErrorKind::Io, fmt::format("write to {} failed", path.string()));
}

RunCharts run_charts(std::span<const EstimateRow> estimates, std::span<const TruthSample> truth,
                     std::span<const Measurement> measurements) {
  if (estimates.empty()) throw Error(ErrorKind::InvalidInput, "no estimates to plot");

  std::vector<double> t, v, lo, hi, cal1, cal2;
  std::array<std::vector<double>, 4> scales;
  for (const EstimateRow& row : estimates) {
    const StateEstimate& e = row.estimate;
    t.push_back(e.timestamp);
    v.push_back(e.velocity());
    lo.push_back(e.velocity() - e.velocity_std());
    hi.push_back(e.velocity() + e.velocity_std());
    cal1.push_back(e.calibration1());
    cal2.push_back(e.calibration2());
    for (std::size_t k = 0; k < scales.size(); ++k) scales[k].push_back(row.scales[k]);
  }

  Chart velocity{"Velocity estimate", "time (s)", "velocity (m/s)"};
  for (SensorKind kind : kAllSensors) {
    Series s{std::string(sensor_name(kind))};
    s.points = true;
    s.color = kPalette[index_of(kind) % kPalette.size()];
    for (const Measurement& m : measurements) {
      if (m.sensor != kind) continue;
      s.x.push_back(m.timestamp);
      s.y.push_back(m.mean);
    }
    if (!s.x.empty()) velocity.series.push_back(std::move(s));
  }
  if (!truth.empty()) {
    Series s{"truth"};
    s.color = "#000000";
    s.dashed = true;
    for (const TruthSample& ts : truth) {
      s.x.push_back(ts.timestamp);
      s.y.push_back(ts.velocity);
    }
    velocity.series.push_back(std::move(s));
  }
  velocity.bands.push_back(Band{"estimate +/- sigma", t, lo, hi, "#17becf", 0.35});
  velocity.series.push_back(Series{"estimate", t, v, "#17becf", 2.0});

  Chart calibration{"Encoder calibration", "time (s)", "calibration factor"};
  calibration.series.push_back(Series{"cal1", t, cal1, kPalette[2]});
  calibration.series.push_back(Series{"cal2", t, cal2, kPalette[3]});

  Chart scale_chart{"Consensus variance scale", "time (s)", "scale"};
  scale_chart.log_y = true;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    scale_chart.series.push_back(Series{std::string(sensor_name(kAllSensors[k])), t, scales[k], kPalette[k]});
  }

  return {std::move(velocity), std::move(calibration), std::move(scale_chart)};
}

std::vector<std::filesystem::path> render_run(std::span<const EstimateRow> estimates,
                                              std::span<const TruthSample> truth,
                                              std::span<const Measurement> measurements,
                                              const std::filesystem::path& dir, const std::string& prefix) {
  const RunCharts charts = run_charts(estimates, truth, measurements);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files = {dir / (prefix + "velocity.svg"), dir / (prefix + "calibration.svg"),
                                              dir / (prefix + "scales.svg")};
  write_svg(files[0], charts.velocity);
  write_svg(files[1], charts.calibration);
  write_svg(files[2], charts.scales);
  return files;
}

std::vector<std::filesystem::path> render_consensus(const ConsensusReport& report,
                                                    const std::filesystem::path& dir, const std::string& prefix) {
  if (report.input.empty()) throw Error(ErrorKind::InvalidInput, "render_consensus: no measurements");

  const auto densities = [](std::span<const Measurement> ms, const std::string& title) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Measurement& m : ms) {
      const double sd = std::sqrt(m.variance);
      lo = std::min(lo, m.mean - 4 * sd);
      hi = std::max(hi, m.mean + 4 * sd);
    }
    Chart chart{title, "velocity (m/s)", "density"};
    constexpr int kSamples = 400;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      Series s{fmt::format("{} ({})", static_cast<char>('a' + k % 26), sensor_name(ms[k].sensor))};
      s.color = kPalette[k % kPalette.size()];
      const double sd = std::sqrt(ms[k].variance);
      for (int i = 0; i <= kSamples; ++i) {
        const double x = lo + (hi - lo) * i / kSamples;
        const double u = (x - ms[k].mean) / sd;
        s.x.push_back(x);
        s.y.push_back(std::exp(-0.5 * u * u) / (sd * std::sqrt(2 * std::numbers::pi)));
      }
      chart.series.push_back(std::move(s));
    }
    return chart;
  };

  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files = {dir / (prefix + "consensus_input.svg"),
                                              dir / (prefix + "consensus_scaled.svg")};
  write_svg(files[0], densities(report.input, "Input measurements"));
  write_svg(files[1], densities(report.scaled(), "Scaled measurements"));
  return files;
}

}  // namespace railodo::plot
