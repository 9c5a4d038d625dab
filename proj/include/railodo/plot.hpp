#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "railodo/consensus.hpp"
#include "railodo/log_io.hpp"
#include "railodo/scenario.hpp"

namespace railodo::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double width = 1.5;
  bool dashed = false;
  bool points = false;  // draw markers instead of a polyline
};

/// Filled region between two curves sharing x.
struct Band {
  std::string label;
  std::vector<double> x;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string color = "#1f77b4";
  double opacity = 0.25;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Band> bands;
  std::vector<Series> series;
  bool log_y = false;
  int width = 960;
  int height = 420;
};

/// Standalone SVG document.
std::string render_svg(const Chart& chart);
void write_svg(const std::filesystem::path& path, const Chart& chart);

struct RunCharts {
  Chart velocity;     // readings, truth, estimate with a mean +/- sigma band
  Chart calibration;  // cal1, cal2
  Chart scales;       // SCA variance scales, log axis
};

RunCharts run_charts(std::span<const EstimateRow> estimates, std::span<const TruthSample> truth,
                     std::span<const Measurement> measurements);

/// Velocity with a mean +/- sigma band, calibration states, and SCA scales
/// over time. `measurements` and `truth` may be empty. Returns the files
/// written: <prefix>velocity.svg, <prefix>calibration.svg, <prefix>scales.svg.
std::vector<std::filesystem::path> render_run(std::span<const EstimateRow> estimates,
                                              std::span<const TruthSample> truth,
                                              std::span<const Measurement> measurements,
                                              const std::filesystem::path& dir,
                                              const std::string& prefix = "");

/// Gaussian densities of the readings before and after consensus scaling.
std::vector<std::filesystem::path> render_consensus(const ConsensusReport& report,
                                                    const std::filesystem::path& dir,
                                                    const std::string& prefix = "");

}  // namespace railodo::plot
