// railodo: simulate wheel-slip scenarios, run the odometry filter over
// measurement logs, and compare pre-processing modes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "railodo/consensus.hpp"
#include "railodo/error.hpp"
#include "railodo/log_io.hpp"
#include "railodo/pipeline.hpp"
#include "railodo/plot.hpp"
#include "railodo/scenario.hpp"

namespace fs = std::filesystem;
using namespace railodo;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kParseError = 3,
  kNumericalError = 4,
  kIoError = 5,
  kInputError = 6,
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Domain: return kConfigError;
    case ErrorKind::Parse: return kParseError;
    case ErrorKind::Numerical:
    case ErrorKind::Degenerate:
    case ErrorKind::Logic: return kNumericalError;
    case ErrorKind::Io: return kIoError;
    case ErrorKind::InvalidInput: return kInputError;
  }
  return kInputError;
}

Scenario load_scenario(const std::string& name_or_path) {
  if (auto builtin = scenarios::by_name(name_or_path)) return *builtin;
  if (!fs::exists(name_or_path)) {
    std::string known;
    for (const auto& n : scenarios::names()) known += " " + n;
    throw Error(ErrorKind::Config,
                fmt::format("scenario '{}' is neither a file nor a built-in (built-ins:{})", name_or_path, known));
  }
  return read_scenario(name_or_path);
}

RunConfig load_config(const std::string& path, const std::string& mode) {
  RunConfig config = path.empty() ? RunConfig{} : read_run_config(path);
  if (!mode.empty()) config.mode = PreprocessMode::parse(mode);
  config.validate();
  return config;
}

std::string file_label(const PreprocessMode& mode) {
  std::string label = mode.label();
  for (char& c : label) {
    if (c == ':') c = '-';
  }
  return label;
}

void print_metrics_header() {
  fmt::print("{:<12} {:>12} {:>14} {:>10} {:>10}\n", "mode", "rmse_mps", "dist_err_m", "nees_v", "cover_1s");
}

void print_metrics(const std::string& label, const Metrics& m) {
  fmt::print("{:<12} {:>12.6f} {:>14.4f} {:>10.4f} {:>10.4f}\n", label, m.velocity_rmse, m.distance_error,
             m.mean_velocity_nees, m.sigma_coverage);
}

struct SimulateArgs {
  std::string scenario = "two_slip";
  std::optional<std::uint64_t> seed;
  std::string output;
};

int cmd_simulate(const SimulateArgs& a) {
  Scenario scenario = load_scenario(a.scenario);
  if (a.seed) scenario.seed = *a.seed;
  const SimulationResult sim = simulate(scenario);

  fs::create_directories(a.output);
  write_measurements(fs::path(a.output) / "measurements.csv", sim.measurements);
  write_truth(fs::path(a.output) / "truth.csv", sim.truth);
  std::ofstream(fs::path(a.output) / "scenario.cfg", std::ios::binary) << format_scenario(scenario);
  fmt::print("{}: {} measurements, {} truth samples, seed {}\n", scenario.name, sim.measurements.size(),
             sim.truth.size(), scenario.seed);
  return kOk;
}

struct RunArgs {
  std::string input;
  std::string config;
  std::string mode;
  std::string truth;
  std::string output;
  bool allow_unsorted = false;
  bool plots = false;
};

int cmd_run(const RunArgs& a) {
  const RunConfig config = load_config(a.config, a.mode);
  const auto measurements = read_measurements(a.input, a.allow_unsorted);
  const auto truth = a.truth.empty() ? std::vector<TruthSample>{} : read_truth(a.truth);

  const PipelineResult result = run_pipeline(config, measurements);

  fs::create_directories(a.output);
  write_estimates(fs::path(a.output) / "estimates.csv", result.rows);
  fmt::print("mode {}: {} readings, {} output rows, {} SCA runs ({} inflating)\n", config.mode.label(),
             measurements.size(), result.rows.size(), result.sca_runs, result.sca_inflations);
  if (!result.rows.empty()) {
    const StateEstimate& last = result.rows.back().estimate;
    fmt::print("final: t={:.3f} s  distance={:.3f} m  velocity={:.4f} +/- {:.4f} m/s  cal1={:.6f}  cal2={:.6f}\n",
               last.timestamp, last.distance(), last.velocity(), last.velocity_std(), last.calibration1(),
               last.calibration2());
  }
  if (!truth.empty() && !result.rows.empty()) {
    print_metrics_header();
    print_metrics(config.mode.label(), evaluate(result.estimates(), truth));
  }
  if (a.plots && !result.rows.empty()) plot::render_run(result.rows, truth, measurements, a.output);
  return kOk;
}

struct CompareArgs {
  std::string scenario = "two_slip";
  std::optional<std::uint64_t> seed;
  std::string config;
  std::vector<std::string> modes;
  std::string output;
};

int cmd_compare(const CompareArgs& a) {
  Scenario scenario = load_scenario(a.scenario);
  if (a.seed) scenario.seed = *a.seed;
  const RunConfig base = load_config(a.config, "");
  std::vector<PreprocessMode> modes;
  const std::vector<std::string> requested =
      a.modes.empty() ? std::vector<std::string>{"none", "nis:3", "sca:0.5", "sca:0.9"} : a.modes;
  for (const auto& m : requested) modes.push_back(PreprocessMode::parse(m));

  const SimulationResult sim = simulate(scenario);
  const fs::path out(a.output);
  fs::create_directories(out);
  write_measurements(out / "measurements.csv", sim.measurements);
  write_truth(out / "truth.csv", sim.truth);

  std::string table = "mode,velocity_rmse_mps,distance_error_m,mean_nees_velocity,sigma_coverage\n";
  print_metrics_header();
  for (const PreprocessMode& mode : modes) {
    RunConfig config = base;
    config.mode = mode;
    const PipelineResult result = run_pipeline(config, sim.measurements);
    const std::string label = file_label(mode);
    write_estimates(out / fmt::format("estimates_{}.csv", label), result.rows);
    plot::render_run(result.rows, sim.truth, sim.measurements, out, label + "_");
    const Metrics m = evaluate(result.estimates(), sim.truth);
    print_metrics(mode.label(), m);
    table += fmt::format("{},{:.12g},{:.12g},{:.12g},{:.12g}\n", mode.label(), m.velocity_rmse, m.distance_error,
                         m.mean_velocity_nees, m.sigma_coverage);
  }
  std::ofstream(out / "metrics.csv", std::ios::binary) << table;
  return kOk;
}

struct ScaDemoArgs {
  std::string input;
  std::string example;
  double p = 0.2;
  std::string output;
};

std::vector<Measurement> demo_example(const std::string& name) {
  using enum SensorKind;
  if (name == "outlier") {
    return {{Radar1, 12.0, 0.5, 0}, {Radar2, 15.0, 0.6, 0}, {Encoder1, 15.4, 0.4, 0}, {Encoder2, 14.8, 0.5, 0}};
  }
  if (name == "pairs") {
    return {{Radar1, 10.0, 0.4, 0}, {Radar2, 10.3, 0.5, 0}, {Encoder1, 13.0, 0.4, 0}, {Encoder2, 13.4, 0.5, 0}};
  }
  throw Error(ErrorKind::Config, fmt::format("unknown example '{}' (outlier, pairs)", name));
}

int cmd_sca_demo(const ScaDemoArgs& a) {
  if (a.input.empty() == a.example.empty()) {
    throw Error(ErrorKind::Config, "sca-demo: give exactly one of --input or --example");
  }
  z_desired(a.p);  // validates p before anything is written
  const auto measurements = a.input.empty() ? demo_example(a.example) : read_measurements(a.input, true);
  const ConsensusReport report = sca(measurements, a.p);

  fmt::print("p = {}  z_desired = {:.6f}  iterations = {}\n", a.p, a.p > 0 ? z_desired(a.p) : 0.0,
             report.iterations);
  fmt::print("{:<4} {:<9} {:>10} {:>12} {:>14} {:>14}\n", "id", "sensor", "mean", "variance", "scale",
             "scaled_var");
  const auto scaled = report.scaled();
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    fmt::print("{:<4} {:<9} {:>10.4f} {:>12.6g} {:>14.6g} {:>14.6g}\n", static_cast<char>('a' + k % 26),
               sensor_name(measurements[k].sensor), measurements[k].mean, measurements[k].variance,
               report.scales[k], scaled[k].variance);
  }
  if (!measurements.empty()) plot::render_consensus(report, a.output);
  return kOk;
}

struct PlotArgs {
  std::string estimates;
  std::string truth;
  std::string input;
  std::string output;
};

int cmd_plot(const PlotArgs& a) {
  const auto rows = read_estimates(a.estimates);
  const auto truth = a.truth.empty() ? std::vector<TruthSample>{} : read_truth(a.truth);
  const auto measurements = a.input.empty() ? std::vector<Measurement>{} : read_measurements(a.input, true);
  for (const auto& f : plot::render_run(rows, truth, measurements, a.output)) fmt::print("{}\n", f.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train odometry: EKF with encoder calibration states and sensor consensus analysis"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate truth and sensor streams for a scenario");
  sim->add_option("--config,--scenario", sim_args.scenario, "Scenario file or built-in name")
      ->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "Override the scenario seed");
  sim->add_option("--output", sim_args.output, "Output directory")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the filter over a measurement CSV");
  run->add_option("--input", run_args.input, "Measurement CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--config", run_args.config, "Run configuration file");
  run->add_option("--mode", run_args.mode, "none | nis:<threshold> | sca:<p> (overrides config)");
  run->add_option("--truth", run_args.truth, "Truth CSV for metrics")->check(CLI::ExistingFile);
  run->add_option("--output", run_args.output, "Output directory")->required();
  run->add_flag("--allow-unsorted", run_args.allow_unsorted, "Sort out-of-order rows instead of failing");
  run->add_flag("--plots", run_args.plots, "Also write SVG plots");

  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare", "Simulate one scenario and run it under several modes");
  cmp->add_option("--scenario", cmp_args.scenario, "Scenario file or built-in name")->capture_default_str();
  cmp->add_option("--seed", cmp_args.seed, "Override the scenario seed");
  cmp->add_option("--config", cmp_args.config, "Base run configuration file");
  cmp->add_option("--mode", cmp_args.modes, "Mode to run (repeatable; default none nis:3 sca:0.5 sca:0.9)");
  cmp->add_option("--output", cmp_args.output, "Output directory")->required();

  ScaDemoArgs demo_args;
  auto* demo = app.add_subcommand("sca-demo", "Run consensus analysis on one set of readings and plot it");
  demo->add_option("--input", demo_args.input, "Measurement CSV holding one reading per sensor")
      ->check(CLI::ExistingFile);
  demo->add_option("--example", demo_args.example, "Built-in set: outlier | pairs");
  demo->add_option("--p", demo_args.p, "Consensus probability")->capture_default_str();
  demo->add_option("--output", demo_args.output, "Output directory")->required();

  PlotArgs plot_args;
  auto* plt = app.add_subcommand("plot", "Render SVG plots from an estimate CSV");
  plt->add_option("--estimates", plot_args.estimates, "Estimate CSV")->required()->check(CLI::ExistingFile);
  plt->add_option("--truth", plot_args.truth, "Truth CSV")->check(CLI::ExistingFile);
  plt->add_option("--input", plot_args.input, "Measurement CSV")->check(CLI::ExistingFile);
  plt->add_option("--output", plot_args.output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_args);
    if (*run) return cmd_run(run_args);
    if (*cmp) return cmd_compare(cmp_args);
    if (*demo) return cmd_sca_demo(demo_args);
    if (*plt) return cmd_plot(plot_args);
  } catch (const Error& e) {
    std::cerr << "railodo: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "railodo: I/O error: " << e.what() << '\n';
    return kIoError;
  }
  return kUsage;
}
