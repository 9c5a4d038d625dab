#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "railodo/measurement.hpp"
#include "railodo/scenario.hpp"
#include "railodo/state_filter.hpp"

namespace railodo {

inline constexpr std::string_view kMeasurementHeader = "time_s,sensor,velocity_mps,variance_mps2";
inline constexpr std::string_view kTruthHeader = "time_s,distance_m,velocity_mps,accel_mps2";
inline constexpr std::string_view kEstimateHeader =
    "time_s,distance_m,velocity_mps,accel_mps2,cal1,cal2,std_velocity_mps,"
    "scale_radar1,scale_radar2,scale_encoder1,scale_encoder2";

// ---------------------------------------------------------------------------
// Measurement CSV

std::vector<Measurement> parse_measurements(std::istream& in, bool allow_unsorted = false);
std::vector<Measurement> read_measurements(const std::filesystem::path& path,
                                           bool allow_unsorted = false);
void format_measurements(std::ostream& out, std::span<const Measurement> measurements);
void write_measurements(const std::filesystem::path& path, std::span<const Measurement> measurements);

// ---------------------------------------------------------------------------
// Truth CSV

std::vector<TruthSample> parse_truth(std::istream& in);
std::vector<TruthSample> read_truth(const std::filesystem::path& path);
void write_truth(const std::filesystem::path& path, std::span<const TruthSample> truth);

// ---------------------------------------------------------------------------
// Estimate CSV

/// SCA scales for the four fused velocity sensors, in column order.
using ScaleColumns = std::array<double, 4>;

struct EstimateRow {
  StateEstimate estimate;
  ScaleColumns scales{1.0, 1.0, 1.0, 1.0};
};

/// Column of a sensor in ScaleColumns; GPS has none.
std::optional<std::size_t> scale_column(SensorKind kind);

void format_estimates(std::ostream& out, std::span<const EstimateRow> rows);
void write_estimates(const std::filesystem::path& path, std::span<const EstimateRow> rows);

/// Reads back what write_estimates produced. Only the velocity variance of
/// the covariance is recoverable; the other entries are zero.
std::vector<EstimateRow> parse_estimates(std::istream& in);
std::vector<EstimateRow> read_estimates(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Alignment

/// The most recent reading of every sensor that is still fresh at
/// `timestamp`, ordered by sensor kind.
struct AlignedSet {
  double timestamp = 0.0;
  std::vector<Measurement> members;

  const Measurement* find(SensorKind kind) const;
};

/// Incremental form of align(): feed readings in time order.
class Aligner {
 public:
  explicit Aligner(double window);

  AlignedSet push(const Measurement& m);

 private:
  double window_;
  std::array<std::optional<Measurement>, kSensorCount> latest_;
};

/// One set per arriving measurement; readings older than `window` are dropped.
std::vector<AlignedSet> align(std::span<const Measurement> stream, double window);

// ---------------------------------------------------------------------------
// Run configuration

enum class Preprocessing { None, Nis, Sca };

struct PreprocessMode {
  Preprocessing kind = Preprocessing::None;
  double parameter = 0.0;  // gate threshold (nis) or consensus probability (sca)

  /// "none", "nis:<threshold>" or "sca:<p>".
  static PreprocessMode parse(std::string_view text);
  std::string label() const;
  void validate() const;
};

enum class ConsensusSpace { Raw, Calibrated };

struct RunConfig {
  NoiseConfig noise;
  PreprocessMode mode{Preprocessing::Sca, 0.9};
  double staleness_window = 1.0;  // s
  ConsensusSpace encoder_space = ConsensusSpace::Calibrated;
  bool fuse_gps = false;
  double output_rate = 10.0;  // Hz
  /// Q is specified per step of this length and scaled linearly with dt.
  double q_reference_period = 0.1;  // s

  void validate() const;
};

/// Flat `key = value` text, `#` starts a comment. Unknown keys are errors.
RunConfig parse_run_config(std::istream& in);
RunConfig read_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

// ---------------------------------------------------------------------------
// Scenario description

Scenario parse_scenario(std::istream& in);
Scenario read_scenario(const std::filesystem::path& path);
std::string format_scenario(const Scenario& scenario);

}  // namespace railodo
