#pragma once

#include <span>
#include <vector>

#include "railodo/log_io.hpp"
#include "railodo/measurement.hpp"

namespace railodo {

/// What happened to one incoming reading.
struct FusionRecord {
  double timestamp = 0.0;
  SensorKind sensor = SensorKind::Radar1;
  bool fused = false;   // false: gated out, or a GPS reading used only as reference
  double scale = 1.0;   // variance multiplier applied before fusing
};

struct PipelineResult {
  std::vector<EstimateRow> rows;  // one per output tick
  std::vector<FusionRecord> records;
  std::size_t sca_runs = 0;
  std::size_t sca_inflations = 0;  // runs where some scale exceeded 1

  std::size_t fused_count(SensorKind kind, double t_begin, double t_end) const;
  std::vector<StateEstimate> estimates() const;
};

/// Runs the EKF over a time-ordered measurement stream.
///
/// Every reading is aligned with the freshest reading of each other fused
/// sensor (see Aligner). Depending on the mode it is then fused as is, passed
/// through the Mahalanobis gate, or fused with its variance multiplied by the
/// SCA scale computed over the aligned set. Encoder readings enter the
/// consensus test in calibrated velocity space unless the config says raw;
/// either way the scale is applied to the raw reading's variance.
///
/// The filter is predicted to each reading's time with Q scaled by
/// dt / q_reference_period, and one row is emitted per output tick starting at
/// the first reading.
PipelineResult run_pipeline(const RunConfig& config, std::span<const Measurement> measurements);

}  // namespace railodo
