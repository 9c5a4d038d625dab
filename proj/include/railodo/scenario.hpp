#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "railodo/measurement.hpp"
#include "railodo/state_filter.hpp"

namespace railodo {

struct TruthSample {
  double timestamp = 0.0;     // s
  double distance = 0.0;      // m
  double velocity = 0.0;      // m/s
  double acceleration = 0.0;  // m/s^2, held over the step ending here
};

/// Constant commanded acceleration held for `duration` seconds.
struct Segment {
  double duration = 0.0;
  double acceleration = 0.0;
};

/// Trapezoidal velocity offset added to the wheel speed seen by encoders.
/// Positive offsets model slip under traction, negative ones slide under
/// braking. The offset ramps up over `onset` * duration, holds, then ramps
/// down over `decay` * duration.
struct SlipEvent {
  double start = 0.0;
  double duration = 1.0;
  std::vector<SensorKind> sensors;
  double peak_offset = 0.0;  // m/s
  double onset = 0.25;
  double decay = 0.25;

  bool affects(SensorKind kind) const;
  double offset_at(double t) const;
  void validate() const;
};

struct SensorModel {
  SensorKind kind = SensorKind::Radar1;
  double rate = 10.0;               // Hz
  double noise_std = 0.3;           // actual noise, m/s
  double calibration = 1.0;         // encoders only
  double reported_variance = 0.09;  // what the sensor claims, (m/s)^2
  std::vector<std::pair<double, double>> dropouts;

  bool in_dropout(double t) const;
  void validate() const;
};

/// Everything needed to reproduce a synthetic run.
struct Scenario {
  std::string name = "custom";
  double truth_rate = 100.0;
  double initial_velocity = 0.0;
  std::vector<Segment> segments;
  std::vector<SensorModel> sensors;
  std::vector<SlipEvent> slips;
  std::uint64_t seed = 1;

  void validate() const;
  double duration() const;
};

/// Gaussian source with a fixed, documented algorithm: 64-bit Mersenne
/// Twister (its output sequence is fixed by the C++ standard), 53-bit
/// uniform doubles, and the Box-Muller transform. Unlike
/// std::normal_distribution this yields the same stream on every toolchain.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // (0, 1)
  double normal();   // N(0, 1)

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Mixes a scenario seed with a sensor identity (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, SensorKind kind);

/// Integrates a piecewise-constant acceleration profile. The velocity is
/// never driven below zero: a braking step that would overshoot is shortened
/// to end exactly at rest.
std::vector<TruthSample> generate_truth(std::span<const Segment> segments, double rate,
                                        double initial_velocity = 0.0);

/// Linear interpolation of the truth at time t (clamped to the ends).
TruthSample truth_at(std::span<const TruthSample> truth, double t);

/// One reading per sensor tick outside dropouts. Encoders report
/// (v + slip) / calibration plus noise.
std::vector<Measurement> synthesize(std::span<const TruthSample> truth, const SensorModel& sensor,
                                    std::span<const SlipEvent> slips, std::uint64_t seed);

struct SimulationResult {
  std::vector<TruthSample> truth;
  std::vector<Measurement> measurements;  // merged, time-ordered
};

SimulationResult simulate(const Scenario& scenario);

struct Metrics {
  double velocity_rmse = 0.0;       // m/s
  double distance_error = 0.0;      // terminal |d_est - d_true|, m
  double mean_velocity_nees = 0.0;
  double sigma_coverage = 0.0;      // fraction with |v_est - v_true| <= sigma
  std::size_t samples = 0;
};

Metrics evaluate(std::span<const StateEstimate> estimates, std::span<const TruthSample> truth);

namespace scenarios {

/// Accelerate, cruise, brake; four velocity sensors plus GPS, encoder 1
/// reading 3% high, honest reported variances.
Scenario nominal();

/// As nominal but with conservative sensor variances and two slip events: an
/// unequal slip on the encoders while accelerating, and a near-identical
/// slide on both while braking.
Scenario two_slip();

/// Sensors of two_slip without GPS. The radars are lost at t = 100 s
/// (snow/ice) and encoder 1 slides away from encoder 2 while braking.
Scenario encoders_only();

/// Constant 60 m/s with encoder 1 miscalibrated to 0.95.
Scenario calibration();

/// Looks up a built-in scenario by name; empty result when unknown.
std::optional<Scenario> by_name(const std::string& name);
std::vector<std::string> names();

}  // namespace scenarios

}  // namespace railodo
