#pragma once

#include <Eigen/Dense>

#include "railodo/measurement.hpp"

namespace railodo {

inline constexpr int kStateDim = 5;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using ObservationRow = Eigen::Matrix<double, 1, kStateDim>;

// State layout: distance, velocity, acceleration, encoder calibrations.
enum StateIndex : int {
  kDistance = 0,
  kVelocity = 1,
  kAcceleration = 2,
  kCalibration1 = 3,
  kCalibration2 = 4,
};

/// Calibration factors below this magnitude make the encoder model singular.
inline constexpr double kCalibrationFloor = 1e-6;

struct StateEstimate {
  StateVector mean = StateVector::Zero();
  StateMatrix covariance = StateMatrix::Identity();
  double timestamp = 0.0;

  double distance() const { return mean(kDistance); }
  double velocity() const { return mean(kVelocity); }
  double acceleration() const { return mean(kAcceleration); }
  double calibration1() const { return mean(kCalibration1); }
  double calibration2() const { return mean(kCalibration2); }
  double velocity_std() const;
};

/// Process noise Q applied once per prediction step, plus optional per-sensor
/// measurement variance overrides (a negative entry means "use the variance
/// carried by the measurement").
struct NoiseConfig {
  StateMatrix process_noise = default_process_noise();
  std::array<double, kSensorCount> measurement_variance{-1, -1, -1, -1, -1};

  static StateMatrix default_process_noise();
};

/// Starting point used when nothing better is known: calibrations at 1,
/// broad velocity uncertainty.
StateEstimate initial_estimate(double velocity, double timestamp);

/// F for the constant-acceleration kinematics with identity calibration rows.
StateMatrix transition_matrix(double dt);

StateEstimate predict(const StateEstimate& est, double dt, const NoiseConfig& noise);

struct Observation {
  double predicted = 0.0;  // m/s
  ObservationRow jacobian = ObservationRow::Zero();
};

Observation observation_model(const StateVector& mean, SensorKind sensor);

/// Measurement with the configured variance override applied, if any.
Measurement effective_measurement(const Measurement& meas, const NoiseConfig& noise);

struct Innovation {
  double residual = 0.0;    // z - h(x)
  double covariance = 0.0;  // H P H^T + R
  Observation observation;

  /// sqrt(residual^2 / covariance), the normalized innovation magnitude.
  double mahalanobis() const;
};

Innovation innovation(const StateEstimate& est, const Measurement& meas);

/// Sequential scalar EKF update. R is `meas.variance`.
StateEstimate update(const StateEstimate& est, const Measurement& meas);

/// Mahalanobis gate: accept iff the normalized innovation is <= threshold.
bool nis_gate(const StateEstimate& est, const Measurement& meas, double threshold);

/// (P + P^T) / 2
StateMatrix symmetrize(const StateMatrix& p);

}  // namespace railodo
