#include "railodo/state_filter.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "railodo/error.hpp"

namespace railodo {

namespace {

void require_finite(const StateEstimate& est, const char* where) {
  if (!est.mean.allFinite() || !est.covariance.allFinite()) {
    throw Error(ErrorKind::Numerical, fmt::format("{}: non-finite state", where));
  }
}

int calibration_index(SensorKind sensor) {
  return sensor == SensorKind::Encoder1 ? kCalibration1 : kCalibration2;
}

}  // namespace

double StateEstimate::velocity_std() const {
  return std::sqrt(std::max(0.0, covariance(kVelocity, kVelocity)));
}

StateMatrix NoiseConfig::default_process_noise() {
  StateVector diag;
  diag << 0.0, 0.003, 1e-4, 1e-12, 1e-12;
  return diag.asDiagonal();
}

StateEstimate initial_estimate(double velocity, double timestamp) {
  StateEstimate est;
  est.mean << 0.0, velocity, 0.0, 1.0, 1.0;
  StateVector diag;
  diag << 1.0, 25.0, 1.0, 0.01, 0.01;
  est.covariance = diag.asDiagonal();
  est.timestamp = timestamp;
  return est;
}

StateMatrix transition_matrix(double dt) {
  StateMatrix f = StateMatrix::Identity();
  f(kDistance, kVelocity) = dt;
  f(kDistance, kAcceleration) = 0.5 * dt * dt;
  f(kVelocity, kAcceleration) = dt;
  return f;
}

StateMatrix symmetrize(const StateMatrix& p) {
  return 0.5 * (p + p.transpose());
}

StateEstimate predict(const StateEstimate& est, double dt, const NoiseConfig& noise) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorKind::InvalidInput, fmt::format("predict: dt must be positive, got {}", dt));
  }
  require_finite(est, "predict");

  const StateMatrix f = transition_matrix(dt);
  StateEstimate out;
  out.mean = f * est.mean;
  out.covariance = symmetrize(f * est.covariance * f.transpose() + noise.process_noise);
  out.timestamp = est.timestamp + dt;
  require_finite(out, "predict");
  return out;
}

Observation observation_model(const StateVector& mean, SensorKind sensor) {
  Observation obs;
  const double velocity = mean(kVelocity);
  if (!is_encoder(sensor)) {
    obs.predicted = velocity;
    obs.jacobian(kVelocity) = 1.0;
    return obs;
  }

  const int ci = calibration_index(sensor);
  const double cal = mean(ci);
  if (!(std::abs(cal) >= kCalibrationFloor)) {
    throw Error(ErrorKind::Degenerate,
                fmt::format("{} calibration {} below floor {}", sensor_name(sensor), cal,
                            kCalibrationFloor));
  }
  // h(x) = v / cal
  obs.predicted = velocity / cal;
  obs.jacobian(kVelocity) = 1.0 / cal;
  obs.jacobian(ci) = -velocity / (cal * cal);
  return obs;
}

Measurement effective_measurement(const Measurement& meas, const NoiseConfig& noise) {
  Measurement out = meas;
  const double override_var = noise.measurement_variance[index_of(meas.sensor)];
  if (override_var > 0.0) out.variance = override_var;
  return out;
}

double Innovation::mahalanobis() const {
  return std::abs(residual) / std::sqrt(covariance);
}

Innovation innovation(const StateEstimate& est, const Measurement& meas) {
  if (!std::isfinite(meas.mean) || !std::isfinite(meas.variance)) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("non-finite {} measurement at t={}", sensor_name(meas.sensor),
                            meas.timestamp));
  }
  if (!(meas.variance > 0.0)) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("measurement variance must be positive, got {}", meas.variance));
  }
  require_finite(est, "update");

  Innovation inn;
  inn.observation = observation_model(est.mean, meas.sensor);
  const ObservationRow& h = inn.observation.jacobian;
  inn.residual = meas.mean - inn.observation.predicted;
  inn.covariance = (h * est.covariance * h.transpose())(0, 0) + meas.variance;
  if (!(inn.covariance > 0.0) || !std::isfinite(inn.covariance)) {
    throw Error(ErrorKind::Numerical,
                fmt::format("innovation covariance {} is not positive", inn.covariance));
  }
  return inn;
}

StateEstimate update(const StateEstimate& est, const Measurement& meas) {
  const Innovation inn = innovation(est, meas);
  const ObservationRow& h = inn.observation.jacobian;

  const StateVector gain = est.covariance * h.transpose() / inn.covariance;

  StateEstimate out;
  out.timestamp = est.timestamp;
  out.mean = est.mean + gain * inn.residual;
  out.covariance = symmetrize((StateMatrix::Identity() - gain * h) * est.covariance);
  require_finite(out, "update");
  return out;
}

bool nis_gate(const StateEstimate& est, const Measurement& meas, double threshold) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("gate threshold must be positive, got {}", threshold));
  }
  return innovation(est, meas).mahalanobis() <= threshold;
}

}  // namespace railodo
