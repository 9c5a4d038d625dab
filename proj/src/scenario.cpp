#include "railodo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "railodo/error.hpp"

namespace railodo {

bool SlipEvent::affects(SensorKind kind) const {
  return std::find(sensors.begin(), sensors.end(), kind) != sensors.end();
}

double SlipEvent::offset_at(double t) const {
  const double u = (t - start) / duration;
  if (u < 0.0 || u > 1.0) return 0.0;
  if (onset > 0.0 && u < onset) return peak_offset * u / onset;
  if (decay > 0.0 && u > 1.0 - decay) return peak_offset * (1.0 - u) / decay;
  return peak_offset;
}

void SlipEvent::validate() const {
  if (!(duration > 0.0)) {
    throw Error(ErrorKind::Config, fmt::format("slip at t={}: duration must be positive", start));
  }
  if (onset < 0.0 || onset > 1.0 || decay < 0.0 || decay > 1.0 || onset + decay > 1.0) {
    throw Error(ErrorKind::Config,
                fmt::format("slip at t={}: ramp fractions must lie in [0,1] and sum to <= 1", start));
  }
  for (SensorKind kind : sensors) {
    if (!is_encoder(kind)) {
      throw Error(ErrorKind::Config,
                  fmt::format("slip at t={}: only encoders can slip, not {}", start, sensor_name(kind)));
    }
  }
}

bool SensorModel::in_dropout(double t) const {
  return std::any_of(dropouts.begin(), dropouts.end(),
                     [t](const auto& d) { return t >= d.first && t <= d.second; });
}

void SensorModel::validate() const {
  const auto name = sensor_name(kind);
  if (!(rate > 0.0)) throw Error(ErrorKind::Config, fmt::format("{}: rate must be positive", name));
  if (!(noise_std >= 0.0)) throw Error(ErrorKind::Config, fmt::format("{}: noise_std must be >= 0", name));
  if (!(calibration > 0.0)) throw Error(ErrorKind::Config, fmt::format("{}: calibration must be positive", name));
  if (!(reported_variance > 0.0)) {
    throw Error(ErrorKind::Config, fmt::format("{}: reported variance must be positive", name));
  }
}

void Scenario::validate() const {
  if (!(truth_rate > 0.0)) throw Error(ErrorKind::Config, "truth_rate must be positive");
  if (!(initial_velocity >= 0.0)) throw Error(ErrorKind::Config, "initial_velocity must be >= 0");
  for (const Segment& s : segments) {
    if (!(s.duration > 0.0) || !std::isfinite(s.acceleration)) {
      throw Error(ErrorKind::Config, fmt::format("bad segment ({}, {})", s.duration, s.acceleration));
    }
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    sensors[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (sensors[i].kind == sensors[j].kind) {
        throw Error(ErrorKind::Config, fmt::format("sensor {} listed twice", sensor_name(sensors[i].kind)));
      }
    }
  }
  for (const SlipEvent& slip : slips) slip.validate();
}

double Scenario::duration() const {
  double total = 0.0;
  for (const Segment& s : segments) total += s.duration;
  return total;
}

double GaussianSource::uniform() {
  // 53 random bits mapped to the open interval (0, 1).
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double GaussianSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t seed, SensorKind kind) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index_of(kind) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<TruthSample> generate_truth(std::span<const Segment> segments, double rate,
                                        double initial_velocity) {
  if (!(rate > 0.0)) throw Error(ErrorKind::InvalidInput, "generate_truth: rate must be positive");
  std::vector<TruthSample> out;
  if (segments.empty()) return out;

  const double dt = 1.0 / rate;
  TruthSample s;
  s.velocity = std::max(0.0, initial_velocity);
  s.acceleration = segments.front().acceleration;
  out.push_back(s);

  std::int64_t step = 0;
  for (const Segment& seg : segments) {
    const auto steps = static_cast<std::int64_t>(std::llround(seg.duration * rate));
    for (std::int64_t k = 0; k < steps; ++k) {
      double a = seg.acceleration;
      if (s.velocity + a * dt < 0.0) a = -s.velocity / dt;
      s.distance += s.velocity * dt + 0.5 * a * dt * dt;
      s.velocity = std::max(0.0, s.velocity + a * dt);
      s.acceleration = a;
      ++step;
      s.timestamp = static_cast<double>(step) / rate;
      out.push_back(s);
    }
  }
  return out;
}

TruthSample truth_at(std::span<const TruthSample> truth, double t) {
  if (truth.empty()) throw Error(ErrorKind::InvalidInput, "truth_at: empty truth");
  if (t <= truth.front().timestamp) return truth.front();
  if (t >= truth.back().timestamp) return truth.back();
  const auto hi = std::lower_bound(truth.begin(), truth.end(), t,
                                   [](const TruthSample& s, double v) { return s.timestamp < v; });
  const auto lo = hi - 1;
  const double w = (t - lo->timestamp) / (hi->timestamp - lo->timestamp);
  TruthSample out;
  out.timestamp = t;
  out.distance = lo->distance + w * (hi->distance - lo->distance);
  out.velocity = lo->velocity + w * (hi->velocity - lo->velocity);
  out.acceleration = hi->acceleration;
  return out;
}

std::vector<Measurement> synthesize(std::span<const TruthSample> truth, const SensorModel& sensor,
                                    std::span<const SlipEvent> slips, std::uint64_t seed) {
  sensor.validate();
  std::vector<Measurement> out;
  if (truth.empty()) return out;

  GaussianSource noise(seed);
  const double t0 = truth.front().timestamp;
  const double t_end = truth.back().timestamp;
  for (std::int64_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) / sensor.rate;
    if (t > t_end + 1e-9) break;
    // Draw on every tick so dropouts do not shift the rest of the stream.
    const double e = noise.normal();
    if (sensor.in_dropout(t)) continue;

    double wheel_speed = truth_at(truth, t).velocity;
    if (is_encoder(sensor.kind)) {
      for (const SlipEvent& slip : slips) {
        if (slip.affects(sensor.kind)) wheel_speed += slip.offset_at(t);
      }
      wheel_speed /= sensor.calibration;
    }
    out.push_back(Measurement{sensor.kind, wheel_speed + sensor.noise_std * e,
                              sensor.reported_variance, t});
  }
  return out;
}

SimulationResult simulate(const Scenario& scenario) {
  scenario.validate();
  SimulationResult result;
  result.truth = generate_truth(scenario.segments, scenario.truth_rate, scenario.initial_velocity);
  for (const SensorModel& sensor : scenario.sensors) {
    auto stream = synthesize(result.truth, sensor, scenario.slips, derive_seed(scenario.seed, sensor.kind));
    result.measurements.insert(result.measurements.end(), stream.begin(), stream.end());
  }
  // Same-time readings keep sensor-declaration order.
  std::stable_sort(result.measurements.begin(), result.measurements.end(),
                   [](const Measurement& a, const Measurement& b) { return a.timestamp < b.timestamp; });
  return result;
}

Metrics evaluate(std::span<const StateEstimate> estimates, std::span<const TruthSample> truth) {
  if (truth.empty() || estimates.empty()) {
    throw Error(ErrorKind::InvalidInput, "evaluate: empty estimates or truth");
  }
  const double t_lo = truth.front().timestamp;
  const double t_hi = truth.back().timestamp;

  Metrics m;
  double sq_sum = 0.0;
  double nees_sum = 0.0;
  std::size_t covered = 0;
  const StateEstimate* first = nullptr;
  const StateEstimate* last = nullptr;
  for (const StateEstimate& est : estimates) {
    if (est.timestamp < t_lo - 1e-9 || est.timestamp > t_hi + 1e-9) continue;
    if (first == nullptr) first = &est;
    last = &est;
    const double err = est.velocity() - truth_at(truth, est.timestamp).velocity;
    const double var = est.covariance(kVelocity, kVelocity);
    sq_sum += err * err;
    nees_sum += err * err / var;
    if (std::abs(err) <= std::sqrt(var)) ++covered;
    ++m.samples;
  }
  if (m.samples == 0) {
    throw Error(ErrorKind::InvalidInput, "evaluate: estimates and truth do not overlap in time");
  }
  const double n = static_cast<double>(m.samples);
  m.velocity_rmse = std::sqrt(sq_sum / n);
  m.mean_velocity_nees = nees_sum / n;
  m.sigma_coverage = static_cast<double>(covered) / n;
  const double travelled =
      truth_at(truth, last->timestamp).distance - truth_at(truth, first->timestamp).distance;
  m.distance_error = std::abs((last->distance() - first->distance()) - travelled);
  return m;
}

namespace scenarios {

namespace {

SensorModel sensor(SensorKind kind, double rate, double noise_std, double reported_std,
                   double calibration = 1.0) {
  SensorModel s;
  s.kind = kind;
  s.rate = rate;
  s.noise_std = noise_std;
  s.reported_variance = reported_std * reported_std;
  s.calibration = calibration;
  return s;
}

std::vector<Segment> accelerate_cruise_brake() {
  return {{10.0, 0.0}, {60.0, 0.5}, {60.0, 0.0}, {50.0, -0.6}, {10.0, 0.0}};
}

}  // namespace

Scenario nominal() {
  Scenario s;
  s.name = "nominal";
  s.segments = accelerate_cruise_brake();
  s.sensors = {
      sensor(SensorKind::Radar1, 10.0, 0.2, 0.2),
      sensor(SensorKind::Radar2, 10.0, 0.2, 0.2),
      sensor(SensorKind::Encoder1, 10.0, 0.2, 0.2, 1.0 / 1.03),
      sensor(SensorKind::Encoder2, 10.0, 0.2, 0.2),
      sensor(SensorKind::Gps, 1.0, 0.1, 0.1),
  };
  s.sensors.back().dropouts = {{40.0, 70.0}, {120.0, 150.0}};
  s.seed = 1;
  return s;
}

Scenario two_slip() {
  Scenario s = nominal();
  s.name = "two_slip";
  for (SensorModel& m : s.sensors) {
    if (m.kind != SensorKind::Gps) m.reported_variance = 0.5 * 0.5;
    if (m.kind != SensorKind::Gps) m.noise_std = 0.1;
  }
  s.slips = {
      {30.0, 12.0, {SensorKind::Encoder1}, 4.0, 0.4, 0.3},
      {30.0, 12.0, {SensorKind::Encoder2}, 2.0, 0.4, 0.3},
      {140.0, 12.0, {SensorKind::Encoder1}, -3.0, 0.4, 0.3},
      {140.0, 12.0, {SensorKind::Encoder2}, -2.9, 0.4, 0.3},
  };
  return s;
}

Scenario encoders_only() {
  Scenario s = two_slip();
  s.name = "encoders_only";
  s.sensors.pop_back();  // no GPS
  for (SensorModel& m : s.sensors) {
    if (is_radar(m.kind)) m.dropouts = {{100.0, 1e9}};
  }
  s.slips = {{140.0, 15.0, {SensorKind::Encoder1}, -3.0, 0.4, 0.3}};
  s.seed = 3;
  return s;
}

Scenario calibration() {
  Scenario s;
  s.name = "calibration";
  s.initial_velocity = 60.0;
  s.segments = {{150.0, 0.0}};
  s.sensors = {
      sensor(SensorKind::Radar1, 10.0, 0.3, 0.3),
      sensor(SensorKind::Radar2, 10.0, 0.3, 0.3),
      sensor(SensorKind::Encoder1, 10.0, 0.3, 0.3, 0.95),
      sensor(SensorKind::Encoder2, 10.0, 0.3, 0.3),
  };
  s.seed = 2;
  return s;
}

std::optional<Scenario> by_name(const std::string& name) {
  if (name == "nominal") return nominal();
  if (name == "two_slip") return two_slip();
  if (name == "encoders_only") return encoders_only();
  if (name == "calibration") return calibration();
  return std::nullopt;
}

std::vector<std::string> names() { return {"nominal", "two_slip", "encoders_only", "calibration"}; }

}  // namespace scenarios

}  // namespace railodo
