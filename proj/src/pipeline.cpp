#include "railodo/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "railodo/consensus.hpp"
#include "railodo/error.hpp"

namespace railodo {

std::size_t PipelineResult::fused_count(SensorKind kind, double t_begin, double t_end) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const FusionRecord& r) {
    return r.sensor == kind && r.fused && r.timestamp >= t_begin && r.timestamp <= t_end;
  }));
}

std::vector<StateEstimate> PipelineResult::estimates() const {
  std::vector<StateEstimate> out;
  out.reserve(rows.size());
  for (const EstimateRow& r : rows) out.push_back(r.estimate);
  return out;
}

namespace {

class Pipeline {
 public:
  Pipeline(const RunConfig& config, double t0, double v0)
      : config_(config), aligner_(config.staleness_window), est_(initial_estimate(v0, t0)), t0_(t0) {}

  void consume(const Measurement& raw) {
    emit_ticks_before(raw.timestamp);
    advance_to(raw.timestamp);

    FusionRecord record{raw.timestamp, raw.sensor, false, 1.0};
    if (raw.sensor == SensorKind::Gps && !config_.fuse_gps) {
      result_.records.push_back(record);
      return;
    }

    const Measurement m = effective_measurement(raw, config_.noise);
    const AlignedSet set = aligner_.push(m);

    switch (config_.mode.kind) {
      case Preprocessing::None:
        record.fused = true;
        break;
      case Preprocessing::Nis:
        record.fused = nis_gate(est_, m, config_.mode.parameter);
        break;
      case Preprocessing::Sca:
        record.scale = consensus_scale(set, m.sensor);
        record.fused = true;
        break;
    }

    if (record.fused) {
      Measurement fused = m;
      fused.variance *= record.scale;
      est_ = update(est_, fused);
    }
    result_.records.push_back(record);
  }

  PipelineResult finish(double t_last) {
    emit_ticks_before(t_last, /*inclusive=*/true);
    return std::move(result_);
  }

 private:
  double tick_time(std::size_t k) const { return t0_ + static_cast<double>(k) / config_.output_rate; }

  void advance_to(double t) {
    const double dt = t - est_.timestamp;
    if (dt <= 0.0) return;
    NoiseConfig step_noise = config_.noise;
    step_noise.process_noise *= dt / config_.q_reference_period;
    est_ = predict(est_, dt, step_noise);
    est_.timestamp = t;
  }

  void emit_ticks_before(double t, bool inclusive = false) {
    while (true) {
      const double tick = tick_time(next_tick_);
      if (inclusive ? tick > t : tick >= t) break;
      advance_to(tick);
      result_.rows.push_back(EstimateRow{est_, scales_});
      ++next_tick_;
    }
  }

  double consensus_scale(const AlignedSet& set, SensorKind arriving) {
    std::vector<Measurement> inputs = set.members;
    if (config_.encoder_space == ConsensusSpace::Calibrated) {
      for (Measurement& m : inputs) {
        if (!is_encoder(m.sensor)) continue;
        const double cal = est_.mean(m.sensor == SensorKind::Encoder1 ? kCalibration1 : kCalibration2);
        m.mean *= cal;
        m.variance *= cal * cal;
      }
    }

    const ConsensusReport report = sca(inputs, config_.mode.parameter);
    ++result_.sca_runs;
    scales_.fill(1.0);
    double arriving_scale = 1.0;
    bool inflated = false;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (const auto col = scale_column(inputs[k].sensor)) scales_[*col] = report.scales[k];
      if (inputs[k].sensor == arriving) arriving_scale = report.scales[k];
      inflated = inflated || report.scales[k] > 1.0;
    }
    if (inflated) ++result_.sca_inflations;
    return arriving_scale;
  }

  const RunConfig& config_;
  Aligner aligner_;
  StateEstimate est_;
  double t0_;
  std::size_t next_tick_ = 0;
  ScaleColumns scales_{1.0, 1.0, 1.0, 1.0};
  PipelineResult result_;
};

double initial_velocity(std::span<const Measurement> ms, double window) {
  const double t0 = ms.front().timestamp;
  for (const Measurement& m : ms) {
    if (m.timestamp - t0 > window) break;
    if (is_radar(m.sensor)) return m.mean;
  }
  return 0.0;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, std::span<const Measurement> measurements) {
  config.validate();
  if (measurements.empty()) return {};
  for (std::size_t k = 1; k < measurements.size(); ++k) {
    if (measurements[k].timestamp < measurements[k - 1].timestamp) {
      throw Error(ErrorKind::InvalidInput,
                  fmt::format("run_pipeline: measurement {} is out of time order", k));
    }
  }

  const double t0 = measurements.front().timestamp;
  Pipeline pipeline(config, t0, initial_velocity(measurements, config.staleness_window));
  for (const Measurement& m : measurements) pipeline.consume(m);
  return pipeline.finish(measurements.back().timestamp);
}

}  // namespace railodo
