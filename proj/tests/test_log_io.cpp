#include "railodo/log_io.hpp"

#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "railodo/error.hpp"

using namespace railodo;

namespace {

std::vector<Measurement> parse(const std::string& text, bool allow_unsorted = false) {
  std::istringstream in(text);
  return parse_measurements(in, allow_unsorted);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Logic;
}

std::vector<Measurement> ticks(SensorKind kind, double rate, double t0, double t1) {
  std::vector<Measurement> out;
  for (int k = 0; t0 + k / rate <= t1 + 1e-9; ++k) out.push_back({kind, 10.0, 0.1, t0 + k / rate});
  return out;
}

std::vector<Measurement> merge(std::vector<Measurement> a, const std::vector<Measurement>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::stable_sort(a.begin(), a.end(), [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
  return a;
}

}  // namespace

TEST(MeasurementCsv, HeaderOnly) {
  EXPECT_TRUE(parse("time_s,sensor,velocity_mps,variance_mps2\n").empty());
}

TEST(MeasurementCsv, SingleRow) {
  const auto out = parse("time_s,sensor,velocity_mps,variance_mps2\n1.500,encoder1,33.25,0.04\n");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (Measurement{SensorKind::Encoder1, 33.25, 0.04, 1.5}));
}

TEST(MeasurementCsv, ParseErrors) {
  const std::string header = "time_s,sensor,velocity_mps,variance_mps2\n";
  EXPECT_EQ(kind_of([&] { parse(header + "1.0,lidar,3,0.1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { parse(header + "1.0,radar1,fast,0.1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { parse(header + "1.0,radar1,3\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { parse("t,s,v,r\n"); }), ErrorKind::Parse);
  try {
    parse(header + "1.0,radar1,3,0.1\n2.0,radar1,x,0.1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(MeasurementCsv, Unsorted) {
  const std::string text =
      "time_s,sensor,velocity_mps,variance_mps2\n"
      "2.0,radar1,1,0.1\n1.0,radar2,2,0.1\n2.0,encoder1,3,0.1\n1.0,gps,4,0.1\n";
  EXPECT_EQ(kind_of([&] { parse(text); }), ErrorKind::Parse);
  const auto out = parse(text, true);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].sensor, SensorKind::Radar2);
  EXPECT_EQ(out[1].sensor, SensorKind::Gps);
  EXPECT_EQ(out[2].sensor, SensorKind::Radar1);
  EXPECT_EQ(out[3].sensor, SensorKind::Encoder1);
}

TEST(MeasurementCsv, RoundTripTwelveDigits) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Measurement> in;
  double t = 0.0;
  for (int k = 0; k < 500; ++k) {
    t += u(rng);
    in.push_back({kAllSensors[k % kSensorCount], 200.0 * u(rng) - 20.0, 1e-3 + u(rng), t});
  }
  std::stringstream ss;
  format_measurements(ss, in);
  const auto out = parse_measurements(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t k = 0; k < in.size(); ++k) {
    EXPECT_EQ(out[k].sensor, in[k].sensor);
    EXPECT_NEAR(out[k].mean, in[k].mean, 1e-11 * std::abs(in[k].mean));
    EXPECT_NEAR(out[k].variance, in[k].variance, 1e-11 * in[k].variance);
    EXPECT_NEAR(out[k].timestamp, in[k].timestamp, 1e-11 * in[k].timestamp);
  }
  // Writing what was read reproduces the text.
  std::stringstream again;
  format_measurements(again, out);
  EXPECT_EQ(again.str(), ss.str());
}

TEST(EstimateCsv, HeaderOnlyAndRoundTrip) {
  std::stringstream empty;
  format_estimates(empty, {});
  EXPECT_EQ(empty.str(), std::string(kEstimateHeader) + "\n");

  EstimateRow row;
  row.estimate = initial_estimate(12.5, 3.25);
  row.estimate.mean << 100.125, 12.5, -0.3, 0.97, 1.01;
  row.estimate.covariance(kVelocity, kVelocity) = 0.0625;
  row.scales = {1.0, 2.5, 17.25, 1.0};
  std::stringstream ss;
  const std::vector<EstimateRow> rows{row};
  format_estimates(ss, rows);
  const auto back = parse_estimates(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].estimate.mean, row.estimate.mean);
  EXPECT_DOUBLE_EQ(back[0].estimate.velocity_std(), 0.25);
  EXPECT_EQ(back[0].scales, row.scales);
  EXPECT_EQ(back[0].estimate.timestamp, 3.25);
}

TEST(EstimateCsv, ScaleColumns) {
  EXPECT_EQ(scale_column(SensorKind::Radar1), 0u);
  EXPECT_EQ(scale_column(SensorKind::Encoder2), 3u);
  EXPECT_FALSE(scale_column(SensorKind::Gps).has_value());
}

TEST(Align, SingleSensor) {
  const auto sets = align(ticks(SensorKind::Radar1, 10, 0, 5), 1.0);
  ASSERT_EQ(sets.size(), 51u);
  for (const auto& s : sets) EXPECT_EQ(s.members.size(), 1u);
}

TEST(Align, TwoSensorsFillAfterFirstTick) {
  const auto stream = merge(ticks(SensorKind::Radar1, 10, 0.0, 10), ticks(SensorKind::Encoder1, 10, 0.03, 10));
  const auto sets = align(stream, 0.5);
  for (const auto& s : sets) {
    if (s.timestamp > 0.1) {
      EXPECT_EQ(s.members.size(), 2u) << s.timestamp;
    }
  }
}

TEST(Align, SilentGpsDropsOut) {
  const auto radar = ticks(SensorKind::Radar1, 10, 0.0, 100);
  const auto gps = merge(ticks(SensorKind::Gps, 1, 0, 20), ticks(SensorKind::Gps, 1, 80, 100));
  const auto sets = align(merge(radar, gps), 2.0);
  for (const auto& s : sets) {
    if (s.timestamp > 22.0 && s.timestamp < 80.0) {
      EXPECT_EQ(s.find(SensorKind::Gps), nullptr) << s.timestamp;
    }
    if (s.timestamp > 80.0) {
      EXPECT_NE(s.find(SensorKind::Gps), nullptr);
    }
  }
}

TEST(Align, CausalFreshAndUnique) {
  const auto sim = simulate(scenarios::nominal());
  const double window = 0.35;
  for (const auto& s : align(sim.measurements, window)) {
    std::array<int, kSensorCount> seen{};
    for (const auto& m : s.members) {
      EXPECT_LE(m.timestamp, s.timestamp);
      EXPECT_LE(s.timestamp - m.timestamp, window);
      EXPECT_EQ(++seen[index_of(m.sensor)], 1);
    }
  }
}

TEST(Align, StaleSensorEqualsDeletedRows) {
  // Encoder 2 stops reporting at t = 50; once it goes stale the aligned sets
  // must match a stream in which its last readings never existed.
  auto sim = simulate(scenarios::two_slip());
  std::vector<Measurement> cut, deleted;
  for (const auto& m : sim.measurements) {
    const bool silent = m.sensor == SensorKind::Encoder2 && m.timestamp > 50.0;
    if (!silent) cut.push_back(m);
    if (!(m.sensor == SensorKind::Encoder2 && m.timestamp > 49.0)) deleted.push_back(m);
  }
  const double window = 1.0;
  const auto a = align(cut, window);
  const auto b = align(deleted, window);
  std::size_t ia = 0, ib = 0, compared = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia].timestamp < 51.5) {
      ++ia;
      continue;
    }
    if (b[ib].timestamp < 51.5) {
      ++ib;
      continue;
    }
    EXPECT_EQ(a[ia].members, b[ib].members);
    ++ia;
    ++ib;
    ++compared;
  }
  EXPECT_GT(compared, 1000u);
}

TEST(Align, WindowMustBePositive) {
  EXPECT_THROW(Aligner(0.0), Error);
  EXPECT_THROW(Aligner(-1.0), Error);
}

TEST(RunConfigFile, ParsesKeysAndRejectsUnknown) {
  std::istringstream in(
      "# comment\n"
      "mode = nis:3\n"
      "staleness_window = 0.5  # trailing\n"
      "fuse_gps = true\n"
      "q_cal1 = 0\n"
      "r_encoder2 = 0.04\n"
      "encoder_consensus_space = raw\n");
  const RunConfig c = parse_run_config(in);
  EXPECT_EQ(c.mode.kind, Preprocessing::Nis);
  EXPECT_EQ(c.mode.parameter, 3.0);
  EXPECT_EQ(c.staleness_window, 0.5);
  EXPECT_TRUE(c.fuse_gps);
  EXPECT_EQ(c.noise.process_noise(kCalibration1, kCalibration1), 0.0);
  EXPECT_EQ(c.noise.measurement_variance[index_of(SensorKind::Encoder2)], 0.04);
  EXPECT_EQ(c.encoder_space, ConsensusSpace::Raw);

  std::istringstream unknown("q_velocityy = 1\n");
  EXPECT_EQ(kind_of([&] { parse_run_config(unknown); }), ErrorKind::Config);
  std::istringstream bad_window("staleness_window = 0\n");
  EXPECT_EQ(kind_of([&] { parse_run_config(bad_window); }), ErrorKind::Config);
}

TEST(RunConfigFile, FormatRoundTrip) {
  RunConfig c;
  c.mode = PreprocessMode::parse("sca:0.8");
  c.output_rate = 5.0;
  std::istringstream in(format_run_config(c));
  const RunConfig back = parse_run_config(in);
  EXPECT_EQ(back.mode.label(), "sca:0.8");
  EXPECT_EQ(back.output_rate, 5.0);
  EXPECT_EQ(back.noise.process_noise, c.noise.process_noise);
}

TEST(RunConfigFile, ShippedDefaultsMatchBuiltin) {
  const RunConfig c = read_run_config(std::filesystem::path(RAILODO_CONFIG_DIR) / "default.cfg");
  EXPECT_EQ(format_run_config(c), format_run_config(RunConfig{}));
}

TEST(PreprocessModeText, ParseAndValidate) {
  EXPECT_EQ(PreprocessMode::parse("none").kind, Preprocessing::None);
  EXPECT_EQ(PreprocessMode::parse("nis:3").parameter, 3.0);
  EXPECT_EQ(PreprocessMode::parse("sca:0").parameter, 0.0);
  for (const char* text : {"sca:1.5", "sca:1", "sca:-0.1", "nis:0", "nis", "gate:3", "sca:abc"}) {
    EXPECT_EQ(kind_of([text] { PreprocessMode::parse(text); }), ErrorKind::Config) << text;
  }
}

TEST(ScenarioFile, BuiltinsRoundTrip) {
  for (const auto& name : scenarios::names()) {
    const Scenario s = *scenarios::by_name(name);
    std::istringstream in(format_scenario(s));
    const Scenario back = parse_scenario(in);
    EXPECT_EQ(format_scenario(back), format_scenario(s)) << name;
    EXPECT_EQ(simulate(back).measurements, simulate(s).measurements) << name;
  }
}

TEST(ScenarioFile, ShippedFilesMatchBuiltins) {
  const std::filesystem::path dir = RAILODO_SCENARIO_DIR;
  for (const auto& name : scenarios::names()) {
    const Scenario s = read_scenario(dir / (name + ".cfg"));
    EXPECT_EQ(format_scenario(s), format_scenario(*scenarios::by_name(name))) << name;
  }
}

TEST(ScenarioFile, Errors) {
  std::istringstream unknown("colour = red\n");
  EXPECT_EQ(kind_of([&] { parse_scenario(unknown); }), ErrorKind::Config);
  std::istringstream bad_sensor("segment = 10 0\nsensor = sonar rate=10\n");
  EXPECT_THROW(parse_scenario(bad_sensor), Error);
  EXPECT_EQ(kind_of([] { read_scenario("/nonexistent/dir/x.cfg"); }), ErrorKind::Config);
}
