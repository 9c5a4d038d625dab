#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace railodo {

enum class SensorKind { Radar1, Radar2, Encoder1, Encoder2, Gps };

inline constexpr std::array<SensorKind, 5> kAllSensors = {
    SensorKind::Radar1, SensorKind::Radar2, SensorKind::Encoder1,
    SensorKind::Encoder2, SensorKind::Gps};

inline constexpr std::size_t kSensorCount = kAllSensors.size();

constexpr std::size_t index_of(SensorKind kind) {
  return static_cast<std::size_t>(kind);
}

constexpr bool is_encoder(SensorKind kind) {
  return kind == SensorKind::Encoder1 || kind == SensorKind::Encoder2;
}

constexpr bool is_radar(SensorKind kind) {
  return kind == SensorKind::Radar1 || kind == SensorKind::Radar2;
}

/// Lower-case name used in every file format ("radar1", "encoder2", "gps").
std::string_view sensor_name(SensorKind kind);
std::optional<SensorKind> parse_sensor(std::string_view name);

/// One scalar velocity reading.
struct Measurement {
  SensorKind sensor = SensorKind::Radar1;
  double mean = 0.0;      // m/s
  double variance = 1.0;  // (m/s)^2
  double timestamp = 0.0; // s

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

}  // namespace railodo
