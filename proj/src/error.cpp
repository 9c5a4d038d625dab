#include "railodo/error.hpp"

#include "railodo/measurement.hpp"

namespace railodo {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Logic: return "logic error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

std::string_view sensor_name(SensorKind kind) {
  switch (kind) {
    case SensorKind::Radar1: return "radar1";
    case SensorKind::Radar2: return "radar2";
    case SensorKind::Encoder1: return "encoder1";
    case SensorKind::Encoder2: return "encoder2";
    case SensorKind::Gps: return "gps";
  }
  return "unknown";
}

std::optional<SensorKind> parse_sensor(std::string_view name) {
  for (SensorKind kind : kAllSensors) {
    if (sensor_name(kind) == name) return kind;
  }
  return std::nullopt;
}

}  // namespace railodo
