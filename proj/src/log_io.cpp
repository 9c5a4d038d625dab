#include "railodo/log_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "railodo/error.hpp"

namespace railodo {

namespace {

constexpr std::size_t kMaxReportedLines = 20;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string fmt12(double v) { return fmt::format("{:.12g}", v); }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open {}", path.string()));
  return in;
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  writer(out);
  out.flush();
  if (!out) throw Error(ErrorKind::Io, fmt::format("write to {} failed", path.string()));
}

class ProblemList {
 public:
  void add(std::size_t line, std::string message) {
    ++count_;
    if (lines_.size() < kMaxReportedLines) lines_.push_back(fmt::format("line {}: {}", line, message));
  }

  void throw_if_any(std::string_view what) const {
    if (count_ == 0) return;
    std::string msg = fmt::format("{}: {} malformed line(s)", what, count_);
    for (const auto& l : lines_) msg += "\n  " + l;
    if (count_ > lines_.size()) msg += fmt::format("\n  ... and {} more", count_ - lines_.size());
    throw Error(ErrorKind::Parse, msg);
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> lines_;
};

// Yields (line number, content) for every data line after a header that must
// match exactly. Blank lines are skipped.
template <typename RowFn>
void for_each_csv_row(std::istream& in, std::string_view header, std::string_view what, RowFn&& fn) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::Parse, fmt::format("{}: missing header", what));
  }
  if (trim(line) != header) {
    throw Error(ErrorKind::Parse,
                fmt::format("{}: line 1: expected header '{}', got '{}'", what, header, trim(line)));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    fn(line_no, content);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Measurement CSV

std::vector<Measurement> parse_measurements(std::istream& in, bool allow_unsorted) {
  std::vector<Measurement> out;
  std::vector<std::size_t> line_of;
  ProblemList problems;

  for_each_csv_row(in, kMeasurementHeader, "measurement CSV", [&](std::size_t line_no, std::string_view row) {
    const auto f = split(row, ',');
    if (f.size() != 4) {
      problems.add(line_no, fmt::format("expected 4 fields, got {}", f.size()));
      return;
    }
    const auto t = to_double(f[0]);
    const auto sensor = parse_sensor(trim(f[1]));
    const auto mean = to_double(f[2]);
    const auto var = to_double(f[3]);
    if (!t) return problems.add(line_no, fmt::format("non-numeric time '{}'", f[0]));
    if (!sensor) return problems.add(line_no, fmt::format("unknown sensor '{}'", f[1]));
    if (!mean) return problems.add(line_no, fmt::format("non-numeric velocity '{}'", f[2]));
    if (!var) return problems.add(line_no, fmt::format("non-numeric variance '{}'", f[3]));
    if (!(*var > 0.0)) return problems.add(line_no, fmt::format("variance must be positive, got {}", *var));
    out.push_back(Measurement{*sensor, *mean, *var, *t});
    line_of.push_back(line_no);
  });

  if (!allow_unsorted) {
    for (std::size_t k = 1; k < out.size(); ++k) {
      if (out[k].timestamp < out[k - 1].timestamp) {
        problems.add(line_of[k], fmt::format("timestamp {} earlier than previous row ({})", out[k].timestamp,
                                             out[k - 1].timestamp));
      }
    }
  }
  problems.throw_if_any("measurement CSV");

  std::stable_sort(out.begin(), out.end(),
                   [](const Measurement& a, const Measurement& b) { return a.timestamp < b.timestamp; });
  return out;
}

std::vector<Measurement> read_measurements(const std::filesystem::path& path, bool allow_unsorted) {
  auto in = open_input(path);
  return parse_measurements(in, allow_unsorted);
}

void format_measurements(std::ostream& out, std::span<const Measurement> measurements) {
  out << kMeasurementHeader << '\n';
  for (const Measurement& m : measurements) {
    out << fmt12(m.timestamp) << ',' << sensor_name(m.sensor) << ',' << fmt12(m.mean) << ','
        << fmt12(m.variance) << '\n';
  }
}

void write_measurements(const std::filesystem::path& path, std::span<const Measurement> measurements) {
  write_file(path, [&](std::ostream& out) { format_measurements(out, measurements); });
}

// ---------------------------------------------------------------------------
// Truth CSV

std::vector<TruthSample> parse_truth(std::istream& in) {
  std::vector<TruthSample> out;
  ProblemList problems;
  for_each_csv_row(in, kTruthHeader, "truth CSV", [&](std::size_t line_no, std::string_view row) {
    const auto f = split(row, ',');
    if (f.size() != 4) return problems.add(line_no, fmt::format("expected 4 fields, got {}", f.size()));
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto d = to_double(f[k]);
      if (!d) return problems.add(line_no, fmt::format("non-numeric field '{}'", f[k]));
      v[k] = *d;
    }
    out.push_back(TruthSample{v[0], v[1], v[2], v[3]});
  });
  problems.throw_if_any("truth CSV");
  return out;
}

std::vector<TruthSample> read_truth(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_truth(in);
}

void write_truth(const std::filesystem::path& path, std::span<const TruthSample> truth) {
  write_file(path, [&](std::ostream& out) {
    out << kTruthHeader << '\n';
    for (const TruthSample& s : truth) {
      out << fmt12(s.timestamp) << ',' << fmt12(s.distance) << ',' << fmt12(s.velocity) << ','
          << fmt12(s.acceleration) << '\n';
    }
  });
}

// ---------------------------------------------------------------------------
// Estimate CSV

std::optional<std::size_t> scale_column(SensorKind kind) {
  if (kind == SensorKind::Gps) return std::nullopt;
  return index_of(kind);
}

void format_estimates(std::ostream& out, std::span<const EstimateRow> rows) {
  out << kEstimateHeader << '\n';
  for (const EstimateRow& row : rows) {
    const StateEstimate& e = row.estimate;
    out << fmt12(e.timestamp) << ',' << fmt12(e.distance()) << ',' << fmt12(e.velocity()) << ','
        << fmt12(e.acceleration()) << ',' << fmt12(e.calibration1()) << ',' << fmt12(e.calibration2())
        << ',' << fmt12(e.velocity_std());
    for (double s : row.scales) out << ',' << fmt12(s);
    out << '\n';
  }
}

void write_estimates(const std::filesystem::path& path, std::span<const EstimateRow> rows) {
  write_file(path, [&](std::ostream& out) { format_estimates(out, rows); });
}

std::vector<EstimateRow> parse_estimates(std::istream& in) {
  std::vector<EstimateRow> out;
  ProblemList problems;
  for_each_csv_row(in, kEstimateHeader, "estimate CSV", [&](std::size_t line_no, std::string_view row) {
    const auto f = split(row, ',');
    if (f.size() != 11) return problems.add(line_no, fmt::format("expected 11 fields, got {}", f.size()));
    std::array<double, 11> v{};
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto d = to_double(f[k]);
      if (!d) return problems.add(line_no, fmt::format("non-numeric field '{}'", f[k]));
      v[k] = *d;
    }
    EstimateRow r;
    r.estimate.timestamp = v[0];
    r.estimate.mean << v[1], v[2], v[3], v[4], v[5];
    r.estimate.covariance = StateMatrix::Zero();
    r.estimate.covariance(kVelocity, kVelocity) = v[6] * v[6];
    r.scales = {v[7], v[8], v[9], v[10]};
    out.push_back(r);
  });
  problems.throw_if_any("estimate CSV");
  return out;
}

std::vector<EstimateRow> read_estimates(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_estimates(in);
}

// ---------------------------------------------------------------------------
// Alignment

const Measurement* AlignedSet::find(SensorKind kind) const {
  for (const Measurement& m : members) {
    if (m.sensor == kind) return &m;
  }
  return nullptr;
}

Aligner::Aligner(double window) : window_(window) {
  if (!(window > 0.0)) {
    throw Error(ErrorKind::InvalidInput, fmt::format("staleness window must be positive, got {}", window));
  }
}

AlignedSet Aligner::push(const Measurement& m) {
  latest_[index_of(m.sensor)] = m;
  AlignedSet set;
  set.timestamp = m.timestamp;
  for (const auto& last : latest_) {
    if (last && m.timestamp - last->timestamp <= window_) set.members.push_back(*last);
  }
  return set;
}

std::vector<AlignedSet> align(std::span<const Measurement> stream, double window) {
  Aligner aligner(window);
  std::vector<AlignedSet> out;
  out.reserve(stream.size());
  for (const Measurement& m : stream) out.push_back(aligner.push(m));
  return out;
}

// ---------------------------------------------------------------------------
// Key/value files

namespace {

struct Entry {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

std::vector<Entry> parse_entries(std::istream& in, std::string_view what) {
  std::vector<Entry> entries;
  ProblemList problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view content = line;
    if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    content = trim(content);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) {
      problems.add(line_no, fmt::format("expected 'key = value', got '{}'", content));
      continue;
    }
    const auto key = trim(content.substr(0, eq));
    if (key.empty()) {
      problems.add(line_no, "empty key");
      continue;
    }
    entries.push_back(Entry{line_no, std::string(key), std::string(trim(content.substr(eq + 1)))});
  }
  problems.throw_if_any(what);
  return entries;
}

[[noreturn]] void bad_value(ErrorKind kind, const Entry& e, std::string_view expected) {
  throw Error(kind, fmt::format("line {}: {} = '{}': expected {}", e.line, e.key, e.value, expected));
}

double number(ErrorKind kind, const Entry& e, std::string_view text) {
  const auto v = to_double(text);
  if (!v) bad_value(kind, e, "a number");
  return *v;
}

bool boolean(ErrorKind kind, const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  bad_value(kind, e, "true or false");
}

}  // namespace

PreprocessMode PreprocessMode::parse(std::string_view text) {
  text = trim(text);
  PreprocessMode mode;
  if (text == "none") return mode;
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  if (colon == std::string_view::npos || (head != "nis" && head != "sca")) {
    throw Error(ErrorKind::Config, fmt::format("mode '{}': expected none, nis:<threshold> or sca:<p>", text));
  }
  const auto value = to_double(text.substr(colon + 1));
  if (!value) throw Error(ErrorKind::Config, fmt::format("mode '{}': parameter is not a number", text));
  mode.kind = head == "nis" ? Preprocessing::Nis : Preprocessing::Sca;
  mode.parameter = *value;
  mode.validate();
  return mode;
}

std::string PreprocessMode::label() const {
  switch (kind) {
    case Preprocessing::None: return "none";
    case Preprocessing::Nis: return fmt::format("nis:{}", parameter);
    case Preprocessing::Sca: return fmt::format("sca:{}", parameter);
  }
  return "none";
}

void PreprocessMode::validate() const {
  if (kind == Preprocessing::Nis && !(parameter > 0.0)) {
    throw Error(ErrorKind::Config, fmt::format("nis threshold must be positive, got {}", parameter));
  }
  if (kind == Preprocessing::Sca && !(parameter >= 0.0 && parameter < 1.0)) {
    throw Error(ErrorKind::Config, fmt::format("consensus probability must be in [0, 1), got {}", parameter));
  }
}

void RunConfig::validate() const {
  mode.validate();
  if (!(staleness_window > 0.0)) throw Error(ErrorKind::Config, "staleness_window must be positive");
  if (!(output_rate > 0.0)) throw Error(ErrorKind::Config, "output_rate must be positive");
  if (!(q_reference_period > 0.0)) throw Error(ErrorKind::Config, "q_reference_period must be positive");
  for (int k = 0; k < kStateDim; ++k) {
    if (!(noise.process_noise(k, k) >= 0.0)) {
      throw Error(ErrorKind::Config, "process noise diagonal entries must be >= 0");
    }
  }
}

namespace {

constexpr std::array<std::string_view, kStateDim> kProcessNoiseKeys = {
    "q_distance", "q_velocity", "q_acceleration", "q_cal1", "q_cal2"};

}  // namespace

RunConfig parse_run_config(std::istream& in) {
  RunConfig config;
  for (const Entry& e : parse_entries(in, "run config")) {
    constexpr auto kind = ErrorKind::Config;
    if (e.key == "mode") {
      config.mode = PreprocessMode::parse(e.value);
    } else if (e.key == "staleness_window") {
      config.staleness_window = number(kind, e, e.value);
    } else if (e.key == "encoder_consensus_space") {
      if (e.value == "raw") config.encoder_space = ConsensusSpace::Raw;
      else if (e.value == "calibrated") config.encoder_space = ConsensusSpace::Calibrated;
      else bad_value(kind, e, "raw or calibrated");
    } else if (e.key == "fuse_gps") {
      config.fuse_gps = boolean(kind, e);
    } else if (e.key == "output_rate") {
      config.output_rate = number(kind, e, e.value);
    } else if (e.key == "q_reference_period") {
      config.q_reference_period = number(kind, e, e.value);
    } else if (const auto q = std::find(kProcessNoiseKeys.begin(), kProcessNoiseKeys.end(), e.key);
               q != kProcessNoiseKeys.end()) {
      const auto k = static_cast<int>(q - kProcessNoiseKeys.begin());
      config.noise.process_noise(k, k) = number(kind, e, e.value);
    } else if (e.key.starts_with("r_") && parse_sensor(std::string_view(e.key).substr(2))) {
      const double v = number(kind, e, e.value);
      if (!(v > 0.0)) bad_value(kind, e, "a positive variance");
      config.noise.measurement_variance[index_of(*parse_sensor(std::string_view(e.key).substr(2)))] = v;
    } else {
      throw Error(kind, fmt::format("line {}: unknown key '{}'", e.line, e.key));
    }
  }
  config.validate();
  return config;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open config {}", path.string()));
  return parse_run_config(in);
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  out += fmt::format("mode = {}\n", config.mode.label());
  out += fmt::format("staleness_window = {}\n", config.staleness_window);
  out += fmt::format("encoder_consensus_space = {}\n",
                     config.encoder_space == ConsensusSpace::Raw ? "raw" : "calibrated");
  out += fmt::format("fuse_gps = {}\n", config.fuse_gps);
  out += fmt::format("output_rate = {}\n", config.output_rate);
  out += fmt::format("q_reference_period = {}\n", config.q_reference_period);
  for (int k = 0; k < kStateDim; ++k) {
    out += fmt::format("{} = {}\n", kProcessNoiseKeys[static_cast<std::size_t>(k)],
                       config.noise.process_noise(k, k));
  }
  for (SensorKind kind : kAllSensors) {
    const double v = config.noise.measurement_variance[index_of(kind)];
    if (v > 0.0) out += fmt::format("r_{} = {}\n", sensor_name(kind), v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario description

namespace {

constexpr auto kScn = ErrorKind::Config;

// "name=value" fields following the leading positional tokens.
std::map<std::string, std::vector<std::string>, std::less<>> named_fields(
    const Entry& e, std::span<const std::string_view> tokens) {
  std::map<std::string, std::vector<std::string>, std::less<>> fields;
  for (std::string_view tok : tokens) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) bad_value(kScn, e, fmt::format("name=value fields, got '{}'", tok));
    fields[std::string(tok.substr(0, eq))].emplace_back(tok.substr(eq + 1));
  }
  return fields;
}

SensorKind sensor_or_throw(const Entry& e, std::string_view name) {
  const auto kind = parse_sensor(name);
  if (!kind) bad_value(kScn, e, fmt::format("a sensor name, got '{}'", name));
  return *kind;
}

SensorModel parse_sensor_entry(const Entry& e) {
  const auto tokens = split_ws(e.value);
  if (tokens.empty()) bad_value(kScn, e, "a sensor name");
  SensorModel s;
  s.kind = sensor_or_throw(e, tokens[0]);
  if (s.kind == SensorKind::Gps) s.rate = 1.0;
  for (const auto& [name, values] : named_fields(e, std::span(tokens).subspan(1))) {
    for (const std::string& v : values) {
      if (name == "rate") s.rate = number(kScn, e, v);
      else if (name == "noise_std") s.noise_std = number(kScn, e, v);
      else if (name == "calibration") s.calibration = number(kScn, e, v);
      else if (name == "variance") s.reported_variance = number(kScn, e, v);
      else if (name == "dropout") {
        const auto colon = v.find(':');
        if (colon == std::string::npos) bad_value(kScn, e, "dropout=<start>:<end>");
        s.dropouts.emplace_back(number(kScn, e, std::string_view(v).substr(0, colon)),
                                number(kScn, e, std::string_view(v).substr(colon + 1)));
      } else {
        bad_value(kScn, e, fmt::format("rate, noise_std, calibration, variance or dropout, got '{}'", name));
      }
    }
  }
  return s;
}

SlipEvent parse_slip_entry(const Entry& e) {
  const auto tokens = split_ws(e.value);
  SlipEvent slip;
  bool have_sensors = false;
  for (const auto& [name, values] : named_fields(e, tokens)) {
    if (values.size() != 1) bad_value(kScn, e, fmt::format("'{}' given once", name));
    const std::string& v = values.front();
    if (name == "start") slip.start = number(kScn, e, v);
    else if (name == "duration") slip.duration = number(kScn, e, v);
    else if (name == "offset") slip.peak_offset = number(kScn, e, v);
    else if (name == "onset") slip.onset = number(kScn, e, v);
    else if (name == "decay") slip.decay = number(kScn, e, v);
    else if (name == "sensors") {
      for (std::string_view part : split(v, ',')) slip.sensors.push_back(sensor_or_throw(e, part));
      have_sensors = true;
    } else {
      bad_value(kScn, e, fmt::format("start, duration, sensors, offset, onset or decay, got '{}'", name));
    }
  }
  if (!have_sensors) bad_value(kScn, e, "a sensors= field");
  return slip;
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
  Scenario s;
  s.name = "custom";
  for (const Entry& e : parse_entries(in, "scenario")) {
    if (e.key == "name") {
      s.name = e.value;
    } else if (e.key == "seed") {
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), seed);
      if (ec != std::errc{} || ptr != e.value.data() + e.value.size()) bad_value(kScn, e, "an unsigned integer");
      s.seed = seed;
    } else if (e.key == "truth_rate") {
      s.truth_rate = number(kScn, e, e.value);
    } else if (e.key == "initial_velocity") {
      s.initial_velocity = number(kScn, e, e.value);
    } else if (e.key == "segment") {
      const auto tokens = split_ws(e.value);
      if (tokens.size() != 2) bad_value(kScn, e, "<duration_s> <accel_mps2>");
      s.segments.push_back(Segment{number(kScn, e, tokens[0]), number(kScn, e, tokens[1])});
    } else if (e.key == "sensor") {
      s.sensors.push_back(parse_sensor_entry(e));
    } else if (e.key == "slip") {
      s.slips.push_back(parse_slip_entry(e));
    } else {
      throw Error(kScn, fmt::format("line {}: unknown key '{}'", e.line, e.key));
    }
  }
  s.validate();
  return s;
}

Scenario read_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open scenario {}", path.string()));
  return parse_scenario(in);
}

std::string format_scenario(const Scenario& s) {
  std::string out;
  out += fmt::format("name = {}\nseed = {}\ntruth_rate = {}\ninitial_velocity = {}\n", s.name, s.seed,
                     s.truth_rate, s.initial_velocity);
  for (const Segment& seg : s.segments) out += fmt::format("segment = {} {}\n", seg.duration, seg.acceleration);
  for (const SensorModel& m : s.sensors) {
    out += fmt::format("sensor = {} rate={} noise_std={} calibration={} variance={}", sensor_name(m.kind), m.rate,
                       m.noise_std, m.calibration, m.reported_variance);
    for (const auto& [a, b] : m.dropouts) out += fmt::format(" dropout={}:{}", a, b);
    out += '\n';
  }
  for (const SlipEvent& slip : s.slips) {
    std::string sensors;
    for (SensorKind k : slip.sensors) {
      if (!sensors.empty()) sensors += ',';
      sensors += sensor_name(k);
    }
    out += fmt::format("slip = start={} duration={} sensors={} offset={} onset={} decay={}\n", slip.start,
                       slip.duration, sensors, slip.peak_offset, slip.onset, slip.decay);
  }
  return out;
}

}  // namespace railodo
