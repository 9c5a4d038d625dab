#include "railodo/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "railodo/error.hpp"

namespace railodo {

namespace {

// Relative bump applied to each SCA scale so the targeted pair lands strictly
// inside the acceptance region despite rounding in the closed-form scales.
constexpr double kBoundaryNudge = 1e-12;

void check_probability(double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorKind::Domain, fmt::format("consensus probability must be in [0, 1), got {}", p));
  }
}

double floored(double variance) { return std::max(variance, kVarianceFloor); }

// Acklam's rational approximation for the lower half, q in (0, 0.5].
double lower_tail_guess(double q) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  if (q < kLow) {
    const double t = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
           ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  const double u = q - 0.5;
  const double r = u * u;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double lower_tail(double q) {
  double x = lower_tail_guess(q);
  // One Halley step against the erfc-based CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - q;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace

double normcdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double norminv(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(ErrorKind::Domain, fmt::format("norminv: probability must be in (0, 1), got {}", q));
  }
  if (q == 0.5) return 0.0;
  // 1 - q is exact for q in [0.5, 1), so the upper half loses nothing.
  return q < 0.5 ? lower_tail(q) : -lower_tail(1.0 - q);
}

double z_desired(double p) {
  check_probability(p);
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  return norminv(0.5 * p);
}

double z_test(const Measurement& m1, const Measurement& m2) {
  if (m1.variance < kVarianceFloor && m2.variance < kVarianceFloor) {
    throw Error(ErrorKind::Degenerate,
                fmt::format("z-test between {} and {}: both variances below {}",
                            sensor_name(m1.sensor), sensor_name(m2.sensor), kVarianceFloor));
  }
  return -std::abs(m1.mean - m2.mean) / std::sqrt(floored(m1.variance) + floored(m2.variance));
}

bool in_consensus_z(const Measurement& m1, const Measurement& m2, double z) {
  // Failure is z_test < z; the boundary itself passes.
  return !(z_test(m1, m2) < z);
}

bool in_consensus(const Measurement& m1, const Measurement& m2, double p) {
  check_probability(p);
  if (p == 0.0) return true;
  return in_consensus_z(m1, m2, z_desired(p));
}

double scale_both(const Measurement& mi, const Measurement& mj, double z) {
  if (!(z < 0.0)) {
    throw Error(ErrorKind::Domain, fmt::format("scale_both: z must be negative, got {}", z));
  }
  const double diff = mi.mean - mj.mean;
  return diff * diff / (z * z * (floored(mi.variance) + floored(mj.variance)));
}

double scale_one(const Measurement& mi, const Measurement& mj, double z) {
  if (!(z < 0.0)) {
    throw Error(ErrorKind::Domain, fmt::format("scale_one: z must be negative, got {}", z));
  }
  const double ratio = (mi.mean - mj.mean) / z;
  return (ratio * ratio - floored(mj.variance)) / floored(mi.variance);
}

std::vector<std::size_t> consensus_counts(std::span<const Measurement> measurements, double p) {
  const std::size_t n = measurements.size();
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (in_consensus(measurements[i], measurements[j], p)) {
        ++counts[i];
        ++counts[j];
      }
    }
  }
  return counts;
}

double calculate_min_scale(std::span<const std::size_t> to_scale,
                           std::span<const Measurement> measurements, double p) {
  if (to_scale.empty()) {
    throw Error(ErrorKind::InvalidInput, "calculate_min_scale: empty index list");
  }
  const double z = z_desired(p);
  const auto listed = [&](std::size_t k) {
    return std::find(to_scale.begin(), to_scale.end(), k) != to_scale.end();
  };

  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i : to_scale) {
    if (i >= measurements.size()) {
      throw Error(ErrorKind::InvalidInput, fmt::format("calculate_min_scale: index {} out of range", i));
    }
    for (std::size_t j = 0; j < measurements.size(); ++j) {
      if (j == i || in_consensus_z(measurements[i], measurements[j], z)) continue;
      const double s = listed(j) ? scale_both(measurements[i], measurements[j], z)
                                 : scale_one(measurements[i], measurements[j], z);
      c = std::min(c, s);
    }
  }
  if (!std::isfinite(c)) {
    throw Error(ErrorKind::Logic, "calculate_min_scale: no failing pair involves the listed measurements");
  }
  return c;
}

std::vector<Measurement> scale_measurements(std::span<const Measurement> measurements,
                                            std::span<const double> scales) {
  if (measurements.size() != scales.size()) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("scale_measurements: {} measurements but {} scales",
                            measurements.size(), scales.size()));
  }
  std::vector<Measurement> out(measurements.begin(), measurements.end());
  for (std::size_t k = 0; k < out.size(); ++k) out[k].variance *= scales[k];
  return out;
}

namespace {

bool full_consensus(std::span<const Measurement> ms, double z) {
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      if (!in_consensus_z(ms[i], ms[j], z)) return false;
    }
  }
  return true;
}

}  // namespace

ConsensusReport sca(std::span<const Measurement> measurements, double p) {
  check_probability(p);
  const std::size_t n = measurements.size();

  ConsensusReport report;
  report.input.assign(measurements.begin(), measurements.end());
  report.scales.assign(n, 1.0);

  if (n > 1 && p > 0.0) {
    const double z = z_desired(p);
    const std::size_t max_iterations = n * (n - 1) / 2 + 1;
    std::vector<Measurement> scaled = report.input;

    while (!full_consensus(scaled, z)) {
      if (report.iterations >= max_iterations) {
        throw Error(ErrorKind::Logic,
                    fmt::format("sca: no consensus after {} iterations", report.iterations));
      }
      const std::vector<std::size_t> counts = consensus_counts(scaled, p);
      const std::size_t least = *std::min_element(counts.begin(), counts.end());
      std::vector<std::size_t> to_scale;
      for (std::size_t k = 0; k < n; ++k) {
        if (counts[k] == least) to_scale.push_back(k);
      }

      const double c = calculate_min_scale(to_scale, scaled, p) * (1.0 + kBoundaryNudge);
      for (std::size_t k : to_scale) report.scales[k] *= c;
      scaled = scale_measurements(report.input, report.scales);
      ++report.iterations;
    }
  }

  const std::vector<Measurement> scaled = report.scaled();
  report.final_z.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) report.final_z[i * n + j] = z_test(scaled[i], scaled[j]);
    }
  }
  return report;
}

}  // namespace railodo
