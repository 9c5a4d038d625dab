#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "railodo/measurement.hpp"

namespace railodo {

/// Variances are clamped to this value before any z-test, (m/s)^2.
inline constexpr double kVarianceFloor = 1e-12;

/// Standard normal CDF.
double normcdf(double z);

/// Inverse standard normal CDF. Throws ErrorKind::Domain outside (0, 1).
double norminv(double q);

/// z threshold for a two-tailed test at probability p: norminv(p / 2) <= 0.
double z_desired(double p);

/// -|mu1 - mu2| / sqrt(var1 + var2)
double z_test(const Measurement& m1, const Measurement& m2);

/// True iff the pair passes the z-test at probability p. p = 0 disables the
/// test (always true).
bool in_consensus(const Measurement& m1, const Measurement& m2, double p);

/// Same test against a precomputed threshold. Boundary pairs pass.
bool in_consensus_z(const Measurement& m1, const Measurement& m2, double z);

/// Factor that, applied to both variances, puts the pair exactly at z.
double scale_both(const Measurement& mi, const Measurement& mj, double z);

/// Factor that, applied to mi's variance only, puts the pair exactly at z.
double scale_one(const Measurement& mi, const Measurement& mj, double z);

/// For each measurement, how many of the others it agrees with.
std::vector<std::size_t> consensus_counts(std::span<const Measurement> measurements, double p);

/// Smallest scale that brings at least one measurement listed in `to_scale`
/// into consensus with a measurement it currently disagrees with.
double calculate_min_scale(std::span<const std::size_t> to_scale,
                           std::span<const Measurement> measurements, double p);

/// Multiplies each variance by its scale; means and timestamps are kept.
std::vector<Measurement> scale_measurements(std::span<const Measurement> measurements,
                                            std::span<const double> scales);

struct ConsensusReport {
  std::vector<Measurement> input;
  std::vector<double> scales;
  std::size_t iterations = 0;
  /// Row-major n x n matrix of z-values between the scaled measurements.
  std::vector<double> final_z;

  std::vector<Measurement> scaled() const { return scale_measurements(input, scales); }
  double z_at(std::size_t i, std::size_t j) const { return final_z[i * input.size() + j]; }
};

/// Sensor consensus analysis: inflate the variances of the least-agreeing
/// measurements until every pair passes the z-test at probability p.
///
/// Each iteration picks every measurement with the minimum consensus count,
/// multiplies their scales by calculate_min_scale() and re-tests. Because
/// inflating a variance can only move a pair's z-value toward zero, each
/// iteration settles at least one failing pair for good, so the loop runs at
/// most n(n-1)/2 times.
ConsensusReport sca(std::span<const Measurement> measurements, double p);

}  // namespace railodo
