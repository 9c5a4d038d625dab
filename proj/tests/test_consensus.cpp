#include "railodo/consensus.hpp"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "railodo/error.hpp"

using namespace railodo;

namespace {

Measurement m(double mean, double variance) { return Measurement{SensorKind::Radar1, mean, variance, 0.0}; }

std::vector<Measurement> outlier_set() { return {m(12.0, 0.5), m(15.0, 0.5), m(15.4, 0.5), m(14.6, 0.5)}; }
std::vector<Measurement> two_pairs() { return {m(10.0, 0.4), m(10.3, 0.5), m(13.0, 0.4), m(13.4, 0.5)}; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Logic;
}

}  // namespace

TEST(Norminv, Examples) {
  EXPECT_EQ(norminv(0.5), 0.0);
  EXPECT_NEAR(norminv(0.25), -0.6744897502, 1e-10);
  EXPECT_NEAR(norminv(0.05), -1.6448536270, 1e-10);
  EXPECT_NEAR(norminv(0.25), oracle::norminv_bisect(0.25), 1e-12);
}

TEST(Norminv, MatchesBisectionOverGrid) {
  double worst = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double q = 1e-9 + (1.0 - 2e-9) * k / 2000.0;
    worst = std::max(worst, std::abs(norminv(q) - oracle::norminv_bisect(q)));
  }
  for (double q : {1e-9, 1e-7, 1e-4, 0.02425, 0.97575, 1 - 1e-4, 1 - 1e-9}) {
    worst = std::max(worst, std::abs(norminv(q) - oracle::norminv_bisect(q)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Norminv, Antisymmetric) {
  for (double q : {1e-6, 0.01, 0.1, 0.3, 0.45}) EXPECT_NEAR(norminv(q), -norminv(1.0 - q), 1e-9);
}

TEST(Norminv, DomainErrors) {
  for (double q : {0.0, 1.0, -0.1, 1.5}) EXPECT_EQ(kind_of([q] { norminv(q); }), ErrorKind::Domain);
}

TEST(Normcdf, AgreesWithErfc) {
  for (double z : {-8.0, -1.0, 0.0, 0.7, 3.0}) EXPECT_NEAR(normcdf(z), oracle::lower_cdf(z), 1e-15);
}

TEST(ZDesired, ZeroDisablesAndRangeChecked) {
  EXPECT_EQ(z_desired(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(z_desired(0.5), -0.6744897502, 1e-10);
  EXPECT_EQ(kind_of([] { z_desired(1.0); }), ErrorKind::Domain);
  EXPECT_EQ(kind_of([] { z_desired(-0.1); }), ErrorKind::Domain);
}

TEST(ZTest, Examples) {
  EXPECT_EQ(z_test(m(3.0, 1.0), m(3.0, 7.0)), 0.0);
  EXPECT_NEAR(z_test(m(10.0, 1.0), m(12.0, 1.0)), -1.41421356, 1e-8);
  EXPECT_NEAR(z_test(m(0.0, 1e6), m(1.0, 0.01)), oracle::z_value({0.0, 1e6}, {1.0, 0.01}), 1e-15);
  EXPECT_NEAR(z_test(m(0.0, 1e6), m(1.0, 0.01)), -0.001, 1e-8);
}

TEST(ZTest, DegenerateVariances) {
  EXPECT_EQ(kind_of([] { z_test(m(0.0, 0.0), m(1.0, 1e-15)); }), ErrorKind::Degenerate);
  // One informative variance is enough.
  EXPECT_NEAR(z_test(m(0.0, 0.0), m(1.0, 1.0)), -1.0, 1e-9);
}

TEST(InConsensus, Examples) {
  EXPECT_TRUE(in_consensus(m(5.0, 0.1), m(5.0, 3.0), 0.9));
  EXPECT_FALSE(in_consensus(m(10.0, 1.0), m(12.0, 1.0), 0.5));
  EXPECT_TRUE(in_consensus(m(0.0, 1e-6), m(1e6, 1e-6), 0.0));
  EXPECT_EQ(kind_of([] { in_consensus(m(0, 1), m(1, 1), 1.0); }), ErrorKind::Domain);
}

TEST(InConsensus, StricterProbabilityImpliesLooser) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mean(-5, 5), var(0.01, 4), prob(0.01, 0.99);
  for (int k = 0; k < 2000; ++k) {
    const Measurement a = m(mean(rng), var(rng)), b = m(mean(rng), var(rng));
    double p1 = prob(rng), p2 = prob(rng);
    if (p1 > p2) std::swap(p1, p2);
    if (in_consensus(a, b, p2)) EXPECT_TRUE(in_consensus(a, b, p1));
  }
}

TEST(Scales, Examples) {
  const double z = -0.6744898;
  const double z2 = z * z;
  EXPECT_NEAR(scale_both(m(0, 1), m(4, 1), z), 16.0 / (2.0 * z2), 1e-9);
  EXPECT_NEAR(scale_both(m(0, 1), m(4, 1), z), 17.5848, 1e-4);
  EXPECT_NEAR(scale_one(m(0, 1), m(4, 1), z), 16.0 / z2 - 1.0, 1e-9);
  EXPECT_NEAR(scale_one(m(0, 1), m(4, 1), z), 34.1696, 1e-3);
  EXPECT_NEAR(scale_one(m(0, 1), m(4, 1e-13), z), 16.0 / z2, 1e-6);
  EXPECT_NEAR(scale_one(m(0, 1), m(4, 1e-13), z), 35.1696, 1e-3);
  EXPECT_EQ(scale_both(m(2, 1), m(2, 3), z), 0.0);
}

TEST(Scales, BoundaryExactnessAndLowerBound) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mean(-50, 50), logvar(-6, 3), prob(0.05, 0.95);
  int checked = 0;
  while (checked < 3000) {
    const Measurement a = m(mean(rng), std::exp(logvar(rng))), b = m(mean(rng), std::exp(logvar(rng)));
    const double z = z_desired(prob(rng));
    if (in_consensus_z(a, b, z)) continue;
    ++checked;
    const double sb = scale_both(a, b, z);
    EXPECT_GT(sb, 1.0);
    EXPECT_NEAR(oracle::z_value({a.mean, a.variance * sb}, {b.mean, b.variance * sb}), z, 1e-9);
    const double so = scale_one(a, b, z);
    EXPECT_GT(so, 1.0);
    EXPECT_NEAR(oracle::z_value({a.mean, a.variance * so}, {b.mean, b.variance}), z, 1e-9);
  }
}

TEST(Scales, InflationNeverWorsensZ) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mean(-5, 5), var(0.01, 4), s(1.0, 100.0);
  for (int k = 0; k < 2000; ++k) {
    const Measurement a = m(mean(rng), var(rng)), b = m(mean(rng), var(rng));
    const double before = z_test(a, b);
    EXPECT_GE(z_test(m(a.mean, a.variance * s(rng)), b), before);
  }
}

TEST(Scales, PositiveZIsDomainError) {
  EXPECT_EQ(kind_of([] { scale_both(m(0, 1), m(1, 1), 0.0); }), ErrorKind::Domain);
  EXPECT_EQ(kind_of([] { scale_one(m(0, 1), m(1, 1), 0.5); }), ErrorKind::Domain);
}

TEST(ConsensusCounts, Examples) {
  const std::vector<Measurement> same{m(1, 1), m(1, 2), m(1, 0.5), m(1, 1)};
  EXPECT_EQ(consensus_counts(same, 0.9), (std::vector<std::size_t>{3, 3, 3, 3}));
  EXPECT_EQ(consensus_counts(outlier_set(), 0.2), (std::vector<std::size_t>{0, 2, 2, 2}));
  EXPECT_EQ(consensus_counts(two_pairs(), 0.2), (std::vector<std::size_t>{1, 1, 1, 1}));
}

TEST(CalculateMinScale, SingleOutlierAgainstOnePartner) {
  const std::vector<Measurement> set{m(0, 1), m(4, 1), m(0.2, 1)};
  const double p = 0.5;
  const std::vector<std::size_t> l{1};
  // 1 fails against both 0 and 2; the nearer one (2) needs less scaling.
  const double expected = std::min(scale_one(set[1], set[0], z_desired(p)), scale_one(set[1], set[2], z_desired(p)));
  EXPECT_NEAR(calculate_min_scale(l, set, p), expected, 1e-9 * expected);
  EXPECT_NEAR(calculate_min_scale(l, set, p), scale_one(set[1], set[2], z_desired(p)), 1e-9 * expected);

  const std::vector<Measurement> pair{m(0, 1), m(4, 1)};
  EXPECT_NEAR(calculate_min_scale(l, pair, p), scale_one(pair[1], pair[0], z_desired(p)), 1e-9 * expected);
}

TEST(CalculateMinScale, TwoPairsUsesMinimumCrossGroupScaleBoth) {
  const auto set = two_pairs();
  const double z = z_desired(0.2);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      if (!in_consensus_z(set[i], set[j], z)) best = std::min(best, scale_both(set[i], set[j], z));
  const std::vector<std::size_t> l{0, 1, 2, 3};
  EXPECT_NEAR(calculate_min_scale(l, set, 0.2), best, 1e-9 * best);
}

TEST(CalculateMinScale, Errors) {
  const std::vector<Measurement> agree{m(1, 1), m(1, 1)};
  const std::vector<std::size_t> l{0};
  EXPECT_EQ(kind_of([&] { calculate_min_scale(l, agree, 0.5); }), ErrorKind::Logic);
  const std::vector<std::size_t> none;
  EXPECT_EQ(kind_of([&] { calculate_min_scale(none, agree, 0.5); }), ErrorKind::InvalidInput);
  const std::vector<std::size_t> bad{5};
  EXPECT_EQ(kind_of([&] { calculate_min_scale(bad, agree, 0.5); }), ErrorKind::InvalidInput);
}

TEST(ScaleMeasurements, Examples) {
  const std::vector<Measurement> in{m(1, 2), m(5, 0.5)};
  const std::vector<double> ones{1, 1}, s{3, 2};
  EXPECT_EQ(scale_measurements(in, ones), in);
  const auto out = scale_measurements(in, s);
  EXPECT_EQ(out[0].variance, 6.0);
  EXPECT_EQ(out[0].mean, 1.0);
  EXPECT_EQ(out[1].mean, 5.0);
  const std::vector<double> short_s{1};
  EXPECT_EQ(kind_of([&] { scale_measurements(in, short_s); }), ErrorKind::InvalidInput);
}

TEST(Sca, FullConsensusIsUntouched) {
  const std::vector<Measurement> same{m(7, 1), m(7, 2), m(7, 0.3), m(7, 1)};
  const auto report = sca(same, 0.9);
  EXPECT_EQ(report.scales, (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(report.iterations, 0u);
}

TEST(Sca, ZeroProbabilityDisables) {
  const auto report = sca(outlier_set(), 0.0);
  EXPECT_EQ(report.scales, (std::vector<double>{1, 1, 1, 1}));
}

TEST(Sca, OutlierGetsLargestScale) {
  const auto report = sca(outlier_set(), 0.2);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_GT(report.scales[0], report.scales[k]);
  const std::vector<Measurement> symmetric{m(12.0, 0.5), m(15.0, 0.5), m(15.0, 0.5), m(15.0, 0.5)};
  const auto sym = sca(symmetric, 0.2);
  EXPECT_GT(sym.scales[0], sym.scales[1]);
  EXPECT_EQ(sym.scales[1], sym.scales[2]);
  EXPECT_EQ(sym.scales[2], sym.scales[3]);
}

TEST(Sca, TwoPairsAllScaled) {
  const auto report = sca(two_pairs(), 0.2);
  for (double s : report.scales) EXPECT_GT(s, 1.0);
}

TEST(Sca, PostConditionAndBoundOnRandomSets) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> mean(-10, 10), logvar(-4, 2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    std::vector<Measurement> set;
    for (std::size_t k = 0; k < n; ++k) set.push_back(m(mean(rng), std::exp(logvar(rng))));
    for (double p : {0.2, 0.5, 0.8, 0.9}) {
      const auto report = sca(set, p);
      EXPECT_LE(report.iterations, n * (n - 1) / 2);
      const auto scaled = report.scaled();
      const double z = z_desired(p);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_GE(report.scales[i], 1.0);
        for (std::size_t j = i + 1; j < n; ++j) {
          EXPECT_TRUE(in_consensus(scaled[i], scaled[j], p));
          EXPECT_GE(report.z_at(i, j), z - 1e-9);
        }
      }
    }
  }
}

TEST(Sca, TranslationAndUnitInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mean(-10, 10), logvar(-3, 1), shift(-1000, 1000), unit(0.1, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Measurement> set;
    for (int k = 0; k < 5; ++k) set.push_back(m(mean(rng), std::exp(logvar(rng))));
    const double c = shift(rng), u = unit(rng);
    std::vector<Measurement> moved = set, rescaled = set;
    for (auto& x : moved) x.mean += c;
    for (auto& x : rescaled) {
      x.mean *= u;
      x.variance *= u * u;
    }
    const auto base = sca(set, 0.8);
    const auto a = sca(moved, 0.8);
    const auto b = sca(rescaled, 0.8);
    for (std::size_t k = 0; k < set.size(); ++k) {
      EXPECT_NEAR(a.scales[k], base.scales[k], 1e-6 * base.scales[k]);
      EXPECT_NEAR(b.scales[k], base.scales[k], 1e-6 * base.scales[k]);
    }
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t j = 0; j < set.size(); ++j) {
        EXPECT_NEAR(a.z_at(i, j), base.z_at(i, j), 1e-6);
        EXPECT_NEAR(b.z_at(i, j), base.z_at(i, j), 1e-6);
      }
  }
}
