#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "msegpd/simulation.hpp"

using namespace msegpd;

namespace {

const EgpdParams kSeed(1.0, 0.3, 0.25);

std::size_t wet_steps(const TimeSeries& s) {
  return static_cast<std::size_t>(std::count_if(s.values().begin(), s.values().end(), [](double v) { return v > 0.0; }));
}

}  // namespace

TEST(SimulateBaseSeries, WetFractionAtLowRate) {
  const std::size_t n = 1'000'000;
  const auto s = simulate_base_series(kSeed, 0.01, n, 7);
  ASSERT_EQ(s.size(), n);
  const double p = -std::expm1(-0.01);
  const double frac = static_cast<double>(wet_steps(s)) / static_cast<double>(n);
  EXPECT_NEAR(frac, p, 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
  EXPECT_NEAR(p, 0.00995, 1e-5);
}

TEST(SimulateBaseSeries, VanishingRateIsDry) {
  const auto s = simulate_base_series(kSeed, 1e-12, 10'000, 3);
  EXPECT_EQ(wet_steps(s), 0U);
  const auto zero = simulate_base_series(kSeed, 0.0, 10'000, 3);
  EXPECT_EQ(wet_steps(zero), 0U);
  EXPECT_THROW((void)simulate_base_series(kSeed, -1.0, 10, 3), DomainError);
}

TEST(SimulateBaseSeries, PositiveMeanMatchesCompoundLaw) {
  const double lambda = 0.1;
  const auto s = simulate_base_series(kSeed, lambda, 1'000'000, 12);
  std::vector<double> pos;
  for (double v : s.values())
    if (v > 0.0) pos.push_back(v);
  const auto pmf = positive_compound_pmf(CompoundParams(kSeed, lambda), 0.2, Support::coverage(1.0 - 1e-10));
  double mean = 0.0, second = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    mean += pmf.mass(k) * pmf.lattice_point(k);
    second += pmf.mass(k) * pmf.lattice_point(k) * pmf.lattice_point(k);
  }
  const double sd = std::sqrt(second - mean * mean);
  const double empirical = std::accumulate(pos.begin(), pos.end(), 0.0) / static_cast<double>(pos.size());
  EXPECT_NEAR(empirical, mean, 3.0 * sd / std::sqrt(static_cast<double>(pos.size())));
}

TEST(SimulateBaseSeries, QuantizationModes) {
  SimulationOptions so;
  const auto ceil = simulate_base_series(kSeed, 0.05, 200'000, 9, so);
  for (double v : ceil.values()) EXPECT_TRUE(is_gauge_multiple(v, 0.2));
  EXPECT_DOUBLE_EQ(ceil.gauge_step(), 0.2);

  so.quantization = Quantization::NearestTotal;
  const auto nearest = simulate_base_series(kSeed, 0.05, 200'000, 9, so);
  for (double v : nearest.values()) EXPECT_TRUE(is_gauge_multiple(v, 0.2));
  // Rounding to nearest sends small totals to zero.
  EXPECT_LT(wet_steps(nearest), wet_steps(ceil));

  so.quantization = Quantization::Off;
  const auto raw = simulate_base_series(kSeed, 0.05, 200'000, 9, so);
  EXPECT_EQ(raw.gauge_step(), 0.0);
  EXPECT_EQ(wet_steps(raw), wet_steps(ceil));
}

TEST(SimulateBaseSeries, Reproducible) {
  const auto a = simulate_base_series(kSeed, 0.02, 100'000, 42);
  const auto b = simulate_base_series(kSeed, 0.02, 100'000, 42);
  const auto c = simulate_base_series(kSeed, 0.02, 100'000, 43);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST(StepsForMonths, CalendarLengths) {
  const auto jan = calendar::make_time(2001, 1, 1);
  EXPECT_EQ(steps_for_months(jan, 1, 360), 31U * 240U);
  EXPECT_EQ(steps_for_months(jan, 2, 360), 59U * 240U);
  EXPECT_EQ(steps_for_months(jan, 12, 360), 365U * 240U);
  EXPECT_EQ(steps_for_months(jan, 0, 360), 0U);
}

TEST(RecoveryStudy, SingleReplicateReproducible) {
  RecoveryOptions opt;
  opt.months = 2;
  opt.replicates = 1;
  opt.rng_seed = 5;
  opt.fit.p = 0;
  opt.fit.q = 1;
  const DurationGrid grid({1, 2, 5, 10, 30});
  const auto a = recovery_study(kSeed, 0.05, grid, opt);
  const auto b = recovery_study(kSeed, 0.05, grid, opt);
  ASSERT_EQ(a.replicates.size(), 1U);
  EXPECT_EQ(a.replicates[0].objective, b.replicates[0].objective);
  EXPECT_EQ(a.kappa.median, b.kappa.median);
  EXPECT_EQ(a.failures, 0U);
  EXPECT_DOUBLE_EQ(a.kappa.truth, 0.3);
  ASSERT_EQ(a.durations.size(), grid.size());
  EXPECT_DOUBLE_EQ(a.durations[3].lambda.truth, 0.5);
  EXPECT_GT(a.replicates[0].positive_base_steps, 0U);
  EXPECT_THROW((void)recovery_study(kSeed, 0.05, grid, RecoveryOptions{.replicates = 0}), DomainError);
}

TEST(RecoveryStudy, WorkerCountDoesNotChangeResults) {
  RecoveryOptions opt;
  opt.months = 1;
  opt.replicates = 3;
  opt.fit.p = 0;
  opt.fit.q = 0;
  const DurationGrid grid({1, 5, 20});
  opt.workers = 1;
  const auto a = recovery_study(kSeed, 0.05, grid, opt);
  opt.workers = 3;
  const auto b = recovery_study(kSeed, 0.05, grid, opt);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.replicates[i].objective, b.replicates[i].objective);
}
