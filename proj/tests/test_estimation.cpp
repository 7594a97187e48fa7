#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "msegpd/estimation.hpp"
#include "msegpd/simulation.hpp"

using namespace msegpd;

namespace {

// Positive lattice amounts drawn exactly from the model at theta.
std::vector<AggregatedSample> draw_at(const MultiscaleTheta& theta, const std::vector<int>& durations, std::size_t n,
                                      std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<AggregatedSample> out;
  for (int d : durations) {
    const auto pmf = positive_compound_pmf(compound_at(theta, d), 0.2, Support::coverage(1.0 - 1e-9));
    AggregatedSample s;
    s.d = d;
    for (std::size_t i = 0; i < n; ++i) s.values.push_back(compound_quantile(pmf, unif(gen) * (1.0 - 1e-8)));
    s.n_positive_per_month = static_cast<double>(n);
    s.n_obs_per_month = static_cast<double>(n) / -std::expm1(-lambda_at(theta, d));
    out.push_back(std::move(s));
  }
  return out;
}

TimeSeries short_series(std::size_t months, std::uint64_t seed) {
  SimulationOptions so;
  return simulate_base_series(EgpdParams(1.0, 0.3, 0.25), 0.05, steps_for_months(so.start, months, so.step_seconds),
                              seed, so);
}

FitOptions small_opts() {
  FitOptions o;
  o.p = 0;
  o.q = 1;
  return o;
}

}  // namespace

TEST(FitOptions, Validation) {
  FitOptions o;
  EXPECT_NO_THROW(o.validate());
  o.max_iters = 0;
  EXPECT_THROW(o.validate(), DomainError);
  o = FitOptions{};
  o.tol = 0.0;
  EXPECT_THROW(o.validate(), DomainError);
  o = FitOptions{};
  o.restarts = 0;
  EXPECT_THROW(o.validate(), DomainError);
}

TEST(FreeCoordinates, RoundTrip) {
  const auto coords = FreeCoordinates::for_grid(3, 3, DurationGrid::standard());
  EXPECT_NEAR(coords.log_scale(), std::log(720.0), 1e-12);
  EXPECT_EQ(coords.size(), 10U);
  const MultiscaleTheta t({0.1, 0.3, -0.02, 0.001}, 0.3, 0.25, {std::log(0.01), 1.0, -0.05, 0.004});
  const auto back = coords.from_free(coords.to_free(t));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(back.s()[i], t.s()[i], 1e-14);
    EXPECT_NEAR(back.l()[i], t.l()[i], 1e-14);
  }
  EXPECT_NEAR(back.kappa(), 0.3, 1e-15);
  EXPECT_NEAR(back.xi(), 0.25, 1e-15);
  EXPECT_THROW((void)coords.to_free(MultiscaleTheta({0.0}, 0.3, 0.25, {0.0})), PreconditionError);
}

TEST(DefaultInit, MatchesWetFraction) {
  std::vector<AggregatedSample> samples{{1, std::vector<double>(304, 0.4), 10000.0, 304.0},
                                        {10, std::vector<double>(200, 1.0), 1000.0, 200.0}};
  const auto grid = DurationGrid({1, 10});
  const auto t = default_init(samples, grid);
  EXPECT_NEAR(lambda_at(t, 1), 0.03087, 5e-5);
  EXPECT_NEAR(lambda_at(t, 10), 10 * lambda_at(t, 1), 1e-12);
  EXPECT_DOUBLE_EQ(t.kappa(), 0.5);
  EXPECT_DOUBLE_EQ(t.xi(), 0.15);
  EXPECT_TRUE(monotonicity_check(t, DurationGrid::standard()).monotone);
  for (double c : t.s()) EXPECT_TRUE(std::isfinite(c));
  EXPECT_DOUBLE_EQ(t.s()[1], 0.0);

  // sigma times the unit-seed mean reproduces the mean amount at d=1.
  const auto draws = egpd_sample(EgpdParams(1.0, 0.5, 0.15), 400000, 99);
  const double unit_mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  EXPECT_NEAR(sigma_at(t, 1) * unit_mean, 0.4, 0.4 * 0.02);

  EXPECT_THROW((void)default_init(std::vector<AggregatedSample>{}, grid), PreconditionError);
}

TEST(FitMcle, DominatesTruthAndIsStationary) {
  const MultiscaleTheta truth({0.2}, 0.4, 0.2, {std::log(0.5)});
  const std::vector<int> durations{1, 2, 5};
  const auto data = draw_at(truth, durations, 400, 17);
  const DurationGrid grid(durations);
  FitOptions opts;
  opts.p = 0;
  opts.q = 0;
  const auto fit = fit_mcle(data, grid, opts);
  EXPECT_TRUE(fit.monotone);
  EXPECT_TRUE(fit.converged);
  EXPECT_GE(fit.objective, composite_loglik(truth, data) - 1e-6);
  EXPECT_NEAR(fit.objective, composite_loglik(fit.theta_hat, data), 1e-9);
  ASSERT_EQ(fit.per_duration_diag.size(), 3U);
  double total = 0.0;
  for (const auto& dd : fit.per_duration_diag) total += dd.mean_loglik * static_cast<double>(dd.n);
  EXPECT_NEAR(total, fit.objective, 1e-8 * std::abs(fit.objective));

  opts.init = fit.theta_hat;
  const auto again = fit_mcle(data, grid, opts);
  EXPECT_LT(again.objective - fit.objective, opts.tol);

  // No coordinate step of 1e-3 improves by more than tol.
  const auto coords = FreeCoordinates::for_grid(0, 0, grid);
  const auto x = coords.to_free(fit.theta_hat);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (double step : {-1e-3, 1e-3}) {
      auto y = x;
      y[k] += step;
      EXPECT_LT(composite_loglik(coords.from_free(y), data) - fit.objective, opts.tol) << "coordinate " << k;
    }
  }
}

TEST(FitMcle, ReturnsMonotoneThetaOnSimulatedSeries) {
  const auto series = short_series(3, 4);
  const DurationGrid grid({1, 2, 5, 10, 30, 60});
  const auto data = build_dataset(series, grid);
  const auto fit = fit_mcle(data, grid, small_opts());
  EXPECT_TRUE(fit.monotone);
  EXPECT_EQ(fit.monotone, monotonicity_check(fit.theta_hat, grid).monotone);
  EXPECT_TRUE(std::isfinite(fit.objective));
  EXPECT_GT(fit.evaluations, 0U);
}

TEST(FitMcle, DropsEmptyDurationsAndRejectsForeignOnes) {
  const MultiscaleTheta truth({0.0}, 0.3, 0.25, {std::log(0.3)});
  auto data = draw_at(truth, {1, 3}, 200, 5);
  data.push_back(AggregatedSample{6, {}, 10.0, 0.0});
  FitOptions opts;
  opts.p = 0;
  opts.q = 0;
  const auto fit = fit_mcle(data, DurationGrid({1, 3, 6}), opts);
  ASSERT_EQ(fit.warnings.size(), 1U);
  EXPECT_NE(fit.warnings[0].find("duration 6"), std::string::npos);
  EXPECT_EQ(fit.per_duration_diag.size(), 2U);
  EXPECT_THROW((void)fit_mcle(data, DurationGrid({1, 3}), opts), PreconditionError);
  EXPECT_THROW((void)fit_mcle(std::vector<AggregatedSample>{}, DurationGrid({1}), opts), PreconditionError);
}

TEST(ResampleBlocks, KeepsShapeAndCopiesBlocks) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.2 * static_cast<double>(i);
  std::vector<double> all(v);
  all.insert(all.end(), v.begin(), v.begin() + 30);
  const TimeSeries s(360, 0.2, all, {Segment{0, 0, 100}, Segment{1'000'000, 100, 30}});
  auto gen = replicate_stream(3, 0);
  const auto r = resample_blocks(s, 10, gen);
  ASSERT_EQ(r.size(), s.size());
  ASSERT_EQ(r.segments().size(), 2U);
  EXPECT_EQ(r.segments()[1].start, 1'000'000);
  // Within a block consecutive values advance by one tick.
  for (std::size_t b = 0; b < 13; ++b) {
    for (std::size_t i = 1; i < 10; ++i) {
      const auto k = b * 10 + i;
      EXPECT_NEAR(r.values()[k] - r.values()[k - 1], 0.2, 1e-9) << "block " << b;
    }
  }
  EXPECT_THROW((void)resample_blocks(s, 0, gen), DomainError);
  EXPECT_THROW((void)resample_blocks(s, 101, gen), PreconditionError);
}

TEST(BlockBootstrap, CountsAndReproducibility) {
  const auto series = short_series(2, 8);
  const DurationGrid grid({1, 5, 30});
  const auto opts = small_opts();
  const auto a = block_bootstrap(series, grid, opts, 3, 14.0, 21, 1);
  ASSERT_EQ(a.replicates.size(), 3U);
  EXPECT_EQ(a.seed, 21U);
  EXPECT_DOUBLE_EQ(a.block_length_days, 14.0);
  for (const auto& r : a.replicates) {
    EXPECT_TRUE(!r.converged || monotonicity_check(r.theta, grid).monotone);
  }
  const auto b = block_bootstrap(series, grid, opts, 3, 14.0, 21, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.replicates[i].objective, b.replicates[i].objective);
    EXPECT_EQ(a.replicates[i].theta.kappa(), b.replicates[i].theta.kappa());
  }
  const auto one = block_bootstrap(series, grid, opts, 1, 14.0, 21, 1);
  EXPECT_EQ(one.replicates[0].objective, a.replicates[0].objective);
  const auto other = block_bootstrap(series, grid, opts, 1, 14.0, 22, 1);
  EXPECT_NE(other.replicates[0].objective, a.replicates[0].objective);

  EXPECT_THROW((void)block_bootstrap(series, grid, opts, 1, 400.0, 1, 1), PreconditionError);
  EXPECT_THROW((void)block_bootstrap(series, grid, opts, 1, 0.0, 1, 1), DomainError);
}

TEST(Band, IndexQuantiles) {
  BootstrapResult r;
  for (int i = 1; i <= 100; ++i) r.replicates.push_back({MultiscaleTheta({0.0}, i, 0.2, {0.0}), 0.0, true, true});
  const auto kappa = [](const MultiscaleTheta& t) { return t.kappa(); };
  const auto iv = band(r, kappa, 0.95);
  EXPECT_DOUBLE_EQ(iv.lower, 3.0);
  EXPECT_DOUBLE_EQ(iv.upper, 98.0);
  EXPECT_EQ(iv.replicates_used, 100U);
  const auto narrow = band(r, kappa, 0.90);
  EXPECT_GE(narrow.lower, iv.lower);
  EXPECT_LE(narrow.upper, iv.upper);

  // Unusable replicates are excluded.
  r.replicates[99].converged = false;
  EXPECT_DOUBLE_EQ(band(r, kappa, 0.95).upper, 97.0);
}

TEST(Band, ConstantAndTooFew) {
  BootstrapResult r;
  for (int i = 0; i < 25; ++i) r.replicates.push_back({MultiscaleTheta({0.0}, 0.3, 0.2, {0.0}), 0.0, true, true});
  const auto iv = band(r, [](const MultiscaleTheta& t) { return t.xi(); });
  EXPECT_EQ(iv.lower, iv.upper);
  const auto vec = band(r, [](const MultiscaleTheta& t) { return std::vector<double>{t.kappa(), t.xi()}; });
  ASSERT_EQ(vec.size(), 2U);
  EXPECT_DOUBLE_EQ(vec[0].lower, 0.3);
  EXPECT_THROW((void)band(r, [](const MultiscaleTheta& t) { return t.xi(); }, 1.0), DomainError);
  for (int i = 0; i < 6; ++i) r.replicates[i].monotone = false;
  EXPECT_THROW((void)band(r, [](const MultiscaleTheta& t) { return t.xi(); }), DataError);
}

TEST(EmpiricalQuantile, InverseEcdf) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_EQ(empirical_quantile(x, 0.0), 1.0);
  EXPECT_EQ(empirical_quantile(x, 0.25), 1.0);
  EXPECT_EQ(empirical_quantile(x, 0.26), 2.0);
  EXPECT_EQ(empirical_quantile(x, 1.0), 4.0);
  EXPECT_THROW((void)empirical_quantile(std::vector<double>{}, 0.5), PreconditionError);
}
