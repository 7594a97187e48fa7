#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "msegpd/compound.hpp"
#include "oracles.hpp"

using namespace msegpd;

namespace {

const EgpdParams kSeed(1.0, 0.3, 0.25);

DiscretePmf degenerate_seed(double h = 0.2) { return DiscretePmf(h, {0.0, 1.0}); }

}  // namespace

TEST(CompoundParams, RejectsNonPositiveLambda) {
  EXPECT_THROW(CompoundParams(kSeed, 0.0), DomainError);
  EXPECT_THROW(CompoundParams(kSeed, -1.0), DomainError);
  EXPECT_THROW(CompoundParams(kSeed, INFINITY), DomainError);
}

TEST(DiscretePmf, TailBoundIsComplement) {
  const DiscretePmf p(0.2, {0.5, 0.25, 0.125});
  EXPECT_NEAR(p.tail_mass_bound(), 0.125, 1e-16);
  EXPECT_NEAR(p.total_mass(), 0.875, 1e-16);
  EXPECT_THROW(DiscretePmf(0.2, {0.5, -0.1}), DomainError);
  EXPECT_THROW(DiscretePmf(0.0, {1.0}), DomainError);
  // Sums above one clamp the bound at zero.
  EXPECT_EQ(DiscretePmf(0.2, {0.6, 0.6}).tail_mass_bound(), 0.0);
}

TEST(DiscretizeSeed, FirstMassMatchesClosedForm) {
  const auto f = discretize_seed(kSeed, 0.2);
  EXPECT_EQ(f.mass(0), 0.0);
  const double h1 = 1.0 - std::pow(1.05, -4.0);
  EXPECT_NEAR(h1, 0.17730, 1e-5);
  EXPECT_NEAR(f.mass(1), std::pow(h1, 0.3), 1e-14);
  EXPECT_NEAR(f.mass(1), 0.5951, 1e-4);
  const auto g = discretize_seed(EgpdParams(1.0, 1.0, 0.25), 0.2);
  EXPECT_NEAR(g.mass(1), h1, 1e-14);
}

TEST(DiscretizeSeed, TelescopesToCdfAndHonoursCoverage) {
  const auto f = discretize_seed(kSeed, 0.2);
  for (std::size_t j : {1UL, 2UL, 10UL, 100UL, f.size() - 1}) {
    EXPECT_NEAR(f.cumulative(j), egpd_cdf(kSeed, static_cast<double>(j) * 0.2), 1e-12) << j;
  }
  const std::size_t last = f.size() - 1;
  EXPECT_GE(egpd_cdf(kSeed, last * 0.2), kDefaultCoverage);
  EXPECT_LT(egpd_cdf(kSeed, (last - 1) * 0.2), kDefaultCoverage);
  EXPECT_NEAR(f.tail_mass_bound(), 1.0 - f.total_mass(), 1e-15);
  EXPECT_LE(f.tail_mass_bound(), 1e-12 + 1e-15);
}

TEST(DiscretizeSeed, MatchesIndependentMasses) {
  const auto f = discretize_seed(kSeed, 0.2, 1.0 - 1e-9);
  const auto ref = test_oracle::seed(f.size(), 0.2, 1.0, 0.3, 0.25);
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(f.mass(j), ref[j], 1e-15 + 1e-12 * ref[j]);
}

TEST(DiscretizeSeed, RejectsBadArguments) {
  EXPECT_THROW((void)discretize_seed(kSeed, 0.0), DomainError);
  EXPECT_THROW((void)discretize_seed(kSeed, 0.2, 1.0), DomainError);
  EXPECT_THROW((void)discretize_seed(kSeed, 0.2, 0.0), DomainError);
}

TEST(Panjer, AtomAtZero) {
  const auto seed = discretize_seed(kSeed, 0.2);
  EXPECT_NEAR(panjer(seed, 1.0).mass(0), 0.367879441171442, 1e-15);
  for (double lambda : {0.01, 1.0, 3.0, 10.0}) {
    EXPECT_DOUBLE_EQ(panjer(seed, lambda).mass(0), std::exp(-lambda));
  }
}

TEST(Panjer, DegenerateSeedGivesPoisson) {
  const auto p = panjer(degenerate_seed(), 1.0);
  for (std::size_t a = 0; a < 15; ++a) EXPECT_NEAR(p.mass(a), test_oracle::poisson_pmf(a, 1.0), 1e-15);
}

TEST(Panjer, MatchesConvolutionOracle) {
  const std::size_t n = 600;
  const auto ref_seed = test_oracle::seed(n, 0.2, 1.0, 0.3, 0.25);
  for (double lambda : {0.01, 1.0, 3.0, 10.0}) {
    const auto pmf = compound_pmf(CompoundParams(kSeed, lambda), 0.2, Support::points(n));
    const auto ref = test_oracle::compound_by_convolution(ref_seed, lambda, n);
    double worst = 0.0;
    for (std::size_t a = 0; a < n; ++a) worst = std::max(worst, std::abs(pmf.mass(a) - ref[a]));
    EXPECT_LT(worst, 1e-10) << "lambda=" << lambda;
    // Prefix sums, i.e. the cdf.
    double acc = 0.0, worst_cdf = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      acc += ref[a];
      worst_cdf = std::max(worst_cdf, std::abs(compound_cdf(pmf, a * 0.2) - acc));
    }
    EXPECT_LT(worst_cdf, 1e-10) << "lambda=" << lambda;
  }
}

TEST(Panjer, CoverageStopsRecursion) {
  const auto seed = discretize_seed(kSeed, 0.2);
  const auto p = panjer(seed, 3.0, 1.0 - 1e-9);
  EXPECT_GE(p.total_mass(), 1.0 - 1e-9);
  EXPECT_LT(p.cumulative(p.size() - 2), 1.0 - 1e-9);
}

TEST(Panjer, RejectsSeedWithMassAtZero) {
  EXPECT_THROW((void)panjer(DiscretePmf(0.2, {0.1, 0.9}), 1.0), PreconditionError);
  EXPECT_THROW((void)panjer(degenerate_seed(), 0.0), DomainError);
}

TEST(Panjer, LargeLambdaUsesScaling) {
  // exp(-800) underflows; the degenerate seed turns the result into a Poisson(800) pmf.
  const auto p = panjer_points(degenerate_seed(), 800.0, 1200);
  EXPECT_EQ(p.mass(0), 0.0);
  for (std::size_t a : {700UL, 800UL, 900UL}) {
    EXPECT_NEAR(p.mass(a) / test_oracle::poisson_pmf(a, 800.0), 1.0, 1e-9) << a;
  }
  double total = 0.0;
  for (double m : p.masses()) total += m;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(PositivePart, DegenerateSeedHandValue) {
  const auto full = panjer(degenerate_seed(), 1.0);
  const auto pos = positive_part(full, 1.0);
  EXPECT_EQ(pos.mass(0), 0.0);
  EXPECT_NEAR(pos.mass(1), std::exp(-1.0) / (1.0 - std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(pos.mass(1), 0.58198, 1e-5);
  EXPECT_NEAR(pos.total_mass() + pos.tail_mass_bound(), 1.0, 1e-12);
}

TEST(PositivePart, LargeLambdaScaleNearOne) {
  const auto seed = discretize_seed(kSeed, 0.2);
  const auto full = panjer(seed, 50.0);
  const auto pos = positive_part(full, 50.0);
  for (std::size_t a = 1; a < full.size(); a += 97) EXPECT_NEAR(pos.mass(a), full.mass(a), 1e-12);
}

TEST(PositivePart, RejectsInconsistentAtom) {
  const auto full = panjer(degenerate_seed(), 1.0);
  EXPECT_THROW((void)positive_part(full, 1.1), PreconditionError);
}

TEST(CompoundPmf, PositiveCoverageReached) {
  const CompoundParams cp(kSeed, 3.0);
  const auto pos = positive_compound_pmf(cp, 0.2, Support::coverage(1.0 - 1e-10));
  EXPECT_GE(pos.total_mass(), 1.0 - 1e-10);
  EXPECT_NEAR(pos.total_mass() + pos.tail_mass_bound(), 1.0, 1e-12);
}

TEST(CompoundCdf, BelowFirstPointAndAtEnd) {
  const CompoundParams cp(kSeed, 1.0);
  const auto pos = positive_compound_pmf(cp, 0.2, Support::coverage(1.0 - 1e-9));
  EXPECT_EQ(compound_cdf(pos, 0.1), 0.0);
  EXPECT_GE(compound_cdf(pos, pos.lattice_point(pos.size() - 1)), 1.0 - 1e-9);
  // Right-continuous at lattice points.
  EXPECT_NEAR(compound_cdf(pos, 0.2), pos.mass(1), 1e-15);
  EXPECT_NEAR(compound_cdf(pos, 0.39999), pos.mass(1), 1e-15);
  EXPECT_THROW((void)compound_cdf(pos, -1.0), DomainError);
}

TEST(CompoundQuantile, DefinitionAndExamples) {
  const CompoundParams cp(kSeed, 1.0);
  const auto pos = positive_compound_pmf(cp, 0.2, Support::coverage(1.0 - 1e-9));
  EXPECT_NEAR(compound_quantile(pos, 0.0), 0.2, 1e-15);
  for (double u : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    const double y = compound_quantile(pos, u);
    EXPECT_GE(compound_cdf(pos, y), u);
    EXPECT_LT(compound_cdf(pos, y - 0.2), u);
  }
  EXPECT_THROW((void)compound_quantile(pos, 1.0 - 1e-12), InsufficientSupportError);
}

TEST(CompoundQuantile, DegenerateSeedMedian) {
  // Positive part of a Poisson(3): brute-force median.
  double acc = 0.0;
  std::size_t median = 0;
  for (std::size_t k = 1; k < 50; ++k) {
    acc += test_oracle::poisson_pmf(k, 3.0) / (1.0 - std::exp(-3.0));
    if (acc >= 0.5) {
      median = k;
      break;
    }
  }
  const auto pos = positive_part(panjer(degenerate_seed(), 3.0), 3.0);
  EXPECT_EQ(median, 3U);
  EXPECT_NEAR(compound_quantile(pos, 0.5), 3 * 0.2, 1e-12);
}

TEST(LogPmf, ValuesAndAlignment) {
  const auto pos = positive_part(panjer(degenerate_seed(), 1.0), 1.0);
  EXPECT_NEAR(log_pmf_at(pos, 0.2), std::log(0.58197670686932643), 1e-12);
  EXPECT_NEAR(log_pmf_at(pos, 0.2), -0.5413, 1e-4);
  EXPECT_THROW((void)log_pmf_at(pos, 0.2 + 0.4 * 0.2), DataError);
  EXPECT_THROW((void)log_pmf_at(pos, 0.0), DataError);
  EXPECT_THROW((void)log_pmf_at(pos, -0.2), DataError);
}

TEST(LogPmf, BeyondSupportFallsBackToTailBound) {
  const CompoundParams cp(kSeed, 1.0);
  const auto pos = positive_compound_pmf(cp, 0.2, Support::points(50));
  const double beyond = log_pmf_at(pos, 0.2 * 80);
  EXPECT_TRUE(std::isfinite(beyond));
  EXPECT_NEAR(beyond, std::log(pos.tail_mass_bound()), 1e-12);
}

TEST(LogPmf, MassesOfDistinctValuesSumBelowOne) {
  const CompoundParams cp(kSeed, 2.0);
  const auto pos = positive_compound_pmf(cp, 0.2, Support::coverage(1.0 - 1e-9));
  double total = 0.0;
  for (std::size_t a = 1; a < 400; ++a) total += std::exp(log_pmf_at(pos, a * 0.2));
  EXPECT_LE(total, 1.0 + 1e-12);
}

TEST(CompoundTails, UpperAndLowerExpansions) {
  // Upper: P(Y > y) ~ kappa * lambda * (1 - H(y / sigma)) at a far quantile, fine lattice.
  const double h = 0.02;
  const double y = gp_quantile(GpParams(1.0, 0.25), 1.0 - 1e-6);
  const double lambda = 0.1;
  const auto full = compound_pmf(CompoundParams(kSeed, lambda), h, Support::points(static_cast<std::size_t>(y / h) + 2));
  const double sf = 1.0 - compound_cdf(full, y);
  const double ratio = sf / (0.3 * lambda * gp_sf(GpParams(1.0, 0.25), y));
  EXPECT_NEAR(ratio, 1.0, 0.02);

  // Lower: P(0 < Y <= y) ~ lambda e^-lambda (y / sigma)^kappa at y = 0.01 sigma.
  const double hl = 1e-3;
  const auto low = compound_pmf(CompoundParams(kSeed, lambda), hl, Support::points(20));
  const double p = compound_cdf(low, 0.01) - low.mass(0);
  EXPECT_NEAR(p / (lambda * std::exp(-lambda) * std::pow(0.01, 0.3)), 1.0, 0.05);
}
