#pragma once

// Synthetic base-scale series from the compound Poisson-EGPD model and the
// parameter-recovery study built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "msegpd/calendar.hpp"
#include "msegpd/compound.hpp"
#include "msegpd/distributions.hpp"
#include "msegpd/estimation.hpp"
#include "msegpd/ingestion.hpp"
#include "msegpd/multiscale_model.hpp"
#include "msegpd/parallel.hpp"

namespace msegpd {

enum class Quantization {
  // Each event intensity is rounded up to the lattice before summing; the
  // step totals then follow exactly the compound of the discretized seed.
  EventCeiling,
  // Step totals rounded to the nearest lattice point, ties up.
  NearestTotal,
  // Continuous amounts.
  Off,
};

struct SimulationOptions {
  std::int64_t start = calendar::make_time(2001, 1, 1);
  std::int64_t step_seconds = 360;
  double h = kDefaultLatticeStep;
  Quantization quantization = Quantization::EventCeiling;
};

// Base steps in `months` consecutive calendar months from `start` (a month start).
[[nodiscard]] inline std::size_t steps_for_months(std::int64_t start, std::size_t months, std::int64_t step_seconds) {
  std::int64_t t = start;
  for (std::size_t m = 0; m < months; ++m) t = calendar::next_month_start(t);
  return static_cast<std::size_t>((t - start) / step_seconds);
}

namespace detail {

// N ~ Poisson(lambda) conditioned on N > 0.
template <class URNG>
std::size_t zero_truncated_poisson(double lambda, URNG& gen) {
  if (lambda < 1.0) {
    const double u = open_uniform(gen);
    double p = lambda / std::expm1(lambda);
    double cum = p;
    std::size_t n = 1;
    while (u > cum && n < 1000) {
      ++n;
      p *= lambda / static_cast<double>(n);
      cum += p;
    }
    return n;
  }
  std::poisson_distribution<std::size_t> pois(lambda);
  for (;;) {
    const std::size_t n = pois(gen);
    if (n > 0) return n;
  }
}

}  // namespace detail

// I.i.d. steps: N ~ Poisson(lambda) events per step, each an EGPD intensity.
// Dry runs are skipped geometrically (P(dry) = exp(-lambda)).
[[nodiscard]] inline TimeSeries simulate_base_series(const EgpdParams& seed_params, double lambda, std::size_t n_steps,
                                                     std::uint64_t rng_seed, const SimulationOptions& opt = {}) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("simulate_base_series: lambda must be >= 0");
  const bool quantized = opt.quantization != Quantization::Off;
  if (quantized && !(opt.h > 0.0)) throw DomainError("simulate_base_series: lattice step must be > 0");
  std::mt19937_64 gen(rng_seed);
  std::vector<double> values(n_steps, 0.0);
  if (lambda > 0.0) {
    std::size_t i = 0;
    for (;;) {
      const double gap = -std::log(detail::open_uniform(gen)) / lambda;
      if (!(gap < static_cast<double>(n_steps - i))) break;
      i += static_cast<std::size_t>(gap);
      const std::size_t events = detail::zero_truncated_poisson(lambda, gen);
      double total = 0.0;
      std::int64_t ticks = 0;
      for (std::size_t e = 0; e < events; ++e) {
        const double y = egpd_draw(seed_params, gen);
        if (opt.quantization == Quantization::EventCeiling) {
          ticks += std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(y / opt.h)));
        } else {
          total += y;
        }
      }
      switch (opt.quantization) {
        case Quantization::EventCeiling:
          values[i] = static_cast<double>(ticks) * opt.h;
          break;
        case Quantization::NearestTotal:
          values[i] = std::floor(total / opt.h + 0.5) * opt.h;
          break;
        case Quantization::Off:
          values[i] = total;
          break;
      }
      if (++i >= n_steps) break;
    }
  }
  return TimeSeries(opt.start, opt.step_seconds, quantized ? opt.h : 0.0, std::move(values));
}

// ---------------------------------------------------------------------------
// Recovery study

struct RecoveryReplicate {
  MultiscaleTheta theta_hat;
  double objective = 0.0;
  bool converged = false;
  bool monotone = false;
  std::size_t positive_base_steps = 0;
};

struct SummaryQuantiles {
  double truth = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

struct DurationSummary {
  int d = 0;
  SummaryQuantiles sigma;
  SummaryQuantiles lambda;
};

struct RecoveryReport {
  std::vector<RecoveryReplicate> replicates;
  SummaryQuantiles kappa;
  SummaryQuantiles xi;
  std::vector<DurationSummary> durations;
  std::size_t months = 0;
  std::uint64_t rng_seed = 0;
  std::size_t failures = 0;
};

struct RecoveryOptions {
  std::size_t months = 36;
  std::size_t replicates = 50;
  std::uint64_t rng_seed = 1;
  std::size_t workers = 1;
  FitOptions fit;  // degrees p, q live here
  SimulationOptions simulation;
};

[[nodiscard]] inline double median_of(std::vector<double> v) {
  if (v.empty()) throw PreconditionError("median_of: no data");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

[[nodiscard]] inline SummaryQuantiles summarize(std::vector<double> v, double truth) {
  SummaryQuantiles s;
  s.truth = truth;
  if (v.empty()) return s;
  s.median = median_of(v);
  const auto iv = empirical_interval(std::move(v), 0.95);
  s.lower = iv.lower;
  s.upper = iv.upper;
  return s;
}

[[nodiscard]] inline RecoveryReport recovery_study(const EgpdParams& truth, double lambda, const DurationGrid& grid,
                                                   const RecoveryOptions& opt) {
  if (opt.replicates < 1) throw DomainError("recovery_study: replicates must be >= 1");
  const std::size_t n_steps = steps_for_months(opt.simulation.start, opt.months, opt.simulation.step_seconds);
  std::vector<std::optional<RecoveryReplicate>> slots(opt.replicates);
  parallel_for(opt.replicates, opt.workers, [&](std::size_t r) {
    auto stream = replicate_stream(opt.rng_seed, r);
    const auto series = simulate_base_series(truth, lambda, n_steps, stream(), opt.simulation);
    const auto data = build_dataset(series, grid);
    const std::size_t wet = data.front().d == 1 ? data.front().values.size() : 0;
    try {
      const auto fit = fit_mcle(data, grid, opt.fit);
      slots[r] = RecoveryReplicate{fit.theta_hat, fit.objective, fit.converged, fit.monotone, wet};
    } catch (const std::exception&) {
      slots[r] = RecoveryReplicate{
          MultiscaleTheta(std::vector<double>(opt.fit.p + 1, 0.0), truth.kappa(), truth.xi(),
                          std::vector<double>(opt.fit.q + 1, 0.0)),
          -std::numeric_limits<double>::infinity(), false, false, wet};
    }
  });

  RecoveryReport report;
  report.months = opt.months;
  report.rng_seed = opt.rng_seed;
  for (auto& s : slots) report.replicates.push_back(std::move(*s));

  std::vector<const RecoveryReplicate*> ok;
  for (const auto& r : report.replicates) {
    if (std::isfinite(r.objective)) {
      ok.push_back(&r);
    } else {
      ++report.failures;
    }
  }
  std::vector<double> kappas, xis;
  for (const auto* r : ok) {
    kappas.push_back(r->theta_hat.kappa());
    xis.push_back(r->theta_hat.xi());
  }
  report.kappa = summarize(kappas, truth.kappa());
  report.xi = summarize(xis, truth.xi());
  for (int d : grid.durations()) {
    std::vector<double> sig, lam;
    for (const auto* r : ok) {
      sig.push_back(sigma_at(r->theta_hat, d));
      lam.push_back(lambda_at(r->theta_hat, d));
    }
    report.durations.push_back(
        DurationSummary{d, summarize(sig, truth.sigma()), summarize(lam, lambda * static_cast<double>(d))});
  }
  return report;
}

}  // namespace msegpd
