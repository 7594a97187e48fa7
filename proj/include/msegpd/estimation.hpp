#pragma once

// Maximum composite-likelihood estimation of the multiscale model under
// monotonicity of sigma_d and lambda_d on the duration grid, and block
// bootstrap replicates of the fit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msegpd/compound.hpp"
#include "msegpd/distributions.hpp"
#include "msegpd/errors.hpp"
#include "msegpd/ingestion.hpp"
#include "msegpd/multiscale_model.hpp"
#include "msegpd/optimizer.hpp"
#include "msegpd/parallel.hpp"

namespace msegpd {

struct FitOptions {
  std::size_t p = 3;
  std::size_t q = 3;
  std::optional<MultiscaleTheta> init;
  std::size_t max_iters = 4000;  // per simplex run
  double penalty_weight = 1e3;   // initial weight of the monotonicity penalty
  double tol = 1e-6;             // objective tolerance (log-likelihood units)
  std::size_t restarts = 1;      // starting points; the first is the initializer itself
  std::uint64_t seed = 1;        // jitter of additional starting points
  double h = kDefaultLatticeStep;
  std::size_t max_points = kDefaultMaxPoints;

  void validate() const {
    if (max_iters == 0) throw DomainError("FitOptions: max_iters must be > 0");
    if (!(tol > 0.0)) throw DomainError("FitOptions: tol must be > 0");
    if (restarts < 1) throw DomainError("FitOptions: restarts must be >= 1");
    if (!(penalty_weight > 0.0)) throw DomainError("FitOptions: penalty_weight must be > 0");
    if (!(h > 0.0)) throw DomainError("FitOptions: lattice step must be > 0");
  }
};

struct DurationDiagnostic {
  int d = 0;
  double sigma = 0.0;
  double lambda = 0.0;
  std::size_t n = 0;
  double mean_loglik = 0.0;
};

struct FitResult {
  MultiscaleTheta theta_hat;
  double objective = 0.0;  // composite log-likelihood at theta_hat
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool monotone = false;
  double penalty_weight = 0.0;  // weight in force when the search stopped
  std::vector<DurationDiagnostic> per_duration_diag;
  std::vector<std::string> warnings;
};

// Optimizer coordinates. Polynomial coefficients are rescaled by powers of
// L = log(max duration) so every basis function (log d / L)^i lies in
// [0, 1]; kappa and xi enter through their logarithms.
class FreeCoordinates {
 public:
  FreeCoordinates(std::size_t p, std::size_t q, double log_scale) : p_(p), q_(q), scale_(log_scale) {
    if (!(scale_ > 0.0)) scale_ = 1.0;
  }

  static FreeCoordinates for_grid(std::size_t p, std::size_t q, const DurationGrid& grid) {
    const double log_max = std::log(static_cast<double>(grid.durations().back()));
    return FreeCoordinates(p, q, log_max > 0.0 ? log_max : 1.0);
  }

  [[nodiscard]] std::size_t size() const noexcept { return p_ + q_ + 4; }
  [[nodiscard]] double log_scale() const noexcept { return scale_; }

  [[nodiscard]] std::vector<double> to_free(const MultiscaleTheta& t) const {
    if (t.p() != p_ || t.q() != q_) throw PreconditionError("FreeCoordinates: degree mismatch");
    std::vector<double> x;
    x.reserve(size());
    double pw = 1.0;
    for (double c : t.s()) {
      x.push_back(c * pw);
      pw *= scale_;
    }
    x.push_back(std::log(t.kappa()));
    x.push_back(std::log(t.xi()));
    pw = 1.0;
    for (double c : t.l()) {
      x.push_back(c * pw);
      pw *= scale_;
    }
    return x;
  }

  [[nodiscard]] MultiscaleTheta from_free(std::span<const double> x) const {
    if (x.size() != size()) throw PreconditionError("FreeCoordinates: wrong vector length");
    std::vector<double> s(p_ + 1), l(q_ + 1);
    double pw = 1.0;
    for (std::size_t i = 0; i <= p_; ++i) {
      s[i] = x[i] / pw;
      pw *= scale_;
    }
    pw = 1.0;
    for (std::size_t j = 0; j <= q_; ++j) {
      l[j] = x[p_ + 3 + j] / pw;
      pw *= scale_;
    }
    return MultiscaleTheta(std::move(s), std::exp(x[p_ + 1]), std::exp(x[p_ + 2]), std::move(l));
  }

 private:
  std::size_t p_;
  std::size_t q_;
  double scale_;
};

// Negative composite log-likelihood plus weight * (total monotonicity
// violation on the grid), as a function of free coordinates.
class PenalizedObjective {
 public:
  PenalizedObjective(const CompositeLikelihood& cl, const DurationGrid& grid, FreeCoordinates coords)
      : cl_(&cl), durations_(grid.durations().begin(), grid.durations().end()), coords_(coords) {}

  [[nodiscard]] double operator()(std::span<const double> x, double weight) const {
    try {
      const auto theta = coords_.from_free(x);
      for (int d : {durations_.front(), durations_.back()}) {
        const double ls = log_sigma_at(theta, d);
        const double ll = log_lambda_at(theta, d);
        if (!(std::abs(ls) < 50.0) || !(std::abs(ll) < 50.0)) return std::numeric_limits<double>::infinity();
      }
      const double v = -(*cl_)(theta) + weight * monotonicity_violation(theta, durations_);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  [[nodiscard]] const FreeCoordinates& coordinates() const noexcept { return coords_; }
  [[nodiscard]] std::span<const int> durations() const noexcept { return durations_; }

 private:
  const CompositeLikelihood* cl_;
  std::vector<int> durations_;
  FreeCoordinates coords_;
};

namespace detail {

inline double unit_seed_mean_mc(double kappa, double xi) {
  // Fixed stream: the initializer is deterministic.
  const EgpdParams unit(1.0, kappa, xi);
  std::mt19937_64 gen(0x5eed);
  constexpr int kDraws = 100000;
  double acc = 0.0;
  for (int i = 0; i < kDraws; ++i) acc += egpd_draw(unit, gen);
  return acc / kDraws;
}

inline std::vector<double> padded(std::span<const double> c, std::size_t len, const char* what) {
  if (c.size() > len) throw PreconditionError(std::string("initial theta has a higher ") + what + " degree than requested");
  std::vector<double> out(c.begin(), c.end());
  out.resize(len, 0.0);
  return out;
}

}  // namespace detail

// xi = 0.15, kappa = 0.5, lambda_d = lambda_1 * d with lambda_1 matched to the
// wet fraction at the finest duration, constant sigma matched to the mean
// positive amount there.
[[nodiscard]] inline MultiscaleTheta default_init(std::span<const AggregatedSample> samples, const DurationGrid& grid,
                                                  std::size_t p = 3, std::size_t q = 3) {
  (void)grid;
  if (samples.empty()) throw PreconditionError("default_init: no samples");
  const AggregatedSample* finest = nullptr;
  for (const auto& s : samples) {
    if (s.values.empty()) continue;
    if (finest == nullptr || s.d < finest->d) finest = &s;
  }
  if (finest == nullptr) throw DataError("default_init: no positive amounts at any duration");
  constexpr double kXi = 0.15;
  constexpr double kKappa = 0.5;

  double wet = finest->n_obs_per_month > 0.0 ? finest->n_positive_per_month / finest->n_obs_per_month : 0.5;
  wet = std::clamp(wet, 1e-9, 1.0 - 1e-9);
  const double lambda_finest = -std::log1p(-wet);
  const double lambda_1 = lambda_finest / static_cast<double>(finest->d);

  double mean = 0.0;
  for (double v : finest->values) mean += v;
  mean /= static_cast<double>(finest->values.size());
  const double sigma = mean / detail::unit_seed_mean_mc(kKappa, kXi);

  std::vector<double> s(p + 1, 0.0);
  std::vector<double> l(q + 1, 0.0);
  s[0] = std::log(sigma);
  l[0] = std::log(lambda_1);
  if (q >= 1) l[1] = 1.0;
  return MultiscaleTheta(std::move(s), kKappa, kXi, std::move(l));
}

[[nodiscard]] inline FitResult fit_mcle(std::span<const AggregatedSample> samples, const DurationGrid& grid,
                                        const FitOptions& opts = {}) {
  opts.validate();
  if (samples.empty()) throw PreconditionError("fit_mcle: no samples");
  std::vector<std::string> warnings;
  std::vector<AggregatedSample> used;
  for (const auto& s : samples) {
    if (!grid.contains(s.d)) throw PreconditionError("fit_mcle: duration " + std::to_string(s.d) + " is not on the grid");
    if (s.values.empty()) {
      warnings.push_back("duration " + std::to_string(s.d) + " has no positive amounts; dropped");
      continue;
    }
    used.push_back(s);
  }
  if (used.empty()) throw DataError("fit_mcle: no duration has positive amounts");

  const CompositeLikelihood cl(used, opts.h, opts.max_points);
  const auto coords = FreeCoordinates::for_grid(opts.p, opts.q, grid);
  const PenalizedObjective objective(cl, grid, coords);

  MultiscaleTheta init = opts.init ? MultiscaleTheta(detail::padded(opts.init->s(), opts.p + 1, "sigma"),
                                                     opts.init->kappa(), opts.init->xi(),
                                                     detail::padded(opts.init->l(), opts.q + 1, "lambda"))
                                   : default_init(used, grid, opts.p, opts.q);
  const auto x_init = coords.to_free(init);

  struct Candidate {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    bool feasible = false;
    bool converged = false;
    double weight = 0.0;
  };
  Candidate best;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;

  constexpr int kMaxEscalations = 6;
  constexpr int kMaxSimplexRuns = 6;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    auto x = x_init;
    if (r > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                        static_cast<std::uint32_t>(r)};
      std::mt19937_64 gen(seq);
      std::normal_distribution<double> jitter(0.0, 0.25);
      for (double& v : x) v += jitter(gen);
    }
    double weight = opts.penalty_weight;
    Candidate cand;
    for (int esc = 0; esc <= kMaxEscalations; ++esc) {
      auto f = [&](std::span<const double> z) { return objective(z, weight); };
      optim::NelderMeadOptions nm;
      nm.max_iterations = opts.max_iters;
      nm.f_tol = opts.tol;
      nm.x_tol = 1e-5;
      nm.initial_step.assign(x.size(), 0.2);
      double fx = f(x);
      bool nm_converged = false;
      for (int run = 0; run < kMaxSimplexRuns; ++run) {
        auto res = optim::nelder_mead(f, x, nm);
        iterations += res.iterations;
        evaluations += res.evaluations;
        nm_converged = res.converged;
        const double gain = fx - res.f;
        if (res.f < fx) {
          x = res.x;
          fx = res.f;
        }
        if (!(gain > opts.tol)) break;
        nm.initial_step.assign(x.size(), 0.05);
      }
      optim::CompassOptions co;
      co.min_improvement = opts.tol;
      auto polish = optim::compass_search(f, x, co);
      iterations += polish.iterations;
      evaluations += polish.evaluations;
      x = polish.x;
      fx = polish.f;

      const auto theta = coords.from_free(x);
      const bool feasible = monotonicity_check(theta, grid).monotone;
      cand = Candidate{x, fx, feasible, nm_converged && polish.converged, weight};
      if (feasible) break;
      weight *= 10.0;
    }
    const bool better = (cand.feasible && !best.feasible) || (cand.feasible == best.feasible && cand.f < best.f);
    if (r == 0 || better) best = cand;
  }

  const auto theta_hat = coords.from_free(best.x);
  FitResult out{.theta_hat = theta_hat};
  out.objective = cl(theta_hat);
  out.monotone = monotonicity_check(theta_hat, grid).monotone;
  out.converged = best.converged && out.monotone && std::isfinite(out.objective);
  out.iterations = iterations;
  out.evaluations = evaluations;
  out.penalty_weight = best.weight;
  out.warnings = std::move(warnings);
  for (const auto& t : cl.terms(theta_hat)) {
    out.per_duration_diag.push_back(
        DurationDiagnostic{t.d, t.sigma, t.lambda, t.n, t.n > 0 ? t.loglik / static_cast<double>(t.n) : 0.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block bootstrap

struct BootstrapReplicate {
  MultiscaleTheta theta;
  double objective = 0.0;
  bool converged = false;
  bool monotone = false;
};

struct BootstrapResult {
  std::vector<BootstrapReplicate> replicates;
  double block_length_days = 14.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t usable() const {
    return static_cast<std::size_t>(std::count_if(replicates.begin(), replicates.end(),
                                                  [](const auto& r) { return r.converged && r.monotone; }));
  }
};

// Per-replicate generator derived from (seed, replicate index).
[[nodiscard]] inline std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Series of the same shape (segments and timestamps) as `series`, filled with
// contiguous blocks drawn with replacement. Blocks never straddle a segment
// boundary; the last block of each segment is truncated.
[[nodiscard]] inline TimeSeries resample_blocks(const TimeSeries& series, std::size_t block_steps, std::mt19937_64& gen) {
  if (block_steps == 0) throw DomainError("resample_blocks: block length must be > 0");
  std::vector<std::size_t> starts_before;  // cumulative count of admissible block starts per segment
  std::size_t total = 0;
  for (const auto& seg : series.segments()) {
    starts_before.push_back(total);
    if (seg.length >= block_steps) total += seg.length - block_steps + 1;
  }
  if (total == 0) throw PreconditionError("resample_blocks: series shorter than one block");
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const auto segments = series.segments();
  const auto vals = series.values();
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& seg : segments) {
    std::size_t filled = 0;
    while (filled < seg.length) {
      const std::size_t k = pick(gen);
      const auto it = std::upper_bound(starts_before.begin(), starts_before.end(), k);
      const auto si = static_cast<std::size_t>(std::distance(starts_before.begin(), it)) - 1;
      const std::size_t first = segments[si].offset + (k - starts_before[si]);
      const std::size_t n = std::min(block_steps, seg.length - filled);
      out.insert(out.end(), vals.begin() + static_cast<std::ptrdiff_t>(first),
                 vals.begin() + static_cast<std::ptrdiff_t>(first + n));
      filled += n;
    }
  }
  return TimeSeries(series.step_seconds(), series.gauge_step(), std::move(out),
                    std::vector<Segment>(segments.begin(), segments.end()));
}

[[nodiscard]] inline BootstrapResult block_bootstrap(const TimeSeries& series, const DurationGrid& grid,
                                                     const FitOptions& opts, std::size_t replicates,
                                                     double block_days = 14.0, std::uint64_t seed = 1,
                                                     std::size_t workers = 1) {
  if (!(block_days > 0.0)) throw DomainError("block_bootstrap: block length must be > 0");
  const auto block_steps =
      static_cast<std::size_t>(std::llround(block_days * 86400.0 / static_cast<double>(series.step_seconds())));
  if (block_steps == 0) throw DomainError("block_bootstrap: block shorter than one step");
  bool fits = false;
  for (const auto& seg : series.segments()) fits = fits || seg.length >= block_steps;
  if (!fits) throw PreconditionError("block_bootstrap: series shorter than one block");

  std::vector<std::optional<BootstrapReplicate>> slots(replicates);
  parallel_for(replicates, workers, [&](std::size_t b) {
    auto gen = replicate_stream(seed, b);
    const auto resampled = resample_blocks(series, block_steps, gen);
    const auto data = build_dataset(resampled, grid);
    try {
      const auto fit = fit_mcle(data, grid, opts);
      slots[b] = BootstrapReplicate{fit.theta_hat, fit.objective, fit.converged, fit.monotone};
    } catch (const DataError&) {
      auto theta = opts.init ? *opts.init : MultiscaleTheta(std::vector<double>(opts.p + 1, 0.0), 1.0, 1.0,
                                                            std::vector<double>(opts.q + 1, 0.0));
      slots[b] = BootstrapReplicate{theta, -std::numeric_limits<double>::infinity(), false, false};
    }
  });
  BootstrapResult out;
  out.block_length_days = block_days;
  out.seed = seed;
  out.replicates.reserve(replicates);
  for (auto& s : slots) out.replicates.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap bands

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t replicates_used = 0;
};

inline constexpr std::size_t kMinBandReplicates = 20;

// Inverse-ECDF quantile x_(ceil(n p)) of sorted data.
[[nodiscard]] inline double empirical_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw PreconditionError("empirical_quantile: no data");
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(n * prob - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

[[nodiscard]] inline Interval empirical_interval(std::vector<double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("band: level must be in (0, 1)");
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - level;
  return Interval{empirical_quantile(values, alpha / 2.0), empirical_quantile(values, 1.0 - alpha / 2.0),
                  values.size()};
}

// Pointwise intervals of a vector-valued derived quantity across the
// converged, monotone replicates.
[[nodiscard]] inline std::vector<Interval> band(const BootstrapResult& result,
                                                const std::function<std::vector<double>(const MultiscaleTheta&)>& select,
                                                double level = 0.95) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : result.replicates) {
    if (r.converged && r.monotone) rows.push_back(select(r.theta));
  }
  if (rows.size() < kMinBandReplicates) {
    throw DataError("band: only " + std::to_string(rows.size()) + " usable replicates (need " +
                    std::to_string(kMinBandReplicates) + ")");
  }
  const std::size_t width = rows.front().size();
  std::vector<Interval> out;
  out.reserve(width);
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<double> column;
    column.reserve(rows.size());
    for (const auto& row : rows) column.push_back(row.at(k));
    out.push_back(empirical_interval(std::move(column), level));
  }
  return out;
}

[[nodiscard]] inline Interval band(const BootstrapResult& result, const std::function<double(const MultiscaleTheta&)>& select,
                                   double level = 0.95) {
  return band(result, [&](const MultiscaleTheta& t) { return std::vector<double>{select(t)}; }, level).front();
}

}  // namespace msegpd
