#pragma once

// Compound Poisson-EGPD laws on the lattice {0, h, 2h, ...}.
//
// The per-event EGPD is projected onto the lattice by rounding amounts up to
// the next lattice point, f_j = F(jh) - F((j-1)h) for j >= 1. The Poisson
// compound of that seed is evaluated exactly (up to floating point) by the
// Panjer recursion
//
//   p_0 = exp(-lambda),   p_a = (lambda / a) * sum_{j=1..a} j f_j p_{a-j},
//
// and its positive part is obtained by removing the atom at zero and dividing
// by 1 - exp(-lambda).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msegpd/distributions.hpp"
#include "msegpd/errors.hpp"

namespace msegpd {

inline constexpr double kDefaultLatticeStep = 0.2;
inline constexpr double kDefaultCoverage = 1.0 - 1e-12;
// Upper bound on materialized lattice points; Panjer is quadratic in this.
inline constexpr std::size_t kDefaultMaxPoints = std::size_t{1} << 16;
// Relative (to h) distance within which an amount counts as a lattice point.
inline constexpr double kLatticeAlignmentTolerance = 1e-6;

class CompoundParams {
 public:
  CompoundParams(EgpdParams seed, double lambda) : seed_(seed), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("CompoundParams: lambda must be > 0");
  }

  [[nodiscard]] const EgpdParams& seed() const noexcept { return seed_; }
  [[nodiscard]] double lambda() const noexcept { return lambda_; }

 private:
  EgpdParams seed_;
  double lambda_;
};

namespace detail {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

// Probability masses on {0, h, 2h, ...}, finitely truncated. The mass the
// truncation leaves out is reported as tail_mass_bound = max(0, 1 - sum).
class DiscretePmf {
 public:
  DiscretePmf(double h, std::vector<double> masses) : h_(h), masses_(std::move(masses)) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("DiscretePmf: lattice step must be > 0");
    cumulative_.reserve(masses_.size());
    detail::CompensatedSum acc;
    for (double m : masses_) {
      if (!(m >= 0.0)) throw DomainError("DiscretePmf: masses must be >= 0");
      acc.add(m);
      cumulative_.push_back(acc.value());
    }
    tail_mass_bound_ = std::max(0.0, 1.0 - acc.value());
  }

  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] std::size_t size() const noexcept { return masses_.size(); }
  [[nodiscard]] std::span<const double> masses() const noexcept { return masses_; }
  [[nodiscard]] double mass(std::size_t index) const noexcept {
    return index < masses_.size() ? masses_[index] : 0.0;
  }
  // P(X <= index * h) over the materialized support.
  [[nodiscard]] double cumulative(std::size_t index) const noexcept {
    if (cumulative_.empty()) return 0.0;
    return cumulative_[std::min(index, cumulative_.size() - 1)];
  }
  [[nodiscard]] double total_mass() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  [[nodiscard]] double tail_mass_bound() const noexcept { return tail_mass_bound_; }
  [[nodiscard]] double lattice_point(std::size_t index) const noexcept { return static_cast<double>(index) * h_; }

 private:
  double h_;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
  double tail_mass_bound_ = 1.0;
};

// ---------------------------------------------------------------------------
// Seed discretization

// Seed masses f_0..f_{n_points-1}; f_0 = 0. Differences are taken on the
// survival side once the cdf exceeds 1/2 to avoid cancellation.
[[nodiscard]] inline std::vector<double> seed_masses(const EgpdParams& p, double h, std::size_t n_points) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("seed_masses: lattice step must be > 0");
  std::vector<double> f(n_points, 0.0);
  double prev_cdf = 0.0;
  double prev_sf = 1.0;
  for (std::size_t j = 1; j < n_points; ++j) {
    const double y = static_cast<double>(j) * h;
    const double log_cdf = egpd_log_cdf(p, y);
    const double cdf = std::exp(log_cdf);
    const double sf = -std::expm1(log_cdf);
    f[j] = cdf < 0.5 ? cdf - prev_cdf : prev_sf - sf;
    if (f[j] < 0.0) f[j] = 0.0;
    prev_cdf = cdf;
    prev_sf = sf;
  }
  return f;
}

// Seed truncated at the smallest J with F(Jh) >= coverage.
[[nodiscard]] inline DiscretePmf discretize_seed(const EgpdParams& p, double h, double coverage = kDefaultCoverage,
                                                 std::size_t max_points = std::size_t{1} << 26) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("discretize_seed: lattice step must be > 0");
  if (!(coverage > 0.0 && coverage < 1.0)) throw DomainError("discretize_seed: coverage must be in (0, 1)");
  const double q = egpd_quantile(p, coverage);
  double j_real = std::ceil(q / h);
  if (!(j_real < static_cast<double>(max_points))) {
    throw InsufficientSupportError("discretize_seed: coverage " + std::to_string(coverage) + " needs more than " +
                                   std::to_string(max_points) + " lattice points");
  }
  auto last = static_cast<std::size_t>(std::max(1.0, j_real));
  // ceil() of a rounded quantile can land one step short.
  while (egpd_cdf(p, static_cast<double>(last) * h) < coverage) ++last;
  while (last > 1 && egpd_cdf(p, static_cast<double>(last - 1) * h) >= coverage) --last;
  return DiscretePmf(h, seed_masses(p, h, last + 1));
}

// ---------------------------------------------------------------------------
// Panjer recursion

namespace detail {

struct PanjerRun {
  std::vector<double> masses;
  bool reached_target = false;
};

// Runs the recursion for indices 0..max_points-1, stopping early once the
// cumulative mass reaches target (pass a value > 1 to disable). Seed entries
// past seed.size() are treated as zero.
//
// For lambda > 700 exp(-lambda) underflows, so the recursion runs on masses
// scaled by exp(lambda) * 2^-shift, rescaling by exact powers of two whenever
// they grow large; the recurrence is linear so scaling commutes with it.
inline PanjerRun panjer_run(std::span<const double> seed, double lambda, std::size_t max_points, double target) {
  PanjerRun run;
  if (max_points == 0) return run;
  const std::size_t seed_len = seed.size();
  std::vector<double> weight(seed_len, 0.0);  // lambda * j * f_j
  for (std::size_t j = 1; j < seed_len; ++j) weight[j] = lambda * static_cast<double>(j) * seed[j];

  const bool scaled = lambda > 700.0;
  constexpr int kRescaleExp = 900;
  const double rescale_threshold = std::ldexp(1.0, kRescaleExp);
  long shift = 0;  // actual = q * exp(-lambda) * 2^shift when scaled

  std::vector<double>& q = run.masses;
  q.reserve(std::min<std::size_t>(max_points, 4096));
  q.push_back(scaled ? 1.0 : std::exp(-lambda));

  auto actual = [&](double value) {
    if (!scaled) return value;
    if (value <= 0.0) return 0.0;
    return std::exp(std::log(value) - lambda + static_cast<double>(shift) * 0.6931471805599453);
  };

  CompensatedSum cum;
  cum.add(actual(q[0]));
  if (cum.value() >= target) {
    run.reached_target = true;
    return run;
  }
  for (std::size_t a = 1; a < max_points; ++a) {
    const std::size_t jmax = std::min(a, seed_len == 0 ? 0 : seed_len - 1);
    double acc = 0.0;
    const double* qa = q.data() + a;
    for (std::size_t j = 1; j <= jmax; ++j) acc += weight[j] * qa[-static_cast<std::ptrdiff_t>(j)];
    double value = acc / static_cast<double>(a);
    q.push_back(value);
    if (scaled && value > rescale_threshold) {
      for (double& x : q) x = std::ldexp(x, -kRescaleExp);
      shift += kRescaleExp;
      value = q.back();
    }
    cum.add(actual(value));
    if (cum.value() >= target) {
      run.reached_target = true;
      break;
    }
  }
  if (scaled) {
    for (double& x : q) x = actual(x);
  }
  return run;
}

inline void require_panjer_args(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("panjer: lambda must be > 0");
}

}  // namespace detail

// Full compound law (atom at zero included), support extended until the
// cumulative mass reaches coverage or max_points lattice points are used.
[[nodiscard]] inline DiscretePmf panjer(const DiscretePmf& seed, double lambda, double coverage = kDefaultCoverage,
                                        std::size_t max_points = kDefaultMaxPoints) {
  detail::require_panjer_args(lambda);
  if (!(coverage > 0.0 && coverage < 1.0)) throw DomainError("panjer: coverage must be in (0, 1)");
  if (seed.mass(0) != 0.0) throw PreconditionError("panjer: seed must carry no mass at zero");
  auto run = detail::panjer_run(seed.masses(), lambda, max_points, coverage);
  return DiscretePmf(seed.h(), std::move(run.masses));
}

// Full compound law on exactly n_points lattice points (no early stop).
[[nodiscard]] inline DiscretePmf panjer_points(const DiscretePmf& seed, double lambda, std::size_t n_points) {
  detail::require_panjer_args(lambda);
  if (seed.mass(0) != 0.0) throw PreconditionError("panjer: seed must carry no mass at zero");
  auto run = detail::panjer_run(seed.masses(), lambda, n_points, 2.0);
  return DiscretePmf(seed.h(), std::move(run.masses));
}

// P(N > 0) = 1 - exp(-lambda).
[[nodiscard]] inline double positive_probability(double lambda) { return -std::expm1(-lambda); }

// Drops the atom at zero and renormalizes by 1 / (1 - exp(-lambda)).
[[nodiscard]] inline DiscretePmf positive_part(const DiscretePmf& full, double lambda) {
  detail::require_panjer_args(lambda);
  const double p0 = std::exp(-lambda);
  if (full.size() == 0 || std::abs(full.mass(0) - p0) > 1e-12 * std::max(1.0, p0)) {
    throw PreconditionError("positive_part: mass at zero does not equal exp(-lambda)");
  }
  const double scale = 1.0 / positive_probability(lambda);
  std::vector<double> out(full.masses().begin(), full.masses().end());
  out[0] = 0.0;
  for (std::size_t a = 1; a < out.size(); ++a) out[a] *= scale;
  return DiscretePmf(full.h(), std::move(out));
}

// How far a compound pmf is materialized.
struct Support {
  // Exactly this many lattice points (index 0 .. points-1), no coverage target.
  static Support points(std::size_t n) { return Support{n, 0.0}; }
  // Until the positive part reaches this cumulative mass (capped by max_points).
  static Support coverage(double c, std::size_t max_points = kDefaultMaxPoints) { return Support{max_points, c}; }

  std::size_t max_points;
  double target;  // 0 when materializing a fixed number of points
};

namespace detail {

inline PanjerRun full_compound_run(const CompoundParams& cp, double h, const Support& support, double full_target) {
  if (full_target <= 0.0) {
    auto f = seed_masses(cp.seed(), h, support.max_points);
    return panjer_run(f, cp.lambda(), support.max_points, 2.0);
  }
  // The seed is materialized to the same length as the compound, so masses
  // are exact up to the last index; grow geometrically until the target mass
  // is reached.
  std::size_t n = std::min<std::size_t>(support.max_points, 256);
  for (;;) {
    auto f = seed_masses(cp.seed(), h, n);
    auto run = panjer_run(f, cp.lambda(), n, full_target);
    if (run.reached_target || n >= support.max_points) return run;
    n = std::min(support.max_points, 2 * n);
  }
}

}  // namespace detail

// Full compound Poisson-EGPD pmf, seed discretized to exactly the materialized length.
[[nodiscard]] inline DiscretePmf compound_pmf(const CompoundParams& cp, double h, const Support& support) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("compound_pmf: lattice step must be > 0");
  if (support.target > 0.0 && !(support.target < 1.0)) throw DomainError("compound_pmf: coverage must be < 1");
  auto run = detail::full_compound_run(cp, h, support, support.target);
  return DiscretePmf(h, std::move(run.masses));
}

// Positive part of the compound law; with a coverage support the target is
// met by the positive part itself.
[[nodiscard]] inline DiscretePmf positive_compound_pmf(const CompoundParams& cp, double h, const Support& support) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("positive_compound_pmf: lattice step must be > 0");
  double full_target = 0.0;
  if (support.target > 0.0) {
    if (!(support.target < 1.0)) throw DomainError("positive_compound_pmf: coverage must be < 1");
    full_target = 1.0 - (1.0 - support.target) * positive_probability(cp.lambda());
  }
  auto run = detail::full_compound_run(cp, h, support, full_target);
  return positive_part(DiscretePmf(h, std::move(run.masses)), cp.lambda());
}

// ---------------------------------------------------------------------------
// Queries

[[nodiscard]] inline double compound_cdf(const DiscretePmf& pmf, double y) {
  if (!(y >= 0.0)) throw DomainError("compound_cdf: argument must be >= 0");
  if (pmf.size() == 0) return 0.0;
  const double x = y / pmf.h();
  // Right-continuous: a point within alignment tolerance below a lattice point counts as on it.
  const double idx = std::floor(x + kLatticeAlignmentTolerance);
  if (idx >= static_cast<double>(pmf.size() - 1)) return pmf.total_mass();
  return pmf.cumulative(static_cast<std::size_t>(idx));
}

// Smallest supported lattice point y with cdf(y) >= u.
[[nodiscard]] inline double compound_quantile(const DiscretePmf& pmf, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("compound_quantile: probability must be in [0, 1)");
  if (pmf.size() == 0 || u > pmf.total_mass()) {
    throw InsufficientSupportError("compound_quantile: order " + std::to_string(u) +
                                   " exceeds the materialized mass " + std::to_string(pmf.total_mass()) +
                                   "; increase coverage");
  }
  std::size_t lo = 0;
  std::size_t hi = pmf.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (pmf.cumulative(mid) >= u) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  while (pmf.mass(lo) == 0.0 && lo + 1 < pmf.size()) ++lo;
  return pmf.lattice_point(lo);
}

// Lattice index of a positive amount; throws DataError when the amount is not a lattice point.
[[nodiscard]] inline std::size_t lattice_index(double value, double h) {
  const double x = value / h;
  const double r = std::round(x);
  if (!(value > 0.0) || !std::isfinite(value) || r < 1.0 || std::abs(x - r) > kLatticeAlignmentTolerance) {
    throw DataError("value " + std::to_string(value) + " is not a positive multiple of the lattice step " +
                    std::to_string(h));
  }
  return static_cast<std::size_t>(r);
}

// Mass at a lattice index, floored so that it stays finite: indices past the
// materialized support get the tail bound, underflowed masses the smallest
// subnormal.
[[nodiscard]] inline double log_mass_floored(const DiscretePmf& pmf, std::size_t index) {
  constexpr double kFloor = std::numeric_limits<double>::denorm_min();
  const double m = index < pmf.size() ? pmf.mass(index) : pmf.tail_mass_bound();
  return std::log(std::max(m, kFloor));
}

[[nodiscard]] inline double log_pmf_at(const DiscretePmf& pmf, double value) {
  return log_mass_floored(pmf, lattice_index(value, pmf.h()));
}

}  // namespace msegpd
