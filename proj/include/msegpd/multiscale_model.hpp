#pragma once

// Multiscale compound Poisson-EGPD model. At aggregation scale d (in base
// steps) the positive amount follows the positive part of a compound
// Poisson-EGPD with shapes (kappa, xi) shared by all scales and
//
//   log sigma_d  = sum_i s_i (log d)^i,    log lambda_d = sum_j l_j (log d)^j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msegpd/compound.hpp"
#include "msegpd/distributions.hpp"
#include "msegpd/errors.hpp"

namespace msegpd {

class MultiscaleTheta {
 public:
  MultiscaleTheta(std::vector<double> s, double kappa, double xi, std::vector<double> l)
      : s_(std::move(s)), kappa_(kappa), xi_(xi), l_(std::move(l)) {
    if (s_.empty() || l_.empty()) throw DomainError("MultiscaleTheta: polynomial degrees must be >= 0");
    if (!(kappa_ > 0.0) || !std::isfinite(kappa_)) throw DomainError("MultiscaleTheta: kappa must be > 0");
    if (!(xi_ > 0.0) || !std::isfinite(xi_)) throw DomainError("MultiscaleTheta: xi must be > 0");
    for (double c : s_)
      if (!std::isfinite(c)) throw DomainError("MultiscaleTheta: non-finite sigma coefficient");
    for (double c : l_)
      if (!std::isfinite(c)) throw DomainError("MultiscaleTheta: non-finite lambda coefficient");
  }

  [[nodiscard]] std::span<const double> s() const noexcept { return s_; }
  [[nodiscard]] std::span<const double> l() const noexcept { return l_; }
  [[nodiscard]] double kappa() const noexcept { return kappa_; }
  [[nodiscard]] double xi() const noexcept { return xi_; }
  [[nodiscard]] std::size_t p() const noexcept { return s_.size() - 1; }
  [[nodiscard]] std::size_t q() const noexcept { return l_.size() - 1; }
  [[nodiscard]] std::size_t parameter_count() const noexcept { return s_.size() + l_.size() + 2; }

  friend bool operator==(const MultiscaleTheta&, const MultiscaleTheta&) = default;

 private:
  std::vector<double> s_;
  double kappa_;
  double xi_;
  std::vector<double> l_;
};

class DurationGrid {
 public:
  explicit DurationGrid(std::vector<int> durations, double base_step_minutes = 6.0)
      : durations_(std::move(durations)), base_step_minutes_(base_step_minutes) {
    if (durations_.empty()) throw DomainError("DurationGrid: no durations");
    if (!(base_step_minutes_ > 0.0)) throw DomainError("DurationGrid: base step must be > 0");
    if (durations_.front() < 1) throw DomainError("DurationGrid: durations must be >= 1");
    for (std::size_t i = 1; i < durations_.size(); ++i) {
      if (durations_[i] <= durations_[i - 1]) throw DomainError("DurationGrid: durations must be strictly increasing");
    }
  }

  // {1..10} u {20, 30, ..., 240} u {270, 300, ..., 720}: 49 durations.
  [[nodiscard]] static DurationGrid standard(double base_step_minutes = 6.0) {
    std::vector<int> d;
    for (int i = 1; i <= 10; ++i) d.push_back(i);
    for (int i = 20; i <= 240; i += 10) d.push_back(i);
    for (int i = 270; i <= 720; i += 30) d.push_back(i);
    return DurationGrid(std::move(d), base_step_minutes);
  }

  [[nodiscard]] std::span<const int> durations() const noexcept { return durations_; }
  [[nodiscard]] double base_step_minutes() const noexcept { return base_step_minutes_; }
  [[nodiscard]] std::size_t size() const noexcept { return durations_.size(); }
  [[nodiscard]] bool contains(int d) const { return std::binary_search(durations_.begin(), durations_.end(), d); }

 private:
  std::vector<int> durations_;
  double base_step_minutes_;
};

// Positive amounts at one aggregation scale.
struct AggregatedSample {
  int d = 1;
  std::vector<double> values;     // mm, lattice aligned
  double n_obs_per_month = 0.0;   // retained windows (wet and dry) per month of record
  double n_positive_per_month = 0.0;  // retained wet windows per month of record
};

// ---------------------------------------------------------------------------

namespace detail {

inline double log_polynomial(std::span<const double> coef, int d) {
  if (d < 1) throw DomainError("duration must be >= 1");
  const double x = std::log(static_cast<double>(d));
  double acc = 0.0;
  for (std::size_t i = coef.size(); i-- > 0;) acc = acc * x + coef[i];
  return acc;
}

}  // namespace detail

[[nodiscard]] inline double log_sigma_at(const MultiscaleTheta& t, int d) { return detail::log_polynomial(t.s(), d); }
[[nodiscard]] inline double log_lambda_at(const MultiscaleTheta& t, int d) { return detail::log_polynomial(t.l(), d); }
[[nodiscard]] inline double sigma_at(const MultiscaleTheta& t, int d) { return std::exp(log_sigma_at(t, d)); }
[[nodiscard]] inline double lambda_at(const MultiscaleTheta& t, int d) { return std::exp(log_lambda_at(t, d)); }

[[nodiscard]] inline CompoundParams compound_at(const MultiscaleTheta& t, int d) {
  return CompoundParams(EgpdParams(sigma_at(t, d), t.kappa(), t.xi()), lambda_at(t, d));
}

struct MonotonicityViolation {
  int d = 0;
  int d_next = 0;
  std::string function;  // "sigma" or "lambda"
};

struct MonotonicityReport {
  bool monotone = true;
  std::optional<MonotonicityViolation> first_violation;
  explicit operator bool() const noexcept { return monotone; }
};

// sigma_d and lambda_d nondecreasing over consecutive durations (compared on the log scale).
[[nodiscard]] inline MonotonicityReport monotonicity_check(const MultiscaleTheta& t, std::span<const int> durations) {
  MonotonicityReport report;
  for (std::size_t i = 1; i < durations.size(); ++i) {
    const int a = durations[i - 1];
    const int b = durations[i];
    if (log_sigma_at(t, b) < log_sigma_at(t, a)) {
      report.monotone = false;
      report.first_violation = MonotonicityViolation{a, b, "sigma"};
      return report;
    }
    if (log_lambda_at(t, b) < log_lambda_at(t, a)) {
      report.monotone = false;
      report.first_violation = MonotonicityViolation{a, b, "lambda"};
      return report;
    }
  }
  return report;
}

[[nodiscard]] inline MonotonicityReport monotonicity_check(const MultiscaleTheta& t, const DurationGrid& grid) {
  return monotonicity_check(t, grid.durations());
}

// Sum of the log-scale decreases of sigma_d and lambda_d over consecutive durations.
[[nodiscard]] inline double monotonicity_violation(const MultiscaleTheta& t, std::span<const int> durations) {
  double total = 0.0;
  for (std::size_t i = 1; i < durations.size(); ++i) {
    total += std::max(0.0, log_sigma_at(t, durations[i - 1]) - log_sigma_at(t, durations[i]));
    total += std::max(0.0, log_lambda_at(t, durations[i - 1]) - log_lambda_at(t, durations[i]));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Composite likelihood

struct DurationTerm {
  int d = 0;
  double sigma = 0.0;
  double lambda = 0.0;
  std::size_t n = 0;
  double loglik = 0.0;
};

// Composite log-likelihood over a fixed data set. Each sample is turned into a
// histogram over lattice indices once; an evaluation builds one positive-part
// pmf per duration, materialized exactly up to the largest observation.
class CompositeLikelihood {
 public:
  CompositeLikelihood(std::span<const AggregatedSample> samples, double h, std::size_t max_points = kDefaultMaxPoints)
      : h_(h), max_points_(max_points) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("composite likelihood: lattice step must be > 0");
    for (const auto& s : samples) {
      for (const auto& existing : terms_) {
        if (existing.d == s.d) throw PreconditionError("composite likelihood: duration " + std::to_string(s.d) + " appears twice");
      }
      Histogram hist;
      hist.d = s.d;
      std::vector<std::size_t> idx;
      idx.reserve(s.values.size());
      for (double v : s.values) {
        try {
          idx.push_back(lattice_index(v, h));
        } catch (const DataError& e) {
          throw DataError("duration " + std::to_string(s.d) + ": " + e.what());
        }
      }
      std::sort(idx.begin(), idx.end());
      for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && idx[j] == idx[i]) ++j;
        hist.bins.emplace_back(idx[i], static_cast<double>(j - i));
        i = j;
      }
      hist.n = idx.size();
      terms_.push_back(std::move(hist));
    }
  }

  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] std::size_t duration_count() const noexcept { return terms_.size(); }
  [[nodiscard]] std::size_t observation_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : terms_) n += t.n;
    return n;
  }

  [[nodiscard]] std::vector<DurationTerm> terms(const MultiscaleTheta& theta) const {
    std::vector<DurationTerm> out;
    out.reserve(terms_.size());
    for (const auto& hist : terms_) out.push_back(evaluate(theta, hist));
    return out;
  }

  [[nodiscard]] double operator()(const MultiscaleTheta& theta) const {
    double total = 0.0;
    for (const auto& hist : terms_) total += evaluate(theta, hist).loglik;
    return total;
  }

 private:
  struct Histogram {
    int d = 0;
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, double>> bins;  // (lattice index, count)
  };

  DurationTerm evaluate(const MultiscaleTheta& theta, const Histogram& hist) const {
    DurationTerm term;
    term.d = hist.d;
    term.n = hist.n;
    term.sigma = sigma_at(theta, hist.d);
    term.lambda = lambda_at(theta, hist.d);
    if (hist.bins.empty()) return term;
    const std::size_t points = std::min(hist.bins.back().first + 1, max_points_);
    const CompoundParams cp(EgpdParams(term.sigma, theta.kappa(), theta.xi()), term.lambda);
    const auto pmf = positive_compound_pmf(cp, h_, Support::points(points));
    double acc = 0.0;
    for (const auto& [index, count] : hist.bins) acc += count * log_mass_floored(pmf, index);
    if (!std::isfinite(acc)) {
      throw DataError("composite likelihood is not finite at duration " + std::to_string(hist.d));
    }
    term.loglik = acc;
    return term;
  }

  double h_;
  std::size_t max_points_;
  std::vector<Histogram> terms_;
};

[[nodiscard]] inline double composite_loglik(const MultiscaleTheta& theta, std::span<const AggregatedSample> samples,
                                             double h = kDefaultLatticeStep, std::size_t max_points = kDefaultMaxPoints) {
  return CompositeLikelihood(samples, h, max_points)(theta);
}

}  // namespace msegpd
