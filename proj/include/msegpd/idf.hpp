#pragma once

// Return levels and IDF tables from a fitted multiscale model.
//
// The T-month return level at duration d is the quantile of order
// 1 - 1/(n_d T) of the positive amount A_d, n_d being the number of wet
// windows per month at that duration, i.e. the level exceeded on average once
// every T months. Levels are lattice points (no interpolation).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msegpd/compound.hpp"
#include "msegpd/errors.hpp"
#include "msegpd/multiscale_model.hpp"

namespace msegpd {

inline constexpr double kDaysPerMonth = 30.4375;
inline constexpr double kIdfCoverage = 1.0 - 1e-10;

namespace detail {

// Materialization target that resolves order u despite rounding in the
// cumulative sums.
[[nodiscard]] inline Support resolving(double u) { return Support::coverage(1.0 - 0.5 * (1.0 - u)); }

}  // namespace detail

[[nodiscard]] inline double quantile_order(double n_per_month, double t_months) {
  if (!(t_months > 0.0)) throw DomainError("return period must be > 0");
  if (!(n_per_month > 0.0)) throw DomainError("observation rate must be > 0");
  const double order = 1.0 - 1.0 / (n_per_month * t_months);
  if (!(order > 0.0 && order < 1.0)) {
    throw DomainError("quantile order 1 - 1/(n_d T) = " + std::to_string(order) + " is outside (0, 1)");
  }
  return order;
}

// Wet windows per month implied by the model for a fully observed record.
[[nodiscard]] inline double model_positive_rate(const MultiscaleTheta& theta, int d, double base_step_minutes = 6.0) {
  const double windows = kDaysPerMonth * 1440.0 / base_step_minutes / static_cast<double>(d);
  return windows * positive_probability(lambda_at(theta, d));
}

[[nodiscard]] inline double return_level(const MultiscaleTheta& theta, int d, double t_months, double n_per_month,
                                         double h = kDefaultLatticeStep, double coverage = kIdfCoverage) {
  const double order = quantile_order(n_per_month, t_months);
  if (order > coverage) {
    throw InsufficientSupportError("order " + std::to_string(order) + " exceeds coverage " + std::to_string(coverage) +
                                   "; increase coverage");
  }
  const auto pmf = positive_compound_pmf(compound_at(theta, d), h, detail::resolving(order));
  return compound_quantile(pmf, order);
}

struct IdfQuery {
  std::vector<int> durations;
  std::vector<double> return_periods;  // months
  // Wet windows per month by duration; durations absent from the map use the model rate.
  std::map<int, double> n_obs_per_month;
  double base_step_minutes = 6.0;

  [[nodiscard]] double rate(const MultiscaleTheta& theta, int d) const {
    const auto it = n_obs_per_month.find(d);
    return it != n_obs_per_month.end() ? it->second : model_positive_rate(theta, d, base_step_minutes);
  }
};

struct IdfTable {
  std::vector<int> durations;
  std::vector<double> return_periods;
  std::vector<double> rates;                // n_d used per duration
  std::vector<std::vector<double>> levels;  // [duration][period], mm
};

[[nodiscard]] inline std::vector<int> sorted_unique(std::vector<int> d) {
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  return d;
}

[[nodiscard]] inline IdfTable idf_table(const MultiscaleTheta& theta, const IdfQuery& query,
                                        double h = kDefaultLatticeStep, double coverage = kIdfCoverage) {
  for (int d : query.durations)
    if (d < 1) throw DomainError("idf_table: durations must be >= 1");
  for (double t : query.return_periods)
    if (!(t > 0.0)) throw DomainError("idf_table: return periods must be > 0");
  const auto check = monotonicity_check(theta, sorted_unique(query.durations));
  if (!check.monotone) {
    const auto& v = *check.first_violation;
    throw PreconditionError("idf_table: " + v.function + "_d decreases between d=" + std::to_string(v.d) +
                            " and d=" + std::to_string(v.d_next));
  }
  IdfTable table;
  table.durations = query.durations;
  table.return_periods = query.return_periods;
  for (int d : query.durations) {
    const double n = query.rate(theta, d);
    table.rates.push_back(n);
    std::vector<double> orders;
    double max_order = 0.0;
    for (double t : query.return_periods) {
      orders.push_back(quantile_order(n, t));
      max_order = std::max(max_order, orders.back());
    }
    std::vector<double> row;
    if (!orders.empty()) {
      if (max_order > coverage) {
        throw InsufficientSupportError("idf_table: order " + std::to_string(max_order) + " at d=" + std::to_string(d) +
                                       " exceeds coverage; increase coverage");
      }
      const auto pmf = positive_compound_pmf(compound_at(theta, d), h, detail::resolving(max_order));
      for (double u : orders) row.push_back(compound_quantile(pmf, u));
    }
    table.levels.push_back(std::move(row));
  }
  return table;
}

struct NonCrossingReport {
  bool passed = true;
  // Smallest level increase between consecutive durations (negative on failure).
  double worst_margin = std::numeric_limits<double>::infinity();
  std::optional<int> worst_d;
  std::optional<int> worst_d_next;
  std::optional<double> worst_period;
};

// Checks each column of a computed table for nondecreasing levels over the
// table's durations in increasing order.
[[nodiscard]] inline NonCrossingReport audit_table(const IdfTable& table) {
  NonCrossingReport report;
  std::vector<std::size_t> order(table.durations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return table.durations[a] < table.durations[b]; });
  for (std::size_t c = 0; c < table.return_periods.size(); ++c) {
    for (std::size_t k = 1; k < order.size(); ++k) {
      const double margin = table.levels[order[k]][c] - table.levels[order[k - 1]][c];
      if (margin < report.worst_margin) {
        report.worst_margin = margin;
        report.worst_d = table.durations[order[k - 1]];
        report.worst_d_next = table.durations[order[k]];
        report.worst_period = table.return_periods[c];
      }
    }
  }
  report.passed = !(report.worst_margin < 0.0);
  return report;
}

// Non-crossing at a common exceedance probability: for each T in t_grid (in
// numbers of observations, T > 1) the quantile of order 1 - 1/T of A_d must
// not decrease along the durations. This is the property the monotonicity of
// sigma_d and lambda_d guarantees; theta is not screened beforehand.
[[nodiscard]] inline NonCrossingReport non_crossing_audit(const MultiscaleTheta& theta, std::span<const int> durations,
                                                          std::span<const double> t_grid,
                                                          double h = kDefaultLatticeStep,
                                                          double coverage = kIdfCoverage) {
  NonCrossingReport report;
  if (t_grid.empty() || durations.size() < 2) return report;
  const auto ds = sorted_unique(std::vector<int>(durations.begin(), durations.end()));
  std::vector<double> orders;
  double max_order = 0.0;
  for (double t : t_grid) {
    orders.push_back(quantile_order(1.0, t));
    max_order = std::max(max_order, orders.back());
  }
  if (max_order > coverage) throw InsufficientSupportError("non_crossing_audit: order exceeds coverage");
  std::vector<double> prev;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto pmf = positive_compound_pmf(compound_at(theta, ds[k]), h, detail::resolving(max_order));
    std::vector<double> levels;
    for (double u : orders) levels.push_back(compound_quantile(pmf, u));
    if (k > 0) {
      for (std::size_t c = 0; c < orders.size(); ++c) {
        const double margin = levels[c] - prev[c];
        if (margin < report.worst_margin) {
          report.worst_margin = margin;
          report.worst_d = ds[k - 1];
          report.worst_d_next = ds[k];
          report.worst_period = t_grid[c];
        }
      }
    }
    prev = std::move(levels);
  }
  report.passed = !(report.worst_margin < 0.0);
  return report;
}

struct QqPoint {
  double probability = 0.0;
  double model = 0.0;
  double empirical = 0.0;
};

// Hazen plotting positions (k - 0.5) / n against the sorted sample.
[[nodiscard]] inline std::vector<QqPoint> qq_points(const MultiscaleTheta& theta, const AggregatedSample& sample,
                                                    double h = kDefaultLatticeStep, double coverage = kIdfCoverage) {
  if (sample.values.empty()) throw PreconditionError("qq_points: empty sample");
  auto sorted = sample.values;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double top = (n - 0.5) / n;
  if (top > coverage) throw InsufficientSupportError("qq_points: sample too large for coverage");
  const auto pmf = positive_compound_pmf(compound_at(theta, sample.d), h, detail::resolving(top));
  std::vector<QqPoint> out;
  out.reserve(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double u = (static_cast<double>(k) + 0.5) / n;
    out.push_back(QqPoint{u, compound_quantile(pmf, u), sorted[k]});
  }
  return out;
}

}  // namespace msegpd
