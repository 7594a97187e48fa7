#pragma once

// Generalized Pareto and Type-1 extended generalized Pareto (EGPD) laws.
//
// The EGPD used throughout has cdf H_xi(y / sigma)^kappa, where H_xi is the
// unit-scale GP cdf. kappa drives the lower tail (F(y) ~ (y / sigma)^kappa as
// y -> 0+) and xi the upper tail (1 - F(y) ~ kappa * (1 - H_xi(y / sigma))).
// Only heavy upper tails (xi > 0) are supported.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "msegpd/errors.hpp"

namespace msegpd {

namespace detail {

inline void require_nonneg(double y, const char* what) {
  if (!(y >= 0.0)) throw DomainError(std::string(what) + ": argument must be >= 0");
}

inline void require_unit_interval(double u, const char* what) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError(std::string(what) + ": probability must be in [0, 1)");
}

// log(1 + xi * x) / xi, the "GP time" of a unit-scale amount x.
inline double gp_log_survival_neg(double x, double xi) { return std::log1p(xi * x) / xi; }

// log H_xi(x) for x > 0, accurate both near 0 (H ~ x) and in the upper tail (H ~ 1).
inline double log_gp_cdf_unit(double x, double xi) {
  const double t = gp_log_survival_neg(x, xi);  // survival = exp(-t)
  if (t > 0.6931471805599453) return std::log1p(-std::exp(-t));
  return std::log(-std::expm1(-t));
}

// Uniform draw on the open interval (0, 1) from 53 random bits.
template <class URNG>
double open_uniform(URNG& gen) {
  static_assert(URNG::max() - URNG::min() == std::numeric_limits<std::uint64_t>::max(),
                "open_uniform expects a 64-bit engine");
  const std::uint64_t bits = (gen() - URNG::min()) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

class GpParams {
 public:
  GpParams(double sigma, double xi) : sigma_(sigma), xi_(xi) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("GpParams: sigma must be > 0");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("GpParams: xi must be > 0");
  }

  [[nodiscard]] double sigma() const noexcept { return sigma_; }
  [[nodiscard]] double xi() const noexcept { return xi_; }

  friend bool operator==(const GpParams&, const GpParams&) = default;

 private:
  double sigma_;
  double xi_;
};

// Type-1 EGPD: carrier B(u) = u, so there is no point mass at zero.
class EgpdParams {
 public:
  EgpdParams(double sigma, double kappa, double xi) : sigma_(sigma), kappa_(kappa), xi_(xi) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("EgpdParams: sigma must be > 0");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("EgpdParams: kappa must be > 0");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("EgpdParams: xi must be > 0");
  }

  [[nodiscard]] double sigma() const noexcept { return sigma_; }
  [[nodiscard]] double kappa() const noexcept { return kappa_; }
  [[nodiscard]] double xi() const noexcept { return xi_; }
  [[nodiscard]] GpParams gp() const { return {sigma_, xi_}; }

  friend bool operator==(const EgpdParams&, const EgpdParams&) = default;

 private:
  double sigma_;
  double kappa_;
  double xi_;
};

// ---------------------------------------------------------------------------
// Generalized Pareto

[[nodiscard]] inline double gp_cdf(const GpParams& p, double y) {
  detail::require_nonneg(y, "gp_cdf");
  return -std::expm1(-detail::gp_log_survival_neg(y / p.sigma(), p.xi()));
}

[[nodiscard]] inline double gp_sf(const GpParams& p, double y) {
  detail::require_nonneg(y, "gp_sf");
  return std::exp(-detail::gp_log_survival_neg(y / p.sigma(), p.xi()));
}

[[nodiscard]] inline double gp_pdf(const GpParams& p, double y) {
  detail::require_nonneg(y, "gp_pdf");
  const double x = y / p.sigma();
  return std::exp(-(1.0 / p.xi() + 1.0) * std::log1p(p.xi() * x)) / p.sigma();
}

[[nodiscard]] inline double gp_quantile(const GpParams& p, double u) {
  detail::require_unit_interval(u, "gp_quantile");
  return p.sigma() / p.xi() * std::expm1(-p.xi() * std::log1p(-u));
}

// ---------------------------------------------------------------------------
// Extended generalized Pareto (Type 1)

// log F(y); -infinity at y = 0.
[[nodiscard]] inline double egpd_log_cdf(const EgpdParams& p, double y) {
  detail::require_nonneg(y, "egpd_log_cdf");
  if (y == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(y)) return 0.0;
  return p.kappa() * detail::log_gp_cdf_unit(y / p.sigma(), p.xi());
}

[[nodiscard]] inline double egpd_cdf(const EgpdParams& p, double y) {
  detail::require_nonneg(y, "egpd_cdf");
  if (y == 0.0) return 0.0;
  return std::exp(egpd_log_cdf(p, y));
}

[[nodiscard]] inline double egpd_sf(const EgpdParams& p, double y) {
  detail::require_nonneg(y, "egpd_sf");
  if (y == 0.0) return 1.0;
  return -std::expm1(egpd_log_cdf(p, y));
}

[[nodiscard]] inline double egpd_pdf(const EgpdParams& p, double y) {
  if (!(y > 0.0)) throw DomainError("egpd_pdf: argument must be > 0");
  const double x = y / p.sigma();
  const double log_h = -(1.0 / p.xi() + 1.0) * std::log1p(p.xi() * x);
  const double log_big_h = detail::log_gp_cdf_unit(x, p.xi());
  return p.kappa() / p.sigma() * std::exp(log_h + (p.kappa() - 1.0) * log_big_h);
}

[[nodiscard]] inline double egpd_quantile(const EgpdParams& p, double u) {
  detail::require_unit_interval(u, "egpd_quantile");
  if (u == 0.0) return 0.0;
  // v = u^(1/kappa); log(1 - v) evaluated without cancellation.
  const double log_u_over_k = std::log(u) / p.kappa();
  const double log1m_v =
      log_u_over_k < -0.6931471805599453 ? std::log1p(-std::exp(log_u_over_k)) : std::log(-std::expm1(log_u_over_k));
  return p.sigma() / p.xi() * std::expm1(-p.xi() * log1m_v);
}

// One draw by inversion, sigma * H^-1(U^(1/kappa)).
template <class URNG>
[[nodiscard]] double egpd_draw(const EgpdParams& p, URNG& gen) {
  return egpd_quantile(p, detail::open_uniform(gen));
}

[[nodiscard]] inline std::vector<double> egpd_sample(const EgpdParams& p, std::size_t n,
                                                     std::uint64_t rng_seed) {
  std::mt19937_64 gen(rng_seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(egpd_draw(p, gen));
  return out;
}

}  // namespace msegpd
