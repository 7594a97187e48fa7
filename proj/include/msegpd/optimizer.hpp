#pragma once

// Derivative-free minimizers: Nelder-Mead simplex search with the
// dimension-adaptive coefficients of Gao & Han (2012), and a compass
// (coordinate pattern) search used to polish simplex solutions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace msegpd::optim {

struct NelderMeadOptions {
  std::size_t max_iterations = 5000;
  double f_tol = 1e-8;  // spread of simplex values
  double x_tol = 1e-6;  // simplex diameter (max-norm)
  std::vector<double> initial_step;  // per coordinate; empty means 0.1
};

struct MinimizeResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

template <class F>
[[nodiscard]] MinimizeResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(std::span<const double>(x));
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  if (n == 0) {
    res.x = x0;
    res.f = eval(x0);
    res.converged = true;
    return res;
  }
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / dn;
  const double gamma = 0.75 - 1.0 / (2.0 * dn);
  const double delta = 1.0 - 1.0 / dn;

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = opt.initial_step.size() == n ? opt.initial_step[i] : 0.1;
    simplex[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    s2.reserve(n + 1);
    f2.reserve(n + 1);
    for (std::size_t i : order) {
      s2.push_back(std::move(simplex[i]));
      f2.push_back(fv[i]);
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };

  sort_simplex();
  while (res.iterations < opt.max_iterations) {
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(simplex[i][k] - simplex[0][k]));
    if (std::isfinite(fv[n]) && fv[n] - fv[0] <= opt.f_tol && diameter <= opt.x_tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
    for (double& c : centroid) c /= dn;
    const auto& worst = simplex[n];

    for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + alpha * (centroid[k] - worst[k]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + beta * (xr[k] - centroid[k]);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      for (std::size_t k = 0; k < n; ++k) {
        xc[k] = outside ? centroid[k] + gamma * (xr[k] - centroid[k]) : centroid[k] - gamma * (centroid[k] - worst[k]);
      }
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[0][k] + delta * (simplex[i][k] - simplex[0][k]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  res.x = simplex[0];
  res.f = fv[0];
  return res;
}

struct CompassOptions {
  double initial_step = 0.05;
  double final_step = 1e-3;
  double min_improvement = 0.0;  // a move must lower f by more than this
  std::size_t max_sweeps = 500;
};

// Coordinate pattern search: try +/- step on each coordinate, halve the step
// when a sweep makes no progress. On return no single coordinate move of
// +/- final_step lowers f by more than min_improvement (unless max_sweeps hit).
template <class F>
[[nodiscard]] MinimizeResult compass_search(F&& f, std::vector<double> x, const CompassOptions& opt = {}) {
  MinimizeResult res;
  auto eval = [&](const std::vector<double>& p) {
    ++res.evaluations;
    const double v = f(std::span<const double>(p));
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  double fx = eval(x);
  double step = opt.initial_step;
  std::size_t sweeps = 0;
  for (;;) {
    bool improved = false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (double dir : {1.0, -1.0}) {
        auto trial = x;
        trial[k] += dir * step;
        const double ft = eval(trial);
        if (ft < fx - opt.min_improvement) {
          x = std::move(trial);
          fx = ft;
          improved = true;
          break;
        }
      }
    }
    ++sweeps;
    ++res.iterations;
    if (sweeps >= opt.max_sweeps) break;
    if (!improved) {
      if (step <= opt.final_step) {
        res.converged = true;
        break;
      }
      step = std::max(opt.final_step, step / 2.0);
    }
  }
  res.x = std::move(x);
  res.f = fx;
  return res;
}

}  // namespace msegpd::optim
