#pragma once

/// Deterministic trapezoid quadrature over log densities, used as an
/// independent oracle for conjugate-update moments and toy-model evidence.
/// The grid is doubled until the posterior mean and variance stabilize, so
/// results carry more precision than the tolerances they are compared at.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "garchfda/common.hpp"

namespace garchfda {

struct QuadratureResult {
  double mean = 0.0;
  double variance = 0.0;
  double log_norm = 0.0;  // log of the integral of exp(log_density)
};

namespace detail {

inline QuadratureResult trapezoid_pass(const std::function<double(double)>& log_density,
                                       double lo, double hi, int n) {
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> logf(static_cast<std::size_t>(n));
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = lo + h * static_cast<double>(i);
    logf[static_cast<std::size_t>(i)] = log_density(x);
    peak = std::max(peak, logf[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(peak))
    throw NumericError("quadrature: log density has no finite values on the window");
  double mass = 0.0, first = 0.0, second = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double f = std::exp(logf[static_cast<std::size_t>(i)] - peak);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    mass += w * f;
    first += w * f * x;
    second += w * f * x * x;
  }
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw NumericError("quadrature: zero or non-finite mass on the window");
  QuadratureResult out;
  out.mean = first / mass;
  out.variance = second / mass - out.mean * out.mean;
  out.log_norm = std::log(mass * h) + peak;
  return out;
}

}  // namespace detail

/// Posterior moments of a one-dimensional density known up to a constant.
inline QuadratureResult quadrature_posterior_1d(
    const std::function<double(double)>& log_density, double lo, double hi,
    double rel_tol = 1e-10) {
  if (!(lo < hi)) throw std::invalid_argument("quadrature window is empty");
  QuadratureResult prev = detail::trapezoid_pass(log_density, lo, hi, 1025);
  for (int n = 2049; n <= (1 << 21) + 1; n = 2 * n - 1) {
    const QuadratureResult cur = detail::trapezoid_pass(log_density, lo, hi, n);
    const double scale = std::max({1.0, std::abs(cur.mean), std::sqrt(cur.variance)});
    if (std::abs(cur.mean - prev.mean) <= rel_tol * scale &&
        std::abs(cur.variance - prev.variance) <=
            rel_tol * std::max(1.0, cur.variance)) {
      return cur;
    }
    prev = cur;
  }
  throw NumericError("quadrature did not converge; widen the window or relax rel_tol");
}

struct QuadratureResult2d {
  double mean_x = 0.0, mean_y = 0.0;
  double var_x = 0.0, var_y = 0.0;
  double log_norm = 0.0;
};

/// Tensor-grid trapezoid for a two-parameter toy posterior. Fixed fine grid;
/// intended for smooth, well-windowed densities only.
inline QuadratureResult2d quadrature_posterior_2d(
    const std::function<double(double, double)>& log_density, double lo_x, double hi_x,
    double lo_y, double hi_y, int n = 1537) {
  if (!(lo_x < hi_x && lo_y < hi_y)) throw std::invalid_argument("quadrature window is empty");
  const double hx = (hi_x - lo_x) / static_cast<double>(n - 1);
  const double hy = (hi_y - lo_y) / static_cast<double>(n - 1);
  std::vector<double> logf(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = log_density(lo_x + hx * i, lo_y + hy * j);
      logf[static_cast<std::size_t>(i) * n + j] = v;
      peak = std::max(peak, v);
    }
  if (!std::isfinite(peak))
    throw NumericError("quadrature: log density has no finite values on the window");
  double mass = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = lo_x + hx * i;
      const double y = lo_y + hy * j;
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      const double f = wi * wj * std::exp(logf[static_cast<std::size_t>(i) * n + j] - peak);
      mass += f;
      sx += f * x;
      sy += f * y;
      sxx += f * x * x;
      syy += f * y * y;
    }
  if (!(mass > 0.0)) throw NumericError("quadrature: zero mass on the window");
  QuadratureResult2d out;
  out.mean_x = sx / mass;
  out.mean_y = sy / mass;
  out.var_x = sxx / mass - out.mean_x * out.mean_x;
  out.var_y = syy / mass - out.mean_y * out.mean_y;
  out.log_norm = std::log(mass * hx * hy) + peak;
  return out;
}

}  // namespace garchfda
