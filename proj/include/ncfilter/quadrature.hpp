#pragma once

#include <functional>

namespace ncfilter {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b].
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol = 1e-12,
                           double rel_tol = 1e-12, int max_intervals = 2000);

/// Integral over [a, inf) via the substitution t = a + x / (1 - x).
QuadratureResult integrate_to_infinity(const std::function<double(double)>& f,
                                       double a, double abs_tol = 1e-12,
                                       double rel_tol = 1e-12);

}  // namespace ncfilter
