#pragma once

#include <cmath>
#include <algorithm>
#include <string>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fwdmix/error.hpp"

namespace fwdmix::quad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive double-exponential rule on a finite interval. Tolerates integrable
// endpoint singularities such as t^(-1/2) or log t at the origin.
template <class F>
Estimate integrate(F&& f, double a, double b, double tol = 1e-13) {
  // The rule extends its node table lazily, so each thread keeps its own.
  thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
  Estimate out;
  double l1 = 0.0;
  out.value = rule.integrate(f, a, b, tol, &out.error, &l1);
  if (!std::isfinite(out.value)) throw QuadratureError("non-finite quadrature result");
  if (out.error > 1e-6 * std::max(1.0, l1)) {
    throw QuadratureError("quadrature did not converge (error estimate " +
                          std::to_string(out.error) + ")");
  }
  return out;
}

// Adaptive Gauss-Kronrod (61 point), for smooth integrands.
template <class F>
Estimate integrate_smooth(F&& f, double a, double b, double tol = 1e-13) {
  Estimate out;
  out.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, tol,
                                                                            &out.error);
  if (!std::isfinite(out.value)) throw QuadratureError("non-finite quadrature result");
  return out;
}

// Fixed-resolution composite 20-point Gauss-Legendre on `panels` equal pieces.
template <class F>
double composite_gauss(F&& f, double a, double b, int panels) {
  const double width = (b - a) / panels;
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * width;
    sum += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + width);
  }
  return sum;
}

// Smallest t (to relative precision 1e-12) with survival(t) < eps. The
// survival function must be non-increasing.
template <class S>
double tail_cutoff(S&& survival, double eps = 1e-12, double start = 1.0) {
  double lo = 0.0;
  double hi = start;
  int guard = 0;
  while (!(survival(hi) < eps)) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 2000) throw QuadratureError("tail cutoff search diverged");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (survival(mid) < eps) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace fwdmix::quad
