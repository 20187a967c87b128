#pragma once

// Special-function helpers on top of Boost.Math, with the log-space and
// scaled forms the density code needs in the far tail.

#include <cmath>
#include <limits>

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace fwdmix::special {

inline constexpr double kEulerGamma = boost::math::constants::euler<double>();
inline constexpr double kPi = boost::math::constants::pi<double>();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Evaluate in double throughout; the default policy promotes to long double,
// which is several times slower for no accuracy the fits can use.
using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x, Policy()); }
inline double gamma_q(double a, double x) { return boost::math::gamma_q(a, x, Policy()); }

inline double digamma(double x) { return boost::math::digamma(x, Policy()); }

// exp(x) * E1(x) for x > 0, finite for arbitrarily large x.
inline double scaled_exp_e1(double x) {
  if (x < 50.0) return std::exp(x) * boost::math::expint(1, x, Policy());
  // Continued fraction e^x E1(x) = 1/(x+1-1/(x+3-4/(x+5-...))), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 200; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h;
}

inline double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0), Policy()); }

inline double normal_sf(double z) { return 0.5 * boost::math::erfc(z / std::sqrt(2.0), Policy()); }

// log(1 - Phi(z)), accurate for large positive z.
inline double log_normal_sf(double z) {
  if (z < 30.0) return std::log(normal_sf(z));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - kLogSqrt2Pi + std::log(series);
}

// log Q(a, x), the log of the regularized upper incomplete gamma function.
inline double log_gamma_q(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double q = gamma_q(a, x);
  if (q > 1e-280) return std::log(q);
  // Asymptotic expansion Gamma(a,x) ~ x^(a-1) e^-x sum_k (a-1)...(a-k)/x^k.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double next = term * (a - k) / x;
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return (a - 1.0) * std::log(x) - x + std::log(sum) - std::lgamma(a);
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace fwdmix::special
