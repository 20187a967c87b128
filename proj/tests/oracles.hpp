#pragma once

// Independent numerical references for the test suites. Nothing here calls
// the library's own quadrature or closed-form CDFs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

// Constants typed in from the closed forms, independent of the library.
struct Closed {
  double s11, s12, s22, d1, d2;
};

inline Closed weibull_closed() {
  const double p2 = std::numbers::pi * std::numbers::pi, p4 = p2 * p2;
  return {p2 / 3 - 3, 2 - p2 / 6, p2 / 6 - 1,
          std::acos(std::sqrt((p4 - 6 * p2 - 36) / (2 * p4 - 30 * p2 + 108))),
          std::acos(std::sqrt((p4 - 6 * p2 - 36) / (p4 - 6 * p2)))};
}

inline Closed gamma_closed() {
  const double p2 = std::numbers::pi * std::numbers::pi, p4 = p2 * p2;
  const double num = 4 * p4 - 54 * p2 + 144;
  return {p2 / 3 - 13.0 / 4, 7.0 / 4 - p2 / 6, p2 / 6 - 5.0 / 4,
          std::acos(std::sqrt(num / ((4 * p2 - 39) * (2 * p2 - 15)))),
          std::acos(std::sqrt(num / ((2 * p2 - 12) * (2 * p2 - 15))))};
}

// int_lo^hi f(t) dt computed as int f(e^u) e^u du, which keeps both a spike
// near zero and a long tail smooth.
inline double integrate_log(const std::function<double(double)>& f, double lo, double hi) {
  auto g = [&](double u) {
    const double t = std::exp(u);
    return f(t) * t;
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, std::log(lo),
                                                                       std::log(hi), 20, 1e-14,
                                                                       &err);
}

// Smallest power-of-two-scaled point beyond which `survival` is below eps.
inline double upper_cut(const std::function<double(double)>& survival, double eps) {
  double t = 1.0;
  while (survival(t) > eps) t *= 2.0;
  return t;
}

inline double lower_cut(const std::function<double(double)>& cdf, double eps) {
  double t = 1.0;
  while (cdf(t) > eps) t *= 0.5;
  return t;
}

// 5-point Gauss-Legendre on [a, b].
inline double gauss5(const std::function<double(double)>& f, double a, double b) {
  static const double x[5] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                              -0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  const double m = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += w[i] * f(m + h * x[i]);
  return s * h;
}

// One-sample KS distance against a CDF known only through its density:
// the CDF at each sorted point is accumulated by Gauss-Legendre between
// consecutive points.
inline double ks_from_density(std::vector<double> x, const std::function<double(double)>& pdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double cdf = 0.0;
  double prev = 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split each gap so wide gaps in the tail stay accurate.
    const int pieces = 8;
    for (int k = 0; k < pieces; ++k) {
      const double a = prev + (x[i] - prev) * k / pieces;
      const double b = prev + (x[i] - prev) * (k + 1) / pieces;
      cdf += gauss5(pdf, a, b);
    }
    prev = x[i];
    d = std::max({d, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
  }
  return d;
}

inline double ks_from_cdf(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return d;
}

// Two-sample KS distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - b| <= tol * max(1, |b|)
inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace oracle
