#pragma once

// Small dense BFGS minimizer for the 2- and 3-parameter likelihood problems.
// The objective returns +inf outside its domain; the line search backs off.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace fwdmix::opt {

struct BfgsOptions {
  int max_iterations = 200;
  double rel_tol = 1e-10;   // relative objective change
  double grad_tol = 1e-9;   // infinity norm, stops immediately
  double accept_grad = 1e-5;  // gradient level at which a stall counts as converged
};

template <std::size_t N>
struct BfgsResult {
  std::array<double, N> x{};
  std::array<double, N> gradient{};
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {
template <std::size_t N>
double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}
template <std::size_t N>
double inf_norm(const std::array<double, N>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}
}  // namespace detail

// fg(x, grad) returns f(x) and writes the gradient when f(x) is finite.
template <std::size_t N, class Fn>
BfgsResult<N> bfgs_minimize(Fn&& fg, std::array<double, N> x0, const BfgsOptions& opt = {}) {
  using Vec = std::array<double, N>;
  using detail::dot;
  using detail::inf_norm;

  BfgsResult<N> res;
  res.x = x0;
  Vec g{};
  double f = fg(res.x, g);
  ++res.evaluations;
  if (!std::isfinite(f)) return res;

  std::array<Vec, N> hinv{};
  for (std::size_t i = 0; i < N; ++i) hinv[i][i] = 1.0;
  bool scaled = false;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const double gnorm = inf_norm(g);
    if (gnorm <= opt.grad_tol) {
      res.converged = true;
      break;
    }
    Vec dir{};
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < N; ++j) s -= hinv[i][j] * g[j];
      dir[i] = s;
    }
    double slope = dot(dir, g);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < N; ++i) {
        hinv[i].fill(0.0);
        hinv[i][i] = 1.0;
        dir[i] = -g[i];
      }
      slope = dot(dir, g);
      scaled = false;
    }
    double step = 1.0;
    if (!scaled) {
      // First steepest-descent step: cap the move at 0.5 in every coordinate.
      const double dn = inf_norm(dir);
      if (dn > 0.5) step = 0.5 / dn;
    }

    Vec xn{};
    Vec gn{};
    double fn = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < N; ++i) xn[i] = res.x[i] + step * dir[i];
      fn = fg(xn, gn);
      ++res.evaluations;
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      if (std::isfinite(fn)) {
        // Quadratic interpolation of the backtrack, kept in [0.1, 0.5] of the step.
        const double denom = 2.0 * (fn - f - slope * step);
        double next = denom > 0.0 ? -slope * step * step / denom : 0.5 * step;
        step = std::clamp(next, 0.1 * step, 0.5 * step);
      } else {
        step *= 0.25;
      }
    }
    if (!accepted) {
      res.converged = gnorm <= opt.accept_grad;
      break;
    }

    Vec s{};
    Vec y{};
    for (std::size_t i = 0; i < N; ++i) {
      s[i] = xn[i] - res.x[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-14 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (!scaled) {
        const double gamma = sy / dot(y, y);
        for (std::size_t i = 0; i < N; ++i) hinv[i][i] = gamma;
        scaled = true;
      }
      Vec hy{};
      for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) acc += hinv[i][j] * y[j];
        hy[i] = acc;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          hinv[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
      }
    }

    const double change = f - fn;
    res.x = xn;
    g = gn;
    f = fn;
    if (change <= opt.rel_tol * std::max(std::abs(f), 1e-300) && inf_norm(g) <= opt.accept_grad) {
      res.converged = true;
      break;
    }
  }
  res.value = f;
  res.gradient = g;
  if (!res.converged && inf_norm(g) <= opt.grad_tol) res.converged = true;
  return res;
}

}  // namespace fwdmix::opt
