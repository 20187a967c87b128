#pragma once

// Likelihood-ratio test of exponential homogeneity (alpha = alpha0) and its
// non-regular limit.
//
// Under the null, R_n converges to sup_p Z(p)^2 where Z is a unit-variance
// Gaussian process with covariance sigma(p1,p2)/sqrt(sigma(p1,p1)sigma(p2,p2)),
//   sigma(p1, p2) = p1 p2 s22 + (p1 + p2) s12 + s11.
// Writing (c1(p), c2(p)) = (cos theta, sin theta), theta sweeps the arc
// [delta1, delta2] as p goes from 0 to 1, and the supremum has the polar form
//   T(rho2, eta) = rho2 * { 1                      eta in A1
//                         { cos^2(eta - delta2)    eta in A2
//                         { cos^2(eta - delta1)    eta in A3
// with rho2 ~ chi-square(2) and eta ~ U[-pi, pi] independent. The arc sets
// below assume 0 < delta1 < delta2 < pi/2, which holds for Weibull and Gamma.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/parallel.hpp"
#include "fwdmix/quadrature.hpp"
#include "fwdmix/random.hpp"
#include "fwdmix/special.hpp"

namespace fwdmix {

enum class ConstantsSource { closed_form_weibull, closed_form_gamma, numeric };

inline std::string_view to_string(ConstantsSource s) {
  switch (s) {
    case ConstantsSource::closed_form_weibull:
      return "closed_form_weibull";
    case ConstantsSource::closed_form_gamma:
      return "closed_form_gamma";
    case ConstantsSource::numeric:
      return "numeric";
  }
  return "unknown";
}

struct AsymptoticConstants {
  double sigma11 = 0.0;
  double sigma12 = 0.0;
  double sigma22 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  ConstantsSource source = ConstantsSource::numeric;

  double sigma(double p1, double p2) const {
    return p1 * p2 * sigma22 + (p1 + p2) * sigma12 + sigma11;
  }
  // sqrt(s11 - s12^2 / s22), the scale of the component orthogonal to Z2.
  double residual_scale() const { return std::sqrt(sigma11 - sigma12 * sigma12 / sigma22); }
  double c1(double p) const { return residual_scale() / std::sqrt(sigma(p, p)); }
  double c2(double p) const {
    return (p + sigma12 / sigma22) * std::sqrt(sigma22) / std::sqrt(sigma(p, p));
  }
  double angle(double p) const { return std::atan2(c2(p), c1(p)); }
};

namespace detail {
inline void validate_constants(const AsymptoticConstants& c) {
  if (!(c.sigma22 > 0.0)) throw DomainError("sigma22 must be positive");
  if (!(c.sigma11 - c.sigma12 * c.sigma12 / c.sigma22 > 0.0)) {
    throw DomainError("sigma matrix is not positive definite");
  }
  constexpr double half_pi = special::kPi / 2.0;
  if (!(c.delta1 > -half_pi && c.delta1 < c.delta2 && c.delta2 < half_pi)) {
    throw DomainError("arc endpoints violate -pi/2 < delta1 < delta2 < pi/2");
  }
  if (!(c.delta1 > 0.0)) {
    throw DomainError("arc endpoints must both be positive for the interval form of A1-A3");
  }
}
}  // namespace detail

// Builds constants from (s11, s12, s22); the arc endpoints are the polar
// angles of (c1, c2) at p = 0 and p = 1.
inline AsymptoticConstants constants_from_sigmas(double s11, double s12, double s22,
                                                 ConstantsSource source) {
  AsymptoticConstants c{s11, s12, s22, 0.0, 0.0, source};
  if (!(s22 > 0.0) || !(s11 - s12 * s12 / s22 > 0.0)) {
    throw DomainError("sigma matrix is not positive definite");
  }
  c.delta1 = c.angle(0.0);
  c.delta2 = c.angle(1.0);
  detail::validate_constants(c);
  return c;
}

// Closed forms for the Weibull and Gamma families (independent of lambda0).
inline AsymptoticConstants asymptotic_constants(FamilyKind family) {
  constexpr double pi = special::kPi;
  const double pi2 = pi * pi;
  const double pi4 = pi2 * pi2;
  AsymptoticConstants c;
  switch (family) {
    case FamilyKind::weibull:
      c.sigma22 = pi2 / 6.0 - 1.0;
      c.sigma12 = 2.0 - pi2 / 6.0;
      c.sigma11 = pi2 / 3.0 - 3.0;
      c.delta1 = std::acos(std::sqrt((pi4 - 6.0 * pi2 - 36.0) / (2.0 * pi4 - 30.0 * pi2 + 108.0)));
      c.delta2 = std::acos(std::sqrt((pi4 - 6.0 * pi2 - 36.0) / (pi4 - 6.0 * pi2)));
      c.source = ConstantsSource::closed_form_weibull;
      return c;
    case FamilyKind::gamma:
      c.sigma22 = pi2 / 6.0 - 5.0 / 4.0;
      c.sigma12 = 7.0 / 4.0 - pi2 / 6.0;
      c.sigma11 = pi2 / 3.0 - 13.0 / 4.0;
      c.delta1 = std::acos(std::sqrt((4.0 * pi4 - 54.0 * pi2 + 144.0) /
                                     ((4.0 * pi2 - 39.0) * (2.0 * pi2 - 15.0))));
      c.delta2 = std::acos(std::sqrt((4.0 * pi4 - 54.0 * pi2 + 144.0) /
                                     ((2.0 * pi2 - 12.0) * (2.0 * pi2 - 15.0))));
      c.source = ConstantsSource::closed_form_gamma;
      return c;
    case FamilyKind::lognormal:
      break;
  }
  throw UnsupportedFamily("asymptotic calibration is available only for weibull and gamma");
}

// B = Var(x, y1, y2) under Exp(rate0), by quadrature of score products.
inline std::array<std::array<double, 3>, 3> score_covariance(FamilyKind family, double rate0) {
  require_null_family(family);
  if (!(rate0 > 0.0)) throw DomainError("rate0 must be positive");
  const double upper = quad::tail_cutoff([&](double t) { return std::exp(-rate0 * t); }, 1e-22,
                                         1.0 / rate0);
  auto component = [&](const NullScores& s, int k) {
    return k == 0 ? s.x : (k == 1 ? s.y1 : s.y2);
  };
  std::array<double, 3> mean{};
  for (int j = 0; j < 3; ++j) {
    mean[j] = quad::integrate(
                  [&](double t) {
                    if (t <= 0.0) return 0.0;
                    return component(score_vector(family, rate0, t), j) * rate0 *
                           std::exp(-rate0 * t);
                  },
                  0.0, upper)
                  .value;
  }
  std::array<std::array<double, 3>, 3> b{};
  for (int j = 0; j < 3; ++j) {
    for (int k = j; k < 3; ++k) {
      const double m = quad::integrate(
                           [&](double t) {
                             if (t <= 0.0) return 0.0;
                             const auto s = score_vector(family, rate0, t);
                             return component(s, j) * component(s, k) * rate0 *
                                    std::exp(-rate0 * t);
                           },
                           0.0, upper)
                           .value;
      b[j][k] = b[k][j] = m - mean[j] * mean[k];
    }
  }
  return b;
}

inline AsymptoticConstants numeric_constants(FamilyKind family, double rate0) {
  const auto b = score_covariance(family, rate0);
  const double b11 = b[0][0];
  const double b12 = b[0][1];
  const double b13 = b[0][2];
  const double s11 = b[2][2] - b13 * b13 / b11;
  const double s12 = b[1][2] - b[2][2] - b12 * b13 / b11 + b13 * b13 / b11;
  const double s22 = b[1][1] + b[2][2] - 2.0 * b[1][2] - b12 * b12 / b11 - b13 * b13 / b11 +
                     2.0 * b12 * b13 / b11;
  return constants_from_sigmas(s11, s12, s22, ConstantsSource::numeric);
}

enum class Arc { a1, a2, a3 };

// Closed intervals; a boundary angle belongs to the lowest-indexed set.
inline Arc classify_angle(double eta, const AsymptoticConstants& c) {
  constexpr double pi = special::kPi;
  constexpr double half_pi = pi / 2.0;
  const double mid = 0.5 * (c.delta1 + c.delta2);
  if ((eta >= c.delta1 && eta <= c.delta2) || (eta >= c.delta1 - pi && eta <= c.delta2 - pi)) {
    return Arc::a1;
  }
  if ((eta >= c.delta2 && eta <= mid + half_pi) || (eta >= c.delta2 - pi && eta <= mid - half_pi)) {
    return Arc::a2;
  }
  return Arc::a3;
}

inline double limit_statistic(double rho2, double eta, const AsymptoticConstants& c) {
  switch (classify_angle(eta, c)) {
    case Arc::a1:
      return rho2;
    case Arc::a2: {
      const double v = std::cos(eta - c.delta2);
      return rho2 * v * v;
    }
    case Arc::a3:
      break;
  }
  const double v = std::cos(eta - c.delta1);
  return rho2 * v * v;
}

// Draw i of the limit uses its own stream keyed by (seed, i).
inline double limit_draw(const AsymptoticConstants& c, std::uint64_t seed, std::uint64_t i) {
  CounterRng rng(stream_key(seed, i));
  const double rho2 = 2.0 * rng.exponential();
  const double eta = -special::kPi + 2.0 * special::kPi * rng.uniform();
  return limit_statistic(rho2, eta, c);
}

// Sorted Monte Carlo draws of T(rho2, eta).
inline std::vector<double> sample_null_limit(const AsymptoticConstants& c, std::size_t draws,
                                             std::uint64_t seed, unsigned threads = 0) {
  if (draws < 1) throw DomainError("need at least one Monte Carlo draw");
  std::vector<double> out(draws);
  parallel_for(
      draws, threads, [&](std::size_t i) { out[i] = limit_draw(c, seed, i); }, 1 << 14);
  std::sort(out.begin(), out.end());
  return out;
}

// Empirical null distribution of R built from limit draws.
class NullDistribution {
 public:
  NullDistribution(std::vector<double> sorted_draws, std::uint64_t seed)
      : draws_(std::move(sorted_draws)), seed_(seed) {
    if (draws_.empty()) throw DomainError("empty null distribution");
  }

  static NullDistribution sample(const AsymptoticConstants& c, std::size_t draws,
                                 std::uint64_t seed, unsigned threads = 0) {
    return {sample_null_limit(c, draws, seed, threads), seed};
  }

  // (#{T > r} + 1) / (M + 1)
  double p_value(double r) const {
    const auto exceed = draws_.end() - std::upper_bound(draws_.begin(), draws_.end(), r);
    return (static_cast<double>(exceed) + 1.0) / (static_cast<double>(draws_.size()) + 1.0);
  }

  // Inverse empirical CDF at probability `prob`.
  double quantile(double prob) const {
    const double m = static_cast<double>(draws_.size());
    auto k = static_cast<std::size_t>(std::ceil(prob * m));
    k = std::clamp<std::size_t>(k, 1, draws_.size());
    return draws_[k - 1];
  }

  // Reject when R > critical_value(level); at most level * M draws exceed it.
  double critical_value(double level) const {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0,1)");
    return quantile(1.0 - level);
  }

  double cdf(double r) const {
    const auto le = std::upper_bound(draws_.begin(), draws_.end(), r) - draws_.begin();
    return static_cast<double>(le) / static_cast<double>(draws_.size());
  }

  std::size_t size() const { return draws_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& draws() const { return draws_; }

 private:
  std::vector<double> draws_;
  std::uint64_t seed_;
};

inline double p_value(double statistic, const AsymptoticConstants& c, std::size_t draws,
                      std::uint64_t seed, unsigned threads = 0) {
  if (!(statistic >= 0.0)) throw DomainError("statistic must be non-negative");
  // Only the exceedance count is needed, so skip the sort.
  std::vector<std::size_t> exceed_block((draws + (1 << 14) - 1) >> 14, 0);
  parallel_for(
      exceed_block.size(), threads,
      [&](std::size_t b) {
        const std::size_t lo = b << 14;
        const std::size_t hi = std::min(draws, lo + (1 << 14));
        std::size_t count = 0;
        for (std::size_t i = lo; i < hi; ++i) count += limit_draw(c, seed, i) > statistic;
        exceed_block[b] = count;
      },
      1);
  std::size_t exceed = 0;
  for (auto v : exceed_block) exceed += v;
  return (static_cast<double>(exceed) + 1.0) / (static_cast<double>(draws) + 1.0);
}

struct CriticalValue {
  double level;
  double quantile;
};

inline std::vector<CriticalValue> critical_values(const NullDistribution& dist,
                                                  const std::vector<double>& levels) {
  std::vector<CriticalValue> out;
  out.reserve(levels.size());
  for (double a : levels) out.push_back({a, dist.critical_value(a)});
  return out;
}

// CSV columns: level,quantile,M,seed,family
// A non-empty `version` adds a trailing version column.
inline void write_critical_values_csv(std::ostream& os, const std::vector<CriticalValue>& cv,
                                      std::size_t draws, std::uint64_t seed, FamilyKind family,
                                      std::string_view version = {}) {
  os << "level,quantile,M,seed,family" << (version.empty() ? "" : ",version") << '\n';
  char buf[64];
  for (const auto& v : cv) {
    std::snprintf(buf, sizeof buf, "%.17g", v.quantile);
    os << v.level << ',' << buf << ',' << draws << ',' << seed << ',' << to_string(family);
    if (!version.empty()) os << ',' << version;
    os << '\n';
  }
}

struct LocalPowerOptions {
  std::size_t draws = 200'000;
  std::size_t null_draws = 1'000'000;
  double grid_step = 1e-3;
  unsigned threads = 0;
};

// Asymptotic power under alpha = alpha0 + delta / sqrt(n), p = p0:
// P( sup_p {Z(p) + omega(p, p0)}^2 > c_level ), with
// omega(p, p0) = delta sigma(p, p0) / sqrt(sigma(p, p)).
// Z(p) = (Z1 + p Z2) / sqrt(sigma(p,p)) with (Z1, Z2) ~ N(0, [[s11, s12], [s12, s22]]).
inline double local_power(double delta, double p0, const AsymptoticConstants& c, double level,
                          std::uint64_t seed, const LocalPowerOptions& opt = {}) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0,1)");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw DomainError("p0 must lie in [0,1]");
  if (!(opt.grid_step > 0.0 && opt.grid_step <= 1.0)) throw DomainError("bad grid step");
  const double crit =
      NullDistribution::sample(c, opt.null_draws, seed, opt.threads).critical_value(level);

  const auto points = static_cast<std::size_t>(std::llround(1.0 / opt.grid_step)) + 1;
  std::vector<double> grid_p(points);
  std::vector<double> inv_sd(points);
  std::vector<double> shift(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double p = std::min(1.0, k * opt.grid_step);
    grid_p[k] = p;
    inv_sd[k] = 1.0 / std::sqrt(c.sigma(p, p));
    shift[k] = delta * c.sigma(p, p0) * inv_sd[k];
  }
  const double a1 = c.residual_scale();
  const double a2 = std::sqrt(c.sigma22);
  const double beta = c.sigma12 / c.sigma22;

  constexpr std::size_t kBlock = 4096;
  std::vector<std::size_t> hits((opt.draws + kBlock - 1) / kBlock, 0);
  parallel_for(
      hits.size(), opt.threads,
      [&](std::size_t b) {
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(opt.draws, lo + kBlock);
        std::size_t count = 0;
        for (std::size_t i = lo; i < hi; ++i) {
          CounterRng rng(stream_key(seed, i, 1));
          const double z2 = a2 * rng.normal();
          const double z1 = a1 * rng.normal() + beta * z2;
          double sup = 0.0;
          for (std::size_t k = 0; k < points; ++k) {
            const double v = (z1 + grid_p[k] * z2) * inv_sd[k] + shift[k];
            sup = std::max(sup, v * v);
          }
          count += sup > crit;
        }
        hits[b] = count;
      },
      1);
  std::size_t total = 0;
  for (auto h : hits) total += h;
  return static_cast<double>(total) / static_cast<double>(opt.draws);
}

// 2 (full - null), with optimizer noise down to -1e-8 clamped to zero.
inline double lrt_from_logliks(double full_loglik, double null_loglik) {
  const double r = 2.0 * (full_loglik - null_loglik);
  if (r >= 0.0) return r;
  if (r >= -1e-8) return 0.0;
  throw ConvergenceError("full-model fit is below the null fit (R_n = " + std::to_string(r) + ")");
}

inline double lrt_statistic(const DurationSample& sample, FamilyKind family,
                            const FitOptions& options = {}) {
  require_null_family(family);
  const auto null_fit = fit_null(sample, family);
  const auto full_fit = fit_full(sample, family, options);
  return lrt_from_logliks(full_fit.loglik, null_fit.loglik);
}

struct TestOptions {
  std::size_t mc_draws = 1'000'000;
  std::uint64_t seed = 1;
  std::vector<double> levels = {0.10, 0.05, 0.01};
  bool numeric_constants = false;  // quadrature at the fitted null rate
  unsigned threads = 0;
  FitOptions fit;
};

struct LrtReport {
  FamilyKind family = FamilyKind::weibull;
  std::size_t n = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  AsymptoticConstants constants;
  std::size_t mc_draws = 0;
  std::uint64_t mc_seed = 0;
  std::vector<CriticalValue> critical_values;
  FitResult full;
  FitResult null;
};

inline LrtReport run_lrt(const DurationSample& sample, FamilyKind family,
                         const TestOptions& opt = {}) {
  require_null_family(family);
  LrtReport rep;
  rep.family = family;
  rep.n = sample.n();
  rep.null = fit_null(sample, family);
  rep.full = fit_full(sample, family, opt.fit);
  rep.statistic = lrt_from_logliks(rep.full.loglik, rep.null.loglik);
  rep.constants = opt.numeric_constants ? numeric_constants(family, rep.null.rate)
                                        : asymptotic_constants(family);
  const auto dist = NullDistribution::sample(rep.constants, opt.mc_draws, opt.seed, opt.threads);
  rep.p_value = dist.p_value(rep.statistic);
  rep.critical_values = critical_values(dist, opt.levels);
  rep.mc_draws = opt.mc_draws;
  rep.mc_seed = opt.seed;
  return rep;
}

}  // namespace fwdmix
