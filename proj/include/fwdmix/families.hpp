#pragma once

// Incubation-period families f(t; lambda, alpha), the induced forward-time
// density g(t) = (1 - F(t)) / mu and the mixture h = p f + (1 - p) g.
//
// Every family uses lambda as an inverse scale ("rate", 1/time) and alpha as a
// dimensionless shape:
//   Weibull    f = lambda alpha (lambda t)^(alpha-1) exp(-(lambda t)^alpha)
//   Gamma      f = lambda^alpha t^(alpha-1) exp(-lambda t) / Gamma(alpha)
//   Lognormal  log T ~ Normal(location = -log lambda, scale = alpha)
// The lognormal convention keeps lambda rate-like: scaling time by c divides
// lambda by c for all three families.
//
// Log densities are the primitive; the plain densities exponentiate them.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <boost/math/special_functions/gamma.hpp>

#include "fwdmix/error.hpp"
#include "fwdmix/random.hpp"
#include "fwdmix/special.hpp"

namespace fwdmix {

enum class FamilyKind { weibull, gamma, lognormal };

inline std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::weibull:
      return "weibull";
    case FamilyKind::gamma:
      return "gamma";
    case FamilyKind::lognormal:
      return "lognormal";
  }
  return "unknown";
}

inline FamilyKind parse_family(std::string_view name) {
  if (name == "weibull") return FamilyKind::weibull;
  if (name == "gamma") return FamilyKind::gamma;
  if (name == "lognormal") return FamilyKind::lognormal;
  throw DomainError("unknown family '" + std::string(name) + "'");
}

namespace traits {

struct Weibull {
  static constexpr FamilyKind kind = FamilyKind::weibull;
  static constexpr bool has_null_shape = true;

  static double log_pdf(double t, double rate, double shape) {
    const double u = std::log(rate * t);
    return std::log(rate) + std::log(shape) + (shape - 1.0) * u - std::exp(shape * u);
  }
  static double log_survival(double t, double rate, double shape) {
    return -std::pow(rate * t, shape);
  }
  static double cdf(double t, double rate, double shape) {
    return -std::expm1(-std::pow(rate * t, shape));
  }
  static double log_mean(double rate, double shape) {
    return std::lgamma(1.0 + 1.0 / shape) - std::log(rate);
  }
  // E[T^k]
  static double raw_moment(int k, double rate, double shape) {
    return std::exp(std::lgamma(1.0 + k / shape) - k * std::log(rate));
  }
  // G(t) = int_0^t (1 - F) / mu = P(1/alpha, (lambda t)^alpha).
  static double forward_cdf(double t, double rate, double shape) {
    return special::gamma_p(1.0 / shape, std::pow(rate * t, shape));
  }
  static double sample(double rate, double shape, CounterRng& rng) {
    return std::pow(rng.exponential(), 1.0 / shape) / rate;
  }
};

struct Gamma {
  static constexpr FamilyKind kind = FamilyKind::gamma;
  static constexpr bool has_null_shape = true;

  static double log_pdf(double t, double rate, double shape) {
    return shape * std::log(rate) + (shape - 1.0) * std::log(t) - rate * t - std::lgamma(shape);
  }
  static double log_survival(double t, double rate, double shape) {
    return special::log_gamma_q(shape, rate * t);
  }
  static double cdf(double t, double rate, double shape) {
    return special::gamma_p(shape, rate * t);
  }
  static double log_mean(double rate, double shape) { return std::log(shape) - std::log(rate); }
  static double raw_moment(int k, double rate, double shape) {
    return std::exp(std::lgamma(shape + k) - std::lgamma(shape) - k * std::log(rate));
  }
  // int_0^t (1-F) = t Q(alpha, lambda t) + (alpha/lambda) P(alpha+1, lambda t).
  static double forward_cdf(double t, double rate, double shape) {
    const double x = rate * t;
    return x / shape * special::gamma_q(shape, x) + special::gamma_p(shape + 1.0, x);
  }
  static double sample(double rate, double shape, CounterRng& rng) {
    return rng.gamma(shape) / rate;
  }
};

struct Lognormal {
  static constexpr FamilyKind kind = FamilyKind::lognormal;
  static constexpr bool has_null_shape = false;

  static double z(double t, double rate, double shape) {
    return (std::log(t) + std::log(rate)) / shape;
  }
  static double log_pdf(double t, double rate, double shape) {
    const double zz = z(t, rate, shape);
    return -std::log(t) - std::log(shape) - special::kLogSqrt2Pi - 0.5 * zz * zz;
  }
  static double log_survival(double t, double rate, double shape) {
    return special::log_normal_sf(z(t, rate, shape));
  }
  static double cdf(double t, double rate, double shape) {
    return special::normal_cdf(z(t, rate, shape));
  }
  static double log_mean(double rate, double shape) { return -std::log(rate) + 0.5 * shape * shape; }
  static double raw_moment(int k, double rate, double shape) {
    return std::exp(-k * std::log(rate) + 0.5 * k * k * shape * shape);
  }
  // Partial expectation: int_0^t s f(s) ds = mu Phi(z - sigma).
  static double forward_cdf(double t, double rate, double shape) {
    const double zz = z(t, rate, shape);
    const double tail = t * std::exp(log_survival(t, rate, shape) - log_mean(rate, shape));
    return tail + special::normal_cdf(zz - shape);
  }
  static double sample(double rate, double shape, CounterRng& rng) {
    return std::exp(-std::log(rate) + shape * rng.normal());
  }
};

}  // namespace traits

// Invokes fn with the traits type for `kind`.
template <class Fn>
decltype(auto) with_family(FamilyKind kind, Fn&& fn) {
  switch (kind) {
    case FamilyKind::weibull:
      return fn(traits::Weibull{});
    case FamilyKind::gamma:
      return fn(traits::Gamma{});
    case FamilyKind::lognormal:
      break;
  }
  return fn(traits::Lognormal{});
}

// Weibull and Gamma satisfy f = g at alpha = 1 (the exponential); lognormal
// has no such point.
inline bool has_null_shape(FamilyKind kind) { return kind != FamilyKind::lognormal; }

inline double null_shape(FamilyKind kind) {
  if (!has_null_shape(kind)) {
    throw UnsupportedFamily("family '" + std::string(to_string(kind)) +
                            "' has no shape at which f and g coincide");
  }
  return 1.0;
}

inline void require_null_family(FamilyKind kind) { (void)null_shape(kind); }

class IncubationFamily {
 public:
  IncubationFamily(FamilyKind kind, double rate, double shape)
      : kind_(kind), rate_(rate), shape_(shape) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw DomainError("rate must be positive and finite, got " + std::to_string(rate));
    }
    if (!(shape > 0.0) || !std::isfinite(shape)) {
      throw DomainError("shape must be positive and finite, got " + std::to_string(shape));
    }
  }

  static IncubationFamily weibull(double rate, double shape) {
    return {FamilyKind::weibull, rate, shape};
  }
  static IncubationFamily gamma(double rate, double shape) {
    return {FamilyKind::gamma, rate, shape};
  }
  static IncubationFamily lognormal(double rate, double shape) {
    return {FamilyKind::lognormal, rate, shape};
  }

  FamilyKind kind() const { return kind_; }
  double rate() const { return rate_; }
  double shape() const { return shape_; }

 private:
  FamilyKind kind_;
  double rate_;
  double shape_;
};

namespace detail {
inline void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError("time must be positive and finite, got " + std::to_string(t));
  }
}
}  // namespace detail

inline double log_pdf_f(const IncubationFamily& fam, double t) {
  detail::check_time(t);
  return with_family(fam.kind(),
                     [&](auto tr) { return tr.log_pdf(t, fam.rate(), fam.shape()); });
}

inline double pdf_f(const IncubationFamily& fam, double t) { return std::exp(log_pdf_f(fam, t)); }

inline double cdf_f(const IncubationFamily& fam, double t) {
  if (t <= 0.0) return 0.0;
  return with_family(fam.kind(), [&](auto tr) { return tr.cdf(t, fam.rate(), fam.shape()); });
}

inline double log_survival_f(const IncubationFamily& fam, double t) {
  if (t <= 0.0) return 0.0;
  return with_family(fam.kind(),
                     [&](auto tr) { return tr.log_survival(t, fam.rate(), fam.shape()); });
}

inline double mean(const IncubationFamily& fam) {
  return std::exp(
      with_family(fam.kind(), [&](auto tr) { return tr.log_mean(fam.rate(), fam.shape()); }));
}

// Forward-time density g(t) = (1 - F(t)) / mu.
inline double log_pdf_g(const IncubationFamily& fam, double t) {
  detail::check_time(t);
  return with_family(fam.kind(), [&](auto tr) {
    return tr.log_survival(t, fam.rate(), fam.shape()) - tr.log_mean(fam.rate(), fam.shape());
  });
}

inline double pdf_g(const IncubationFamily& fam, double t) { return std::exp(log_pdf_g(fam, t)); }

// G(t) = int_0^t g(s) ds, in closed form for each family.
inline double cdf_g(const IncubationFamily& fam, double t) {
  if (t <= 0.0) return 0.0;
  return with_family(fam.kind(),
                     [&](auto tr) { return tr.forward_cdf(t, fam.rate(), fam.shape()); });
}

class MixtureModel {
 public:
  MixtureModel(IncubationFamily family, double p) : family_(family), p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("mixing weight p must lie in [0,1], got " + std::to_string(p));
    }
  }

  const IncubationFamily& family() const { return family_; }
  double p() const { return p_; }

 private:
  IncubationFamily family_;
  double p_;
};

inline double log_pdf_h(const MixtureModel& model, double t) {
  const double p = model.p();
  if (p == 1.0) return log_pdf_f(model.family(), t);
  if (p == 0.0) return log_pdf_g(model.family(), t);
  return special::log_sum_exp(std::log(p) + log_pdf_f(model.family(), t),
                              std::log1p(-p) + log_pdf_g(model.family(), t));
}

inline double pdf_h(const MixtureModel& model, double t) { return std::exp(log_pdf_h(model, t)); }

inline double cdf_h(const MixtureModel& model, double t) {
  return model.p() * cdf_f(model.family(), t) + (1.0 - model.p()) * cdf_g(model.family(), t);
}

// Score components under the null exponential model (shape = 1, rate = rate0):
//   x  = d log f / d lambda  (equal to d log g / d lambda there)
//   y1 = d log f / d alpha
//   y2 = d log g / d alpha
struct NullScores {
  double x = 0.0;
  double y1 = 0.0;
  double y2 = 0.0;
};

inline NullScores score_vector(FamilyKind kind, double rate0, double t) {
  detail::check_time(t);
  if (!(rate0 > 0.0)) throw DomainError("rate must be positive");
  const double x = rate0 * t;
  const double lx = std::log(x);
  switch (kind) {
    case FamilyKind::weibull:
      // log g = log lambda - lgamma(1 + 1/alpha) - (lambda t)^alpha; psi(2) = 1 - gamma_E.
      return {1.0 / rate0 - t, 1.0 + (1.0 - x) * lx, 1.0 - special::kEulerGamma - x * lx};
    case FamilyKind::gamma:
      // d/da log Q(a, x) at a = 1 is log x + e^x E1(x) + gamma_E.
      return {1.0 / rate0 - t, lx + special::kEulerGamma,
              lx + special::kEulerGamma - 1.0 + special::scaled_exp_e1(x)};
    case FamilyKind::lognormal:
      break;
  }
  throw UnsupportedFamily("null scores are defined only for weibull and gamma");
}

struct HazardLimit {
  enum class Kind { zero, infinity, finite };
  Kind kind = Kind::zero;
  double value = 0.0;  // meaningful only for Kind::finite
};

enum class Identifiability { fully_identifiable, shared_params_only_p_not_identifiable };

struct IdentifiabilityClass {
  Identifiability category = Identifiability::fully_identifiable;
  HazardLimit hazard_limit;
};

// A(lambda, alpha) = lim f / (1 - F): lognormal -> 0; gamma -> lambda;
// weibull -> 0, lambda or infinity as alpha <, =, > 1. The parameters are
// fully identifiable unless the hazard is constant (the exponential case).
inline IdentifiabilityClass identifiability_class(const IncubationFamily& fam) {
  using K = HazardLimit::Kind;
  IdentifiabilityClass out;
  switch (fam.kind()) {
    case FamilyKind::lognormal:
      out.hazard_limit = {K::zero, 0.0};
      break;
    case FamilyKind::gamma:
      out.hazard_limit = {K::finite, fam.rate()};
      break;
    case FamilyKind::weibull:
      if (fam.shape() < 1.0) {
        out.hazard_limit = {K::zero, 0.0};
      } else if (fam.shape() > 1.0) {
        out.hazard_limit = {K::infinity, 0.0};
      } else {
        out.hazard_limit = {K::finite, fam.rate()};
      }
      break;
  }
  if (fam.kind() != FamilyKind::lognormal && fam.shape() == 1.0) {
    out.category = Identifiability::shared_params_only_p_not_identifiable;
  }
  return out;
}

inline std::string_view to_string(Identifiability c) {
  return c == Identifiability::fully_identifiable ? "fully_identifiable"
                                                  : "shared_params_only_p_not_identifiable";
}

inline std::string_view to_string(HazardLimit::Kind k) {
  switch (k) {
    case HazardLimit::Kind::zero:
      return "zero";
    case HazardLimit::Kind::infinity:
      return "infinity";
    case HazardLimit::Kind::finite:
      return "finite";
  }
  return "unknown";
}

}  // namespace fwdmix
