#pragma once

// Log-likelihood of the forward/incubation mixture and maximum-likelihood
// fitting under the full model (lambda, alpha, p) and the exponential null.
//
// The full fit profiles over a fixed p grid: at each grid value (lambda,
// alpha) are fitted by BFGS in (log lambda, log alpha) from several starts,
// then the best grid point is polished by alternating the (lambda, alpha)
// fit with an exact concave maximization over p in [0, 1].

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/optimize.hpp"
#include "fwdmix/special.hpp"

namespace fwdmix {

enum class Provenance { raw, jitter, midpoint };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::raw:
      return "raw";
    case Provenance::jitter:
      return "jitter";
    case Provenance::midpoint:
      return "midpoint";
  }
  return "unknown";
}

class DurationSample {
 public:
  explicit DurationSample(std::vector<double> times, Provenance provenance = Provenance::raw,
                          std::optional<std::uint64_t> seed = std::nullopt)
      : times_(std::move(times)), provenance_(provenance), seed_(seed) {
    if (times_.empty()) throw DomainError("duration sample is empty");
    for (double t : times_) {
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw DomainError("duration times must be positive and finite, got " + std::to_string(t));
      }
    }
  }

  std::span<const double> times() const { return times_; }
  std::size_t n() const { return times_.size(); }
  Provenance provenance() const { return provenance_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

 private:
  std::vector<double> times_;
  Provenance provenance_;
  std::optional<std::uint64_t> seed_;
};

struct FitOptions {
  int p_grid = 50;  // grid {0, 1/K, ..., 1}
  int max_iterations = 200;
  double rel_tol = 1e-10;
  int max_polish_rounds = 100;
  bool keep_trace = true;
};

struct FitResult {
  FamilyKind family = FamilyKind::weibull;
  double rate = 0.0;
  double shape = 0.0;
  double p = 1.0;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  std::vector<std::pair<double, double>> profile_trace;  // (p, profile loglik)
  bool tie_broken = false;  // another grid point matched the best profile value

  MixtureModel model() const { return {IncubationFamily(family, rate, shape), p}; }
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Prepared {
  std::vector<double> t;
  std::vector<double> log_t;
  double mean = 0.0;
  double mean_sq = 0.0;

  explicit Prepared(std::span<const double> times) : t(times.begin(), times.end()) {
    log_t.reserve(t.size());
    for (double v : t) {
      log_t.push_back(std::log(v));
      mean += v;
      mean_sq += v * v;
    }
    mean /= static_cast<double>(t.size());
    mean_sq /= static_cast<double>(t.size());
  }
  std::size_t n() const { return t.size(); }
};

// Log mixture density term for one observation given the component logs.
inline double mix_term(double log_p, double log_q, double lf, double lg) {
  return special::log_sum_exp(log_p + lf, log_q + lg);
}

template <class Tr>
double loglik_value(const Prepared& s, double rate, double shape, double p) {
  const double log_p = p > 0.0 ? std::log(p) : kNegInf;
  const double log_q = p < 1.0 ? std::log1p(-p) : kNegInf;
  const double log_mu = Tr::log_mean(rate, shape);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double lf = p > 0.0 ? Tr::log_pdf(s.t[i], rate, shape) : kNegInf;
    const double lg = p < 1.0 ? Tr::log_survival(s.t[i], rate, shape) - log_mu : kNegInf;
    const double term = mix_term(log_p, log_q, lf, lg);
    if (!(term > kNegInf)) return kNegInf;
    sum += term;
  }
  return std::isnan(sum) ? kNegInf : sum;
}

// Weibull in closed form: with u = log(lambda t), w = (lambda t)^alpha and
// L = lgamma(1 + 1/alpha),
//   log f = log lambda + log alpha + (alpha - 1) u - w
//   log g = log lambda - L - w.
// Returns the value and the gradient in (log lambda, log alpha).
inline double weibull_value_grad(const Prepared& s, double rate, double shape, double p,
                                 std::array<double, 2>& grad) {
  const double a = std::log(rate);
  const double b = std::log(shape);
  const double big_l = std::lgamma(1.0 + 1.0 / shape);
  const double psi = special::digamma(1.0 + 1.0 / shape) / shape;
  const double log_pa = p > 0.0 ? std::log(p) + b : kNegInf;
  const double log_qc = p < 1.0 ? std::log1p(-p) - big_l : kNegInf;
  double sum = 0.0;
  double ga = 0.0;
  double gb = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double u = a + s.log_t[i];
    const double w = std::exp(shape * u);
    const double la = log_pa + (shape - 1.0) * u;
    const double ls = special::log_sum_exp(la, log_qc);
    const double term = a - w + ls;
    if (!(term > kNegInf) || !std::isfinite(w)) return kNegInf;
    const double wa = p > 0.0 ? std::exp(la - ls) : 0.0;
    const double wc = 1.0 - wa;
    sum += term;
    ga += 1.0 - shape * w + wa * (shape - 1.0);
    gb += -shape * w * u + wa * (1.0 + shape * u) + wc * psi;
  }
  if (!std::isfinite(sum)) return kNegInf;
  grad = {ga, gb};
  return sum;
}

// Gamma with x = lambda t:
//   log f = alpha log x - log t - x - lgamma(alpha)
//   log g = log Q(alpha, x) + log lambda - log alpha.
// d log Q / d log alpha has no closed form and is taken by central difference.
inline double gamma_value_grad(const Prepared& s, double rate, double shape, double p,
                               std::array<double, 2>& grad) {
  const double a = std::log(rate);
  const double b = std::log(shape);
  const double lgam = std::lgamma(shape);
  const double psi = special::digamma(shape);
  const double log_p = p > 0.0 ? std::log(p) : kNegInf;
  const double log_q = p < 1.0 ? std::log1p(-p) : kNegInf;
  constexpr double h = 1e-5;
  const double up = shape * std::exp(h);
  const double dn = shape * std::exp(-h);
  double sum = 0.0;
  double ga = 0.0;
  double gb = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double x = rate * s.t[i];
    const double lx = a + s.log_t[i];
    const double lf = p > 0.0 ? shape * lx - s.log_t[i] - x - lgam : kNegInf;
    const double lq = p < 1.0 ? special::log_gamma_q(shape, x) : 0.0;
    const double lg = p < 1.0 ? lq + a - b : kNegInf;
    const double term = mix_term(log_p, log_q, lf, lg);
    if (!(term > kNegInf)) return kNegInf;
    sum += term;
    const double wf = p > 0.0 ? std::exp(log_p + lf - term) : 0.0;
    const double wg = 1.0 - wf;
    ga += wf * (shape - x);
    gb += wf * shape * (lx - psi);
    if (p < 1.0) {
      const double dq = (special::log_gamma_q(up, x) - special::log_gamma_q(dn, x)) / (2.0 * h);
      ga += wg * (1.0 - std::exp(shape * lx - x - lgam - lq));
      gb += wg * (dq - 1.0);
    }
  }
  if (!std::isfinite(sum) || !std::isfinite(ga) || !std::isfinite(gb)) return kNegInf;
  grad = {ga, gb};
  return sum;
}

template <class Tr>
double loglik_value_grad(const Prepared& s, double rate, double shape, double p,
                         std::array<double, 2>& grad) {
  if constexpr (Tr::kind == FamilyKind::weibull) {
    return weibull_value_grad(s, rate, shape, p, grad);
  } else if constexpr (Tr::kind == FamilyKind::gamma) {
    return gamma_value_grad(s, rate, shape, p, grad);
  } else {
    const double v = loglik_value<Tr>(s, rate, shape, p);
    if (!(v > kNegInf)) return v;
    constexpr double h = 1e-6;
    const double ra = loglik_value<Tr>(s, rate * std::exp(h), shape, p);
    const double rb = loglik_value<Tr>(s, rate * std::exp(-h), shape, p);
    const double sa = loglik_value<Tr>(s, rate, shape * std::exp(h), p);
    const double sb = loglik_value<Tr>(s, rate, shape * std::exp(-h), p);
    grad = {(ra - rb) / (2.0 * h), (sa - sb) / (2.0 * h)};
    if (!std::isfinite(grad[0]) || !std::isfinite(grad[1])) return kNegInf;
    return v;
  }
}

// Per-observation log f and log g at fixed (rate, shape).
template <class Tr>
void component_logs(const Prepared& s, double rate, double shape, std::vector<double>& lf,
                    std::vector<double>& lg) {
  const double log_mu = Tr::log_mean(rate, shape);
  lf.resize(s.n());
  lg.resize(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) {
    lf[i] = Tr::log_pdf(s.t[i], rate, shape);
    lg[i] = Tr::log_survival(s.t[i], rate, shape) - log_mu;
  }
}

inline double loglik_from_components(const std::vector<double>& lf, const std::vector<double>& lg,
                                     double p) {
  const double log_p = p > 0.0 ? std::log(p) : kNegInf;
  const double log_q = p < 1.0 ? std::log1p(-p) : kNegInf;
  double sum = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    const double term = mix_term(log_p, log_q, p > 0.0 ? lf[i] : kNegInf,
                                 p < 1.0 ? lg[i] : kNegInf);
    if (!(term > kNegInf)) return kNegInf;
    sum += term;
  }
  return sum;
}

// d/dp and d2/dp2 of the log-likelihood at fixed (rate, shape).
inline std::pair<double, double> p_derivatives(const std::vector<double>& lf,
                                               const std::vector<double>& lg, double p) {
  const double log_p = p > 0.0 ? std::log(p) : kNegInf;
  const double log_q = p < 1.0 ? std::log1p(-p) : kNegInf;
  double d1 = 0.0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    const double lh = mix_term(log_p, log_q, lf[i], lg[i]);
    const double r = std::exp(lf[i] - lh) - std::exp(lg[i] - lh);
    d1 += r;
    d2 -= r * r;
  }
  return {d1, d2};
}

// argmax over p in [0, 1] of a concave function; safeguarded Newton.
inline double maximize_p(const std::vector<double>& lf, const std::vector<double>& lg,
                         double p0) {
  if (p_derivatives(lf, lg, 1.0).first >= 0.0) return 1.0;
  if (p_derivatives(lf, lg, 0.0).first <= 0.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  double p = std::clamp(p0, 1e-3, 1.0 - 1e-3);
  for (int it = 0; it < 200; ++it) {
    const auto [d1, d2] = p_derivatives(lf, lg, p);
    if (d1 > 0.0) {
      lo = p;
    } else {
      hi = p;
    }
    double next = d2 < 0.0 ? p - d1 / d2 : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - p) < 1e-14 || hi - lo < 1e-14) return next;
    p = next;
  }
  return p;
}

// Shape-from-coefficient-of-variation start, either treating the data as
// pure incubation times (forward = false) or as pure forward times.
template <class Tr>
std::pair<double, double> moment_start(const Prepared& s, bool forward) {
  const double target = std::max(s.mean_sq / (s.mean * s.mean) - 1.0, 1e-6);
  auto cv2 = [&](double shape) {
    const double r1 = Tr::raw_moment(1, 1.0, shape);
    const double r2 = Tr::raw_moment(2, 1.0, shape);
    if (!forward) return r2 / (r1 * r1) - 1.0;
    const double r3 = Tr::raw_moment(3, 1.0, shape);
    return 4.0 * r3 * r1 / (3.0 * r2 * r2) - 1.0;
  };
  constexpr int kScan = 60;
  const double lo = std::log(0.05);
  const double hi = std::log(20.0);
  double best_shape = 1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  double prev_x = lo;
  double prev_d = cv2(std::exp(lo)) - target;
  bool bracketed = false;
  double bl = 0.0;
  double bh = 0.0;
  for (int k = 0; k <= kScan; ++k) {
    const double x = lo + (hi - lo) * k / kScan;
    const double d = cv2(std::exp(x)) - target;
    if (std::isfinite(d) && std::abs(d) < best_gap) {
      best_gap = std::abs(d);
      best_shape = std::exp(x);
    }
    if (k > 0 && std::isfinite(d) && std::isfinite(prev_d) && (d > 0.0) != (prev_d > 0.0)) {
      bracketed = true;
      bl = prev_x;
      bh = x;
      break;
    }
    prev_x = x;
    prev_d = d;
  }
  if (bracketed) {
    const double dl = cv2(std::exp(bl)) - target;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (bl + bh);
      const double dm = cv2(std::exp(mid)) - target;
      if ((dm > 0.0) == (dl > 0.0)) {
        bl = mid;
      } else {
        bh = mid;
      }
    }
    best_shape = std::exp(0.5 * (bl + bh));
  }
  const double r1 = Tr::raw_moment(1, 1.0, best_shape);
  const double unit_mean = forward ? Tr::raw_moment(2, 1.0, best_shape) / (2.0 * r1) : r1;
  return {unit_mean / s.mean, best_shape};
}

template <class Tr>
struct ProfileFitter {
  const Prepared& s;
  const FitOptions& opt;
  double log_rate_center;
  int iterations = 0;

  // Maximizes over (rate, shape) at fixed p. Returns (rate, shape, loglik, converged).
  struct Inner {
    double rate;
    double shape;
    double loglik;
    bool converged;
  };

  Inner fit_at(double p, double rate0, double shape0) {
    const double nn = static_cast<double>(s.n());
    auto objective = [&](const std::array<double, 2>& x, std::array<double, 2>& g) {
      if (std::abs(x[0] - log_rate_center) > 30.0 || std::abs(x[1]) > 7.0) {
        return std::numeric_limits<double>::infinity();
      }
      std::array<double, 2> grad{};
      const double v = loglik_value_grad<Tr>(s, std::exp(x[0]), std::exp(x[1]), p, grad);
      if (!(v > kNegInf)) return std::numeric_limits<double>::infinity();
      g = {-grad[0] / nn, -grad[1] / nn};
      return -v / nn;
    };
    opt::BfgsOptions bo;
    bo.max_iterations = opt.max_iterations;
    bo.rel_tol = opt.rel_tol;
    const auto r = opt::bfgs_minimize<2>(objective, {std::log(rate0), std::log(shape0)}, bo);
    iterations += r.iterations;
    if (!std::isfinite(r.value)) return {rate0, shape0, kNegInf, false};
    return {std::exp(r.x[0]), std::exp(r.x[1]), -r.value * nn, r.converged};
  }
};

template <class Tr>
FitResult fit_full_impl(const Prepared& s, const FitOptions& opt) {
  if (opt.p_grid < 1) throw DomainError("p grid needs at least two points");
  ProfileFitter<Tr> fitter{s, opt, -std::log(s.mean)};
  std::vector<std::pair<double, double>> starts = {moment_start<Tr>(s, false),
                                                   moment_start<Tr>(s, true)};
  if constexpr (Tr::has_null_shape) starts.emplace_back(1.0 / s.mean, 1.0);

  FitResult best;
  best.family = Tr::kind;
  std::vector<std::pair<double, double>> trace;
  std::optional<std::pair<double, double>> warm;
  int ties = 0;
  for (int k = 0; k <= opt.p_grid; ++k) {
    const double p = static_cast<double>(k) / opt.p_grid;
    typename ProfileFitter<Tr>::Inner inner{0.0, 0.0, kNegInf, false};
    auto consider = [&](std::pair<double, double> start) {
      const auto r = fitter.fit_at(p, start.first, start.second);
      if (r.loglik > inner.loglik) inner = r;
    };
    for (const auto& st : starts) consider(st);
    if (warm) consider(*warm);
    trace.emplace_back(p, inner.loglik);
    if (!(inner.loglik > kNegInf)) continue;
    warm = std::make_pair(inner.rate, inner.shape);
    if (inner.loglik >= best.loglik) {
      ties = inner.loglik == best.loglik ? ties + 1 : 0;
      best.rate = inner.rate;
      best.shape = inner.shape;
      best.p = p;
      best.loglik = inner.loglik;
      best.converged = inner.converged;
    }
  }
  if (!(best.loglik > kNegInf)) {
    std::string msg = "all profile optimizations failed; trace:";
    for (const auto& [p, ll] : trace) msg += " (" + std::to_string(p) + "," + std::to_string(ll) + ")";
    throw ConvergenceError(msg);
  }
  best.tie_broken = ties > 0;

  // Polish: alternate the exact p update with the (rate, shape) fit.
  std::vector<double> lf;
  std::vector<double> lg;
  for (int round = 0; round < opt.max_polish_rounds; ++round) {
    component_logs<Tr>(s, best.rate, best.shape, lf, lg);
    const double p_new = maximize_p(lf, lg, best.p);
    const double ll_p = loglik_from_components(lf, lg, p_new);
    const auto inner = fitter.fit_at(p_new, best.rate, best.shape);
    const double before = best.loglik;
    if (ll_p >= best.loglik) {
      best.p = p_new;
      best.loglik = ll_p;
    }
    if (inner.loglik >= best.loglik && best.p == p_new) {
      best.rate = inner.rate;
      best.shape = inner.shape;
      best.loglik = inner.loglik;
      best.converged = inner.converged;
    }
    if (best.loglik - before <= 1e-12 * std::abs(best.loglik)) break;
  }
  best.iterations = fitter.iterations;
  if (opt.keep_trace) best.profile_trace = std::move(trace);
  return best;
}

}  // namespace detail

inline double loglik(const MixtureModel& model, const DurationSample& sample) {
  const detail::Prepared s(sample.times());
  const auto& fam = model.family();
  const double v = with_family(fam.kind(), [&](auto tr) {
    return detail::loglik_value<decltype(tr)>(s, fam.rate(), fam.shape(), model.p());
  });
  if (!(v > detail::kNegInf)) {
    throw DegenerateLikelihood("an observation has zero density under the model");
  }
  return v;
}

// Gradient of the log-likelihood in (log lambda, log alpha, p).
inline std::array<double, 3> loglik_gradient(const MixtureModel& model,
                                             const DurationSample& sample) {
  const detail::Prepared s(sample.times());
  const auto& fam = model.family();
  return with_family(fam.kind(), [&](auto tr) {
    using Tr = decltype(tr);
    std::array<double, 2> g{};
    const double v = detail::loglik_value_grad<Tr>(s, fam.rate(), fam.shape(), model.p(), g);
    if (!(v > detail::kNegInf)) {
      throw DegenerateLikelihood("an observation has zero density under the model");
    }
    std::vector<double> lf;
    std::vector<double> lg;
    detail::component_logs<Tr>(s, fam.rate(), fam.shape(), lf, lg);
    return std::array<double, 3>{g[0], g[1], detail::p_derivatives(lf, lg, model.p()).first};
  });
}

// Null MLE: the exponential, lambda0 = 1 / mean, in closed form.
inline FitResult fit_null(const DurationSample& sample, FamilyKind family) {
  require_null_family(family);
  double sum = 0.0;
  for (double t : sample.times()) sum += t;
  const double n = static_cast<double>(sample.n());
  FitResult r;
  r.family = family;
  r.rate = n / sum;
  r.shape = null_shape(family);
  r.p = 1.0;
  r.loglik = n * std::log(r.rate) - n;
  r.converged = true;
  r.iterations = 0;
  return r;
}

inline FitResult fit_full(const DurationSample& sample, FamilyKind family,
                          const FitOptions& options = {}) {
  const detail::Prepared s(sample.times());
  return with_family(family, [&](auto tr) {
    return detail::fit_full_impl<decltype(tr)>(s, options);
  });
}

}  // namespace fwdmix
