#pragma once

// Pearson chi-square goodness of fit for the fitted mixture. Expected counts
// come from quadrature of h over each interval; sparse bins are merged into
// their left neighbour, scanning right to left, until every E_i >= 5. The
// reference distribution is chi-square with k - 4 degrees of freedom (three
// fitted parameters), even near alpha = 1 where p is weakly identified.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/quadrature.hpp"

namespace fwdmix {

struct GofInterval {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

struct GofReport {
  double statistic = 0.0;
  int k = 0;
  int df = 0;
  double p_value = 1.0;
  std::vector<GofInterval> intervals;
  std::vector<double> observed;
  std::vector<double> expected;
};

struct GofOptions {
  int quadrature_panels = 16;
  double min_expected = 5.0;
};

// Interior break points of [0,0.5), [i-0.5,i+0.5) for i = 1..15, [15.5,inf).
inline std::vector<double> default_gof_breaks() {
  std::vector<double> b;
  for (int i = 0; i <= 15; ++i) b.push_back(i + 0.5);
  return b;
}

// Probability mass of h on [lo, hi); hi may be infinite.
inline double interval_mass(const MixtureModel& model, double lo, double hi, int panels) {
  auto h = [&](double t) { return t > 0.0 ? pdf_h(model, t) : 0.0; };
  if (std::isinf(hi)) {
    const double cut = quad::tail_cutoff(
        [&](double t) { return 1.0 - cdf_h(model, t); }, 1e-14, std::max(lo, 1.0));
    if (cut <= lo) return 0.0;
    hi = cut;
    // Geometric panels: the tail is long and smooth.
    double sum = 0.0;
    const int pieces = 4 * panels;
    const double ratio = std::pow(hi / std::max(lo, 1e-300), 1.0 / pieces);
    double a = lo;
    for (int i = 0; i < pieces; ++i) {
      const double b = (i + 1 == pieces) ? hi : a * ratio;
      sum += quad::composite_gauss(h, a, b, 1);
      a = b;
    }
    return sum;
  }
  if (lo == 0.0) {
    // f may behave like t^(alpha-1) at the origin; the double-exponential rule
    // copes with that, Gauss-Legendre does not.
    return quad::integrate(h, 0.0, hi, 1e-14).value;
  }
  return quad::composite_gauss(h, lo, hi, panels);
}

// Observations are (value, weight) pairs; values may be zero, as with
// integer day counts, which land in the interval centred on them.
inline GofReport gof_test(const std::vector<std::pair<double, double>>& observations,
                          const MixtureModel& model,
                          std::optional<std::vector<double>> breaks = std::nullopt,
                          const GofOptions& opt = {}) {
  std::vector<double> b = breaks ? *breaks : default_gof_breaks();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i] > 0.0) || (i > 0 && !(b[i] > b[i - 1]))) {
      throw DomainError("interval break points must be positive and increasing");
    }
  }
  struct Bin {
    GofInterval iv;
    double observed;
    double expected;
  };
  std::vector<Bin> bins;
  double lo = 0.0;
  double n = 0.0;
  for (const auto& [v, w] : observations) {
    if (!(v >= 0.0) || !(w >= 0.0)) throw DomainError("observations must be non-negative");
    n += w;
  }
  for (std::size_t i = 0; i <= b.size(); ++i) {
    const double hi = i < b.size() ? b[i] : std::numeric_limits<double>::infinity();
    bins.push_back({{lo, hi}, 0.0, n * interval_mass(model, lo, hi, opt.quadrature_panels)});
    lo = hi;
  }
  for (const auto& [v, w] : observations) {
    const auto j = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), v) - b.begin());
    bins[j].observed += w;
  }
  for (std::size_t i = bins.size() - 1; i >= 1; --i) {
    if (bins[i].expected < opt.min_expected) {
      bins[i - 1].iv.upper = bins[i].iv.upper;
      bins[i - 1].observed += bins[i].observed;
      bins[i - 1].expected += bins[i].expected;
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  if (bins.size() > 1 && bins[0].expected < opt.min_expected) {
    bins[1].iv.lower = bins[0].iv.lower;
    bins[1].observed += bins[0].observed;
    bins[1].expected += bins[0].expected;
    bins.erase(bins.begin());
  }

  GofReport rep;
  rep.k = static_cast<int>(bins.size());
  rep.df = rep.k - 4;
  if (rep.df < 1) {
    throw SampleTooSmall("only " + std::to_string(rep.k) +
                         " intervals remain after merging; need at least 5");
  }
  for (const auto& bin : bins) {
    rep.intervals.push_back(bin.iv);
    rep.observed.push_back(bin.observed);
    rep.expected.push_back(bin.expected);
    const double d = bin.observed - bin.expected;
    rep.statistic += d * d / bin.expected;
  }
  const boost::math::chi_squared chi(rep.df);
  rep.p_value = boost::math::cdf(boost::math::complement(chi, rep.statistic));
  return rep;
}

inline GofReport gof_test(const DurationSample& sample, const MixtureModel& model,
                          std::optional<std::vector<double>> breaks = std::nullopt,
                          const GofOptions& opt = {}) {
  std::vector<std::pair<double, double>> obs;
  obs.reserve(sample.n());
  for (double t : sample.times()) obs.emplace_back(t, 1.0);
  return gof_test(obs, model, std::move(breaks), opt);
}

}  // namespace fwdmix
