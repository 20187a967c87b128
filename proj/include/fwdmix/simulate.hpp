#pragma once

// Data generation from the mixture and the Monte Carlo harness for
// rejection-rate tables and Q-Q data.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/lrt.hpp"
#include "fwdmix/parallel.hpp"
#include "fwdmix/random.hpp"

namespace fwdmix {

// Solves G(t) = u for the forward-time CDF. Newton steps with g = G' are kept
// inside a bisection bracket.
inline double forward_quantile(const IncubationFamily& fam, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("forward quantile needs u in (0,1)");
  double lo = 0.0;
  double hi = mean(fam);
  while (cdf_g(fam, hi) < u) {
    lo = hi;
    hi *= 2.0;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double diff = cdf_g(fam, t) - u;
    if (std::abs(diff) < 1e-10) return t;
    if (diff > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    const double dens = pdf_g(fam, t);
    double next = t - diff / dens;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return next;
    t = next;
  }
  return t;
}

// n draws from h. Observation i uses the stream keyed by (seed, i).
inline DurationSample sample_mixture(const MixtureModel& model, std::size_t n,
                                     std::uint64_t seed) {
  const auto& fam = model.family();
  std::vector<double> out(n);
  with_family(fam.kind(), [&](auto tr) {
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(stream_key(seed, i));
      if (rng.uniform() < model.p()) {
        out[i] = tr.sample(fam.rate(), fam.shape(), rng);
      } else {
        out[i] = forward_quantile(fam, rng.uniform());
      }
    }
    return 0;
  });
  return DurationSample(std::move(out), Provenance::raw, seed);
}

enum class SimMode { type1, power };

struct SimConfig {
  FamilyKind family = FamilyKind::weibull;
  double rate = 1.0;
  double shape = 1.0;
  double p = 1.0;
  std::size_t n = 100;
  std::size_t replicates = 10'000;
  std::vector<double> levels = {0.10, 0.05, 0.01};
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t mc_draws = 10'000'000;  // limit draws behind the critical values
  FitOptions fit{.p_grid = 50, .max_iterations = 200, .rel_tol = 1e-10,
                 .max_polish_rounds = 100, .keep_trace = false};

  MixtureModel truth() const { return {IncubationFamily(family, rate, shape), p}; }
};

struct SimRow {
  double level = 0.0;
  double critical_value = 0.0;
  std::size_t rejections = 0;
  std::size_t replicates = 0;
  double rate = 0.0;
  double se = 0.0;
};

struct SimTable {
  SimConfig config;
  SimMode mode = SimMode::type1;
  std::vector<SimRow> rows;
  std::vector<double> statistics;  // per replicate; NaN where the fit failed
  std::size_t failures = 0;
};

inline void validate(const SimConfig& c) {
  if (c.replicates < 1) throw DomainError("replicates must be at least 1");
  if (c.n < 1) throw DomainError("sample size must be at least 1");
  for (double a : c.levels) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("levels must lie in (0,1)");
  }
  require_null_family(c.family);
  (void)c.truth();
}

// Seed of the limit draws used for critical values, kept apart from the
// replicate streams.
inline std::uint64_t null_seed(const SimConfig& c) { return stream_key(c.seed, 0x6e756c6cULL); }

// R_n for every replicate; replicate r samples with seed stream_key(seed, r).
inline std::vector<double> simulate_statistics(const SimConfig& c) {
  validate(c);
  const auto model = c.truth();
  std::vector<double> stats(c.replicates);
  parallel_for(
      c.replicates, c.threads,
      [&](std::size_t r) {
        try {
          const auto s = sample_mixture(model, c.n, stream_key(c.seed, r));
          stats[r] = lrt_statistic(s, c.family, c.fit);
        } catch (const Error&) {
          stats[r] = std::numeric_limits<double>::quiet_NaN();
        }
      },
      1);
  return stats;
}

// Rejection rates of `stats` against the given critical values (one per level).
inline SimTable tabulate(const SimConfig& c, SimMode mode, std::vector<double> stats,
                         const std::vector<double>& critical) {
  if (critical.size() != c.levels.size()) {
    throw DomainError("need one critical value per level");
  }
  SimTable t;
  t.config = c;
  t.mode = mode;
  std::size_t ok = 0;
  for (double s : stats) {
    if (std::isnan(s)) {
      ++t.failures;
    } else {
      ++ok;
    }
  }
  for (std::size_t j = 0; j < c.levels.size(); ++j) {
    SimRow row;
    row.level = c.levels[j];
    row.critical_value = critical[j];
    row.replicates = ok;
    for (double s : stats) row.rejections += !std::isnan(s) && s > critical[j];
    if (ok > 0) {
      row.rate = static_cast<double>(row.rejections) / static_cast<double>(ok);
      row.se = std::sqrt(row.rate * (1.0 - row.rate) / static_cast<double>(ok));
    }
    t.rows.push_back(row);
  }
  t.statistics = std::move(stats);
  return t;
}

inline std::vector<double> limit_critical_values(const SimConfig& c) {
  const auto dist = NullDistribution::sample(asymptotic_constants(c.family), c.mc_draws,
                                             null_seed(c), c.threads);
  std::vector<double> crit;
  for (double a : c.levels) crit.push_back(dist.critical_value(a));
  return crit;
}

inline SimTable type1_table(const SimConfig& c) {
  validate(c);
  if (c.shape != null_shape(c.family)) {
    throw DomainError("type-I simulation needs the null shape (alpha = 1)");
  }
  auto crit = limit_critical_values(c);
  return tabulate(c, SimMode::type1, simulate_statistics(c), crit);
}

inline SimTable power_table(const SimConfig& c) {
  validate(c);
  if (c.shape == null_shape(c.family)) {
    throw DomainError("power simulation needs an alternative shape (alpha != 1)");
  }
  auto crit = limit_critical_values(c);
  return tabulate(c, SimMode::power, simulate_statistics(c), crit);
}

struct QqPoint {
  double empirical;
  double limit;
};

// Sorted replicate statistics paired with limit quantiles at (i - 0.5) / m.
inline std::vector<QqPoint> qq_data(std::vector<double> stats, const NullDistribution& dist) {
  std::erase_if(stats, [](double s) { return std::isnan(s); });
  std::sort(stats.begin(), stats.end());
  std::vector<QqPoint> out;
  out.reserve(stats.size());
  const double m = static_cast<double>(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    out.push_back({stats[i], dist.quantile((static_cast<double>(i) + 0.5) / m)});
  }
  return out;
}

inline std::vector<QqPoint> qq_data(const SimConfig& c) {
  const auto dist = NullDistribution::sample(asymptotic_constants(c.family), c.mc_draws,
                                             null_seed(c), c.threads);
  return qq_data(simulate_statistics(c), dist);
}

inline std::string_view to_string(SimMode m) { return m == SimMode::type1 ? "type1" : "power"; }

inline void write_sim_table_csv(std::ostream& os, const SimTable& t,
                                std::string_view version = {}) {
  os << "mode,family,n,rate,shape,p,level,critical_value,rejections,replicates,"
        "rejection_rate,se,failures,seed"
     << (version.empty() ? "" : ",version") << '\n';
  char buf[64];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.critical_value);
    os << to_string(t.mode) << ',' << to_string(t.config.family) << ',' << t.config.n << ','
       << t.config.rate << ',' << t.config.shape << ',' << t.config.p << ',' << r.level << ','
       << buf << ',' << r.rejections << ',' << r.replicates << ',' << r.rate << ',' << r.se
       << ',' << t.failures << ',' << t.config.seed;
    if (!version.empty()) os << ',' << version;
    os << '\n';
  }
}

inline void write_qq_csv(std::ostream& os, const std::vector<QqPoint>& qq,
                         std::optional<std::uint64_t> seed = std::nullopt,
                         std::string_view version = {}) {
  os << "empirical,limit" << (seed ? ",seed" : "") << (version.empty() ? "" : ",version")
     << '\n';
  char buf[96];
  for (const auto& q : qq) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", q.empirical, q.limit);
    os << buf;
    if (seed) os << ',' << *seed;
    if (!version.empty()) os << ',' << version;
    os << '\n';
  }
}

}  // namespace fwdmix
