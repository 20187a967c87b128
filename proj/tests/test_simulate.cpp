#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fwdmix/simulate.hpp"
#include "oracles.hpp"

using namespace fwdmix;

namespace {

std::vector<double> times_of(const DurationSample& s) { return {s.times().begin(), s.times().end()}; }

}  // namespace

TEST(Simulate, ForwardQuantileInvertsCdf) {
  for (auto fam : {IncubationFamily::weibull(1, 2), IncubationFamily::gamma(0.3, 0.6),
                   IncubationFamily::lognormal(2, 1.2)}) {
    for (double u : {1e-9, 0.01, 0.3, 0.5, 0.9, 0.999999}) {
      EXPECT_NEAR(cdf_g(fam, forward_quantile(fam, u)), u, 1e-10);
    }
  }
  EXPECT_THROW(forward_quantile(IncubationFamily::weibull(1, 1), 1.0), DomainError);
}

TEST(Simulate, PureIncubationBranch) {
  const auto fam = IncubationFamily::gamma(2.0, 1.7);
  const auto s = sample_mixture(MixtureModel(fam, 1.0), 100'000, 1);
  EXPECT_LT(oracle::ks_from_density(times_of(s), [&](double t) { return t > 0 ? pdf_f(fam, t) : 0.0; }),
            0.006);
}

TEST(Simulate, NullShapeGivesExponential) {
  for (double p : {0.0, 0.4, 1.0}) {
    const auto s = sample_mixture(MixtureModel(IncubationFamily::weibull(1.3, 1.0), p), 100'000, 2);
    EXPECT_LT(oracle::ks_from_cdf(times_of(s), [](double t) { return -std::expm1(-1.3 * t); }), 0.006)
        << "p=" << p;
  }
}

TEST(Simulate, ForwardMeanMatchesQuadrature) {
  const auto fam = IncubationFamily::weibull(1, 2);
  const auto s = sample_mixture(MixtureModel(fam, 0.0), 100'000, 3);
  const auto t = times_of(s);
  double m = 0, q = 0;
  for (double x : t) {
    m += x;
    q += x * x;
  }
  m /= t.size();
  const double se = std::sqrt((q / t.size() - m * m) / t.size());
  const double mean = oracle::integrate_log([&](double x) { return x * pdf_g(fam, x); }, 1e-30, 50.0);
  EXPECT_NEAR(m, mean, 4 * se);
}

TEST(Simulate, ForwardSamplerAgainstQuadratureCdf) {
  for (auto kind : {FamilyKind::weibull, FamilyKind::gamma, FamilyKind::lognormal}) {
    for (double lam : {0.5, 2.0}) {
      for (double a : {0.6, 1.8}) {
        const IncubationFamily fam(kind, lam, a);
        const auto s = sample_mixture(MixtureModel(fam, 0.0), 100'000, 4);
        const double d =
            oracle::ks_from_density(times_of(s), [&](double t) { return t > 0 ? pdf_g(fam, t) : 0.0; });
        EXPECT_LT(d, 0.006) << to_string(kind) << " " << lam << " " << a;
      }
    }
  }
}

TEST(Simulate, TabulateEdgeCases) {
  SimConfig c;
  c.levels = {0.1, 0.05};
  const std::vector<double> stats = {0.5, 3.0, 7.0, std::nan(""), 10.0};
  const double inf = std::numeric_limits<double>::infinity();
  const auto none = tabulate(c, SimMode::type1, stats, {inf, inf});
  for (const auto& r : none.rows) {
    EXPECT_EQ(r.rejections, 0u);
    EXPECT_EQ(r.rate, 0.0);
    EXPECT_EQ(r.se, 0.0);
  }
  EXPECT_EQ(none.failures, 1u);
  const auto t = tabulate(c, SimMode::type1, stats, {2.0, 8.0});
  EXPECT_EQ(t.rows[0].rejections, 3u);
  EXPECT_EQ(t.rows[0].replicates, 4u);
  EXPECT_DOUBLE_EQ(t.rows[0].rate, 0.75);
  EXPECT_DOUBLE_EQ(t.rows[0].se, std::sqrt(0.75 * 0.25 / 4));
  EXPECT_DOUBLE_EQ(t.rows[1].rate, 0.25);
  EXPECT_THROW(tabulate(c, SimMode::type1, stats, {1.0}), DomainError);
}

TEST(Simulate, Preconditions) {
  SimConfig c;
  c.replicates = 2;
  c.mc_draws = 1000;
  c.shape = 1.3;
  EXPECT_THROW(type1_table(c), DomainError);
  c.shape = 1.0;
  EXPECT_THROW(power_table(c), DomainError);
  c.replicates = 0;
  EXPECT_THROW(type1_table(c), DomainError);
  c.replicates = 2;
  c.levels = {1.2};
  EXPECT_THROW(type1_table(c), DomainError);
  c.levels = {0.05};
  c.family = FamilyKind::lognormal;
  EXPECT_THROW(type1_table(c), UnsupportedFamily);
}

TEST(Simulate, DeterministicAcrossThreadCounts) {
  SimConfig c;
  c.n = 100;
  c.replicates = 40;
  c.mc_draws = 100'000;
  c.seed = 123;
  c.threads = 1;
  const auto a = type1_table(c);
  c.threads = 4;
  const auto b = type1_table(c);
  EXPECT_EQ(a.statistics, b.statistics);
  std::ostringstream x, y;
  write_sim_table_csv(x, a);
  write_sim_table_csv(y, b);
  EXPECT_EQ(x.str(), y.str());
  for (const auto& r : a.rows) {
    EXPECT_GE(r.rate, 0.0);
    EXPECT_LE(r.rate, 1.0);
  }
}

TEST(Simulate, PowerTableRuns) {
  SimConfig c;
  c.shape = 1.65;
  c.p = 0.65;
  c.n = 200;
  c.replicates = 30;
  c.mc_draws = 100'000;
  c.levels = {0.01};
  const auto t = power_table(c);
  ASSERT_EQ(t.rows.size(), 1u);
  // Near-certain rejection at this alternative.
  EXPECT_GE(t.rows[0].rate, 0.9);
  EXPECT_EQ(t.mode, SimMode::power);
}

TEST(Simulate, QqData) {
  const auto dist = NullDistribution::sample(asymptotic_constants(FamilyKind::weibull), 10'000, 1);
  // Limit quantiles plotted against themselves lie on the identity line.
  std::vector<double> self;
  for (int i = 0; i < 1000; ++i) self.push_back(dist.quantile((i + 0.5) / 1000.0));
  for (const auto& q : qq_data(self, dist)) EXPECT_DOUBLE_EQ(q.empirical, q.limit);

  SimConfig c;
  c.replicates = 20;
  c.mc_draws = 10'000;
  c.seed = 5;
  const auto a = qq_data(c);
  const auto b = qq_data(c);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].empirical, b[i].empirical);
    EXPECT_EQ(a[i].limit, b[i].limit);
    if (i > 0) {
      EXPECT_GE(a[i].empirical, a[i - 1].empirical);
    }
  }
  std::ostringstream os;
  write_qq_csv(os, a);
  EXPECT_EQ(os.str().substr(0, 15), "empirical,limit");
}
