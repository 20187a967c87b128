#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fwdmix/likelihood.hpp"
#include "fwdmix/random.hpp"
#include "fwdmix/simulate.hpp"

using namespace fwdmix;

namespace {

DurationSample exponential_sample(double rate, std::size_t n, std::uint64_t seed) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(stream_key(seed, i));
    t[i] = rng.exponential() / rate;
  }
  return DurationSample(std::move(t));
}

}  // namespace

TEST(Likelihood, LoglikExamples) {
  const MixtureModel m(IncubationFamily::weibull(1, 1), 0.37);
  EXPECT_NEAR(loglik(m, DurationSample({1.0})), -1.0, 1e-14);
  EXPECT_NEAR(loglik(m, DurationSample({1.0, 2.0})), -3.0, 1e-14);
  // Oracle: 0.4 f + 0.6 g at t = 1 with f = 2/e and g = e^-1 / Gamma(1.5).
  const double h = 0.4 * 2.0 * std::exp(-1.0) + 0.6 * std::exp(-1.0) / std::tgamma(1.5);
  const MixtureModel w(IncubationFamily::weibull(1, 2), 0.4);
  EXPECT_NEAR(loglik(w, DurationSample({1.0})), std::log(h), 1e-13);
  EXPECT_NEAR(loglik(w, DurationSample({1.0})), -0.609968, 1e-6);
}

TEST(Likelihood, ZeroDensityIsSignalled) {
  // (100)^200 overflows, so both components underflow to zero density.
  const MixtureModel m(IncubationFamily::weibull(1, 200), 0.5);
  EXPECT_THROW(loglik(m, DurationSample({100.0})), DegenerateLikelihood);
}

TEST(Likelihood, SampleValidation) {
  EXPECT_THROW(DurationSample(std::vector<double>{}), DomainError);
  EXPECT_THROW(DurationSample({1.0, 0.0}), DomainError);
  EXPECT_THROW(DurationSample({1.0, -2.0}), DomainError);
  EXPECT_THROW(DurationSample({std::numeric_limits<double>::infinity()}), DomainError);
}

TEST(Likelihood, NullFitExamples) {
  EXPECT_DOUBLE_EQ(fit_null(DurationSample({1, 1, 1}), FamilyKind::weibull).rate, 1.0);
  EXPECT_DOUBLE_EQ(fit_null(DurationSample({2}), FamilyKind::gamma).rate, 0.5);
  const auto big = exponential_sample(1.7, 100'000, 5);
  const auto r = fit_null(big, FamilyKind::weibull);
  EXPECT_NEAR(r.rate, 1.7, 0.02);
  // Closed-form loglik agrees with direct evaluation.
  EXPECT_NEAR(r.loglik, loglik(r.model(), big), 1e-8 * std::abs(r.loglik));
  EXPECT_THROW(fit_null(big, FamilyKind::lognormal), UnsupportedFamily);
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
  const auto s = sample_mixture(MixtureModel(IncubationFamily::weibull(0.8, 1.4), 0.5), 300, 3);
  for (auto kind : {FamilyKind::weibull, FamilyKind::gamma, FamilyKind::lognormal}) {
    const double lam = 0.9, a = 1.3, p = 0.45;
    const auto g = loglik_gradient(MixtureModel(IncubationFamily(kind, lam, a), p), s);
    const double h = 1e-6;
    auto ll = [&](double ll_, double la_, double p_) {
      return loglik(MixtureModel(IncubationFamily(kind, std::exp(ll_), std::exp(la_)), p_), s);
    };
    const double d0 = (ll(std::log(lam) + h, std::log(a), p) - ll(std::log(lam) - h, std::log(a), p)) / (2 * h);
    const double d1 = (ll(std::log(lam), std::log(a) + h, p) - ll(std::log(lam), std::log(a) - h, p)) / (2 * h);
    const double d2 = (ll(std::log(lam), std::log(a), p + h) - ll(std::log(lam), std::log(a), p - h)) / (2 * h);
    EXPECT_NEAR(g[0], d0, 1e-4 * std::max(1.0, std::abs(d0))) << to_string(kind);
    EXPECT_NEAR(g[1], d1, 1e-4 * std::max(1.0, std::abs(d1))) << to_string(kind);
    EXPECT_NEAR(g[2], d2, 1e-4 * std::max(1.0, std::abs(d2))) << to_string(kind);
  }
}

TEST(Likelihood, FullFitRecoversIdentifiableTruth) {
  const auto s = sample_mixture(MixtureModel(IncubationFamily::weibull(1, 1.65), 0.65), 5000, 11);
  const auto r = fit_full(s, FamilyKind::weibull);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.rate, 1.0, 0.1);
  EXPECT_NEAR(r.shape, 1.65, 0.1);
  EXPECT_NEAR(r.p, 0.65, 0.1);
}

TEST(Likelihood, FullFitUnderNull) {
  const auto s = exponential_sample(1.0, 5000, 12);
  const auto r = fit_full(s, FamilyKind::weibull);
  EXPECT_NEAR(r.shape, 1.0, 0.05);
  EXPECT_GE(r.loglik, fit_null(s, FamilyKind::weibull).loglik - 1e-9);
}

TEST(Likelihood, FullFitDominatesGridAndNull) {
  for (auto kind : {FamilyKind::weibull, FamilyKind::gamma}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto s =
          sample_mixture(MixtureModel(IncubationFamily(kind, 0.5, 1.3), 0.4), 400, seed);
      const auto r = fit_full(s, kind);
      EXPECT_GE(r.loglik, fit_null(s, kind).loglik);
      ASSERT_EQ(r.profile_trace.size(), 51u);
      for (const auto& [p, ll] : r.profile_trace) EXPECT_GE(r.loglik, ll);
      EXPECT_GE(r.p, 0.0);
      EXPECT_LE(r.p, 1.0);
      EXPECT_GT(r.rate, 0.0);
      EXPECT_GT(r.shape, 0.0);
    }
  }
}

TEST(Likelihood, StationarityAtOptimum) {
  const auto s = sample_mixture(MixtureModel(IncubationFamily::weibull(1, 1.65), 0.65), 1000, 21);
  const auto r = fit_full(s, FamilyKind::weibull);
  const auto g = loglik_gradient(r.model(), s);
  const double n = static_cast<double>(s.n());
  EXPECT_LT(std::hypot(g[0], g[1]), 1e-5 * n);
  if (r.p > 0.0 && r.p < 1.0) {
    EXPECT_LT(std::abs(g[2]), 1e-5 * n);
  } else if (r.p == 1.0) {
    EXPECT_GE(g[2], -1e-5 * n);
  } else {
    EXPECT_LE(g[2], 1e-5 * n);
  }
}

TEST(Likelihood, BoundaryProjectedGradient) {
  // Pure-f data: the optimum usually sits on p = 1.
  const auto s = sample_mixture(MixtureModel(IncubationFamily::gamma(1, 2.5), 1.0), 1000, 4);
  const auto r = fit_full(s, FamilyKind::gamma);
  const auto g = loglik_gradient(r.model(), s);
  const double n = static_cast<double>(s.n());
  EXPECT_LT(std::hypot(g[0], g[1]), 1e-5 * n);
  if (r.p == 1.0) {
    EXPECT_GE(g[2], -1e-5 * n);
  } else if (r.p == 0.0) {
    EXPECT_LE(g[2], 1e-5 * n);
  }
}

TEST(Likelihood, Deterministic) {
  const auto s = sample_mixture(MixtureModel(IncubationFamily::gamma(2, 0.7), 0.3), 500, 8);
  const auto a = fit_full(s, FamilyKind::gamma);
  const auto b = fit_full(s, FamilyKind::gamma);
  EXPECT_EQ(a.rate, b.rate);
  EXPECT_EQ(a.shape, b.shape);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_EQ(a.profile_trace, b.profile_trace);
}

TEST(Likelihood, LognormalFit) {
  const auto s = sample_mixture(MixtureModel(IncubationFamily::lognormal(0.5, 0.6), 0.7), 3000, 9);
  const auto r = fit_full(s, FamilyKind::lognormal);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.rate, 0.5, 0.1);
  EXPECT_NEAR(r.shape, 0.6, 0.1);
  EXPECT_NEAR(r.p, 0.7, 0.15);
}
