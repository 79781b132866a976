#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mpent/extraction.hpp"

using namespace mpent;

TEST(Rates, Psi) {
  const auto r = asymptotic_rates(psi_spec(0.6, 0.8));
  EXPECT_NEAR(r.per_subset.at({1, 2}), 0.64, 1e-15);
  EXPECT_NEAR(r.full, 0.9426831892554922, 1e-12);
}

TEST(Rates, ProductState) {
  const auto r = asymptotic_rates(psi_spec(1.0, 0.0));
  EXPECT_TRUE(r.per_subset.empty());
  EXPECT_EQ(r.full, 0.0);
}

TEST(Rates, PsiPrimeEqual) {
  const auto r = asymptotic_rates(psi_prime_spec(0.5, 0.5, 0.5, 0.5));
  EXPECT_NEAR(r.per_subset.at({0, 1}), 0.25, 1e-15);
  EXPECT_NEAR(r.per_subset.at({0, 2}), 0.25, 1e-15);
  EXPECT_NEAR(r.per_subset.at({1, 2}), 0.25, 1e-15);
  EXPECT_NEAR(r.full, 2.0, 1e-15);
}

TEST(Rates, FullSupportComponentCountsTowardFullSet) {
  const StateSpec spec(3, {{0.6, {kAlice}, {0, 0}, 2}, {0.8, {kAlice, kBob, kClaire}, {}, 4}});
  const auto r = asymptotic_rates(spec);
  EXPECT_NEAR(r.total({0, 1, 2}, 3), 0.64 * 2.0 + entropy({0.36, 0.64}), 1e-12);
}

TEST(ExpectedYields, TwoCopies) {
  const auto y = expected_yields(psi_spec(0.6, 0.8), 2);
  EXPECT_NEAR(y.epr.at({1, 2}), 0.64, 1e-12);
  EXPECT_NEAR(y.ghz, 0.2304, 1e-12);
}

TEST(ExpectedYields, LargeN) {
  const double h = std::sqrt(0.5);
  const auto y = expected_yields(psi_spec(h, h), 10000);
  EXPECT_NEAR(y.ghz, 0.99923090482262471, 1e-9);
  EXPECT_NEAR(y.epr.at({1, 2}), 0.5, 1e-9);
}

TEST(Extraction, ExplicitAndAnalyticAgree) {
  const auto spec = psi_spec(0.6, 0.8);
  const auto a = run_extraction(spec, 3, 2000, 9, SamplingMode::explicit_state);
  const auto b = run_extraction(spec, 3, 2000, 9, SamplingMode::analytic);
  EXPECT_TRUE(a.post_states_verified);
  for (std::size_t j = 0; j < a.probabilities.size(); ++j) EXPECT_NEAR(a.probabilities[j], b.probabilities[j], 1e-12);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(Extraction, DeterministicUnderSeed) {
  const auto spec = psi_spec(0.6, 0.8);
  const auto a = run_extraction(spec, 4, 500, 123, SamplingMode::analytic);
  const auto b = run_extraction(spec, 4, 500, 123, SamplingMode::analytic);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.ghz_mean, b.ghz_mean);
}

TEST(Extraction, TranscriptRecordsTrials) {
  const auto r = run_extraction(psi_spec(0.6, 0.8), 2, 5, 1, SamplingMode::explicit_state, kBob, true);
  EXPECT_EQ(r.transcript.size(), 5u);
  EXPECT_EQ(r.transcript.entries()[0].party, kBob);
}

TEST(Extraction, ProductStateYieldsNothing) {
  const auto r = run_extraction(psi_spec(1.0, 0.0), 5, 100, 1, SamplingMode::explicit_state);
  EXPECT_EQ(r.ghz_mean, 0.0);
  EXPECT_EQ(r.expected.ghz, 0.0);
}

TEST(EntropyConsistency, NamedStates) {
  EXPECT_LT(entropy_consistency_error(psi_spec(0.6, 0.8)), 1e-9);
  EXPECT_LT(entropy_consistency_error(psi_prime_spec(0.4, 0.5, 0.3, std::sqrt(0.5))), 1e-9);
}

TEST(ExtractionProperty, EprYieldEqualsSquaredCoefficient) {
  Rng rng(51);
  for (int i = 0; i < 20; ++i) {
    const double c0 = rng.uniform();
    const std::size_t n = 1 + gen::below(rng, 20);
    const auto y = expected_yields(psi_spec(c0, std::sqrt(1 - c0 * c0)), n);
    EXPECT_NEAR(y.epr.at({1, 2}), 1 - c0 * c0, 1e-12);
  }
}

TEST(ExtractionProperty, GhzYieldBelowEntropy) {
  Rng rng(52);
  for (int i = 0; i < 20; ++i) {
    const auto spec = gen::spec(rng);
    const auto y = expected_yields(spec, 1 + gen::below(rng, 15));
    EXPECT_LE(y.ghz, entropy(spec.squared_coefficients()) + 1e-12);
  }
}

TEST(ExtractionProperty, RandomSpecsEntropyConsistent) {
  Rng rng(53);
  for (int i = 0; i < 30; ++i) EXPECT_LT(entropy_consistency_error(gen::spec(rng)), 1e-9);
}
