#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mpent/canonical.hpp"

using namespace mpent;

TEST(Canonical, EprAndGhzShapes) {
  const auto e = epr(kBob, kClaire, 3);
  EXPECT_EQ(e.local_dims(), (std::vector<Label>{1, 2, 2}));
  EXPECT_EQ(e.support_size(), 2u);
  EXPECT_TRUE(e.is_normalized());
  const auto g = level_ghz(5, 3);
  EXPECT_EQ(g.support_size(), 5u);
  EXPECT_NEAR(entanglement_entropy(g, {kBob}), std::log2(5.0), 1e-12);
}

TEST(Canonical, GhzOnSubset) {
  const PartyId sub[] = {kAlice, kClaire};
  const auto g = level_ghz(2, sub, 3);
  EXPECT_EQ(g.local_dim(kBob), 1u);
  EXPECT_NEAR(entanglement_entropy(g, {kAlice}), 1.0, 1e-12);
}

TEST(Canonical, PsiAmplitudes) {
  const auto s = psi(0.6, 0.8);
  EXPECT_EQ(s.local_dims(), (std::vector<Label>{2, 3, 3}));
  EXPECT_NEAR(std::abs(s.amplitude({0, 0, 0})), 0.6, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude({1, 1, 1})), 0.8 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude({1, 2, 2})), 0.8 / std::sqrt(2.0), 1e-15);
}

TEST(Canonical, PsiRejectsBadCoefficients) {
  EXPECT_THROW(psi(0.6, 0.6), std::invalid_argument);
  EXPECT_THROW(psi(-0.6, 0.8), std::invalid_argument);
  EXPECT_NO_THROW(psi(1.0, 0.0));
}

TEST(Canonical, PsiPrimeCutEntropies) {
  // Each EPR component crosses the cuts separating its two parties.
  const double c0 = 0.4, c1 = 0.5, c2 = 0.3;
  const double c3 = std::sqrt(1 - c0 * c0 - c1 * c1 - c2 * c2);
  const auto s = psi_prime(c0, c1, c2, c3);
  const double h = entropy({c0 * c0, c1 * c1, c2 * c2, c3 * c3});
  EXPECT_NEAR(entanglement_entropy(s, {kAlice}), h + c1 * c1 + c2 * c2, 1e-9);
  EXPECT_NEAR(entanglement_entropy(s, {kBob}), h + c1 * c1 + c3 * c3, 1e-9);
  EXPECT_NEAR(entanglement_entropy(s, {kClaire}), h + c2 * c2 + c3 * c3, 1e-9);
}

TEST(StateSpec, PsiSpecReproducesPsi) {
  EXPECT_TRUE(states_equal(psi_general(psi_spec(0.6, 0.8)), psi(0.6, 0.8), 1e-12));
}

TEST(StateSpec, PsiPrimeSpecReproducesPsiPrime) {
  EXPECT_TRUE(states_equal(psi_general(psi_prime_spec(0.5, 0.5, 0.5, 0.5)), psi_prime(0.5, 0.5, 0.5, 0.5), 1e-12));
  EXPECT_TRUE(states_equal(psi_general(psi_prime_spec(0.4, 0.5, 0.3, std::sqrt(0.5))), psi_prime(0.4, 0.5, 0.3, std::sqrt(0.5)),
                           1e-12));
}

TEST(StateSpec, Validation) {
  EXPECT_THROW(StateSpec(3, {{0.6, {kAlice}, {0, 0}, 2}, {0.6, {kBob, kClaire}, {0}, 2}}), std::invalid_argument);
  EXPECT_THROW(StateSpec(3, {{1.0, {kAlice, kAlice}, {0}, 2}}), std::invalid_argument);
  EXPECT_THROW(StateSpec(3, {{1.0, {kAlice}, {0}, 2}}), std::invalid_argument);
  EXPECT_THROW(StateSpec(3, {{1.0, {PartyId{5}}, {0, 0}, 2}}), std::out_of_range);
  EXPECT_THROW(StateSpec(1, {{1.0, {kAlice}, {}, 2}}), std::invalid_argument);
}

TEST(StateSpec, DropsZeroComponents) {
  const auto s = psi_spec(1.0, 0.0);
  EXPECT_EQ(s.size(), 1u);
}

TEST(Copies, ShapeAndBudget) {
  const auto c = copies(psi(0.6, 0.8), 3);
  EXPECT_EQ(c.local_dims(), (std::vector<Label>{8, 27, 27}));
  EXPECT_EQ(c.support_size(), 27u);
  EXPECT_TRUE(c.is_normalized());
  EXPECT_THROW(copies(psi(0.6, 0.8), 20), BudgetExceeded);
}

TEST(CanonicalProperty, RandomSpecsAreNormalizedAndLocallyOrthogonal) {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto spec = gen::spec(rng);
    const auto s = psi_general(spec);
    EXPECT_TRUE(s.is_normalized());
    std::vector<PureState> parts;
    for (std::size_t j = 0; j < spec.size(); ++j) parts.push_back(spec.component_state(j));
    EXPECT_TRUE(check_local_orthogonality(parts));
  }
}
