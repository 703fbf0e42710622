#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "evuq/sl/subjective_logic.hpp"
#include "support/oracles.hpp"

namespace evuq::sl {
namespace {

constexpr double kTight = 1e-9;

DirichletParams random_alpha(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> evidence(0.0, 60.0);
  std::bernoulli_distribution zero(0.2);
  std::vector<double> a(k);
  for (auto& v : a) v = 1.0 + (zero(rng) ? 0.0 : evidence(rng));
  return DirichletParams(a);
}

TEST(SubjectiveLogic, ExemplarOpinions) {
  const DirichletParams flat({1, 1, 1});
  EXPECT_NEAR(vacuity(flat), 1.0, kTight);
  EXPECT_NEAR(dissonance(flat), 0.0, kTight);

  const DirichletParams conflicted({50, 50, 50});
  EXPECT_NEAR(vacuity(conflicted), 0.02, kTight);
  EXPECT_NEAR(dissonance(conflicted), 0.98, kTight);

  const DirichletParams confident({50, 1, 1});
  EXPECT_NEAR(vacuity(confident), 3.0 / 52.0, kTight);
  EXPECT_NEAR(dissonance(confident), 0.0, kTight);
}

TEST(SubjectiveLogic, AlphaIsEvidencePlusOne) {
  const auto a = alpha_from_evidence(EvidenceVector({0.0, 2.5, 7.0}));
  ASSERT_EQ(a.num_classes(), 3u);
  EXPECT_DOUBLE_EQ(a.alpha()[0], 1.0);
  EXPECT_DOUBLE_EQ(a.alpha()[1], 3.5);
  EXPECT_DOUBLE_EQ(a.alpha()[2], 8.0);
  EXPECT_DOUBLE_EQ(a.strength(), 12.5);
}

TEST(SubjectiveLogic, OpinionMassesAreAdditive) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + trial % 6;
    const auto a = random_alpha(rng, k);
    const Opinion o = opinion_from_alpha(a);
    double mass = o.uncertainty();
    for (double b : o.beliefs()) {
      EXPECT_GE(b, 0.0);
      mass += b;
    }
    EXPECT_NEAR(mass, 1.0, kMassTolerance);
    EXPECT_NEAR(o.uncertainty(), vacuity(a), kTight);
    const double base_sum =
        std::accumulate(o.base_rates().begin(), o.base_rates().end(), 0.0);
    EXPECT_NEAR(base_sum, 1.0, kMassTolerance);
  }
}

TEST(SubjectiveLogic, ProjectedProbabilityEqualsDirichletMean) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_alpha(rng, 3 + trial % 4);
    const auto projected = projected_probability(opinion_from_alpha(a));
    const auto expected = expected_probability(a);
    ASSERT_EQ(projected.size(), expected.size());
    for (std::size_t y = 0; y < expected.size(); ++y) {
      EXPECT_NEAR(projected[y], expected[y], kTight);
    }
  }
}

TEST(SubjectiveLogic, DissonanceMatchesPairwiseOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_alpha(rng, 2 + trial % 7);
    EXPECT_NEAR(dissonance(a), testing::brute_force_dissonance(a.alpha()), kTight);
  }
}

TEST(SubjectiveLogic, ScoresStayInRange) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_alpha(rng, 3);
    const double vac = vacuity(a);
    const double diss = dissonance(a);
    EXPECT_GT(vac, 0.0);
    EXPECT_LE(vac, 1.0);
    EXPECT_GE(diss, 0.0);
    EXPECT_LE(diss + vac, 1.0 + kTight);
  }
}

TEST(SubjectiveLogic, VacuityFallsAsEvidenceGrows) {
  double previous = 1.1;
  for (double r : {0.0, 0.5, 2.0, 10.0, 100.0}) {
    const double v = vacuity(alpha_from_evidence(EvidenceVector({r, r / 2, 0.0})));
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(SubjectiveLogic, BalanceHandlesZeroMass) {
  EXPECT_EQ(balance(0.0, 0.3), 0.0);
  EXPECT_EQ(balance(0.3, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(balance(0.2, 0.2), 1.0);
  EXPECT_NEAR(balance(0.1, 0.3), 0.5, kTight);
}

TEST(SubjectiveLogic, OpinionWithZeroUncertaintyIsAccepted) {
  const Opinion dogmatic({0.5, 0.5}, 0.0);
  EXPECT_NEAR(dissonance(dogmatic), 1.0, kTight);
}

TEST(SubjectiveLogic, RejectsInvalidInputs) {
  EXPECT_THROW(EvidenceVector({1.0, -0.1}), DomainError);
  EXPECT_THROW(EvidenceVector({1.0}), DomainError);
  EXPECT_THROW(EvidenceVector({1.0, NAN}), DomainError);
  EXPECT_THROW(DirichletParams({0.5, 2.0}), DomainError);
  EXPECT_THROW(DirichletParams({1.0, INFINITY}), DomainError);
  EXPECT_THROW(Opinion({0.5, 0.6}, 0.1), DomainError);
  EXPECT_THROW(Opinion({-0.1, 0.6}, 0.5), DomainError);
  EXPECT_THROW(Opinion({0.2, 0.3}, 0.5, {0.7, 0.7}), DomainError);
  EXPECT_THROW(Opinion({0.2, 0.3}, 0.5, {1.0}), DomainError);
}

TEST(SubjectiveLogic, DirichletLogPdf) {
  // Dir(1, 1, 1) is uniform on the 2-simplex with density Gamma(3) = 2.
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_NEAR(dirichlet_log_pdf(DirichletParams({1, 1, 1}), p), std::log(2.0), kTight);
  // Dir(2, 1): density 2 p0 on the segment.
  const std::vector<double> q{0.25, 0.75};
  EXPECT_NEAR(dirichlet_log_pdf(DirichletParams({2, 1}), q), std::log(0.5), kTight);

  const DirichletParams a({2, 2, 2});
  EXPECT_THROW(dirichlet_log_pdf(a, std::vector<double>{0.0, 0.5, 0.5}), DomainError);
  EXPECT_THROW(dirichlet_log_pdf(a, std::vector<double>{0.3, 0.3, 0.3}), DomainError);
  EXPECT_THROW(dirichlet_log_pdf(a, std::vector<double>{0.5, 0.5}), DomainError);
}

TEST(SubjectiveLogic, NormalizedEntropy) {
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(normalized_entropy(uniform), 1.0, kTight);
  const std::vector<double> certain{0.0, 1.0, 0.0};
  EXPECT_EQ(normalized_entropy(certain), 0.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(3);
    double s = 0.0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
    EXPECT_NEAR(normalized_entropy(p), testing::reference_normalized_entropy(p), 1e-12);
  }
}

}  // namespace
}  // namespace evuq::sl
