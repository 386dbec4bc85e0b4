#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "mcdh/choice.hpp"

using namespace mcdh::choice;
using mcdh::model::ModelDims;
using mcdh::model::SensitivityTable;

TEST(Utilities, Examples) {
  ChoiceObservation o;
  o.features.assign(3 * 2, 0.0);
  const std::vector<double> beta{0.4, -1.5};
  for (double u : utilities(o, beta)) EXPECT_EQ(u, 0.0);
  o.features[1 * 2 + 1] = 2.0;  // price of alternative 1
  EXPECT_DOUBLE_EQ(utilities(o, beta)[1], -3.0);
  EXPECT_THROW(utilities(o, std::vector<double>{1.0, 2.0, 3.0, 4.0}), mcdh::InvalidArgument);
}

TEST(ChoiceProbabilities, Examples) {
  for (double p : choice_probabilities(std::vector<double>(4, 0.7))) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto p = choice_probabilities(std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
  const auto q = choice_probabilities(std::vector<double>{1000.0, 0.0});
  EXPECT_TRUE(std::isfinite(q[0]) && std::isfinite(q[1]));
  EXPECT_NEAR(q[0], 1.0, 1e-15);
  EXPECT_GE(q[1], 0.0);
}

TEST(ChoiceProbabilities, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int r = 0; r < 500; ++r) {
    const std::size_t J = 2 + static_cast<std::size_t>(r % 7);
    std::vector<double> v(J);
    for (double& x : v) x = (r % 2 ? u(rng) : u(rng) / 500.0);
    const auto p = choice_probabilities(v);
    double s = 0.0;
    for (double x : p) {
      EXPECT_TRUE(std::isfinite(x));
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    if (r % 2 == 0) {
      auto w = v;
      for (double& x : w) x += 3.25;
      const auto q = choice_probabilities(w);
      for (std::size_t j = 0; j < J; ++j) EXPECT_NEAR(p[j], q[j], 1e-12);
    }
  }
}

TEST(ChoiceProbabilities, RejectsNonFinite) {
  EXPECT_THROW(choice_probabilities(std::vector<double>{0.0, NAN}), mcdh::InvalidArgument);
  EXPECT_THROW(choice_probabilities(std::vector<double>{}), mcdh::InvalidArgument);
}

namespace {
Panel equal_utility_panel(std::size_t N, std::size_t J) {
  Panel p;
  p.dims = ModelDims::make(1, {J}, 0, 1);
  p.grid = mcdh::kernels::TimeGrid::consecutive(1);
  for (std::size_t n = 0; n < N; ++n) {
    ChoiceObservation o;
    o.features.assign(J * J, 0.0);
    o.chosen = n % J;
    p.observations.push_back(o);
  }
  return p;
}
}  // namespace

TEST(LogLikelihood, EqualUtilityExamples) {
  const Panel one = equal_utility_panel(1, 2);
  EXPECT_NEAR(log_likelihood(one, SensitivityTable(1, 1, 2)), std::log(0.5), 1e-15);
  const Panel many = equal_utility_panel(37, 5);
  EXPECT_NEAR(log_likelihood(many, SensitivityTable(1, 1, 5)), -37.0 * std::log(5.0), 1e-12);
}

TEST(LogLikelihood, MatchesNaiveEvaluatorOnRandomPanels) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd(0.0, 1.5);
  for (int r = 0; r < 100; ++r) {
    const std::size_t I = 1 + r % 4, T = 1 + r % 3;
    const std::vector<std::size_t> brands{2 + static_cast<std::size_t>(r % 3), 3};
    const Panel p = fixtures::random_panel(I, brands, T, 1 + r % 2, 1000 + static_cast<std::uint64_t>(r));
    SensitivityTable b(I, T, p.dims.K);
    for (double& x : b.data()) x = nd(rng);
    EXPECT_NEAR(log_likelihood(p, b), fixtures::naive_log_likelihood(p, b), 1e-10);
  }
}

TEST(LogLikelihood, FiniteAndNonPositiveAtExtremeUtilities) {
  Panel p = fixtures::random_panel(2, {3}, 2, 3, 5);
  SensitivityTable b(2, 2, p.dims.K);
  for (double& x : b.data()) x = 400.0;
  const double ll = log_likelihood(p, b);
  EXPECT_TRUE(std::isfinite(ll));
  EXPECT_LE(ll, 0.0);
}

TEST(LogLikelihood, ChosenUtilityIncreaseRaisesLikelihood) {
  // Single observation, J=3: raising the chosen brand's dummy coefficient raises the likelihood.
  Panel p = fixtures::random_panel(1, {3}, 1, 1, 17);
  p.observations[0].chosen = 2;
  SensitivityTable b(1, 1, 3);
  const double base = log_likelihood(p, b);
  b(0, 0, 1) = 0.5;  // dummy of brand 2
  EXPECT_GT(log_likelihood(p, b), base);
}

TEST(LogLikelihood, GradientMatchesFiniteDifferences) {
  const Panel p = fixtures::random_panel(3, {3, 2}, 2, 2, 44);
  std::mt19937_64 rng(45);
  const auto beta = fixtures::uniform_vector(3 * 2 * p.dims.K, -1.0, 1.0, rng);
  std::vector<double> g(beta.size(), 0.0);
  log_likelihood_dense(p, beta.data(), g.data());
  const auto fd = fixtures::fd_gradient([&](std::span<const double> x) { return log_likelihood_dense(p, x.data(), nullptr); },
                                        beta);
  EXPECT_LT(fixtures::max_relative_error(g, fd), 1e-8);
}

TEST(LogLikelihood, MissingPathIsConsistencyError) {
  const Panel p = fixtures::random_panel(2, {2}, 1, 1, 3);
  SensitivityTable b(2, 1, p.dims.K);
  b.mark_missing(1, 1);
  try {
    log_likelihood(p, b);
    FAIL() << "expected a consistency error";
  } catch (const mcdh::ConsistencyError& e) {
    EXPECT_NE(std::string(e.what()).find("i=1, k=1"), std::string::npos);
  }
  EXPECT_THROW(log_likelihood(p, SensitivityTable(3, 1, p.dims.K)), mcdh::ConsistencyError);
}

TEST(PairwiseSum, FixedTreeIsDeterministicAndAccurate) {
  std::vector<double> x(1001);
  std::iota(x.begin(), x.end(), 0.0);
  EXPECT_EQ(pairwise_sum(x), 500500.0);
  EXPECT_EQ(pairwise_sum(x), pairwise_sum(x));
}

TEST(Panel, ValidateCatchesBadReferences) {
  Panel p = fixtures::random_panel(2, {2}, 2, 1, 1);
  EXPECT_NO_THROW(p.validate());
  p.observations[0].chosen = 5;
  EXPECT_THROW(p.validate(), mcdh::ConsistencyError);
  Panel q = fixtures::random_panel(2, {2}, 2, 1, 1);
  q.dims.I = 3;
  EXPECT_THROW(q.validate(), mcdh::ConsistencyError);
}
