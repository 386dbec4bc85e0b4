#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "fixtures.hpp"
#include "mcdh/benchmarks.hpp"
#include "mcdh/evaluation.hpp"
#include "mcdh/gp_extrapolate.hpp"
#include "mcdh/sampler.hpp"

using namespace mcdh;
using eval::Confusion;

namespace {

// One parameter per coefficient, shared by everyone and every time point.
class PooledModel final : public ChoiceModel {
public:
  explicit PooledModel(PanelPtr p) : ChoiceModel(std::move(p)) {}
  ModelKind kind() const override { return ModelKind::logit; }
  std::size_t dimension() const override { return panel().dims.K; }
  std::vector<std::string> parameter_names() const override { return std::vector<std::string>(dimension(), "b"); }
  double log_density(std::span<const double>, std::span<double>) const override { return 0.0; }
  DensityParts parts(std::span<const double>) const override { return {}; }
  model::SensitivityTable sensitivities(std::span<const double> theta) const override {
    return fill(theta, panel().grid.size());
  }
  model::SensitivityTable extrapolate(std::span<const double> theta, std::span<const double> t,
                                      std::mt19937_64&) const override {
    return fill(theta, t.size());
  }

private:
  model::SensitivityTable fill(std::span<const double> theta, std::size_t T) const {
    model::SensitivityTable s(panel().dims.I, T, panel().dims.K);
    for (std::size_t i = 0; i < s.I(); ++i)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < s.K(); ++k) s(i, t, k) = theta[k];
    return s;
  }
};

sampler::PosteriorDraws draws_from(const std::vector<std::vector<double>>& rows) {
  sampler::PosteriorDraws d;
  d.dimension = rows.front().size();
  d.samples = rows.size();
  d.names.assign(d.dimension, "b");
  d.chains.resize(1);
  for (const auto& r : rows) d.chains[0].values.insert(d.chains[0].values.end(), r.begin(), r.end());
  return d;
}

choice::ChoiceObservation two_brand(std::size_t i, std::size_t t, double price0, double price1, std::size_t chosen) {
  return {i, 0, t, {0.0, price0, 1.0, price1}, chosen};
}

}  // namespace

TEST(MacroMetrics, PerfectDiagonal) {
  const auto m = eval::macro_metrics(Confusion::from_rows({{3, 0, 0}, {0, 4, 0}, {0, 0, 2}}));
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(*m.specificity, 1.0);
}

TEST(MacroMetrics, HandComputedTwoByTwo) {
  const auto c = Confusion::from_rows({{5, 5}, {0, 10}});
  const auto m = eval::macro_metrics(c);
  EXPECT_EQ(m.brand_precision[0], 1.0);
  EXPECT_EQ(m.brand_precision[1], 10.0 / 15.0);
  EXPECT_EQ(m.brand_recall[0], 0.5);
  EXPECT_EQ(m.brand_recall[1], 1.0);
  EXPECT_EQ(m.precision, (1.0 + 10.0 / 15.0) / 2.0);
  EXPECT_NEAR(m.precision, 0.8333333333, 1e-10);
  EXPECT_EQ(m.recall, 0.75);
  // brand 0: tn 10, fp 0; brand 1: tn 5, fp 5
  EXPECT_EQ(*m.brand_specificity[0], 1.0);
  EXPECT_EQ(*m.brand_specificity[1], 0.5);
  EXPECT_EQ(*m.specificity, 0.75);
  EXPECT_EQ(eval::hit_rate(c), 15.0 / 20.0);
}

TEST(MacroMetrics, SingleClassSpecificityExcluded) {
  const auto m = eval::macro_metrics(Confusion::from_rows({{7, 0}, {0, 0}}));
  EXPECT_FALSE(m.brand_specificity[0].has_value());
  EXPECT_EQ(*m.brand_specificity[1], 1.0);
  EXPECT_EQ(*m.specificity, 1.0);
  EXPECT_EQ(m.precision, 0.5);  // brand 1 never predicted
  EXPECT_EQ(m.recall, 0.5);     // brand 1 never observed
  EXPECT_FALSE(eval::macro_metrics(Confusion::from_rows({{7}})).specificity.has_value());
  EXPECT_THROW(eval::macro_metrics(Confusion(0)), InvalidArgument);
  EXPECT_THROW(Confusion::from_rows({{1, 2}}), InvalidArgument);
}

TEST(MacroMetrics, MetricsStayInUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 6);
  for (int rep = 0; rep < 200; ++rep) {
    Confusion c(4);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t p = 0; p < 4; ++p) c(a, p) = static_cast<std::uint64_t>(u(rng));
    const auto m = eval::macro_metrics(c);
    for (double v : {m.precision, m.recall, m.specificity.value_or(0.5), eval::hit_rate(c)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(eval::hit_rate(c), static_cast<double>(c.trace()) / static_cast<double>(c.total()));
  }
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<double> p{0.25, 0.375, 0.375};
  EXPECT_EQ(eval::argmax(p), 1u);
}

TEST(Pooling, IdentityIsZero) {
  const auto dims = model::ModelDims::make(3, {3, 2, 4}, 1, 2);
  for (double v : eval::pooling_metric(Eigen::MatrixXd::Identity(9, 9), dims)) EXPECT_EQ(v, 0.0);
}

TEST(Pooling, ConstantOffDiagonal) {
  const auto dims = model::ModelDims::make(3, {3, 2}, 1, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(5, 5, 0.3);
  c.diagonal().setOnes();
  for (double v : eval::pooling_metric(c, dims)) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Pooling, HandAverage) {
  const auto dims = model::ModelDims::make(1, {2, 2}, 1, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(4, 4);
  c(0, 2) = c(2, 0) = 0.1;
  c(0, 3) = c(3, 0) = -0.2;
  c(1, 2) = c(2, 1) = 0.3;
  c(1, 3) = c(3, 1) = -0.4;
  c(0, 1) = c(1, 0) = 0.9;  // within-category, ignored
  const auto p = eval::pooling_metric(c, dims);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(Pooling, InvariantToWithinCategoryOrder) {
  std::mt19937_64 rng(5);
  const auto dims = model::ModelDims::make(1, {3, 3}, 1, 2);
  const Eigen::MatrixXd c = fixtures::random_correlation(6, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 2, 0, 1, 4, 5, 3;
  const Eigen::MatrixXd shuffled = perm * c * perm.transpose();
  const auto a = eval::pooling_metric(c, dims), b = eval::pooling_metric(shuffled, dims);
  EXPECT_NEAR(a[0], b[0], 1e-14);
  EXPECT_NEAR(a[1], b[1], 1e-14);
}

TEST(Elasticity, HandArithmeticAndLimits) {
  EXPECT_DOUBLE_EQ(eval::elasticity(-2.0, 1.5, 0.3), -2.1);
  EXPECT_EQ(eval::elasticity(-2.0, 1.5, 1.0), 0.0);
  EXPECT_NEAR(eval::elasticity(-2.0, 1.5, 1.0 - 1e-12), 0.0, 1e-11);
  EXPECT_THROW(eval::elasticity(1.0, 1.0, 1.5), InvalidArgument);
}

// d log p_j / d log x_j of the softmax, by central differences in log price.
TEST(Elasticity, MatchesNumericalDerivativeOfSoftmax) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> price(0.5, 3.0);
  std::uniform_int_distribution<std::size_t> brands(2, 6);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t J = brands(rng);
    std::vector<double> a(J), x(J);
    for (std::size_t j = 0; j < J; ++j) {
      a[j] = nd(rng);
      x[j] = price(rng);
    }
    const double beta = 2.0 * nd(rng);
    const std::size_t j = static_cast<std::size_t>(rep) % J;
    auto log_p = [&](double log_xj) {
      std::vector<double> u(J);
      for (std::size_t q = 0; q < J; ++q) u[q] = a[q] + beta * (q == j ? std::exp(log_xj) : x[q]);
      return std::log(choice::choice_probabilities(u)[j]);
    };
    const double h = 1e-5;
    const double fd = (log_p(std::log(x[j]) + h) - log_p(std::log(x[j]) - h)) / (2.0 * h);
    std::vector<double> u(J);
    for (std::size_t q = 0; q < J; ++q) u[q] = a[q] + beta * x[q];
    const double p = choice::choice_probabilities(u)[j];
    const double e = eval::elasticity(beta, x[j], p);
    worst = std::max(worst, std::abs(e - fd) / std::max(1.0, std::abs(e)));
    if (p < 1.0 && beta != 0.0) EXPECT_EQ(std::signbit(e), std::signbit(beta));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(GpExtrapolate, InterpolatesAtTrainingTimes) {
  const auto grid = kernels::TimeGrid::consecutive(5);
  const std::vector<double> obs{0.3, -0.1, 0.8, 1.2, 0.4};
  const std::vector<double> at{1.0, 3.0};
  const auto c = eval::gp_extrapolate(grid, obs, {1.0, 2.0}, at);
  EXPECT_NEAR(c.mean(0), -0.1, 1e-6);
  EXPECT_NEAR(c.mean(1), 1.2, 1e-6);
  EXPECT_LE(c.cov.diagonal().maxCoeff(), 1e-6);
}

TEST(GpExtrapolate, RevertsToPriorFarAway) {
  const auto grid = kernels::TimeGrid::consecutive(5);
  const std::vector<double> obs{0.3, -0.1, 0.8, 1.2, 0.4};
  const std::vector<double> at{200.0};
  const auto c = eval::gp_extrapolate(grid, obs, {1.0, 2.0}, at);
  EXPECT_NEAR(c.mean(0), 0.0, 1e-12);
  EXPECT_NEAR(c.cov(0, 0), 1.0, 1e-12);
}

TEST(GpExtrapolate, OnePointClosedForm) {
  const kernels::TimeGrid grid(std::vector<double>{0.0});
  const std::vector<double> obs{2.0}, at{2.0};
  const auto c = eval::gp_extrapolate(grid, obs, {1.0, 2.0}, at);
  // k(0, 2) = exp(-0.5); the training variance carries 1e-8 jitter
  EXPECT_NEAR(c.mean(0), std::exp(-0.5) * 2.0, 1e-7);
  EXPECT_NEAR(c.mean(0), 1.21306, 1e-5);
  EXPECT_NEAR(c.cov(0, 0), 1.0 - std::exp(-1.0), 1e-7);
}

TEST(GpExtrapolate, ConditionalCovarianceIsPsd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(-3.0, 12.0);
  const auto grid = kernels::TimeGrid::consecutive(8);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> obs(8), at(6);
    for (double& v : obs) v = nd(rng);
    for (double& t : at) t = u(rng);
    const auto c = eval::gp_extrapolate(grid, obs, {1.0, 0.5 + 4.0 * std::abs(nd(rng))}, at, &rng);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    EXPECT_EQ(c.draw.size(), 6);
    for (Eigen::Index m = 0; m < c.draw.size(); ++m) EXPECT_TRUE(std::isfinite(c.draw(m)));
  }
}

PanelPtr two_brand_panel(std::vector<choice::ChoiceObservation> obs, std::size_t I, std::size_t T) {
  auto p = std::make_shared<choice::Panel>();
  p->dims = model::ModelDims::make(I, {2}, 0, T);
  p->grid = kernels::TimeGrid::consecutive(T);
  p->observations = std::move(obs);
  return p;
}

TEST(Forecast, SingleObservationConfusion) {
  const auto train = two_brand_panel({two_brand(0, 0, 0.0, 0.0, 0)}, 1, 1);
  choice::Panel hold = *two_brand_panel({two_brand(0, 0, 0.0, 0.0, 0)}, 1, 1);
  hold.grid = kernels::TimeGrid(std::vector<double>{1.0});
  const PooledModel m(train);
  // brand 1 dummy coefficient log(0.3 / 0.7) gives probabilities (0.7, 0.3)
  const auto draws = draws_from({{std::log(0.3 / 0.7), 0.0}});
  const auto rep = eval::forecast(m, draws, hold);
  ASSERT_EQ(rep.observations.size(), 1u);
  EXPECT_NEAR(rep.observations[0].probabilities[0], 0.7, 1e-15);
  EXPECT_NEAR(rep.observations[0].probabilities[1], 0.3, 1e-15);
  EXPECT_EQ(rep.observations[0].predicted, 0u);
  const auto& c = rep.categories[0];
  EXPECT_EQ(c.hit_rate, 1.0);
  EXPECT_EQ(c.confusion, Confusion::from_rows({{1, 0}, {0, 0}}));
  EXPECT_EQ(c.macro_precision, 0.5);
  EXPECT_EQ(c.macro_recall, 0.5);
  EXPECT_EQ(*c.macro_specificity, 1.0);
  EXPECT_EQ(rep.individuals[0].hit_rate, 1.0);
}

TEST(Forecast, DominantBrandHitRateIsItsShare) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::bernoulli_distribution b(0.35);
  std::vector<choice::ChoiceObservation> tr, ho;
  std::size_t chose1 = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    tr.push_back(two_brand(i, 0, nd(rng), nd(rng), 0));
    for (int r = 0; r < 10; ++r) {
      const std::size_t y = b(rng) ? 1 : 0;
      chose1 += y;
      ho.push_back(two_brand(i, 0, nd(rng), nd(rng), y));
    }
  }
  const auto train = two_brand_panel(tr, 20, 1);
  choice::Panel hold = *two_brand_panel(ho, 20, 1);
  hold.grid = kernels::TimeGrid(std::vector<double>{1.0});
  const PooledModel m(train);
  const auto rep = eval::forecast(m, draws_from({{40.0, 0.0}, {35.0, 0.1}}), hold);
  EXPECT_EQ(rep.categories[0].hit_rate, static_cast<double>(chose1) / 200.0);
  EXPECT_EQ(rep.overall_hit_rate, rep.categories[0].hit_rate);
}

TEST(Forecast, RandomPredictionsApproachOneOverJ) {
  const std::size_t J = 4, N = 8000;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, J - 1);
  auto p = std::make_shared<choice::Panel>();
  p->dims = model::ModelDims::make(1, {J}, 0, 1);
  p->grid = kernels::TimeGrid::consecutive(1);
  choice::Panel hold;
  hold.dims = p->dims;
  hold.grid = kernels::TimeGrid(std::vector<double>{1.0});
  for (std::size_t n = 0; n <= N; ++n) {
    choice::ChoiceObservation o{0, 0, 0, std::vector<double>(J * J, 0.0), pick(rng)};
    for (std::size_t j = 0; j < J; ++j) {
      if (j > 0) o.features[j * J + j - 1] = 1.0;
      o.features[j * J + J - 1] = nd(rng);
    }
    (n == N ? p->observations : hold.observations).push_back(std::move(o));
  }
  const PooledModel m(p);
  std::vector<double> theta(J, 0.0);
  theta[J - 1] = 3.0;  // prediction follows the random prices only
  const auto rep = eval::forecast(m, draws_from({theta}), hold);
  const double q = 1.0 / static_cast<double>(J);
  EXPECT_NEAR(rep.overall_hit_rate, q, 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(N)));
}

TEST(Forecast, AveragedProbabilitiesSumToOne) {
  const auto full = fixtures::random_panel(6, {3, 4}, 6, 2, 31, 2);
  choice::Panel train = full, hold = full;
  train.observations.clear();
  hold.observations.clear();
  train.grid = kernels::TimeGrid::consecutive(4);
  train.dims.T = 4;
  hold.grid = kernels::TimeGrid(std::vector<double>{4.0, 5.0});
  hold.dims.T = 2;
  for (auto o : full.observations) {
    if (o.time < 4) {
      train.observations.push_back(o);
    } else {
      o.time -= 4;
      hold.observations.push_back(o);
    }
  }
  const auto tp = std::make_shared<const choice::Panel>(train);
  std::mt19937_64 rng(2);
  for (ModelKind k : all_model_kinds()) {
    const auto m = bench::make_model(k, tp, 2);
    std::vector<std::vector<double>> rows;
    for (int d = 0; d < 5; ++d) rows.push_back(fixtures::uniform_vector(m->dimension(), -1.0, 1.0, rng));
    const auto draws = draws_from(rows);
    const auto rep = eval::forecast(*m, draws, hold, {.seed = 4});
    for (const auto& f : rep.observations) {
      double s = 0.0;
      for (double v : f.probabilities) s += v;
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
    const auto again = eval::forecast(*m, draws, hold, {.seed = 4});
    for (std::size_t n = 0; n < rep.observations.size(); ++n)
      EXPECT_EQ(rep.observations[n].probabilities, again.observations[n].probabilities);
    std::size_t counted = 0;
    for (const auto& c : rep.categories) counted += c.observations;
    EXPECT_EQ(counted, hold.observations.size());
    EXPECT_EQ(rep.draws_used, 5u);
    EXPECT_EQ(eval::forecast(*m, draws, hold, {.seed = 4, .max_draws = 2}).draws_used, 2u);
  }
}

TEST(Forecast, UnseenIndividualIsUnscoreable) {
  const auto train = two_brand_panel({two_brand(0, 0, 0.0, 0.0, 0)}, 2, 1);
  choice::Panel hold = *two_brand_panel({two_brand(1, 0, 0.0, 0.0, 0)}, 2, 1);
  hold.grid = kernels::TimeGrid(std::vector<double>{1.0});
  const PooledModel m(train);
  EXPECT_THROW(eval::forecast(m, draws_from({{0.0, 0.0}}), hold), UnscoreableIndividual);
}

TEST(ElasticityReport, SummariesAndRescaling) {
  const auto train = two_brand_panel({two_brand(0, 0, 0.5, 1.0, 0), two_brand(0, 0, 1.5, 0.7, 1), two_brand(1, 0, 0.2, 0.4, 1)}, 2, 1);
  const PooledModel m(train);
  const auto draws = draws_from({{0.3, -1.0}, {0.1, -2.0}, {0.2, -1.5}});
  const auto rep = eval::elasticities(m, draws);
  ASSERT_EQ(rep.cells.size(), 4u);  // 2 individuals x 2 brands, one time point
  for (const auto& c : rep.cells) {
    EXPECT_LE(c.q05, c.median);
    EXPECT_LE(c.median, c.q95);
    EXPECT_LT(c.median, 0.0);
  }
  // individual 1, brand 0, middle draw (beta -1.5, dummy 0.2)
  const double p0 = 1.0 / (1.0 + std::exp(0.2 + -1.5 * 0.4 - (-1.5 * 0.2)));
  EXPECT_NEAR(rep.cells[2].median, -1.5 * 0.2 * (1.0 - p0), 1e-14);

  // standardized prices: x = (raw - 3) / 2, so raw = 2x + 3 and the raw-price slope is beta / 2
  eval::ElasticityOptions opt;
  opt.price_scale = {{3.0, 2.0}};
  const auto scaled = eval::elasticities(m, draws, opt);
  EXPECT_TRUE(scaled.rescaled);
  EXPECT_NEAR(scaled.cells[2].median, -1.5 / 2.0 * (2.0 * 0.2 + 3.0) * (1.0 - p0), 1e-14);
  ASSERT_EQ(rep.categories.size(), 2u);
  EXPECT_NEAR(rep.categories[0].mean_median, 0.5 * (rep.cells[0].median + rep.cells[2].median), 1e-15);
}
