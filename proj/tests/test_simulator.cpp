#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mcdh/choice.hpp"
#include "mcdh/simulator.hpp"

using namespace mcdh;

namespace {

Eigen::MatrixXd omega_sample(const sim::SimOutput& out) {
  const std::size_t I = out.config.I, K = out.config.dims().K, L = out.config.L();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(I * L), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < K; ++k) x(static_cast<Eigen::Index>(i * L + l), static_cast<Eigen::Index>(k)) = out.truth.omega(i, k, l);
  return x;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

}  // namespace

TEST(Simulate, PaperPresetCounts) {
  const auto out = sim::simulate(sim::preset("paper-sec4", 3));
  EXPECT_EQ(out.panel.observations.size(), 100000u);
  EXPECT_EQ(out.panel.dims.C(), 5u);
  EXPECT_EQ(out.panel.dims.K, 30u);
  EXPECT_EQ(out.truth.factors.L(), 4u);
  for (double a : out.truth.alpha.alpha) EXPECT_EQ(a, 0.0);
  EXPECT_EQ(out.truth.factors.length_scales, (std::vector<double>{1, 2, 4, 8}));
}

TEST(Simulate, SeedDeterminism) {
  const auto a = sim::simulate(sim::preset("desk-small", 11));
  const auto b = sim::simulate(sim::preset("desk-small", 11));
  const auto c = sim::simulate(sim::preset("desk-small", 12));
  EXPECT_EQ(a.panel, b.panel);
  EXPECT_EQ(a.truth.factors.realized, b.truth.factors.realized);
  EXPECT_TRUE(std::equal(a.truth.beta.data().begin(), a.truth.beta.data().end(), b.truth.beta.data().begin()));
  EXPECT_FALSE(a.panel == c.panel);
}

TEST(Simulate, TruthAssembly) {
  const auto out = sim::simulate(sim::preset("desk-small", 5));
  const auto again = model::assemble_all(out.truth.alpha, out.truth.omega, out.truth.factors);
  EXPECT_TRUE(std::equal(again.data().begin(), again.data().end(), out.truth.beta.data().begin()));
  EXPECT_TRUE(std::isfinite(choice::log_likelihood(out.panel, out.truth.beta)));
}

TEST(Simulate, PresetsValidate) {
  for (const auto& name : sim::preset_names()) {
    const auto cfg = sim::preset(name, 1);
    EXPECT_NO_THROW(cfg.validate()) << name;
  }
  EXPECT_THROW(sim::preset("nope"), InvalidArgument);
  auto bad = sim::preset("tiny");
  bad.length_scales = {-1.0};
  EXPECT_THROW(sim::simulate(bad), InvalidArgument);
}

TEST(Simulate, SparseCategoryCounts) {
  const auto out = sim::simulate(sim::preset("sparse-category", 2));
  std::vector<std::size_t> train(3, 0), hold(3, 0);
  for (const auto& o : out.panel.observations) (o.time < 8 ? train : hold)[o.category]++;
  EXPECT_EQ(train, (std::vector<std::size_t>{40 * 8 * 10, 40 * 8 * 10, 40 * 8 * 1}));
  EXPECT_EQ(hold, (std::vector<std::size_t>{40 * 2 * 10, 40 * 2 * 10, 40 * 2 * 10}));
}

// Every joint outcome of the 4 tiny-preset occasions, frequency vs enumerated probability across seeds.
TEST(Simulate, TinyPresetMatchesEnumeration) {
  const int seeds = 4000;
  std::vector<double> expected(16, 0.0), variance(16, 0.0), observed(16, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const auto out = sim::simulate(sim::preset("tiny", static_cast<std::uint64_t>(s + 1)));
    ASSERT_EQ(out.panel.observations.size(), 4u);
    std::vector<double> p0(4);
    std::size_t pattern = 0;
    for (std::size_t n = 0; n < 4; ++n) {
      const auto& o = out.panel.observations[n];
      // direct two-alternative logit, no library choice code
      const double b0 = out.truth.beta(o.individual, o.time, 0), b1 = out.truth.beta(o.individual, o.time, 1);
      const double u0 = b1 * o.features[1], u1 = b0 * o.features[2] + b1 * o.features[3];
      p0[n] = 1.0 / (1.0 + std::exp(u1 - u0));
      pattern |= (o.chosen << n);
    }
    observed[pattern] += 1.0;
    for (std::size_t m = 0; m < 16; ++m) {
      double p = 1.0;
      for (std::size_t n = 0; n < 4; ++n) p *= ((m >> n) & 1u) ? 1.0 - p0[n] : p0[n];
      expected[m] += p;
      variance[m] += p * (1.0 - p);
    }
  }
  double total = 0.0;
  for (std::size_t m = 0; m < 16; ++m) {
    total += expected[m];
    EXPECT_LE(std::abs(observed[m] - expected[m]), 3.0 * std::sqrt(variance[m])) << "pattern " << m;
  }
  EXPECT_NEAR(total, seeds, 1e-8);
}

TEST(Simulate, ZeroDynamicsSharesFollowAlpha) {
  auto cfg = sim::preset("zero-dynamics", 4);
  cfg.choices_per_period = 400;
  const auto out = sim::simulate(cfg);
  for (std::size_t n = 0; n < out.truth.beta.data().size(); ++n)
    EXPECT_EQ(out.truth.beta.data()[n], out.truth.alpha.alpha[n % 6]);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> share(3, 0.0), implied(3, 0.0);
    double n = 0.0;
    for (const auto& o : out.panel.observations) {
      if (o.category != c) continue;
      n += 1.0;
      share[o.chosen] += 1.0;
      std::vector<double> u(3);
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t p = 0; p < 3; ++p) u[j] += o.features[j * 3 + p] * cfg.alpha[c * 3 + p];
      const double m = std::max({u[0], u[1], u[2]});
      const double z = std::exp(u[0] - m) + std::exp(u[1] - m) + std::exp(u[2] - m);
      for (std::size_t j = 0; j < 3; ++j) implied[j] += std::exp(u[j] - m) / z;
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const double p = implied[j] / n;
      EXPECT_NEAR(share[j] / n, p, 4.0 * std::sqrt(p * (1.0 - p) / n)) << "category " << c << " brand " << j;
    }
  }
}

TEST(Simulate, OmegaCovarianceIdentityScale) {
  sim::SimConfig cfg;
  cfg.I = 5000;
  cfg.brands = {2, 2};
  cfg.T = 1;
  cfg.choices_per_period = 1;
  cfg.length_scales = {1.0, 1.0};
  cfg.omega_sd = 1.5;
  cfg.seed = 99;
  const auto out = sim::simulate(cfg);
  const Eigen::MatrixXd S = sample_covariance(omega_sample(out));
  const double s2 = 2.25;
  for (Eigen::Index a = 0; a < S.rows(); ++a)
    for (Eigen::Index b = 0; b < S.cols(); ++b) {
      if (a == b) EXPECT_NEAR(S(a, b), s2, 0.05 * s2);
      else EXPECT_NEAR(S(a, b), 0.0, 0.05 * s2);
    }
}

TEST(Simulate, OmegaCovarianceCorrelated) {
  sim::SimConfig cfg;
  cfg.I = 5000;
  cfg.brands = {2, 2};
  cfg.T = 1;
  cfg.choices_per_period = 1;
  cfg.length_scales = {1.0, 1.0};
  cfg.omega_sd = 1.0;
  cfg.omega_equicorrelation = 0.6;
  cfg.seed = 7;
  const auto out = sim::simulate(cfg);
  const Eigen::MatrixXd S = sample_covariance(omega_sample(out));
  EXPECT_LE((S - out.truth.sigma_omega).cwiseAbs().maxCoeff(), 0.05);
}

// Truth should out-score random perturbations of itself.
TEST(Simulate, PosteriorPredictiveSanity) {
  for (const char* name : {"desk-small", "sparse-category"}) {
    const auto out = sim::simulate(sim::preset(name, 21));
    const double at_truth = choice::log_likelihood(out.panel, out.truth.beta);
    ASSERT_TRUE(std::isfinite(at_truth));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    int wins = 0;
    for (int r = 0; r < 20; ++r) {
      model::PopulationMeans alpha = out.truth.alpha;
      for (double& a : alpha.alpha) a += 0.5 * nd(rng);
      model::WeightTensor omega = out.truth.omega;
      for (double& w : omega.data()) w += 0.5 * nd(rng);
      const auto beta = model::assemble_all(alpha, omega, out.truth.factors);
      if (at_truth > choice::log_likelihood(out.panel, beta)) ++wins;
    }
    EXPECT_GE(wins, 18) << name;
  }
}

TEST(SplitHoldout,PartitionsAndRebases) {
  const auto out = sim::simulate(sim::preset("strong-dynamics", 3));
  const auto s = sim::split_holdout(out.panel, 2);
  EXPECT_EQ(s.train.grid.size(), 8u);
  EXPECT_EQ(s.holdout.grid.size(), 2u);
  EXPECT_EQ(s.holdout.grid[0], 8.0);
  EXPECT_EQ(s.train.observations.size() + s.holdout.observations.size(), out.panel.observations.size());
  for (const auto& o : s.train.observations) EXPECT_LT(o.time, 8u);
  for (const auto& o : s.holdout.observations) EXPECT_LT(o.time, 2u);
  EXPECT_NO_THROW(s.train.validate());
  EXPECT_THROW(sim::split_holdout(out.panel, 10), InvalidArgument);
}

TEST(AlignFactors, Identity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd truth(3, 12);
  for (Eigen::Index n = 0; n < truth.size(); ++n) truth.data()[n] = nd(rng);
  const auto a = sim::align_factors(truth, truth);
  EXPECT_EQ(a.permutation, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(a.signs, (std::vector<int>{1, 1, 1}));
  for (double c : a.abs_correlation) EXPECT_NEAR(c, 1.0, 1e-12);
}

TEST(AlignFactors, SwappedAndNegated) {
  Eigen::MatrixXd truth(2, 10);
  for (Eigen::Index t = 0; t < 10; ++t) {
    truth(0, t) = std::sin(0.7 * static_cast<double>(t));
    truth(1, t) = std::cos(0.3 * static_cast<double>(t)) + 0.1 * static_cast<double>(t);
  }
  Eigen::MatrixXd est(2, 10);
  est.row(0) = -truth.row(1);
  est.row(1) = -truth.row(0);
  const auto a = sim::align_factors(est, truth);
  EXPECT_EQ(a.permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(a.signs, (std::vector<int>{-1, -1}));
  for (double c : a.abs_correlation) EXPECT_NEAR(c, 1.0, 1e-12);
  EXPECT_LE((sim::apply_alignment(est, a) - truth).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AlignFactors, SmallNoise) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  const auto grid = kernels::TimeGrid::consecutive(40);
  Eigen::MatrixXd innov(4, 40);
  for (Eigen::Index n = 0; n < innov.size(); ++n) innov.data()[n] = nd(rng);
  const auto f = model::realize_factors(innov, {1.0, 2.0, 4.0, 8.0}, grid);
  // unit-scale rows
  Eigen::MatrixXd truth = f.realized;
  for (Eigen::Index l = 0; l < 4; ++l) {
    const Eigen::RowVectorXd c = truth.row(l).array() - truth.row(l).mean();
    truth.row(l) = c / std::sqrt(c.squaredNorm() / 40.0);
  }
  Eigen::MatrixXd est = truth;
  for (Eigen::Index n = 0; n < est.size(); ++n) est.data()[n] += 0.05 * nd(rng);
  const auto a = sim::align_factors(est, truth);
  EXPECT_EQ(a.permutation, (std::vector<std::size_t>{0, 1, 2, 3}));
  for (double c : a.abs_correlation) EXPECT_GE(c, 0.99);
  EXPECT_THROW(sim::align_factors(est.leftCols(5), truth), InvalidArgument);
}
