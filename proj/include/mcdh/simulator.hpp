#ifndef MCDH_SIMULATOR_HPP
#define MCDH_SIMULATOR_HPP

// Synthetic panels from the dynamic-heterogeneity generative process with
// the generating values kept as ground truth, plus factor alignment for
// reporting recovered factors against the truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/choice.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/kernels.hpp"
#include "mcdh/model_core.hpp"

namespace mcdh::sim {

using choice::ChoiceObservation;
using choice::Panel;
using model::ModelDims;

struct SimConfig {
  std::string name = "custom";
  std::size_t I = 40;
  std::vector<std::size_t> brands{4, 4, 4};  // J_c
  std::size_t T = 8;
  std::size_t choices_per_period = 10;
  std::vector<double> length_scales{2.0, 6.0};  // one per latent factor
  double omega_sd = 2.0;                        // omega_il ~ N(0, omega_sd^2 * corr)
  double omega_equicorrelation = 0.0;           // off-diagonal of corr
  std::vector<double> alpha;                    // K values; empty means all zero
  double price_mean = 0.0;
  double price_sd = 1.0;
  // Sparse-category variant: training buckets use these per-category counts
  // (empty = choices_per_period everywhere); the last `holdout_buckets` keep the base rate.
  std::vector<std::size_t> training_choices;
  std::size_t holdout_buckets = 0;
  std::uint64_t seed = 1;

  std::size_t L() const noexcept { return length_scales.size(); }
  ModelDims dims() const { return ModelDims::make(I, brands, L(), T); }

  Eigen::MatrixXd omega_correlation() const {
    const auto K = static_cast<Eigen::Index>(dims().K);
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(K, K, omega_equicorrelation);
    c.diagonal().setOnes();
    return c;
  }

  std::size_t choices(std::size_t c, std::size_t t) const {
    if (training_choices.empty() || t + holdout_buckets >= T) return choices_per_period;
    return training_choices[c];
  }

  void validate() const {
    (void)dims();
    if (choices_per_period < 1) throw InvalidArgument("simulate: choices_per_period must be >= 1");
    for (double r : length_scales)
      if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("simulate: length scales must be positive");
    if (!(omega_sd >= 0.0) || !std::isfinite(omega_sd)) throw InvalidArgument("simulate: omega_sd must be >= 0");
    if (!(price_sd > 0.0)) throw InvalidArgument("simulate: price_sd must be > 0");
    if (!alpha.empty() && alpha.size() != dims().K) throw InvalidArgument("simulate: alpha must have K entries");
    if (!training_choices.empty() && training_choices.size() != brands.size())
      throw InvalidArgument("simulate: training_choices needs one entry per category");
    if (holdout_buckets >= T) throw InvalidArgument("simulate: holdout_buckets must be < T");
    if (omega_sd > 0.0 && dims().K > 1) model::validate_correlation(omega_correlation());
  }
};

struct Truth {
  model::LatentFactorSet factors;
  model::PopulationMeans alpha;
  model::WeightTensor omega;
  Eigen::MatrixXd sigma_omega;
  Eigen::MatrixXd omega_correlation;
  model::SensitivityTable beta;  // I x T x K on the full grid
};

struct SimOutput {
  SimConfig config;
  Panel panel;  // full grid, training and holdout buckets together
  Truth truth;
};

/// Named presets. desk-small and paper-sec4 follow the recovery study
/// layout; sparse-category and the dynamics pair are comparison designs.
inline SimConfig preset(std::string_view name, std::uint64_t seed = 1) {
  SimConfig c;
  c.name = std::string(name);
  c.seed = seed;
  if (name == "desk-small") {
    c.I = 40;
    c.brands = {4, 4, 4};
    c.T = 8;
    c.choices_per_period = 10;
    c.length_scales = {2.0, 6.0};
  } else if (name == "paper-sec4") {
    c.I = 100;
    c.brands = {6, 6, 6, 6, 6};
    c.T = 10;
    c.choices_per_period = 20;
    c.length_scales = {1.0, 2.0, 4.0, 8.0};
  } else if (name == "sparse-category") {
    c.I = 40;
    c.brands = {4, 4, 4};
    c.T = 10;
    c.choices_per_period = 10;
    c.length_scales = {2.0, 6.0};
    c.omega_equicorrelation = 0.5;
    c.training_choices = {10, 10, 1};
    c.holdout_buckets = 2;
  } else if (name == "tiny") {
    c.I = 2;
    c.brands = {2};
    c.T = 2;
    c.choices_per_period = 1;
    c.length_scales = {2.0};
    c.omega_sd = 1.0;
  } else if (name == "zero-dynamics") {
    c.I = 30;
    c.brands = {3, 3};
    c.T = 8;
    c.choices_per_period = 20;  // enough holdout occasions to resolve 2-point hit-rate gaps
    c.length_scales = {3.0};
    c.omega_sd = 0.0;
    c.alpha = {0.8, -0.4, -1.0, 0.5, 0.2, -1.2};
    c.holdout_buckets = 2;
  } else if (name == "strong-dynamics") {
    c.I = 30;
    c.brands = {3, 3};
    c.T = 10;
    c.choices_per_period = 8;
    c.length_scales = {6.0};  // persistent enough to carry into the holdout buckets
    c.omega_sd = 2.0;
    c.omega_equicorrelation = 0.3;
    c.holdout_buckets = 2;
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) +
                          "' (expected desk-small, paper-sec4, sparse-category, tiny, zero-dynamics, strong-dynamics)");
  }
  c.validate();
  return c;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> n{"desk-small", "paper-sec4", "sparse-category", "tiny", "zero-dynamics",
                                          "strong-dynamics"};
  return n;
}

/// Draw order: factor innovations (l, t), weights (i, l, k), then per
/// occasion (i, c, t, r) the J prices followed by one uniform for the choice.
inline SimOutput simulate(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const ModelDims dims = cfg.dims();
  const std::size_t I = dims.I, K = dims.K, L = dims.L, T = dims.T;
  const kernels::TimeGrid grid = kernels::TimeGrid::consecutive(T);

  SimOutput out;
  out.config = cfg;
  Eigen::MatrixXd innov(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t t = 0; t < T; ++t) innov(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) = nd(rng);
  Truth& tr = out.truth;
  tr.factors = model::realize_factors(innov, cfg.length_scales, grid);
  tr.alpha.alpha = cfg.alpha.empty() ? std::vector<double>(K, 0.0) : cfg.alpha;
  tr.omega_correlation = cfg.omega_correlation();
  tr.sigma_omega = cfg.omega_sd * cfg.omega_sd * tr.omega_correlation;
  const Eigen::MatrixXd chol = cfg.omega_sd > 0.0 ? kernels::cholesky_lower(tr.sigma_omega)
                                                  : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  tr.omega = model::WeightTensor(I, K, L);
  Eigen::VectorXd z(static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < K; ++k) z(static_cast<Eigen::Index>(k)) = nd(rng);
      const Eigen::VectorXd w = chol * z;
      for (std::size_t k = 0; k < K; ++k) tr.omega(i, k, l) = w(static_cast<Eigen::Index>(k));
    }
  tr.beta = model::assemble_all(tr.alpha, tr.omega, tr.factors);

  Panel& p = out.panel;
  p.dims = dims;
  p.grid = grid;
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t c = 0; c < dims.C(); ++c) {
      const auto& cat = dims.categories[c];
      const std::size_t J = cat.brands, P = cat.coefficients;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t r = 0; r < cfg.choices(c, t); ++r) {
          ChoiceObservation o;
          o.individual = i;
          o.category = c;
          o.time = t;
          o.features.assign(J * P, 0.0);
          for (std::size_t j = 0; j < J; ++j) {
            if (j > 0) o.features[j * P + (j - 1)] = 1.0;
            o.features[j * P + (P - 1)] = cfg.price_mean + cfg.price_sd * nd(rng);
          }
          const auto u = choice::utilities(o, std::span<const double>(tr.beta.slice(i, t, cat.offset), P));
          const auto prob = choice::choice_probabilities(u);
          const double draw = unif(rng);
          double acc = 0.0;
          o.chosen = J - 1;
          for (std::size_t j = 0; j < J; ++j) {
            acc += prob[j];
            if (draw < acc) {
              o.chosen = j;
              break;
            }
          }
          p.observations.push_back(std::move(o));
        }
    }
  p.validate();
  return out;
}

/// Splits a panel at bucket T - h: the training panel keeps grid 0..T-h-1,
/// the holdout panel carries the remaining grid points (time indices re-based).
struct PanelSplit {
  Panel train, holdout;
};

inline PanelSplit split_holdout(const Panel& full, std::size_t h) {
  const std::size_t T = full.grid.size();
  if (h >= T) throw InvalidArgument("split_holdout: holdout must leave at least one training bucket");
  PanelSplit s;
  const std::size_t Tt = T - h;
  std::vector<double> train_pts(full.grid.points().begin(), full.grid.points().begin() + static_cast<std::ptrdiff_t>(Tt));
  s.train.grid = kernels::TimeGrid(train_pts);
  s.train.dims = full.dims;
  s.train.dims.T = Tt;
  s.holdout.dims = full.dims;
  if (h > 0) {
    std::vector<double> hold_pts(full.grid.points().begin() + static_cast<std::ptrdiff_t>(Tt), full.grid.points().end());
    s.holdout.grid = kernels::TimeGrid(hold_pts);
    s.holdout.dims.T = h;
  } else {
    s.holdout.grid = full.grid;
    s.holdout.dims.T = 0;
  }
  for (const auto& o : full.observations) {
    if (o.time < Tt) {
      s.train.observations.push_back(o);
    } else {
      ChoiceObservation q = o;
      q.time -= Tt;
      s.holdout.observations.push_back(std::move(q));
    }
  }
  return s;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct Alignment {
  std::vector<std::size_t> permutation;  // truth factor l is matched by estimated factor permutation[l]
  std::vector<int> signs;                // multiply the estimate by signs[l] to match truth l
  std::vector<double> abs_correlation;   // |corr| of each matched pair
};

/// Permutation and signs maximizing the sum of |Pearson correlations| (exhaustive for L <= 8).
inline Alignment align_factors(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
    throw InvalidArgument("align_factors: estimated and true factors differ in shape");
  const auto L = static_cast<std::size_t>(truth.rows());
  if (L > 8) throw InvalidArgument("align_factors: exhaustive alignment supports at most 8 factors");
  Eigen::MatrixXd corr(truth.rows(), truth.rows());  // corr(truth l, estimate m)
  for (Eigen::Index l = 0; l < truth.rows(); ++l)
    for (Eigen::Index m = 0; m < truth.rows(); ++m) {
      const Eigen::VectorXd a = truth.row(l).transpose(), b = estimated.row(m).transpose();
      corr(l, m) = pearson(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                           std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
    }
  std::vector<std::size_t> perm(L);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (std::size_t l = 0; l < L; ++l) s += std::abs(corr(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(perm[l])));
    if (s > best_score + 1e-12) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Alignment a;
  a.permutation = best;
  for (std::size_t l = 0; l < L; ++l) {
    const double c = corr(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(best[l]));
    a.signs.push_back(c < 0.0 ? -1 : 1);
    a.abs_correlation.push_back(std::abs(c));
  }
  return a;
}

/// Rows of `estimated` reordered and sign-flipped to line up with the truth.
inline Eigen::MatrixXd apply_alignment(const Eigen::MatrixXd& estimated, const Alignment& a) {
  Eigen::MatrixXd out(estimated.rows(), estimated.cols());
  for (std::size_t l = 0; l < a.permutation.size(); ++l)
    out.row(static_cast<Eigen::Index>(l)) = a.signs[l] * estimated.row(static_cast<Eigen::Index>(a.permutation[l]));
  return out;
}

}  // namespace mcdh::sim

#endif  // MCDH_SIMULATOR_HPP
