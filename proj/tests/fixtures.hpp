// Test-only helpers: random panels built without the simulator, and
// oracles that deliberately avoid the library's own code paths.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/choice.hpp"
#include "mcdh/model_core.hpp"

namespace fixtures {

using mcdh::choice::ChoiceObservation;
using mcdh::choice::Panel;

/// Random panel: dummies for brands 1..J-1, one price column ~ N(0,1), random choices.
inline Panel random_panel(std::size_t I, std::vector<std::size_t> brands, std::size_t T,
                          std::size_t per_cell, std::uint64_t seed, std::size_t L = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Panel p;
  p.dims = mcdh::model::ModelDims::make(I, brands, L, T);
  p.grid = mcdh::kernels::TimeGrid::consecutive(T);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t c = 0; c < brands.size(); ++c)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t r = 0; r < per_cell; ++r) {
          const std::size_t J = brands[c], P = J;
          ChoiceObservation o;
          o.individual = i;
          o.category = c;
          o.time = t;
          o.features.assign(J * P, 0.0);
          for (std::size_t j = 0; j < J; ++j) {
            if (j > 0) o.features[j * P + (j - 1)] = 1.0;
            o.features[j * P + (P - 1)] = nd(rng);
          }
          o.chosen = std::uniform_int_distribution<std::size_t>(0, J - 1)(rng);
          p.observations.push_back(std::move(o));
        }
  return p;
}

/// Straightforward log-likelihood: explicit loops, no shifting, long double.
inline double naive_log_likelihood(const Panel& panel, const mcdh::model::SensitivityTable& beta) {
  long double total = 0.0L;
  for (const auto& o : panel.observations) {
    const auto& cat = panel.dims.categories[o.category];
    std::vector<long double> expu(cat.brands);
    long double denom = 0.0L;
    for (std::size_t j = 0; j < cat.brands; ++j) {
      long double u = 0.0L;
      for (std::size_t p = 0; p < cat.coefficients; ++p)
        u += static_cast<long double>(o.features[j * cat.coefficients + p]) *
             static_cast<long double>(beta(o.individual, o.time, cat.offset + p));
      expu[j] = std::exp(u);
      denom += expu[j];
    }
    total += std::log(expu[o.chosen] / denom);
  }
  return static_cast<double>(total);
}

/// Central finite-difference gradient.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest component-wise |a - b| / max(1, |a|, |b|).
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline std::vector<double> uniform_vector(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Eigen::MatrixXd random_correlation(std::size_t K, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd a(K, K + 2);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = nd(rng);
  Eigen::MatrixXd s = a * a.transpose();
  const Eigen::VectorXd d = s.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd c = d.asDiagonal() * s * d.asDiagonal();
  c = 0.5 * (c + c.transpose());
  c.diagonal().setOnes();
  return c;
}

}  // namespace fixtures
