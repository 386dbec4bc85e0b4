#ifndef MCDH_CHOICE_HPP
#define MCDH_CHOICE_HPP

// Multinomial-logit utilities, choice probabilities and the panel
// log-likelihood given sensitivity paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcdh/errors.hpp"
#include "mcdh/model_core.hpp"

namespace mcdh::choice {

using model::ModelDims;
using model::SensitivityTable;

/// One choice occasion. `features` is J x P row-major: J-1 brand dummies
/// (baseline brand all zero) followed by the marketing-mix columns.
struct ChoiceObservation {
  std::size_t individual = 0;
  std::size_t category = 0;
  std::size_t time = 0;  // index into the panel's TimeGrid
  std::vector<double> features;
  std::size_t chosen = 0;

  bool operator==(const ChoiceObservation&) const = default;
};

struct Panel {
  std::vector<ChoiceObservation> observations;
  ModelDims dims;
  kernels::TimeGrid grid;

  /// Throws ConsistencyError when any observation references something outside dims/grid.
  void validate(bool require_every_individual = true) const {
    std::vector<char> seen(dims.I, 0);
    for (std::size_t n = 0; n < observations.size(); ++n) {
      const auto& o = observations[n];
      if (o.individual >= dims.I || o.category >= dims.C() || o.time >= grid.size())
        throw ConsistencyError("observation " + std::to_string(n) + " references unknown individual/category/time");
      const auto& cat = dims.categories[o.category];
      if (o.features.size() != cat.brands * cat.coefficients)
        throw ConsistencyError("observation " + std::to_string(n) + " has a feature matrix of the wrong shape");
      if (o.chosen >= cat.brands)
        throw ConsistencyError("observation " + std::to_string(n) + " chosen alternative out of range");
      for (double x : o.features)
        if (!std::isfinite(x)) throw ConsistencyError("observation " + std::to_string(n) + " has non-finite features");
      seen[o.individual] = 1;
    }
    if (require_every_individual)
      for (std::size_t i = 0; i < dims.I; ++i)
        if (!seen[i]) throw ConsistencyError("individual " + std::to_string(i) + " has no observations");
  }

  bool operator==(const Panel&) const = default;
};

/// Deterministic part of utility for each alternative.
inline std::vector<double> utilities(const ChoiceObservation& obs, std::span<const double> beta_slice) {
  const std::size_t P = beta_slice.size();
  if (P == 0 || obs.features.size() % P != 0)
    throw InvalidArgument("utilities: beta slice does not match the feature layout");
  const std::size_t J = obs.features.size() / P;
  std::vector<double> u(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    double s = 0.0;
    for (std::size_t p = 0; p < P; ++p) s += obs.features[j * P + p] * beta_slice[p];
    u[j] = s;
  }
  return u;
}

/// Max-shifted softmax; never overflows for finite input.
inline std::vector<double> choice_probabilities(std::span<const double> u) {
  if (u.empty()) throw InvalidArgument("choice_probabilities: no alternatives");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : u) {
    if (!std::isfinite(v)) throw InvalidArgument("choice_probabilities: non-finite utility");
    m = std::max(m, v);
  }
  std::vector<double> p(u.size());
  double z = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) z += (p[j] = std::exp(u[j] - m));
  for (double& v : p) v /= z;
  return p;
}

/// Pairwise sum with a fixed tree so the result does not depend on how terms were produced.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 32) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.subspan(0, h)) + pairwise_sum(x.subspan(h));
}

namespace detail {
inline thread_local std::vector<double> ll_terms;
inline thread_local std::vector<double> ll_scratch;
}  // namespace detail

/// sum_n log P(chosen_n) over the panel for a dense I x T x K coefficient
/// array (k fastest). If `beta_grad` is non-null the gradient is added into it.
inline double log_likelihood_dense(const Panel& panel, const double* beta, double* beta_grad) {
  const std::size_t T = panel.grid.size(), K = panel.dims.K;
  auto& terms = detail::ll_terms;
  auto& scratch = detail::ll_scratch;
  terms.resize(panel.observations.size());
  for (std::size_t n = 0; n < panel.observations.size(); ++n) {
    const auto& o = panel.observations[n];
    const auto& cat = panel.dims.categories[o.category];
    const std::size_t J = cat.brands, P = cat.coefficients;
    const std::size_t base = (o.individual * T + o.time) * K + cat.offset;
    const double* b = beta + base;
    const double* x = o.features.data();
    scratch.resize(J);
    double* u = scratch.data();
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < P; ++p) s += x[j * P + p] * b[p];
      u[j] = s;
      m = std::max(m, s);
    }
    const double chosen_shifted = u[o.chosen] - m;
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += (u[j] = std::exp(u[j] - m));
    terms[n] = chosen_shifted - std::log(z);
    if (beta_grad) {
      double* g = beta_grad + base;
      const double inv_z = 1.0 / z;
      for (std::size_t j = 0; j < J; ++j) {
        const double w = (j == o.chosen ? 1.0 : 0.0) - u[j] * inv_z;
        for (std::size_t p = 0; p < P; ++p) g[p] += w * x[j * P + p];
      }
    }
  }
  return pairwise_sum(terms);
}

/// Checked log-likelihood; throws ConsistencyError naming a missing (i, k) path.
inline double log_likelihood(const Panel& panel, const SensitivityTable& paths) {
  if (paths.I() != panel.dims.I || paths.T() != panel.grid.size() || paths.K() != panel.dims.K)
    throw ConsistencyError("log_likelihood: sensitivity table shape does not match the panel");
  for (const auto& o : panel.observations) {
    const auto& cat = panel.dims.categories[o.category];
    for (std::size_t p = 0; p < cat.coefficients; ++p)
      if (!paths.has(o.individual, cat.offset + p))
        throw ConsistencyError("log_likelihood: missing path for (i=" + std::to_string(o.individual) +
                               ", k=" + std::to_string(cat.offset + p) + ")");
  }
  return log_likelihood_dense(panel, paths.data().data(), nullptr);
}

}  // namespace mcdh::choice

#endif  // MCDH_CHOICE_HPP
