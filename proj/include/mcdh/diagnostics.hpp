#ifndef MCDH_DIAGNOSTICS_HPP
#define MCDH_DIAGNOSTICS_HPP

// Rank-normalized split R-hat and effective sample size (Geyer initial
// monotone sequence on FFT autocovariances).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <unsupported/Eigen/FFT>

#include "mcdh/errors.hpp"
#include "mcdh/sampler.hpp"

namespace mcdh::diagnostics {

using Chains = std::vector<std::vector<double>>;

/// Autocovariance at every lag, normalized by N (biased estimator).
inline std::vector<double> autocovariance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& c : freq) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> ac;
  fft.inv(ac, freq);
  ac.resize(n);
  for (double& v : ac) v /= static_cast<double>(n);
  return ac;
}

/// Splits every chain in half (dropping the middle draw when odd).
inline Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  return out;
}

/// Normal scores of the pooled fractional ranks (average ranks for ties).
inline Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t s = 0; s < chains[c].size(); ++s) all.emplace_back(chains[c][s], c * chains[0].size() + s);
  std::sort(all.begin(), all.end());
  const double S = static_cast<double>(all.size());
  std::vector<double> z(all.size());
  const boost::math::normal_distribution<double> nd;
  for (std::size_t a = 0; a < all.size();) {
    std::size_t b = a;
    while (b < all.size() && all[b].first == all[a].first) ++b;
    const double rank = 0.5 * static_cast<double>(a + 1 + b);  // average of ranks a+1..b
    const double v = boost::math::quantile(nd, (rank - 0.375) / (S + 0.25));
    for (std::size_t k = a; k < b; ++k) z[all[k].second] = v;
    a = b;
  }
  Chains out(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out[c].resize(chains[c].size());
    for (std::size_t s = 0; s < chains[c].size(); ++s) out[c][s] = z[c * chains[0].size() + s];
  }
  return out;
}

inline bool degenerate(const Chains& chains) {
  if (chains.empty() || chains[0].size() < 4) return true;
  for (const auto& c : chains)
    if (c.size() != chains[0].size()) throw InvalidArgument("diagnostics: chains differ in length");
  const double first = chains[0][0];
  for (const auto& c : chains)
    for (double v : c)
      if (!std::isfinite(v)) return true;
  for (const auto& c : chains)
    for (double v : c)
      if (v != first) return false;
  return true;
}

/// Classic potential scale reduction on already-split chains.
inline std::optional<double> rhat_basic(const Chains& chains) {
  const std::size_t M = chains.size(), N = chains[0].size();
  std::vector<double> means(M), vars(M);
  for (std::size_t c = 0; c < M; ++c) {
    means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / static_cast<double>(N);
    double s = 0.0;
    for (double v : chains[c]) s += (v - means[c]) * (v - means[c]);
    vars[c] = s / static_cast<double>(N - 1);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(M);
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= static_cast<double>(N) / static_cast<double>(M - 1);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(M);
  if (!(w > 0.0)) return std::nullopt;
  const double var_plus = (static_cast<double>(N - 1) / static_cast<double>(N)) * w + b / static_cast<double>(N);
  return std::sqrt(var_plus / w);
}

/// ESS of (already split) chains.
inline std::optional<double> ess_basic(const Chains& chains) {
  const std::size_t M = chains.size(), N = chains[0].size();
  std::vector<std::vector<double>> acov(M);
  std::vector<double> means(M), vars(M);
  for (std::size_t c = 0; c < M; ++c) {
    acov[c] = autocovariance(chains[c]);
    means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / static_cast<double>(N);
    vars[c] = acov[c][0] * static_cast<double>(N) / static_cast<double>(N - 1);
  }
  const double mean_var = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(M);
  double var_plus = mean_var * static_cast<double>(N - 1) / static_cast<double>(N);
  if (M > 1) {
    const double g = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(M);
    double s = 0.0;
    for (double m : means) s += (m - g) * (m - g);
    var_plus += s / static_cast<double>(M - 1);
  }
  if (!(var_plus > 0.0)) return std::nullopt;
  auto mean_acov = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t c = 0; c < M; ++c) s += acov[c][t];
    return s / static_cast<double>(M);
  };
  std::vector<double> rho(N, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t + 5 < N && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0 && max_t + 1 < N) rho[max_t + 1] = rho_even;
  for (t = 1; t + 4 <= max_t; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
      rho[t + 2] = rho[t + 1];
    }
  }
  const double total = static_cast<double>(M * N);
  double tau = -1.0;
  for (std::size_t s = 0; s < max_t && s < N; ++s) tau += 2.0 * rho[s];
  if (max_t + 1 < N) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0, sd = 0.0;
  double q05 = 0.0, median = 0.0, q95 = 0.0;
  std::optional<double> rhat;      // rank-normalized split R-hat (max of bulk and folded)
  std::optional<double> ess_bulk;  // on rank-normalized split chains
  std::optional<double> ess_mean;  // on raw split chains; drives mcse
  std::optional<double> mcse_mean;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, p);
}

inline std::optional<double> split_rhat(const Chains& chains) {
  if (degenerate(chains)) return std::nullopt;
  const Chains split = split_chains(chains);
  const auto bulk = rhat_basic(rank_normalize(split));
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const double med = quantile(pooled, 0.5);
  Chains folded = split;
  for (auto& c : folded)
    for (double& v : c) v = std::abs(v - med);
  std::optional<double> tail;
  if (!degenerate(folded)) tail = rhat_basic(rank_normalize(folded));
  if (!bulk) return tail;
  if (!tail) return bulk;
  return std::max(*bulk, *tail);
}

inline std::optional<double> ess_bulk(const Chains& chains) {
  if (degenerate(chains)) return std::nullopt;
  return ess_basic(rank_normalize(split_chains(chains)));
}

inline std::optional<double> ess_mean(const Chains& chains) {
  if (degenerate(chains)) return std::nullopt;
  return ess_basic(split_chains(chains));
}

inline ParameterSummary summarize(const Chains& chains, std::string name = {}) {
  ParameterSummary s;
  s.name = std::move(name);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) return s;
  s.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
  double ss = 0.0;
  for (double v : pooled) ss += (v - s.mean) * (v - s.mean);
  s.sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  s.q05 = quantile_sorted(pooled, 0.05);
  s.median = quantile_sorted(pooled, 0.5);
  s.q95 = quantile_sorted(pooled, 0.95);
  s.rhat = split_rhat(chains);
  s.ess_bulk = ess_bulk(chains);
  s.ess_mean = ess_mean(chains);
  if (s.ess_mean && *s.ess_mean > 0.0) s.mcse_mean = s.sd / std::sqrt(*s.ess_mean);
  return s;
}

struct Report {
  std::vector<ParameterSummary> parameters;
  std::size_t divergences = 0;
  std::size_t warmup_divergences = 0;
  std::size_t max_tree_depth_hits = 0;
  std::vector<double> step_sizes;
  std::vector<double> mean_accept_stat;

  std::optional<double> max_rhat() const {
    std::optional<double> m;
    for (const auto& p : parameters)
      if (p.rhat) m = m ? std::max(*m, *p.rhat) : *p.rhat;
    return m;
  }
  std::optional<double> min_ess_bulk() const {
    std::optional<double> m;
    for (const auto& p : parameters)
      if (p.ess_bulk) m = m ? std::min(*m, *p.ess_bulk) : *p.ess_bulk;
    return m;
  }
};

inline Report diagnose(const sampler::PosteriorDraws& draws, std::size_t max_tree_depth = 0) {
  Report r;
  for (std::size_t j = 0; j < draws.dimension; ++j)
    r.parameters.push_back(summarize(draws.column(j), j < draws.names.size() ? draws.names[j] : std::string{}));
  for (const auto& c : draws.chains) {
    for (std::size_t s = 0; s < c.divergent.size(); ++s) {
      r.divergences += c.divergent[s];
      if (max_tree_depth > 0 && c.tree_depth[s] >= max_tree_depth) ++r.max_tree_depth_hits;
    }
    r.warmup_divergences += c.warmup_divergences;
    r.step_sizes.push_back(c.step_size);
    r.mean_accept_stat.push_back(
        c.accept_stat.empty() ? 0.0
                              : std::accumulate(c.accept_stat.begin(), c.accept_stat.end(), 0.0) /
                                    static_cast<double>(c.accept_stat.size()));
  }
  return r;
}

}  // namespace mcdh::diagnostics

#endif  // MCDH_DIAGNOSTICS_HPP
