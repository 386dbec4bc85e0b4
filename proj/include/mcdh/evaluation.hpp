#ifndef MCDH_EVALUATION_HPP
#define MCDH_EVALUATION_HPP

// Holdout forecasting, confusion-matrix metrics, cross-category pooling and
// price elasticities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/choice.hpp"
#include "mcdh/diagnostics.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/gp_extrapolate.hpp"
#include "mcdh/model.hpp"
#include "mcdh/model_core.hpp"
#include "mcdh/sampler.hpp"

namespace mcdh::eval {

using choice::Panel;
using model::ModelDims;

/// Square count matrix, rows = actual brand, columns = predicted brand.
class Confusion {
public:
  explicit Confusion(std::size_t J = 0) : J_(J), counts_(J * J, 0) {}
  std::size_t size() const noexcept { return J_; }
  std::uint64_t& operator()(std::size_t actual, std::size_t predicted) { return counts_[actual * J_ + predicted]; }
  std::uint64_t operator()(std::size_t actual, std::size_t predicted) const { return counts_[actual * J_ + predicted]; }
  void add(std::size_t actual, std::size_t predicted) {
    if (actual >= J_ || predicted >= J_) throw InvalidArgument("Confusion: brand index out of range");
    ++(*this)(actual, predicted);
  }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }
  std::uint64_t trace() const {
    std::uint64_t n = 0;
    for (std::size_t j = 0; j < J_; ++j) n += (*this)(j, j);
    return n;
  }

  static Confusion from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    Confusion c(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (rows[a].size() != rows.size()) throw InvalidArgument("Confusion: matrix must be square");
      for (std::size_t p = 0; p < rows.size(); ++p) c(a, p) = rows[a][p];
    }
    return c;
  }

  bool operator==(const Confusion&) const = default;

private:
  std::size_t J_;
  std::vector<std::uint64_t> counts_;
};

struct MacroMetrics {
  double precision = 0.0, recall = 0.0;
  std::optional<double> specificity;  // none when no brand has a defined specificity
  std::vector<double> brand_precision, brand_recall;
  std::vector<std::optional<double>> brand_specificity;
};

/// One-vs-rest per brand, unweighted averages. Zero predicted (actual) positives give
/// precision (recall) 0; a brand with no negatives has undefined specificity and is left out.
inline MacroMetrics macro_metrics(const Confusion& m) {
  const std::size_t J = m.size();
  if (J == 0) throw InvalidArgument("macro_metrics: empty confusion matrix");
  const std::uint64_t N = m.total();
  MacroMetrics out;
  double spec_sum = 0.0;
  std::size_t spec_n = 0;
  for (std::size_t j = 0; j < J; ++j) {
    std::uint64_t tp = m(j, j), pred = 0, act = 0;
    for (std::size_t q = 0; q < J; ++q) {
      pred += m(q, j);
      act += m(j, q);
    }
    const std::uint64_t fp = pred - tp, fn = act - tp, tn = N - tp - fp - fn;
    const double p = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    const double r = act ? static_cast<double>(tp) / static_cast<double>(act) : 0.0;
    std::optional<double> s;
    if (tn + fp > 0) {
      s = static_cast<double>(tn) / static_cast<double>(tn + fp);
      spec_sum += *s;
      ++spec_n;
    }
    out.brand_precision.push_back(p);
    out.brand_recall.push_back(r);
    out.brand_specificity.push_back(s);
    out.precision += p;
    out.recall += r;
  }
  out.precision /= static_cast<double>(J);
  out.recall /= static_cast<double>(J);
  if (spec_n) out.specificity = spec_sum / static_cast<double>(spec_n);
  return out;
}

inline double hit_rate(const Confusion& m) {
  const auto n = m.total();
  return n ? static_cast<double>(m.trace()) / static_cast<double>(n) : 0.0;
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

/// Mean over i in category c, j outside c, of |corr(i, j)|.
inline std::vector<double> pooling_metric(const Eigen::MatrixXd& corr, const ModelDims& dims) {
  const auto K = static_cast<Eigen::Index>(dims.K);
  if (corr.rows() != K || corr.cols() != K) throw InvalidArgument("pooling_metric: correlation must be K x K");
  std::vector<double> out;
  for (const auto& cat : dims.categories) {
    const std::size_t lo = cat.offset, hi = cat.offset + cat.coefficients;
    if (hi - lo == dims.K) {
      out.push_back(0.0);
      continue;
    }
    double total = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < dims.K; ++j)
        if (j < lo || j >= hi) row += std::abs(corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      total += row / static_cast<double>(dims.K - (hi - lo));
    }
    out.push_back(total / static_cast<double>(hi - lo));
  }
  return out;
}

/// Own-price elasticity of an MNL choice probability: beta_price * price * (1 - p).
inline double elasticity(double beta_price, double price, double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw InvalidArgument("elasticity: probability outside [0, 1]");
  return beta_price * price * (1.0 - prob);
}

// ---------------------------------------------------------------- forecasting

struct ForecastOptions {
  std::uint64_t seed = 0;
  std::size_t max_draws = 0;  // 0 = every draw; otherwise evenly thinned
};

struct ObservationForecast {
  std::size_t individual = 0, category = 0, time = 0;
  std::vector<double> probabilities;
  std::size_t predicted = 0, actual = 0;
};

struct CategoryForecast {
  std::size_t category = 0, observations = 0;
  double hit_rate = 0.0, macro_precision = 0.0, macro_recall = 0.0;
  std::optional<double> macro_specificity;
  Confusion confusion;
};

struct IndividualForecast {
  std::size_t individual = 0, observations = 0;
  double hit_rate = 0.0;
  std::vector<std::size_t> category_observations;
  std::vector<std::optional<double>> category_hit_rate;  // none without holdout occasions in that category
};

struct ForecastReport {
  std::string model;
  std::size_t draws_used = 0;
  std::vector<ObservationForecast> observations;
  std::vector<CategoryForecast> categories;
  std::vector<IndividualForecast> individuals;
  double overall_hit_rate = 0.0;
};

/// Indices of the draws to use, chain-major, spread evenly when thinning.
inline std::vector<std::pair<std::size_t, std::size_t>> select_draws(const sampler::PosteriorDraws& d, std::size_t max_draws) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t c = 0; c < d.chains.size(); ++c)
    for (std::size_t s = 0; s < d.samples; ++s) all.emplace_back(c, s);
  if (max_draws == 0 || max_draws >= all.size()) return all;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t n = 0; n < max_draws; ++n) out.push_back(all[n * all.size() / max_draws]);
  return out;
}

inline void check_scoreable(const Panel& train, const Panel& holdout) {
  std::vector<char> seen(train.dims.I, 0);
  for (const auto& o : train.observations) seen[o.individual] = 1;
  for (std::size_t n = 0; n < holdout.observations.size(); ++n) {
    const auto& o = holdout.observations[n];
    if (o.individual >= train.dims.I || !seen[o.individual])
      throw UnscoreableIndividual("forecast: holdout individual " + std::to_string(o.individual) +
                                  " has no training observations");
  }
  if (!(holdout.dims.categories == train.dims.categories)) throw ConsistencyError("forecast: holdout categories differ from training");
}

/// Draw-averaged predictive probabilities on the holdout panel; sensitivities
/// extrapolated to the holdout grid separately for every posterior draw.
inline ForecastReport forecast(const ChoiceModel& model, const sampler::PosteriorDraws& draws, const Panel& holdout,
                               const ForecastOptions& opt = {}) {
  const Panel& train = model.panel();
  check_scoreable(train, holdout);
  if (draws.dimension != model.dimension()) throw ConsistencyError("forecast: draws do not match the model dimension");
  const auto picks = select_draws(draws, opt.max_draws);
  if (picks.empty()) throw InvalidArgument("forecast: no posterior draws");
  const std::span<const double> new_times = holdout.grid.points();

  ForecastReport rep;
  rep.model = std::string(model_name(model.kind()));
  rep.draws_used = picks.size();
  rep.observations.resize(holdout.observations.size());
  for (std::size_t n = 0; n < holdout.observations.size(); ++n) {
    const auto& o = holdout.observations[n];
    auto& f = rep.observations[n];
    f.individual = o.individual;
    f.category = o.category;
    f.time = o.time;
    f.actual = o.chosen;
    f.probabilities.assign(train.dims.categories[o.category].brands, 0.0);
  }
  for (std::size_t d = 0; d < picks.size(); ++d) {
    std::mt19937_64 rng(sampler::chain_seed(opt.seed, d));
    const auto beta = model.extrapolate(draws.draw(picks[d].first, picks[d].second), new_times, rng);
    for (std::size_t n = 0; n < holdout.observations.size(); ++n) {
      const auto& o = holdout.observations[n];
      const auto& cat = train.dims.categories[o.category];
      const auto u = choice::utilities(o, std::span<const double>(beta.slice(o.individual, o.time, cat.offset), cat.coefficients));
      const auto p = choice::choice_probabilities(u);
      auto& acc = rep.observations[n].probabilities;
      for (std::size_t j = 0; j < p.size(); ++j) acc[j] += p[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(picks.size());
  for (auto& f : rep.observations) {
    for (double& p : f.probabilities) p *= inv;
    f.predicted = argmax(f.probabilities);
  }

  const std::size_t C = train.dims.C(), I = train.dims.I;
  std::vector<Confusion> conf;
  for (const auto& cat : train.dims.categories) conf.emplace_back(cat.brands);
  std::vector<std::vector<std::size_t>> hits(I, std::vector<std::size_t>(C, 0)), counts(I, std::vector<std::size_t>(C, 0));
  std::size_t total_hits = 0;
  for (const auto& f : rep.observations) {
    conf[f.category].add(f.actual, f.predicted);
    ++counts[f.individual][f.category];
    if (f.actual == f.predicted) {
      ++hits[f.individual][f.category];
      ++total_hits;
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    CategoryForecast cf;
    cf.category = c;
    cf.observations = conf[c].total();
    cf.hit_rate = hit_rate(conf[c]);
    if (cf.observations) {
      const auto mm = macro_metrics(conf[c]);
      cf.macro_precision = mm.precision;
      cf.macro_recall = mm.recall;
      cf.macro_specificity = mm.specificity;
    }
    cf.confusion = conf[c];
    rep.categories.push_back(std::move(cf));
  }
  for (std::size_t i = 0; i < I; ++i) {
    IndividualForecast inf;
    inf.individual = i;
    std::size_t h = 0;
    for (std::size_t c = 0; c < C; ++c) {
      inf.observations += counts[i][c];
      h += hits[i][c];
      inf.category_observations.push_back(counts[i][c]);
      inf.category_hit_rate.push_back(counts[i][c] ? std::optional<double>(static_cast<double>(hits[i][c]) / static_cast<double>(counts[i][c]))
                                                   : std::nullopt);
    }
    if (inf.observations == 0) continue;
    inf.hit_rate = static_cast<double>(h) / static_cast<double>(inf.observations);
    rep.individuals.push_back(std::move(inf));
  }
  rep.overall_hit_rate = rep.observations.empty() ? 0.0 : static_cast<double>(total_hits) / static_cast<double>(rep.observations.size());
  return rep;
}

// ---------------------------------------------------------------- elasticities

/// Price standardization of one category: model price = (raw - mean) / sd.
struct PriceScale {
  double mean = 0.0, sd = 1.0;
};

struct ElasticityOptions {
  std::size_t max_draws = 0;
  std::vector<PriceScale> price_scale;  // per category; empty = prices are raw
};

struct ElasticityCell {
  std::size_t individual = 0, category = 0, brand = 0, time = 0, occasions = 0;
  double median = 0.0, q05 = 0.0, q95 = 0.0;
};

struct CategoryElasticity {
  std::size_t category = 0, brand = 0, time = 0, individuals = 0;
  double mean_median = 0.0;
};

struct ElasticityReport {
  std::size_t draws_used = 0;
  bool rescaled = false;  // medians refer to raw prices after undoing standardization
  std::vector<ElasticityCell> cells;
  std::vector<CategoryElasticity> categories;
};

/// Own-price elasticities on the model's training panel. The price coefficient is the
/// last coefficient of each category; per draw, occasions in the same
/// (individual, category, brand, time) cell are averaged before summarizing across draws.
inline ElasticityReport elasticities(const ChoiceModel& model, const sampler::PosteriorDraws& draws,
                                     const ElasticityOptions& opt = {}) {
  const Panel& P = model.panel();
  const ModelDims& dims = P.dims;
  if (draws.dimension != model.dimension()) throw ConsistencyError("elasticity: draws do not match the model dimension");
  if (!opt.price_scale.empty() && opt.price_scale.size() != dims.C())
    throw InvalidArgument("elasticity: need one price scale per category");
  const auto picks = select_draws(draws, opt.max_draws);
  if (picks.empty()) throw InvalidArgument("elasticity: no posterior draws");
  const std::size_t I = dims.I, T = P.grid.size();

  // cell index (i, c, j, t) -> position
  std::vector<std::size_t> cat_base(dims.C() + 1, 0);
  for (std::size_t c = 0; c < dims.C(); ++c) cat_base[c + 1] = cat_base[c] + dims.categories[c].brands;
  const std::size_t B = cat_base.back();
  auto cell_of = [&](std::size_t i, std::size_t c, std::size_t j, std::size_t t) { return (i * T + t) * B + cat_base[c] + j; };
  std::vector<std::size_t> occ(I * T * B, 0);
  for (const auto& o : P.observations)
    for (std::size_t j = 0; j < dims.categories[o.category].brands; ++j) ++occ[cell_of(o.individual, o.category, j, o.time)];

  std::vector<std::vector<double>> per_cell(I * T * B);
  std::vector<double> acc(I * T * B);
  for (const auto& [c, s] : picks) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto beta = model.sensitivities(draws.draw(c, s));
    for (const auto& o : P.observations) {
      const auto& cat = dims.categories[o.category];
      const std::size_t Pc = cat.coefficients;
      const auto u = choice::utilities(o, std::span<const double>(beta.slice(o.individual, o.time, cat.offset), Pc));
      const auto p = choice::choice_probabilities(u);
      double b = beta(o.individual, o.time, cat.offset + Pc - 1);
      const PriceScale sc = opt.price_scale.empty() ? PriceScale{} : opt.price_scale[o.category];
      b /= sc.sd;
      for (std::size_t j = 0; j < cat.brands; ++j) {
        const double price = o.features[j * Pc + Pc - 1] * sc.sd + sc.mean;
        acc[cell_of(o.individual, o.category, j, o.time)] += elasticity(b, price, p[j]);
      }
    }
    for (std::size_t n = 0; n < acc.size(); ++n)
      if (occ[n]) per_cell[n].push_back(acc[n] / static_cast<double>(occ[n]));
  }

  ElasticityReport rep;
  rep.draws_used = picks.size();
  rep.rescaled = !opt.price_scale.empty();
  std::vector<double> cat_sum(T * B, 0.0);
  std::vector<std::size_t> cat_n(T * B, 0);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t c = 0; c < dims.C(); ++c)
      for (std::size_t j = 0; j < dims.categories[c].brands; ++j)
        for (std::size_t t = 0; t < T; ++t) {
          const std::size_t n = cell_of(i, c, j, t);
          if (!occ[n]) continue;
          auto v = per_cell[n];
          std::sort(v.begin(), v.end());
          ElasticityCell e{i, c, j, t, occ[n],
                           diagnostics::quantile_sorted(v, 0.5), diagnostics::quantile_sorted(v, 0.05),
                           diagnostics::quantile_sorted(v, 0.95)};
          rep.cells.push_back(e);
          cat_sum[t * B + cat_base[c] + j] += e.median;
          ++cat_n[t * B + cat_base[c] + j];
        }
  for (std::size_t c = 0; c < dims.C(); ++c)
    for (std::size_t j = 0; j < dims.categories[c].brands; ++j)
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t n = t * B + cat_base[c] + j;
        if (cat_n[n]) rep.categories.push_back({c, j, t, cat_n[n], cat_sum[n] / static_cast<double>(cat_n[n])});
      }
  return rep;
}

}  // namespace mcdh::eval

#endif  // MCDH_EVALUATION_HPP
