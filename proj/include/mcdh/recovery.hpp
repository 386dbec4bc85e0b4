// Simulation-recovery and model-comparison runs on synthetic panels.
#ifndef MCDH_RECOVERY_HPP
#define MCDH_RECOVERY_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mcdh/benchmarks.hpp"
#include "mcdh/diagnostics.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/evaluation.hpp"
#include "mcdh/io.hpp"
#include "mcdh/kernels.hpp"
#include "mcdh/posterior.hpp"
#include "mcdh/sampler.hpp"
#include "mcdh/simulator.hpp"

namespace mcdh::recovery {

struct HarnessSettings {
  sampler::SamplerConfig sampler{.chains = 2, .warmup = 400, .samples = 400, .max_tree_depth = 8};
  model::PriorConfig priors;
  std::size_t workers = 1;               // concurrent replications
  std::size_t coverage_max_draws = 800;  // thinning for interval statistics
  std::size_t forecast_max_draws = 200;
  double interval = 0.9;
  bool truth_init = false;                  // start every chain at the generating parameters
  std::optional<std::filesystem::path> draws_dir;  // persist each fit's draws here
};

struct ReplicationRecord {
  std::uint64_t seed = 0;
  std::vector<double> factor_abs_correlation;  // per true factor, after alignment
  std::vector<double> length_scale_truth, length_scale_lower, length_scale_upper;
  std::vector<unsigned char> length_scale_covered;
  std::vector<double> factor_scale_mode;       // posterior mode of RMS(u_l) per true factor
  std::vector<double> factor_scale_truth;
  std::vector<double> beta_coverage;           // per (i, k), row-major over k, fraction of t covered
  double mean_beta_coverage = 0.0;
  std::size_t divergences = 0, draws = 0;
  double max_rhat = 0.0;                       // over length scales and alpha
};

struct RecoveryReport {
  std::string preset;
  std::size_t factors = 0;
  std::vector<ReplicationRecord> replications;
  std::size_t jitter_escalations = 0;  // covariance factorizations that needed more than default jitter
};

/// Mode of a sample via a Gaussian kernel density on a fine grid.
inline double posterior_mode(std::vector<double> x) {
  if (x.empty()) throw InvalidArgument("posterior_mode: empty sample");
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / std::max(1.0, n - 1.0));
  const double iqr = diagnostics::quantile_sorted(x, 0.75) - diagnostics::quantile_sorted(x, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) return x.front();
  const double h = 0.9 * spread * std::pow(n, -0.2);
  const double lo = x.front(), hi = x.back();
  constexpr int kGrid = 512;
  double best = lo, best_d = -1.0;
  for (int g = 0; g <= kGrid; ++g) {
    const double at = lo + (hi - lo) * g / kGrid;
    double d = 0.0;
    for (double v : x) {
      const double z = (v - at) / h;
      if (std::abs(z) < 8.0) d += std::exp(-0.5 * z * z);
    }
    if (d > best_d) {
      best_d = d;
      best = at;
    }
  }
  return best;
}

inline double rms(const Eigen::VectorXd& v) { return v.size() ? std::sqrt(v.squaredNorm() / static_cast<double>(v.size())) : 0.0; }

/// Unconstrained MCDH vector reproducing the simulator's truth on `grid`
/// (a prefix of the truth's grid).
inline std::vector<double> truth_point(const sim::SimOutput& sim, const posterior::McdhPosterior& model) {
  const auto& tr = sim.truth;
  const auto& lay = model.layout();
  if (tr.factors.L() != lay.L) throw InvalidArgument("truth_point: factor count differs from the truth");
  posterior::Constrained c;
  c.factors.length_scales = tr.factors.length_scales;
  c.factors.realized = tr.factors.realized.leftCols(static_cast<Eigen::Index>(lay.T));
  c.alpha = tr.alpha;
  c.omega = tr.omega;
  c.heterogeneity.corr = tr.omega_correlation;
  c.heterogeneity.sigma_omega = tr.sigma_omega;
  for (std::size_t k = 0; k < lay.K; ++k) {
    const double v = tr.sigma_omega(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    if (!(v > 0.0)) throw InvalidArgument("truth_point: degenerate weight scale, truth has no latent dynamics");
    c.heterogeneity.tau.push_back(std::sqrt(v));
  }
  return lay.flatten(posterior::unconstrain(c, model.panel().grid));
}

namespace detail {

inline std::uint64_t fit_seed(std::uint64_t seed, std::size_t model_index) {
  return sampler::splitmix64(seed * 0x100000001b3ULL + model_index);
}

inline void persist(const HarnessSettings& s, const sampler::PosteriorDraws& d, std::string_view model,
                    std::uint64_t seed) {
  if (!s.draws_dir) return;
  std::filesystem::create_directories(*s.draws_dir);
  io::persist_draws(d, *s.draws_dir / ("draws-" + std::string(model) + "-seed" + std::to_string(seed) + ".csv"),
                    model);
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto run = [&]() {
    for (std::size_t j = next++; j < n; j = next++) {
      try {
        body(j);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// Sign and order of each draw's factors relative to a reference path set.
inline sim::Alignment align_to(const Eigen::MatrixXd& u, const Eigen::MatrixXd& ref) { return sim::align_factors(u, ref); }

}  // namespace detail

/// One recovery replication: simulate, fit MCDH on the training buckets,
/// relabel factor draws, then score against the generating process.
inline ReplicationRecord run_replication(const sim::SimConfig& cfg, const HarnessSettings& s) {
  const sim::SimOutput out = sim::simulate(cfg);
  const auto split = sim::split_holdout(out.panel, cfg.holdout_buckets);
  auto panel = std::make_shared<const choice::Panel>(split.train);
  const std::size_t L = cfg.length_scales.size();
  posterior::McdhPosterior model(panel, L, s.priors);
  const auto& lay = model.layout();

  sampler::SamplerConfig sc = s.sampler;
  sc.seed = detail::fit_seed(cfg.seed, 0);
  std::vector<std::vector<double>> inits;
  if (s.truth_init) inits.assign(sc.chains, truth_point(out, model));
  const auto draws = sampler::run_chains(sampler::target_of(model), sc, 1, inits);
  detail::persist(s, draws, "mcdh", cfg.seed);

  ReplicationRecord rec;
  rec.seed = cfg.seed;
  rec.divergences = draws.divergences();
  const auto picks = eval::select_draws(draws, s.coverage_max_draws);
  rec.draws = picks.size();
  const std::size_t T = lay.T, I = lay.I, K = lay.K;
  const Eigen::MatrixXd truth_u = out.truth.factors.realized.leftCols(static_cast<Eigen::Index>(T));

  std::vector<posterior::Constrained> cs;
  cs.reserve(picks.size());
  for (auto [c, d] : picks) cs.push_back(model.constrained(draws.draw(c, d)));

  // Relabel against the first chain's mean, then against the relabelled pooled mean.
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
  std::size_t n0 = 0;
  for (std::size_t j = 0; j < picks.size(); ++j)
    if (picks[j].first == picks.front().first) {
      ref += cs[j].factors.realized;
      ++n0;
    }
  ref /= static_cast<double>(std::max<std::size_t>(n0, 1));
  std::vector<sim::Alignment> al(cs.size());
  Eigen::MatrixXd pooled;
  for (int pass = 0; pass < 2; ++pass) {
    pooled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
    for (std::size_t j = 0; j < cs.size(); ++j) {
      al[j] = detail::align_to(cs[j].factors.realized, ref);
      pooled += sim::apply_alignment(cs[j].factors.realized, al[j]);
    }
    pooled /= static_cast<double>(cs.size());
    ref = pooled;
  }
  const sim::Alignment to_truth = sim::align_factors(pooled, truth_u);
  rec.factor_abs_correlation = to_truth.abs_correlation;

  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> rho, scale;
    for (std::size_t j = 0; j < cs.size(); ++j) {
      const std::size_t m = al[j].permutation[to_truth.permutation[l]];
      rho.push_back(cs[j].factors.length_scales[m]);
      scale.push_back(rms(cs[j].factors.realized.row(static_cast<Eigen::Index>(m)).transpose()));
    }
    std::sort(rho.begin(), rho.end());
    const double a = (1.0 - s.interval) / 2.0;
    const double lo = diagnostics::quantile_sorted(rho, a), hi = diagnostics::quantile_sorted(rho, 1.0 - a);
    const double truth = cfg.length_scales[l];
    rec.length_scale_truth.push_back(truth);
    rec.length_scale_lower.push_back(lo);
    rec.length_scale_upper.push_back(hi);
    rec.length_scale_covered.push_back(lo <= truth && truth <= hi ? 1 : 0);
    rec.factor_scale_mode.push_back(posterior_mode(std::move(scale)));
    rec.factor_scale_truth.push_back(rms(truth_u.row(static_cast<Eigen::Index>(l)).transpose()));
  }

  // Pointwise intervals for beta_ik(t); label-invariant, no alignment needed.
  std::vector<model::SensitivityTable> betas;
  betas.reserve(cs.size());
  for (auto [c, d] : picks) betas.push_back(model.sensitivities(draws.draw(c, d)));
  rec.beta_coverage.assign(I * K, 0.0);
  std::vector<double> v(betas.size());
  const double a = (1.0 - s.interval) / 2.0;
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t hit = 0;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < betas.size(); ++j) v[j] = betas[j](i, t, k);
        std::sort(v.begin(), v.end());
        const double b = out.truth.beta(i, t, k);
        hit += diagnostics::quantile_sorted(v, a) <= b && b <= diagnostics::quantile_sorted(v, 1.0 - a) ? 1 : 0;
      }
      rec.beta_coverage[i * K + k] = static_cast<double>(hit) / static_cast<double>(T);
    }
  rec.mean_beta_coverage = std::accumulate(rec.beta_coverage.begin(), rec.beta_coverage.end(), 0.0) /
                           static_cast<double>(rec.beta_coverage.size());

  for (std::size_t j = lay.log_rho; j < lay.omega_raw; ++j) {
    const auto r = diagnostics::split_rhat(draws.column(j));
    if (r) rec.max_rhat = std::max(rec.max_rhat, *r);
  }
  return rec;
}

inline void check_recovery_preset(std::string_view preset) {
  if (preset != "paper-sec4" && preset != "desk-small" && preset != "sparse-category")
    throw InvalidArgument("run_recovery: preset must be one of paper-sec4, desk-small, sparse-category");
}

inline RecoveryReport run_recovery(const std::string& preset, const std::vector<std::uint64_t>& seeds,
                                   const HarnessSettings& s = {}) {
  check_recovery_preset(preset);
  if (seeds.empty()) throw InvalidArgument("run_recovery: no seeds");
  RecoveryReport rep;
  rep.preset = preset;
  rep.factors = sim::preset(preset).length_scales.size();
  rep.replications.resize(seeds.size());
  const std::size_t before = kernels::jitter_escalations();
  detail::parallel_for(seeds.size(), s.workers,
                       [&](std::size_t j) { rep.replications[j] = run_replication(sim::preset(preset, seeds[j]), s); });
  rep.jitter_escalations = kernels::jitter_escalations() - before;
  return rep;
}

struct ComparisonRow {
  std::size_t category = 0;
  std::string model;
  std::uint64_t seed = 0;
  std::size_t observations = 0;
  double hit_rate = 0.0, macro_precision = 0.0, macro_recall = 0.0;
  std::optional<double> macro_specificity;
};

struct ComparisonReport {
  std::string preset;
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::vector<ComparisonRow> rows;  // sorted by category, model (in request order), seed
  std::size_t jitter_escalations = 0;

  std::optional<ComparisonRow> find(std::size_t category, std::string_view model, std::uint64_t seed) const {
    for (const auto& r : rows)
      if (r.category == category && r.model == model && r.seed == seed) return r;
    return std::nullopt;
  }
};

/// Every model is fit on the same simulated training window and scored on
/// the same holdout buckets.
inline ComparisonReport run_comparison(const std::string& preset, const std::vector<ModelKind>& models,
                                       const std::vector<std::uint64_t>& seeds, const HarnessSettings& s = {}) {
  if (models.empty()) throw InvalidArgument("run_comparison: no models");
  if (seeds.empty()) throw InvalidArgument("run_comparison: no seeds");
  const sim::SimConfig base = sim::preset(preset);
  if (base.holdout_buckets == 0) throw InvalidArgument("run_comparison: preset '" + preset + "' has no holdout buckets");
  ComparisonReport rep;
  rep.preset = preset;
  for (auto m : models) rep.models.emplace_back(model_name(m));
  rep.seeds = seeds;

  struct Job {
    std::size_t seed_index, model_index;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < seeds.size(); ++a)
    for (std::size_t b = 0; b < models.size(); ++b) jobs.push_back({a, b});
  std::vector<eval::ForecastReport> results(jobs.size());
  const std::size_t before = kernels::jitter_escalations();
  detail::parallel_for(jobs.size(), s.workers, [&](std::size_t j) {
    const auto cfg = sim::preset(preset, seeds[jobs[j].seed_index]);
    const auto out = sim::simulate(cfg);
    const auto split = sim::split_holdout(out.panel, cfg.holdout_buckets);
    auto panel = std::make_shared<const choice::Panel>(split.train);
    const ModelKind kind = models[jobs[j].model_index];
    const auto model = bench::make_model(kind, panel, cfg.length_scales.size(), s.priors);
    sampler::SamplerConfig sc = s.sampler;
    sc.seed = detail::fit_seed(cfg.seed, jobs[j].model_index);
    const auto draws = sampler::run_chains(sampler::target_of(*model), sc);
    detail::persist(s, draws, model_name(kind), cfg.seed);
    results[j] = eval::forecast(*model, draws, split.holdout, {.seed = cfg.seed, .max_draws = s.forecast_max_draws});
  });
  rep.jitter_escalations = kernels::jitter_escalations() - before;

  for (std::size_t j = 0; j < jobs.size(); ++j)
    for (const auto& c : results[j].categories) {
      ComparisonRow r;
      r.category = c.category;
      r.model = rep.models[jobs[j].model_index];
      r.seed = seeds[jobs[j].seed_index];
      r.observations = c.observations;
      r.hit_rate = c.hit_rate;
      r.macro_precision = c.macro_precision;
      r.macro_recall = c.macro_recall;
      r.macro_specificity = c.macro_specificity;
      rep.rows.push_back(std::move(r));
    }
  auto model_rank = [&](const std::string& m) {
    return static_cast<std::size_t>(std::find(rep.models.begin(), rep.models.end(), m) - rep.models.begin());
  };
  auto seed_rank = [&](std::uint64_t v) {
    return static_cast<std::size_t>(std::find(seeds.begin(), seeds.end(), v) - seeds.begin());
  };
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [&](const ComparisonRow& x, const ComparisonRow& y) {
    if (x.category != y.category) return x.category < y.category;
    if (x.model != y.model) return model_rank(x.model) < model_rank(y.model);
    return seed_rank(x.seed) < seed_rank(y.seed);
  });
  return rep;
}

// Reports as JSON summaries plus flat CSV tables.

inline nlohmann::json to_json(const ReplicationRecord& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["factor_abs_correlation"] = r.factor_abs_correlation;
  j["length_scale_truth"] = r.length_scale_truth;
  j["length_scale_lower"] = r.length_scale_lower;
  j["length_scale_upper"] = r.length_scale_upper;
  std::vector<bool> cov(r.length_scale_covered.begin(), r.length_scale_covered.end());
  j["length_scale_covered"] = cov;
  j["factor_scale_mode"] = r.factor_scale_mode;
  j["factor_scale_truth"] = r.factor_scale_truth;
  j["mean_beta_coverage"] = r.mean_beta_coverage;
  j["beta_coverage"] = r.beta_coverage;
  j["divergences"] = r.divergences;
  j["draws"] = r.draws;
  j["max_rhat"] = r.max_rhat;
  return j;
}

inline nlohmann::json to_json(const RecoveryReport& r) {
  nlohmann::json j;
  j["preset"] = r.preset;
  j["factors"] = r.factors;
  j["jitter_escalations"] = r.jitter_escalations;
  j["replications"] = nlohmann::json::array();
  for (const auto& x : r.replications) j["replications"].push_back(to_json(x));
  return j;
}

inline std::string recovery_csv(const RecoveryReport& r) {
  std::string s = "seed,factor,abs_correlation,length_scale_truth,length_scale_lower,length_scale_upper,covered,"
                  "factor_scale_mode,factor_scale_truth,mean_beta_coverage\n";
  for (const auto& x : r.replications)
    for (std::size_t l = 0; l < x.factor_abs_correlation.size(); ++l) {
      s += std::to_string(x.seed) + "," + std::to_string(l) + "," + io::format_double(x.factor_abs_correlation[l]) + "," +
           io::format_double(x.length_scale_truth[l]) + "," + io::format_double(x.length_scale_lower[l]) + "," +
           io::format_double(x.length_scale_upper[l]) + "," + (x.length_scale_covered[l] ? "1" : "0") + "," +
           io::format_double(x.factor_scale_mode[l]) + "," + io::format_double(x.factor_scale_truth[l]) + "," +
           io::format_double(x.mean_beta_coverage) + "\n";
    }
  return s;
}

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json j;
  j["preset"] = r.preset;
  j["models"] = r.models;
  j["seeds"] = r.seeds;
  j["jitter_escalations"] = r.jitter_escalations;
  j["rows"] = nlohmann::json::array();
  for (const auto& x : r.rows) {
    nlohmann::json row{{"category", x.category},
                       {"model", x.model},
                       {"seed", x.seed},
                       {"observations", x.observations},
                       {"hit_rate", x.hit_rate},
                       {"macro_precision", x.macro_precision},
                       {"macro_recall", x.macro_recall}};
    row["macro_specificity"] = x.macro_specificity ? nlohmann::json(*x.macro_specificity) : nlohmann::json();
    j["rows"].push_back(std::move(row));
  }
  return j;
}

inline std::string comparison_csv(const ComparisonReport& r) {
  std::string s = "category,model,seed,observations,hit_rate,macro_precision,macro_recall,macro_specificity\n";
  for (const auto& x : r.rows)
    s += std::to_string(x.category) + "," + x.model + "," + std::to_string(x.seed) + "," + std::to_string(x.observations) +
         "," + io::format_double(x.hit_rate) + "," + io::format_double(x.macro_precision) + "," +
         io::format_double(x.macro_recall) + "," + (x.macro_specificity ? io::format_double(*x.macro_specificity) : "") +
         "\n";
  return s;
}

}  // namespace mcdh::recovery

#endif  // MCDH_RECOVERY_HPP
